#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowlab/io.hpp"
#include "flowlab/optimize.hpp"

namespace flowlab::tool {

using Json = nlohmann::json;

// --set key=value overrides. Scenarios pull typed values (recording the
// resolved value for the config echo) and then call finish(), which rejects
// any key nobody consumed, naming it.
class Overrides {
 public:
  Overrides() = default;
  explicit Overrides(const std::vector<std::string>& pairs);

  double number(const std::string& key, double fallback);
  int integer(const std::string& key, int fallback);
  std::string text(const std::string& key, const std::string& fallback);
  // Comma-separated list of numbers; the override replaces the whole list.
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback);
  std::vector<std::uint64_t> seeds(const std::string& key,
                                   std::vector<std::uint64_t> fallback);

  void finish(const std::string& scenario) const;
  const Json& resolved() const { return resolved_; }

 private:
  const std::string* raw(const std::string& key);
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
  Json resolved_ = Json::object();
};

struct RunContext {
  std::filesystem::path out;
  std::uint64_t seed = 0;
  std::string format = "csv";  // csv | json
  Overrides overrides;
};

// File emission. CSV format writes <stem>.csv plus <stem>.meta.json; JSON
// format writes the self-contained <stem>.json.
void emit_trajectory(const RunContext& ctx, const std::string& stem, const Trajectory& traj);
void emit_runlog(const RunContext& ctx, const std::string& stem, const OptRunLog& log);
void emit_json(const RunContext& ctx, const std::string& stem, const Json& doc);
void emit_text(const RunContext& ctx, const std::string& filename, const std::string& text);

// Writes config.json with the fully resolved settings for the run.
void echo_config(const RunContext& ctx, const std::string& command, Json extra);

// Plain gradient descent logged as an optimizer run. Phases allow a mid-run
// step-size change; each record carries the h in force as its lr. Spectrum
// columns use the dense solver up to dim 50 and Lanczos top-1 above. Stops
// early once the iterate norm crosses 1e12 (recorded, divergence flagged via
// the returned bool).
struct GdPhase {
  double h = 0.0;
  int steps = 0;
};

struct GdOptions {
  bool record_spectrum = false;
  bool measure_drift = false;  // per_iteration_drift per record (real theta only)
  int record_every = 1;        // thin long phases; the final iterate always records
  std::uint64_t lanczos_seed = 1;
};

struct GdRun {
  OptRunLog log;
  bool diverged = false;
};

GdRun gd_run(const LossModel& model, const ParameterState& theta0,
             const std::vector<GdPhase>& phases, const GdOptions& options = {});

// Runs jobs through std::async, waits for all, rethrows the first failure.
void run_parallel(std::vector<std::function<void()>> jobs);

double spearman(std::vector<double> a, std::vector<double> b);

// Model selector shared by simulate/optimize/diagnose: quad2d, scalar,
// rosenbrock, cos_branch, mlp (seeded).
struct SelectedModel {
  LossModelPtr model;
  Vec default_theta0;
};
SelectedModel select_model(const std::string& name, std::uint64_t seed, double center);

Vec parse_theta(const std::string& text);  // comma-separated reals

}  // namespace flowlab::tool
