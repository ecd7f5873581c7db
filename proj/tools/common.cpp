#include "common.hpp"

#include <algorithm>
#include <future>
#include <numeric>
#include <sstream>

#include "flowlab/errors.hpp"
#include "flowlab/flows.hpp"
#include "flowlab/format.hpp"
#include "flowlab/rng.hpp"

namespace flowlab::tool {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

double parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ValidationError("override '" + key + "' expects a number, got '" + text + "'");
  }
}

}  // namespace

Overrides::Overrides(const std::vector<std::string>& pairs) {
  for (const std::string& pair : pairs) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("override '" + pair + "' is not of the form key=value");
    }
    values_[pair.substr(0, eq)] = pair.substr(eq + 1);
  }
}

const std::string* Overrides::raw(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  consumed_.insert(key);
  return &it->second;
}

double Overrides::number(const std::string& key, double fallback) {
  const std::string* text = raw(key);
  const double value = text ? parse_number(key, *text) : fallback;
  resolved_[key] = value;
  return value;
}

int Overrides::integer(const std::string& key, int fallback) {
  const double value = number(key, fallback);
  const int rounded = static_cast<int>(value);
  if (rounded != value) throw ValidationError("override '" + key + "' expects an integer");
  resolved_[key] = rounded;
  return rounded;
}

std::string Overrides::text(const std::string& key, const std::string& fallback) {
  const std::string* text = raw(key);
  const std::string value = text ? *text : fallback;
  resolved_[key] = value;
  return value;
}

std::vector<double> Overrides::numbers(const std::string& key, std::vector<double> fallback) {
  if (const std::string* text = raw(key)) {
    fallback.clear();
    for (const std::string& item : split_list(*text))
      fallback.push_back(parse_number(key, item));
    if (fallback.empty()) throw ValidationError("override '" + key + "' is an empty list");
  }
  resolved_[key] = fallback;
  return fallback;
}

std::vector<std::uint64_t> Overrides::seeds(const std::string& key,
                                            std::vector<std::uint64_t> fallback) {
  if (const std::string* text = raw(key)) {
    fallback.clear();
    for (const std::string& item : split_list(*text)) {
      const double value = parse_number(key, item);
      if (value < 0 || static_cast<double>(static_cast<std::uint64_t>(value)) != value)
        throw ValidationError("override '" + key + "' expects non-negative integers");
      fallback.push_back(static_cast<std::uint64_t>(value));
    }
    if (fallback.empty()) throw ValidationError("override '" + key + "' is an empty list");
  }
  resolved_[key] = fallback;
  return fallback;
}

void Overrides::finish(const std::string& scenario) const {
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) {
      throw ValidationError("unknown override key '" + key + "' for scenario '" + scenario +
                            "'");
    }
  }
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  write_text_file(path.string(), content);
}

}  // namespace

void emit_trajectory(const RunContext& ctx, const std::string& stem, const Trajectory& traj) {
  if (ctx.format == "json") {
    write_file(ctx.out / (stem + ".json"), trajectory_json(traj));
  } else {
    write_file(ctx.out / (stem + ".csv"), trajectory_csv(traj));
    write_file(ctx.out / (stem + ".meta.json"), trajectory_sidecar_json(traj));
  }
}

void emit_runlog(const RunContext& ctx, const std::string& stem, const OptRunLog& log) {
  if (ctx.format == "json") {
    write_file(ctx.out / (stem + ".json"), runlog_json(log));
  } else {
    write_file(ctx.out / (stem + ".csv"), runlog_csv(log));
    write_file(ctx.out / (stem + ".meta.json"), runlog_sidecar_json(log));
  }
}

void emit_json(const RunContext& ctx, const std::string& stem, const Json& doc) {
  write_file(ctx.out / (stem + ".json"), doc.dump(2) + "\n");
}

void emit_text(const RunContext& ctx, const std::string& filename, const std::string& text) {
  write_file(ctx.out / filename, text);
}

void echo_config(const RunContext& ctx, const std::string& command, Json extra) {
  Json config = Json::object();
  config["command"] = command;
  config["seed"] = ctx.seed;
  config["format"] = ctx.format;
  config["settings"] = std::move(extra);
  emit_json(ctx, "config", config);
}

GdRun gd_run(const LossModel& model, const ParameterState& theta0,
             const std::vector<GdPhase>& phases, const GdOptions& options) {
  GdRun run;
  run.log.method = "gd";
  run.log.model_name = model.name();
  ParameterState theta = theta0;
  double t = 0.0;
  const bool small = model.dim() <= 50;

  auto append = [&](double h) {
    OptRecord rec;
    rec.base.t = t;
    rec.base.theta = theta.values();
    rec.base.loss = model.eval(theta);
    const CVec g = model.grad(theta);
    rec.base.grad_norm = g.norm();
    rec.lr = h;
    rec.drift_estimated = theta.is_real() ? drift_estimate(model, theta, h) : 0.0;
    if (options.measure_drift && theta.is_real() && rec.base.grad_norm > 0)
      rec.drift_measured = per_iteration_drift(model, theta, h, h / 1000.0);
    if (options.record_spectrum && theta.is_real()) {
      const Spectrum s = small ? hessian_spectrum(model, theta)
                               : hessian_spectrum_topk(model, theta, 1, options.lanczos_seed);
      const double lambda0 = s.eigenvalues[0].real();
      rec.base.lambda0 = lambda0;
      try {
        rec.base.sc0 =
            alpha(AlphaKind::PF, h * lambda0) * transposed_dot(g, s.eigenvectors.col(0));
      } catch (const Singular&) {
        // collapse direction: the contribution is undefined, leave it absent
      }
    }
    run.log.records.push_back(std::move(rec));
  };

  int global_step = 0;
  for (const GdPhase& phase : phases) {
    for (int k = 0; k < phase.steps; ++k, ++global_step) {
      if (global_step % std::max(1, options.record_every) == 0) append(phase.h);
      theta = gd_step(model, theta, phase.h);
      t += phase.h;
      if (!theta.values().allFinite() || theta.values().norm() > 1e12) {
        run.diverged = true;
        break;
      }
    }
    if (run.diverged) break;
  }
  if (!run.diverged && !phases.empty()) append(phases.back().h);
  return run;
}

void run_parallel(std::vector<std::function<void()>> jobs) {
  std::vector<std::future<void>> futures;
  futures.reserve(jobs.size());
  for (auto& job : jobs) futures.push_back(std::async(std::launch::async, std::move(job)));
  std::exception_ptr first;
  for (auto& f : futures) {
    try {
      f.get();
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

double spearman(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(a.size());
  auto ranks = [n](const std::vector<double>& x) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return x[i] < x[j]; });
    std::vector<double> r(n);
    for (int pos = 0; pos < n; ++pos) r[idx[pos]] = pos;
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = 0, mb = 0;
  for (int i = 0; i < n; ++i) ma += ra[i], mb += rb[i];
  ma /= n, mb /= n;
  double num = 0, da = 0, db = 0;
  for (int i = 0; i < n; ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

SelectedModel select_model(const std::string& name, std::uint64_t seed, double center) {
  if (name == "quad2d") {
    Mat m = Mat::Zero(2, 2);
    m.diagonal() << 2.0, 0.02;
    Vec theta0(2);
    theta0 << 1.0, 1.0;
    return {make_quadratic(RealSymMatrix(m), Vec::Zero(2), 0.0), theta0};
  }
  if (name == "scalar") {
    Vec theta0(1);
    theta0 << center + 1.0;
    return {make_scalar_square(center), theta0};
  }
  if (name == "rosenbrock") {
    Vec theta0(2);
    theta0 << -1.0, 1.0;
    return {make_rosenbrock(), theta0};
  }
  if (name == "cos_branch") {
    Vec theta0(1);
    theta0 << 1.0;
    return {make_cos_branch(), theta0};
  }
  if (name == "mlp") {
    MLPSpec spec;
    spec.seed = seed;
    return {make_mlp(spec), mlp_initial_parameters(spec)};
  }
  throw ValidationError("unknown model '" + name +
                        "' (expected quad2d, scalar, rosenbrock, cos_branch, or mlp)");
}

Vec parse_theta(const std::string& text) {
  const std::vector<std::string> items = split_list(text);
  if (items.empty()) throw ValidationError("--theta0 is empty");
  Vec v(static_cast<int>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i)
    v[static_cast<int>(i)] = parse_number("theta0", items[i]);
  return v;
}

}  // namespace flowlab::tool
