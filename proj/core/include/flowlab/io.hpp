#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlab/integrate.hpp"

namespace flowlab {

// Trajectory CSV: header
//   t,theta0_re,theta0_im,...,theta{D-1}_re,theta{D-1}_im,
//   loss_re,loss_im,grad_norm,lambda0,sc0_re,sc0_im
// Absent lambda0/sc0 leave empty cells. Numbers print as shortest round-trip
// decimals, so equal inputs give byte-identical files.
std::string trajectory_csv(const Trajectory& traj);

// JSON sidecar with flow/model/seed/step metadata (no records).
std::string trajectory_sidecar_json(const Trajectory& traj);

// Full trajectory as a single JSON document (metadata + records).
std::string trajectory_json(const Trajectory& traj);

// Optimizer run log: the trajectory schema extended with lr, drift_measured,
// drift_estimated columns.
struct OptRecord {
  TrajectoryRecord base;
  double lr = 0.0;
  double drift_measured = 0.0;
  double drift_estimated = 0.0;
};

struct OptRunLog {
  std::string method;
  std::string model_name;
  std::uint64_t seed = 0;
  std::vector<OptRecord> records;
};

std::string runlog_csv(const OptRunLog& log);
std::string runlog_sidecar_json(const OptRunLog& log);
std::string runlog_json(const OptRunLog& log);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace flowlab
