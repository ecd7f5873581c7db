#include "flowlab/io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "flowlab/format.hpp"

namespace flowlab {

namespace {

using nlohmann::json;

std::string csv_header(int dim, bool optimizer_columns) {
  std::string head = "t";
  for (int i = 0; i < dim; ++i) {
    head += ",theta" + std::to_string(i) + "_re,theta" + std::to_string(i) + "_im";
  }
  head += ",loss_re,loss_im,grad_norm,lambda0,sc0_re,sc0_im";
  if (optimizer_columns) head += ",lr,drift_measured,drift_estimated";
  return head;
}

void append_record_cells(std::string& out, const TrajectoryRecord& rec) {
  out += format_double(rec.t);
  for (Eigen::Index i = 0; i < rec.theta.size(); ++i) {
    out += "," + format_double(rec.theta[i].real()) + "," + format_double(rec.theta[i].imag());
  }
  out += "," + format_double(rec.loss.real()) + "," + format_double(rec.loss.imag());
  out += "," + format_double(rec.grad_norm);
  out += ",";
  if (rec.lambda0) out += format_double(*rec.lambda0);
  out += ",";
  if (rec.sc0) out += format_double(rec.sc0->real());
  out += ",";
  if (rec.sc0) out += format_double(rec.sc0->imag());
}

json record_json(const TrajectoryRecord& rec) {
  json j;
  j["t"] = rec.t;
  json theta = json::array();
  for (Eigen::Index i = 0; i < rec.theta.size(); ++i) {
    theta.push_back({rec.theta[i].real(), rec.theta[i].imag()});
  }
  j["theta"] = std::move(theta);
  j["loss"] = {rec.loss.real(), rec.loss.imag()};
  j["grad_norm"] = rec.grad_norm;
  if (rec.lambda0) j["lambda0"] = *rec.lambda0;
  if (rec.sc0) j["sc0"] = {rec.sc0->real(), rec.sc0->imag()};
  return j;
}

json spec_json(const FlowSpec& spec) {
  json j;
  j["flow"] = flow_kind_name(spec.kind);
  j["h"] = spec.h;
  if (spec.kind == FlowKind::TruncatedSeries) j["order"] = spec.order;
  if (spec.kind == FlowKind::MomentumFlow) j["momentum"] = spec.momentum;
  return j;
}

json trajectory_meta(const Trajectory& traj) {
  json j;
  j["spec"] = spec_json(traj.spec);
  j["model"] = traj.model_name;
  j["seed"] = traj.seed;
  j["step"] = traj.step;
  j["sample_every"] = traj.sample_every;
  j["spectrum_refresh"] = traj.spectrum_refresh;
  j["diverged"] = traj.diverged;
  j["near_defective"] = traj.near_defective;
  j["n_records"] = traj.records.size();
  return j;
}

json runlog_meta(const OptRunLog& log) {
  json j;
  j["method"] = log.method;
  j["model"] = log.model_name;
  j["seed"] = log.seed;
  j["n_records"] = log.records.size();
  return j;
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  const int dim = traj.records.empty() ? 0 : static_cast<int>(traj.records.front().theta.size());
  std::string out = csv_header(dim, false) + "\n";
  for (const auto& rec : traj.records) {
    append_record_cells(out, rec);
    out += "\n";
  }
  return out;
}

std::string trajectory_sidecar_json(const Trajectory& traj) {
  return trajectory_meta(traj).dump(2) + "\n";
}

std::string trajectory_json(const Trajectory& traj) {
  json j = trajectory_meta(traj);
  json records = json::array();
  for (const auto& rec : traj.records) records.push_back(record_json(rec));
  j["records"] = std::move(records);
  return j.dump(2) + "\n";
}

std::string runlog_csv(const OptRunLog& log) {
  const int dim =
      log.records.empty() ? 0 : static_cast<int>(log.records.front().base.theta.size());
  std::string out = csv_header(dim, true) + "\n";
  for (const auto& rec : log.records) {
    append_record_cells(out, rec.base);
    out += "," + format_double(rec.lr);
    out += "," + format_double(rec.drift_measured);
    out += "," + format_double(rec.drift_estimated);
    out += "\n";
  }
  return out;
}

std::string runlog_sidecar_json(const OptRunLog& log) {
  return runlog_meta(log).dump(2) + "\n";
}

std::string runlog_json(const OptRunLog& log) {
  json j = runlog_meta(log);
  json records = json::array();
  for (const auto& rec : log.records) {
    json r = record_json(rec.base);
    r["lr"] = rec.lr;
    r["drift_measured"] = rec.drift_measured;
    r["drift_estimated"] = rec.drift_estimated;
    records.push_back(std::move(r));
  }
  j["records"] = std::move(records);
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot open file for writing: " + path);
  file << content;
  if (!file) throw ValidationError("failed writing file: " + path);
}

}  // namespace flowlab
