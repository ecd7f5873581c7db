#include <doctest.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowlab/errors.hpp"
#include "flowlab/format.hpp"
#include "flowlab/io.hpp"
#include "test_support.hpp"

using namespace flowlab;
using namespace flowlab::test;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) cells.push_back(cell);
  if (!line.empty() && line.back() == sep) cells.push_back("");
  return cells;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

Trajectory sample_trajectory() {
  Trajectory traj;
  traj.spec = FlowSpec::ngf(0.5);
  traj.model_name = "scalar_square";
  traj.seed = 3;
  traj.step = 5e-5;
  traj.sample_every = 10;
  traj.spectrum_refresh = 1;

  TrajectoryRecord r0;
  r0.t = 0.0;
  r0.theta = cvec({Cx(0.5, 0)});
  r0.loss = Cx(0.125, 0);
  r0.grad_norm = 0.5;
  r0.lambda0 = 1.0;
  r0.sc0 = Cx(-0.5, 0.25);

  TrajectoryRecord r1;
  r1.t = 0.1 + 0.2;  // deliberately not a round decimal
  r1.theta = cvec({Cx(1.0 / 3.0, 0)});
  r1.loss = Cx(1.0 / 18.0, 0);
  r1.grad_norm = 1.0 / 3.0;

  traj.records = {r0, r1};
  return traj;
}

}  // namespace

TEST_CASE("format_double emits shortest round-trip decimals") {
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");

  // std::stod throws out_of_range on subnormals, so parse with from_chars,
  // the true inverse of the shortest-round-trip formatter.
  for (double x : {0.1 + 0.2, 1.0 / 3.0, 1e300, 5e-324, -1.2345678901234567e-8}) {
    CAPTURE(x);
    const std::string text = format_double(x);
    double parsed = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), parsed);
    REQUIRE(res.ec == std::errc{});
    CHECK(parsed == x);
  }
}

TEST_CASE("trajectory csv has the documented schema") {
  const Trajectory traj = sample_trajectory();
  const std::string csv = trajectory_csv(traj);
  const auto lines = lines_of(csv);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "t,theta0_re,theta0_im,loss_re,loss_im,grad_norm,lambda0,sc0_re,sc0_im");

  const auto row0 = split(lines[1], ',');
  REQUIRE(row0.size() == 9);
  CHECK(row0[0] == "0");
  CHECK(row0[1] == "0.5");
  CHECK(row0[2] == "0");
  CHECK(row0[3] == "0.125");
  CHECK(row0[5] == "0.5");
  CHECK(row0[6] == "1");
  CHECK(row0[7] == "-0.5");
  CHECK(row0[8] == "0.25");

  // Absent diagnostics leave empty cells, and every number survives a parse
  // round trip bit-exactly.
  const auto row1 = split(lines[2], ',');
  REQUIRE(row1.size() == 9);
  CHECK(row1[6].empty());
  CHECK(row1[7].empty());
  CHECK(row1[8].empty());
  CHECK(std::stod(row1[0]) == 0.1 + 0.2);
  CHECK(std::stod(row1[1]) == 1.0 / 3.0);

  // Byte determinism: rebuilding the same trajectory gives the same bytes.
  CHECK(trajectory_csv(sample_trajectory()) == csv);
}

TEST_CASE("trajectory sidecar json captures the run metadata") {
  const json j = json::parse(trajectory_sidecar_json(sample_trajectory()));
  CHECK(j.at("spec").at("flow") == "ngf");
  CHECK(j.at("spec").at("h") == 0.5);
  CHECK_FALSE(j.at("spec").contains("order"));
  CHECK_FALSE(j.at("spec").contains("momentum"));
  CHECK(j.at("model") == "scalar_square");
  CHECK(j.at("seed") == 3);
  CHECK(j.at("step") == 5e-5);
  CHECK(j.at("sample_every") == 10);
  CHECK(j.at("diverged") == false);
  CHECK(j.at("n_records") == 2);

  Trajectory truncated = sample_trajectory();
  truncated.spec = FlowSpec::truncated(0.3, 4);
  const json jt = json::parse(trajectory_sidecar_json(truncated));
  CHECK(jt.at("spec").at("order") == 4);

  Trajectory momentum = sample_trajectory();
  momentum.spec = FlowSpec::momentum_flow(0.3, 0.9);
  const json jm = json::parse(trajectory_sidecar_json(momentum));
  CHECK(jm.at("spec").at("momentum") == 0.9);
}

TEST_CASE("full trajectory json serializes records with optional fields") {
  const json j = json::parse(trajectory_json(sample_trajectory()));
  REQUIRE(j.at("records").size() == 2);

  const json& r0 = j.at("records")[0];
  CHECK(r0.at("theta")[0][0] == 0.5);
  CHECK(r0.at("theta")[0][1] == 0.0);
  CHECK(r0.at("lambda0") == 1.0);
  CHECK(r0.at("sc0")[0] == -0.5);
  CHECK(r0.at("sc0")[1] == 0.25);

  const json& r1 = j.at("records")[1];
  CHECK_FALSE(r1.contains("lambda0"));
  CHECK_FALSE(r1.contains("sc0"));
}

TEST_CASE("optimizer run log extends the trajectory schema") {
  OptRunLog log;
  log.method = "dal";
  log.model_name = "quadratic";
  log.seed = 12;

  OptRecord rec;
  rec.base.t = 1.0;
  rec.base.theta = cvec({Cx(2, 0), Cx(-1, 0)});
  rec.base.loss = Cx(4.0, 0);
  rec.base.grad_norm = 4.0;
  rec.lr = 2.0;
  rec.drift_measured = 0.01;
  rec.drift_estimated = 0.0125;
  log.records = {rec};

  const std::string csv = runlog_csv(log);
  const auto lines = lines_of(csv);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] ==
        "t,theta0_re,theta0_im,theta1_re,theta1_im,loss_re,loss_im,grad_norm,"
        "lambda0,sc0_re,sc0_im,lr,drift_measured,drift_estimated");
  const auto row = split(lines[1], ',');
  REQUIRE(row.size() == 14);
  CHECK(row[11] == "2");
  CHECK(row[12] == "0.01");
  CHECK(row[13] == "0.0125");

  const json j = json::parse(runlog_json(log));
  CHECK(j.at("method") == "dal");
  CHECK(j.at("records")[0].at("lr") == 2.0);
  CHECK(j.at("records")[0].at("drift_estimated") == 0.0125);

  const json side = json::parse(runlog_sidecar_json(log));
  CHECK(side.at("n_records") == 1);
  CHECK(side.at("seed") == 12);
}

TEST_CASE("write_text_file round trips and reports failures") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "flowlab_io_test";
  fs::create_directories(dir);
  const fs::path path = dir / "out.csv";
  const std::string content = "a,b\n1,2\n";
  write_text_file(path.string(), content);

  std::ifstream in(path, std::ios::binary);
  std::ostringstream got;
  got << in.rdbuf();
  CHECK(got.str() == content);

  CHECK_THROWS_AS(write_text_file((dir / "missing" / "x.csv").string(), content),
                  ValidationError);
  fs::remove_all(dir);
}
