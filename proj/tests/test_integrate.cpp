#include <doctest.h>

#include <cmath>
#include <vector>

#include "flowlab/errors.hpp"
#include "flowlab/integrate.hpp"
#include "test_support.hpp"

using namespace flowlab;
using namespace flowlab::test;

namespace {

LossModelPtr quad2d() {
  Mat m = Mat::Zero(2, 2);
  m.diagonal() << 2.0, 0.02;
  return make_quadratic(RealSymMatrix(m), Vec::Zero(2), 0.0);
}

// Test-local classical Runge-Kutta integrator, the reference solution for the
// order-of-accuracy checks. Real dynamics only.
Vec rk4_flow(const FlowSpec& spec, const LossModel& model, Vec theta, double total_time,
             int substeps) {
  const double dt = total_time / substeps;
  for (int i = 0; i < substeps; ++i) {
    const Vec k1 = field(spec, model, ParameterState::real(theta)).real();
    const Vec k2 = field(spec, model, ParameterState::real(theta + 0.5 * dt * k1)).real();
    const Vec k3 = field(spec, model, ParameterState::real(theta + 0.5 * dt * k2)).real();
    const Vec k4 = field(spec, model, ParameterState::real(theta + dt * k3)).real();
    theta += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return theta;
}

double fit_loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
  const int n = static_cast<int>(h.size());
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += std::log(h[i]);
    sy += std::log(err[i]);
  }
  const double mx = sx / n, my = sy / n;
  double num = 0, den = 0;
  for (int i = 0; i < n; ++i) {
    num += (std::log(h[i]) - mx) * (std::log(err[i]) - my);
    den += (std::log(h[i]) - mx) * (std::log(h[i]) - mx);
  }
  return num / den;
}

}  // namespace

TEST_CASE("euler trajectory records one row per modeled step") {
  const auto square = make_scalar_square();
  const FlowSpec spec = FlowSpec::ngf(0.1);
  const Trajectory traj =
      euler_simulate(spec, *square, ParameterState::real(rvec({2})), 0.1);

  CHECK(traj.spec.kind == FlowKind::NGF);
  CHECK(traj.step == 5e-5);
  CHECK(traj.sample_every == 2000);
  CHECK_FALSE(traj.diverged);
  REQUIRE(traj.records.size() == 2);

  CHECK(traj.records[0].t == 0.0);
  CHECK(cdist(traj.records[0].theta[0], Cx(2, 0)) == 0.0);
  CHECK(traj.records[0].loss.real() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(traj.records[0].grad_norm == doctest::Approx(2.0).epsilon(1e-14));

  // Gradient flow contracts by e^{-t}: 2 e^{-0.1} at the recorded time.
  CHECK(traj.records[1].t == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(traj.records[1].theta[0].real() ==
        doctest::Approx(2.0 * 0.90483741803595957).epsilon(1e-4));
  // Euler at this substep is much closer than the printed guard.
  CHECK(std::abs(traj.records[1].theta[0].real() - 2.0 * 0.90483741803595957) <= 1e-4);
}

TEST_CASE("euler error shrinks linearly with the substep") {
  const auto square = make_scalar_square();
  const FlowSpec spec = FlowSpec::ngf(0.5);
  const ParameterState start = ParameterState::real(rvec({1}));
  const double exact = std::exp(-0.5);

  auto err_at = [&](double step) {
    SimOptions opt;
    opt.step = step;
    opt.sample_every = static_cast<int>(std::lround(0.5 / step));
    const Trajectory traj = euler_simulate(spec, *square, start, 0.5, opt);
    return std::abs(traj.records.back().theta[0].real() - exact);
  };

  const double coarse = err_at(1e-3);
  const double fine = err_at(5e-4);
  CHECK(coarse / fine == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("sampling and refresh options control the record grid") {
  const auto quad = quad2d();
  SimOptions opt;
  opt.sample_every = 1000;
  const Trajectory traj =
      euler_simulate(FlowSpec::ngf(0.9), *quad, ParameterState::real(rvec({1, 1})), 0.9, opt);
  REQUIRE(traj.records.size() == 19);  // 18000 substeps, one record per 1000
  for (std::size_t i = 1; i < traj.records.size(); ++i) {
    CHECK(traj.records[i].t - traj.records[i - 1].t ==
          doctest::Approx(0.05).epsilon(1e-10));
  }
  CHECK_FALSE(traj.records[0].lambda0.has_value());  // spectrum not requested
}

TEST_CASE("spectrum recording fills lambda0 and the top contribution") {
  const auto quad = quad2d();
  SimOptions opt;
  opt.record_spectrum = true;

  const Trajectory traj = euler_simulate(FlowSpec::ngf(0.9), *quad,
                                         ParameterState::real(rvec({1, 1})), 2 * 0.9, opt);
  REQUIRE(traj.records.size() == 3);
  for (const TrajectoryRecord& r : traj.records) {
    REQUIRE(r.lambda0.has_value());
    CHECK(*r.lambda0 == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.sc0.has_value());
  }

  // At h = 0.5 the top direction is on the pole: lambda0 recorded, sc0 absent.
  const Trajectory collapsed = euler_simulate(FlowSpec::ngf(0.5), *quad,
                                              ParameterState::real(rvec({1, 1})), 0.5, opt);
  for (const TrajectoryRecord& r : collapsed.records) {
    REQUIRE(r.lambda0.has_value());
    CHECK_FALSE(r.sc0.has_value());
  }
}

TEST_CASE("positive gradient probe diverges and is truncated by the guard") {
  const auto square = make_scalar_square();
  SimOptions opt;
  opt.divergence_guard = 1e3;
  opt.sample_every = 1000;
  const Trajectory traj = euler_simulate(FlowSpec::positive_gradient(0.1), *square,
                                         ParameterState::real(rvec({1})), 10.0, opt);
  CHECK(traj.diverged);
  REQUIRE(!traj.records.empty());
  // Everything recorded stays below the guard; the run stopped early.
  for (const TrajectoryRecord& r : traj.records) CHECK(std::abs(r.theta[0]) <= 1e3);
  CHECK(traj.records.back().t < 10.0);
}

TEST_CASE("principal flow euler propagates the collapse error") {
  const auto quad = quad2d();
  CHECK_THROWS_AS((void)euler_simulate(FlowSpec::pf(0.5), *quad,
                                       ParameterState::real(rvec({1, 1})), 0.5),
                  Singular);
}

TEST_CASE("closed-form scalar flow matches the frozen branch values") {
  // Stable side: (1-h)^{t/h}.
  CHECK(cdist(scalar_pf_exact(0.8, Cx(1, 0), 1.6), Cx(0.04, 0)) <= 1e-15);
  CHECK(cdist(scalar_pf_exact(0.8, Cx(2, 0), 0.0), Cx(2, 0)) == 0.0);
  // Oscillating side: |1-h|^{t/h} with a half-turn phase per modeled step.
  CHECK(cdist(scalar_pf_exact(1.5, Cx(1, 0), 1.5), Cx(-0.5, 0)) <= 1e-15);
  CHECK(cdist(scalar_pf_exact(2.1, Cx(1, 0), 2.1), Cx(-1.1, 0)) <= 1e-15);
  // Quarter-way through a modeled step the iterate leaves the real axis.
  const Cx quarter = scalar_pf_exact(1.5, Cx(1, 0), 0.75);
  CHECK(quarter.imag() > 0.1);

  CHECK_THROWS_AS((void)scalar_pf_exact(1.0, Cx(1, 0), 1.0), Singular);
  CHECK_THROWS_AS((void)scalar_pf_exact(1.0 + 5e-10, Cx(1, 0), 1.0), Singular);
  CHECK_NOTHROW((void)scalar_pf_exact(1.0 + 1e-8, Cx(1, 0), 1.0));
}

TEST_CASE("closed-form quadratic flow reproduces per-direction powers") {
  Mat m = Mat::Zero(2, 2);
  m.diagonal() << 2.0, 0.02;
  const RealSymMatrix M(m);
  const Vec b = Vec::Zero(2);
  const ParameterState start = ParameterState::real(rvec({1, 1}));

  SUBCASE("unstable top direction alternates sign") {
    const ParameterState at = quadratic_pf_exact(M, b, start, 1.05, 3 * 1.05);
    CHECK(at.values()[0].real() == doctest::Approx(-1.331).epsilon(1e-12));
    CHECK(std::abs(at.values()[0].imag()) <= 1e-12);
    CHECK(at.values()[1].real() ==
          doctest::Approx(std::pow(1.0 - 1.05 * 0.02, 3.0)).epsilon(1e-12));
  }

  SUBCASE("complex-stable top direction contracts while alternating") {
    const ParameterState at = quadratic_pf_exact(M, b, start, 0.9, 2 * 0.9);
    CHECK(at.values()[0].real() == doctest::Approx(0.64).epsilon(1e-12));
    CHECK(at.values()[1].real() ==
          doctest::Approx(std::pow(1.0 - 0.9 * 0.02, 2.0)).epsilon(1e-12));
  }

  SUBCASE("collapse direction zeroes out for positive time") {
    const ParameterState at0 = quadratic_pf_exact(M, b, start, 0.5, 0.0);
    CHECK(cdist(at0.values()[0], Cx(1, 0)) == 0.0);
    const ParameterState at = quadratic_pf_exact(M, b, start, 0.5, 0.5);
    CHECK(std::abs(at.values()[0]) == 0.0);
    CHECK(at.values()[1].real() == doctest::Approx(1.0 - 0.01).epsilon(1e-12));
  }

  SUBCASE("offset term adds the printed linear drift") {
    Mat one(1, 1);
    one << 1.0;
    const ParameterState from_zero = quadratic_pf_exact(
        RealSymMatrix(one), rvec({1}), ParameterState::real(rvec({0})), 0.5, 1.0);
    CHECK(from_zero.values()[0].real() ==
          doctest::Approx(-1.3862943611198906).epsilon(1e-14));

    // Weight on a collapse direction makes the drift singular.
    Mat two(1, 1);
    two << 2.0;
    CHECK_THROWS_AS((void)quadratic_pf_exact(RealSymMatrix(two), rvec({1}),
                                             ParameterState::real(rvec({0})), 0.5, 0.5),
                    Singular);
  }
}

TEST_CASE("euler principal flow tracks the closed form on the quadratic") {
  Mat m = Mat::Zero(2, 2);
  m.diagonal() << 2.0, 0.02;
  const RealSymMatrix M(m);
  const auto quad = make_quadratic(M, Vec::Zero(2), 0.0);
  const ParameterState start = ParameterState::real(rvec({1, 1}));
  const double h = 0.9;

  const Trajectory traj = euler_simulate(FlowSpec::pf(h), *quad, start, 5 * h);
  REQUIRE(traj.records.size() == 6);
  for (const TrajectoryRecord& r : traj.records) {
    const ParameterState exact = quadratic_pf_exact(M, Vec::Zero(2), start, h, r.t);
    CHECK((r.theta - exact.values()).norm() <= 1e-3);
  }
}

TEST_CASE("flow-vs-gd error stays small for the principal flow at h = 0.9") {
  const auto quad = quad2d();
  const std::vector<double> errs =
      flow_vs_gd_error(FlowSpec::pf(0.9), *quad, ParameterState::real(rvec({1, 1})), 0.9, 20);
  REQUIRE(errs.size() == 20);
  for (double e : errs) CHECK(e <= 1e-3);
}

TEST_CASE("flow-vs-gd error grows when gradient flow faces an unstable step") {
  const auto quad = quad2d();
  const std::vector<double> errs = flow_vs_gd_error(
      FlowSpec::ngf(1.05), *quad, ParameterState::real(rvec({1, 1})), 1.05, 20);
  REQUIRE(errs.size() == 20);
  CHECK(errs.back() > errs.front());
  CHECK(errs.back() > 1.0);  // GD oscillates and grows, the flow contracts
}

TEST_CASE("flow-vs-gd comparison truncates on divergence") {
  const auto quad = quad2d();
  const std::vector<double> errs = flow_vs_gd_error(
      FlowSpec::ngf(2.5), *quad, ParameterState::real(rvec({1, 1})), 2.5, 40);
  CHECK(errs.size() < 40);
  CHECK(errs.size() >= 5);
}

TEST_CASE("backward-error order increases along the flow family") {
  const auto banana = make_rosenbrock();
  const Vec theta0 = rvec({-0.3, 0.12});

  std::vector<double> hs;
  for (int i = 0; i < 8; ++i)
    hs.push_back(3e-5 * std::pow(10.0, i / 7.0));  // log-spaced in [3e-5, 3e-4]

  auto slope_for = [&](FlowKind kind, int gd_steps) {
    std::vector<double> errs;
    for (double h : hs) {
      FlowSpec spec;
      spec.kind = kind;
      spec.h = h;
      Vec gd = theta0;
      for (int s = 0; s < gd_steps; ++s)
        gd -= h * banana->grad(ParameterState::real(gd)).real();
      const Vec flow = rk4_flow(spec, *banana, theta0, gd_steps * h, 800 * gd_steps);
      errs.push_back((gd - flow).norm());
    }
    return fit_loglog_slope(hs, errs);
  };

  SUBCASE("one modeled step") {
    CHECK(std::abs(slope_for(FlowKind::NGF, 1) - 2.0) <= 0.15);
    CHECK(std::abs(slope_for(FlowKind::IGR, 1) - 3.0) <= 0.2);
    CHECK(std::abs(slope_for(FlowKind::ThirdOrder, 1) - 4.0) <= 0.3);
  }

  SUBCASE("two modeled steps") {
    CHECK(std::abs(slope_for(FlowKind::NGF, 2) - 2.0) <= 0.15);
    CHECK(std::abs(slope_for(FlowKind::IGR, 2) - 3.0) <= 0.2);
    CHECK(std::abs(slope_for(FlowKind::ThirdOrder, 2) - 4.0) <= 0.3);
  }
}

TEST_CASE("euler runs the mlp with spectrum recording") {
  MLPSpec spec;
  const auto mlp = make_mlp(spec);
  const ParameterState start = ParameterState::real(mlp_initial_parameters(spec));
  SimOptions opt;
  opt.record_spectrum = true;
  opt.step = 1e-3;
  const double h = 0.1;
  const Trajectory traj = euler_simulate(FlowSpec::ngf(h), *mlp, start, 2 * h, opt);
  REQUIRE(traj.records.size() == 3);
  for (const TrajectoryRecord& r : traj.records) {
    CHECK(r.theta.allFinite());
    REQUIRE(r.lambda0.has_value());
    CHECK(*r.lambda0 > 0.0);
  }
  // Gradient flow reduces the loss.
  CHECK(traj.records.back().loss.real() < traj.records.front().loss.real());
}
