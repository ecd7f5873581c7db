#include <doctest.h>

#include <cmath>

#include "flowlab/errors.hpp"
#include "flowlab/flows.hpp"
#include "flowlab/rng.hpp"
#include "test_support.hpp"

using namespace flowlab;
using namespace flowlab::test;

namespace {

LossModelPtr quad2d() {
  Mat m = Mat::Zero(2, 2);
  m.diagonal() << 2.0, 0.02;
  return make_quadratic(RealSymMatrix(m), Vec::Zero(2), 0.0);
}

// E = theta^4/4, the smallest loss with a non-vanishing third derivative.
class QuarticModel final : public LossModel {
 public:
  int dim() const override { return 1; }
  bool supports_complex() const override { return true; }
  std::string name() const override { return "quartic_test"; }

 protected:
  Cx do_eval(const CVec& t) const override { return 0.25 * std::pow(t[0], 4); }
  CVec do_grad(const CVec& t) const override {
    CVec g(1);
    g[0] = std::pow(t[0], 3);
    return g;
  }
  CMat do_hessian(const CVec& t) const override {
    CMat h(1, 1);
    h(0, 0) = 3.0 * t[0] * t[0];
    return h;
  }
};

const ParameterState kOnes = ParameterState::real(rvec({1, 1}));
const ParameterState kOne = ParameterState::real(rvec({1}));

}  // namespace

TEST_CASE("flow spec validation and factories") {
  CHECK(validate(FlowSpec::ngf(0.5)).kind == FlowKind::NGF);
  CHECK(validate(FlowSpec::truncated(0.5, 3)).order == 3);
  CHECK(validate(FlowSpec::momentum_flow(0.5, 0.9)).momentum == 0.9);

  CHECK_THROWS_AS(validate(FlowSpec::ngf(0.0)), ValidationError);
  CHECK_THROWS_AS(validate(FlowSpec::ngf(-1.0)), ValidationError);
  CHECK_THROWS_AS(validate(FlowSpec::truncated(0.5, -1)), ValidationError);
  CHECK_THROWS_AS(validate(FlowSpec::momentum_flow(0.5, 1.0)), ValidationError);

  CHECK(FlowSpec::pf(0.5).needs_spectrum());
  CHECK(FlowSpec::pf_nonprincipal(0.5).needs_spectrum());
  CHECK(FlowSpec::flipped_top(0.5).needs_spectrum());
  CHECK_FALSE(FlowSpec::igr(0.5).needs_spectrum());

  CHECK(flow_kind_name(FlowKind::PF) == "pf");
  CHECK(flow_kind_name(FlowKind::TruncatedSeries) == "truncated");
}

TEST_CASE("regime classification checks collapse before the stability bands") {
  CHECK(classify_regime(1.0, 0.5) == Regime::RealStable);
  CHECK(classify_regime(3.0, 0.5) == Regime::ComplexStable);   // h*l = 1.5
  CHECK(classify_regime(4.0, 0.5) == Regime::UnstableComplex); // h*l = 2, boundary is unstable
  CHECK(classify_regime(5.0, 0.5) == Regime::UnstableComplex);
  CHECK(classify_regime(2.0, 0.5) == Regime::Collapse);        // h*l = 1 exactly
  CHECK(classify_regime(2.0 * (1.0 + 5e-10), 0.5) == Regime::Collapse);
  CHECK(classify_regime(2.0 * (1.0 + 5e-9), 0.5) == Regime::ComplexStable);
  CHECK(regime_name(Regime::Collapse) == "Collapse");
}

TEST_CASE("alpha factors match frozen high-precision references") {
  // Real stable branch.
  CHECK(cdist(alpha(AlphaKind::PF, 0.5), Cx(-1.3862943611198906, 0)) <= 1e-15);
  CHECK(cdist(alpha(AlphaKind::PF, 0.8), Cx(-2.0117973905426255, 0)) <= 1e-15);
  CHECK(cdist(alpha(AlphaKind::PF, 0.018), Cx(-1.0091094793150647, 0)) <= 1e-15);
  // Principal branch above the pole: log(z-1) + i*pi.
  CHECK(cdist(alpha(AlphaKind::PF, 3.0),
              Cx(0.23104906018664844, 1.0471975511965977)) <= 1e-15);
  CHECK(cdist(alpha(AlphaKind::PF, 2.0), Cx(0, 1.5707963267948966)) <= 1e-15);
  CHECK(cdist(alpha(AlphaKind::PF, 1.8),
              Cx(-0.12396863961900542, 1.7453292519943296)) <= 1e-15);
  // Genuinely complex argument.
  CHECK(cdist(alpha(AlphaKind::PF, Cx(0, 1)),
              Cx(-0.7853981633974483, -0.34657359027997264)) <= 1e-15);

  CHECK(cdist(alpha(AlphaKind::IGR, 0.5), Cx(-1.25, 0)) == 0.0);
  CHECK(cdist(alpha(AlphaKind::IGR, Cx(1, 1)), Cx(-1.5, -0.5)) == 0.0);
  CHECK(cdist(alpha(AlphaKind::NGF, Cx(7, -3)), Cx(-1, 0)) == 0.0);
}

TEST_CASE("alpha handles the small-z series, the pole, and negative-zero arguments") {
  // Below the series switch the closed form is reproduced to rounding.
  const double tiny = 1e-7;
  CHECK(cdist(alpha(AlphaKind::PF, tiny), Cx(std::log1p(-tiny) / tiny, 0)) <= 1e-12);
  CHECK(cdist(alpha(AlphaKind::PF, 0.0), Cx(-1, 0)) == 0.0);

  CHECK_THROWS_AS((void)alpha(AlphaKind::PF, 1.0), Singular);
  CHECK_THROWS_AS((void)alpha(AlphaKind::PF, Cx(1.0 + 1e-10, 0)), Singular);
  CHECK_NOTHROW((void)alpha(AlphaKind::PF, Cx(1.0 + 1e-8, 0)));

  // A negative-zero imaginary part must stay on the principal branch
  // (+i*pi), not fall off to the conjugate one.
  CHECK(cdist(alpha(AlphaKind::PF, Cx(3.0, -0.0)),
              Cx(0.23104906018664844, 1.0471975511965977)) <= 1e-15);
}

TEST_CASE("gradient-like fields match their closed forms") {
  const auto square = make_scalar_square();
  CHECK(cdist(field(FlowSpec::ngf(0.3), *square, kOne)[0], Cx(-1, 0)) == 0.0);
  CHECK(cdist(field(FlowSpec::positive_gradient(0.3), *square, kOne)[0], Cx(1, 0)) == 0.0);
  CHECK(cdist(field(FlowSpec::momentum_flow(0.3, 0.5), *square, kOne)[0], Cx(-2, 0)) <= 1e-15);

  // IGR on the 2-D quadratic: -g - (h/2) H g.
  const auto quad = quad2d();
  const CVec igr = field(FlowSpec::igr(0.9), *quad, kOnes);
  CHECK(cdist(igr[0], Cx(-3.8, 0)) <= 1e-14);
  CHECK(cdist(igr[1], Cx(-0.02018, 0)) <= 1e-16);
}

TEST_CASE("truncated series field sums the damped Hessian powers") {
  const auto square = make_scalar_square();
  CHECK(cdist(field(FlowSpec::truncated(0.3, 0), *square, kOne)[0], Cx(-1, 0)) == 0.0);
  CHECK(cdist(field(FlowSpec::truncated(0.3, 1), *square, kOne)[0], Cx(-1.15, 0)) <= 1e-15);
  CHECK(cdist(field(FlowSpec::truncated(0.3, 2), *square, kOne)[0], Cx(-1.18, 0)) <= 1e-15);

  // The third-order field adds a vanishing correction on quadratics, so it
  // coincides with the order-2 truncation there.
  CHECK(cdist(field(FlowSpec::third_order(0.3), *square, kOne)[0], Cx(-1.18, 0)) <= 1e-12);

  // For h*lambda < 1 the truncation converges to the exact principal factor,
  // and the error sits under the geometric tail bound z^(n+1)/((n+2)(1-z)).
  const Cx exact = field(FlowSpec::pf(0.8), *square, kOne)[0];
  const double z = 0.8;  // h * lambda for the unit-curvature square
  double prev = 1e9;
  for (int order : {10, 20, 30}) {
    const double err = cdist(field(FlowSpec::truncated(0.8, order), *square, kOne)[0], exact);
    CHECK(err < prev);
    CHECK(err <= std::pow(z, order + 1) / ((order + 2) * (1.0 - z)));
    prev = err;
  }
}

TEST_CASE("principal flow field applies the log factor per eigendirection") {
  const auto square = make_scalar_square();
  CHECK(cdist(field(FlowSpec::pf(0.8), *square, kOne)[0],
              Cx(-2.0117973905426255, 0)) <= 1e-15);

  const auto quad = quad2d();
  const CVec pf = field(FlowSpec::pf(0.9), *quad, kOnes);
  CHECK(cdist(pf[0], 2.0 * Cx(-0.12396863961900542, 1.7453292519943296)) <= 1e-14);
  CHECK(cdist(pf[1], 0.02 * Cx(-1.0091094793150647, 0)) <= 1e-16);

  // h = 0.5 puts the top direction exactly on the pole.
  CHECK_THROWS_AS((void)field(FlowSpec::pf(0.5), *quad, kOnes), Singular);
  try {
    (void)field(FlowSpec::pf(0.5), *quad, kOnes);
  } catch (const Singular& s) {
    CHECK(s.direction_index() == 0);
  }

  // Quadratics have no third-derivative term, so the non-principal variant
  // coincides with the principal one there.
  const CVec plus = field(FlowSpec::pf_nonprincipal(0.9), *quad, kOnes);
  CHECK((plus - pf).norm() <= 1e-14);
}

TEST_CASE("principal flow equals the gradient flow where H g = 0 with g nonzero") {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 1.0;
  const auto quad = make_quadratic(RealSymMatrix(m), rvec({0, 1}), 0.0);
  const ParameterState origin = ParameterState::real(rvec({0, 0}));
  const CVec g = quad->grad(origin);
  CHECK(g.norm() == 1.0);
  CHECK(quad->hvp(origin, g).norm() == 0.0);

  const CVec pf = field(FlowSpec::pf(0.5), *quad, origin);
  const CVec ngf = field(FlowSpec::ngf(0.5), *quad, origin);
  CHECK((pf - ngf).norm() <= 1e-14);
}

TEST_CASE("non-principal correction shifts the field by the scaled contraction") {
  QuarticModel quartic;
  const double h = 0.3;
  const CVec base = field(FlowSpec::pf(h), quartic, kOne);
  const CVec shifted = field(FlowSpec::pf_nonprincipal(h), quartic, kOne);
  // D3E[g,g,.] = 6 at theta=1 (g=1), so the correction is h^2/12 * 6 = 0.045.
  CHECK(cdist(shifted[0] - base[0], Cx(-h * h / 12.0 * 6.0, 0)) <= 1e-9);
}

TEST_CASE("flipped-top field reverses only the top eigendirection") {
  const auto quad = quad2d();
  const CVec f = field(FlowSpec::flipped_top(0.9), *quad, kOnes);
  CHECK(cdist(f[0], Cx(2, 0)) <= 1e-14);
  CHECK(cdist(f[1], Cx(-0.02, 0)) <= 1e-14);

  // One dimension: the only direction is the top one, so the field is +g.
  const auto square = make_scalar_square();
  CHECK(cdist(field(FlowSpec::flipped_top(0.3), *square, kOne)[0], Cx(1, 0)) <= 1e-15);
}

TEST_CASE("fields stay real at real parameters in the stable regime") {
  const auto banana = make_rosenbrock();
  const ParameterState start = ParameterState::real(rvec({-1, 1}));
  for (const FlowSpec& spec :
       {FlowSpec::ngf(0.0006), FlowSpec::igr(0.0006), FlowSpec::third_order(0.0006),
        FlowSpec::pf(0.0006), FlowSpec::flipped_top(0.0006)}) {
    CAPTURE(flow_kind_name(spec.kind));
    const CVec v = field(spec, *banana, start);
    CHECK(v.imag().norm() <= 1e-10 * std::max(1.0, v.norm()));
  }
}

TEST_CASE("field accepts a precomputed spectrum and an incomplete one") {
  const auto quad = quad2d();
  const Spectrum full = hessian_spectrum(*quad, kOnes);
  const CVec with_spectrum = field(FlowSpec::pf(0.9), *quad, kOnes, full);
  const CVec direct = field(FlowSpec::pf(0.9), *quad, kOnes);
  CHECK((with_spectrum - direct).norm() == 0.0);

  // Top-1 spectrum: exact factor on the computed direction, gradient flow on
  // the remainder.
  const Spectrum top1 = hessian_spectrum_topk(*quad, kOnes, 1, /*seed=*/2);
  REQUIRE_FALSE(top1.complete);
  const CVec partial = field(FlowSpec::pf(0.9), *quad, kOnes, top1);
  CHECK(cdist(partial[0], 2.0 * Cx(-0.12396863961900542, 1.7453292519943296)) <= 1e-10);
  CHECK(cdist(partial[1], Cx(-0.02, 0)) <= 1e-10);
}

TEST_CASE("hessian spectrum is oriented against the gradient") {
  const auto quad = quad2d();
  const Spectrum s = hessian_spectrum(*quad, kOnes);
  REQUIRE(s.count() == 2);
  CHECK(cdist(s.eigenvalues[0], Cx(2, 0)) <= 1e-14);
  CHECK(cdist(s.eigenvalues[1], Cx(0.02, 0)) <= 1e-14);
  // g = (2, 0.02): both alignments positive after orientation.
  const CVec g = quad->grad(kOnes);
  for (int i = 0; i < 2; ++i)
    CHECK(transposed_dot(g, CVec(s.eigenvectors.col(i))).real() > 0.0);

  // Complex parameter points route through the complex solver.
  const auto square = make_scalar_square();
  const Spectrum cs = hessian_spectrum(*square, ParameterState(cvec({Cx(0, 1)})));
  CHECK(cdist(cs.eigenvalues[0], Cx(1, 0)) <= 1e-14);
}

TEST_CASE("top-k spectrum tracks the dense one on the mlp") {
  MLPSpec spec;
  const auto mlp = make_mlp(spec);
  const ParameterState p = ParameterState::real(mlp_initial_parameters(spec));
  const Spectrum dense = hessian_spectrum(*mlp, p);
  const Spectrum top = hessian_spectrum_topk(*mlp, p, 3, /*seed=*/4);
  REQUIRE(top.count() == 3);
  const double scale = std::abs(dense.eigenvalues[0].real());
  CHECK(std::abs(top.eigenvalues[0].real() - dense.eigenvalues[0].real()) <= 1e-7 * scale);
  for (int i = 1; i < 3; ++i) {
    CAPTURE(i);
    CHECK(std::abs(top.eigenvalues[i].real() - dense.eigenvalues[i].real()) <= 1e-4 * scale);
  }
}

TEST_CASE("stability report freezes the per-direction diagnostics") {
  const auto quad = quad2d();
  const StabilityReport r = stability_report(*quad, kOnes, 0.9);
  CHECK(r.h == 0.9);
  CHECK(r.threshold == doctest::Approx(2.0 / 0.9).epsilon(1e-15));
  CHECK(r.lambda0 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.complete);
  REQUIRE(r.directions.size() == 2);

  const DirectionReport& d0 = r.directions[0];
  CHECK(d0.regime == Regime::ComplexStable);
  CHECK_FALSE(d0.singular);
  CHECK(cdist(d0.contribution, Cx(-0.24793727923801084, 3.4906585039886592)) <= 1e-14);

  const DirectionReport& d1 = r.directions[1];
  CHECK(d1.regime == Regime::RealStable);
  CHECK(cdist(d1.contribution, Cx(-0.020182189586301293, 0)) <= 1e-16);

  // h = 0.5 collapses the top direction: flagged, not thrown, in reports.
  const StabilityReport rc = stability_report(*quad, kOnes, 0.5);
  CHECK(rc.directions[0].singular);
  CHECK(rc.directions[0].regime == Regime::Collapse);
  CHECK_FALSE(rc.directions[1].singular);
}

TEST_CASE("loss rate reproduces the spectral sums") {
  const auto quad = quad2d();
  CHECK(cdist(loss_rate(*quad, kOnes, 0.9, AlphaKind::NGF), Cx(-4.0004, 0)) <= 1e-13);
  CHECK(cdist(loss_rate(*quad, kOnes, 0.9, AlphaKind::PF),
              Cx(-0.49627820226774771, 6.9813170079773183)) <= 1e-13);
  CHECK(cdist(loss_rate(*quad, kOnes, 0.9, AlphaKind::IGR), Cx(-7.6004036, 0)) <= 1e-13);
  CHECK_THROWS_AS((void)loss_rate(*quad, kOnes, 0.5, AlphaKind::PF), Singular);

  // NGF rate is exactly -||g||^2 whatever the model.
  const auto banana = make_rosenbrock();
  const ParameterState start = ParameterState::real(rvec({-1, 1}));
  const double g2 = banana->grad(start).squaredNorm();
  CHECK(cdist(loss_rate(*banana, start, 0.001, AlphaKind::NGF), Cx(-g2, 0)) <=
        1e-12 * g2);
}

TEST_CASE("critical point analysis labels attract/repel per flow") {
  const double h = 0.5;
  auto analyze = [&](double lambda, double step) {
    Mat m(1, 1);
    m << lambda;
    return critical_point_analysis(sym_eigh(RealSymMatrix(m)), step);
  };

  const auto mild = analyze(1.0, h);
  REQUIRE(mild.size() == 1);
  CHECK(cdist(mild[0].pf, Cx(-1.3862943611198906, 0)) <= 1e-15);
  CHECK(cdist(mild[0].ngf, Cx(-1, 0)) == 0.0);
  CHECK(cdist(mild[0].igr, Cx(-1.25, 0)) == 0.0);
  CHECK(mild[0].pf_label == CriticalLabel::Attracting);
  CHECK(mild[0].ngf_label == CriticalLabel::Attracting);
  CHECK(mild[0].igr_label == CriticalLabel::Attracting);

  // Sharp minimum: PF repels where the gradient flows still attract.
  const auto sharp = analyze(5.0, h);
  CHECK(cdist(sharp[0].pf, Cx(0.81093021621632876, 6.2831853071795865)) <= 1e-14);
  CHECK(sharp[0].pf_label == CriticalLabel::Repelling);
  CHECK(sharp[0].ngf_label == CriticalLabel::Attracting);
  CHECK(sharp[0].igr_label == CriticalLabel::Attracting);

  // Strict saddle: every flow repels, PF fastest.
  const auto saddle = analyze(-1.0, 0.1);
  CHECK(cdist(saddle[0].pf, Cx(0.9531017980432486, 0)) <= 1e-15);
  CHECK(saddle[0].pf_label == CriticalLabel::Repelling);
  CHECK(saddle[0].ngf_label == CriticalLabel::Repelling);
  CHECK(saddle[0].igr_label == CriticalLabel::Repelling);

  // Collapse: the PF Jacobian is undefined in that direction.
  const auto collapsed = analyze(2.0, h);
  CHECK(collapsed[0].pf_singular);
  CHECK(collapsed[0].ngf_label == CriticalLabel::Attracting);

  // Flat direction: marginal under every flow.
  const auto flat = analyze(0.0, h);
  CHECK(flat[0].ngf_label == CriticalLabel::Marginal);
  CHECK(flat[0].pf_label == CriticalLabel::Marginal);
}

TEST_CASE("non-principal decomposition vanishes on quadratics and matches the quartic") {
  const auto quad = quad2d();
  const NonPrincipalReport none = nonprincipal_decomposition(*quad, kOnes, 0.9);
  CHECK(none.raw_term.norm() == 0.0);
  REQUIRE(none.per_direction.size() == 2);
  CHECK(none.per_direction[0].norm() == 0.0);
  CHECK(none.mismatch == 0.0);

  QuarticModel quartic;
  const NonPrincipalReport r = nonprincipal_decomposition(quartic, kOne, 0.3);
  CHECK(cdist(r.raw_term[0], Cx(6, 0)) <= 1e-8);
  REQUIRE(r.per_direction.size() == 1);
  CHECK(cdist(r.per_direction[0][0], Cx(6, 0)) <= 1e-8);
  CHECK(r.mismatch <= 1e-6);

  CHECK_THROWS_AS(
      (void)nonprincipal_decomposition(quartic, ParameterState(cvec({Cx(0, 1)})), 0.3),
      ValidationError);
}
