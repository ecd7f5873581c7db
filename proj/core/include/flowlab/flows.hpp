#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowlab/losses.hpp"

namespace flowlab {

// Continuous-time vector fields whose trajectories track discrete gradient
// descent with step size h to successively higher order.
enum class FlowKind {
  NGF,                  // -grad E
  IGR,                  // -grad E - (h/2) H grad E
  ThirdOrder,           // IGR - h^2 [ (1/3) H^2 g + (1/12) D3E[g, g, .] ]
  TruncatedSeries,      // sum_{p=0..order} -h^p/(p+1) H^p g
  PF,                   // principal branch: sum_i log(1 - h l_i)/(h l_i) (g^T u_i) u_i
  PFPlusNonPrincipal,   // PF - (h^2/12) D3E[g, g, .]
  PositiveGradient,     // +grad E (diagnostic ascent probe)
  FlippedTop,           // gradient with the top eigendirection component sign-flipped
  MomentumFlow,         // -grad E / (1 - m)
};

std::string flow_kind_name(FlowKind kind);

struct FlowSpec {
  FlowKind kind = FlowKind::NGF;
  double h = 0.0;
  int order = 0;        // TruncatedSeries only
  double momentum = 0;  // MomentumFlow only

  static FlowSpec ngf(double h);
  static FlowSpec igr(double h);
  static FlowSpec third_order(double h);
  static FlowSpec truncated(double h, int order);
  static FlowSpec pf(double h);
  static FlowSpec pf_nonprincipal(double h);
  static FlowSpec positive_gradient(double h);
  static FlowSpec flipped_top(double h);
  static FlowSpec momentum_flow(double h, double m);

  bool needs_spectrum() const {
    return kind == FlowKind::PF || kind == FlowKind::PFPlusNonPrincipal ||
           kind == FlowKind::FlippedTop;
  }
};

// Validates h > 0, order >= 0, 0 <= momentum < 1.
FlowSpec validate(FlowSpec spec);

// Stability classification of an eigenvalue under step size h. Collapse
// (|1 - h lambda| below the singularity tolerance) is checked first.
enum class Regime { RealStable, ComplexStable, UnstableComplex, Collapse };

std::string regime_name(Regime r);
Regime classify_regime(double lambda, double h);

constexpr double kSingularTol = 1e-9;

// Per-eigendirection step-size response factors: the multiplier alpha(z) with
// z = h*lambda that turns the gradient component into the flow component.
enum class AlphaKind { NGF, IGR, PF };

// alpha_NGF = -1; alpha_IGR = -(1 + z/2); alpha_PF = log(1 - z)/z on the
// principal branch (real z > 1 resolves to log(z - 1) + i*pi). PF switches to
// the series -1 - z/2 - z^2/3 - z^3/4 for |z| < 1e-6 and throws Singular(-1)
// when |1 - z| < kSingularTol.
Cx alpha(AlphaKind kind, Cx z);

// Spectrum of the Hessian at theta, oriented against the gradient there.
// Real parameter points use the symmetric solver; complex points use the
// complex solver with DefectivePolicy::Warn (near_defective is reported, not
// thrown, so trajectories can record it).
Spectrum hessian_spectrum(const LossModel& model, const ParameterState& theta);

// Top-k variant via Lanczos on exact Hessian-vector products (real theta only).
Spectrum hessian_spectrum_topk(const LossModel& model, const ParameterState& theta, int k,
                               std::uint64_t seed);

// Evaluate the modified vector field at theta. The overload taking a Spectrum
// uses it instead of recomputing (spectrum-based kinds only); an incomplete
// top-k spectrum applies the exact alpha on the computed directions and the
// NGF value on the orthogonal remainder.
CVec field(const FlowSpec& spec, const LossModel& model, const ParameterState& theta);
CVec field(const FlowSpec& spec, const LossModel& model, const ParameterState& theta,
           const Spectrum& spectrum);

// Per-direction stability diagnostics at a parameter point.
struct DirectionReport {
  int index = 0;
  Cx lambda{};
  Cx g_dot_u{};       // plain transposed inner product
  Cx alpha_pf{};      // principal-branch factor; finite entries only
  Cx contribution{};  // sc_i = alpha_PF(h lambda_i) * (g^T u_i)
  Regime regime = Regime::RealStable;
  bool singular = false;  // Collapse direction: alpha_pf/contribution not meaningful
};

struct StabilityReport {
  double h = 0.0;
  double threshold = 0.0;  // 2/h
  double lambda0 = 0.0;    // real part of the top eigenvalue
  bool complete = true;
  bool near_defective = false;
  std::vector<DirectionReport> directions;
};

StabilityReport stability_report(const LossModel& model, const ParameterState& theta, double h);
StabilityReport stability_report(const ParameterState& theta, const CVec& grad,
                                 const Spectrum& spectrum, double h);

// Instantaneous loss rate dE/dt = sum_i alpha(h lambda_i) (g^T u_i)^2 under
// the chosen flow field at theta.
Cx loss_rate(const LossModel& model, const ParameterState& theta, double h, AlphaKind kind);

// Flow Jacobian eigenvalue in an eigendirection at a critical point, per flow:
// PF: log(1 - h l)/h, NGF: -l, IGR: -(l + h l^2 / 2), with the attract/repel
// classification implied by its real part.
enum class CriticalLabel { Attracting, Repelling, Marginal };

struct CriticalDirectionReport {
  int index = 0;
  Cx lambda{};
  Cx pf{}, ngf{}, igr{};
  CriticalLabel pf_label{}, ngf_label{}, igr_label{};
  bool pf_singular = false;  // Collapse: PF Jacobian undefined in this direction
};

std::vector<CriticalDirectionReport> critical_point_analysis(const Spectrum& s, double h);

// Eigendirection decomposition of the non-principal contraction. The sum of
// per_direction entries approximates raw_term under the locally-constant-
// eigenvector assumption; mismatch reports how far off that approximation is
// (soft diagnostic, never asserted).
struct NonPrincipalReport {
  CVec raw_term;                    // D3E[g, g, .]
  std::vector<CVec> per_direction;  // (g^T u_i)^2 * D3E[u_i, u_i, .]
  double mismatch = 0.0;            // ||sum per_direction - raw_term|| / ||raw_term||
};

NonPrincipalReport nonprincipal_decomposition(const LossModel& model, const ParameterState& theta,
                                              double h);

}  // namespace flowlab
