#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowlab/flows.hpp"

namespace flowlab {

struct TrajectoryRecord {
  double t = 0.0;
  CVec theta;
  Cx loss{};
  double grad_norm = 0.0;
  std::optional<double> lambda0;  // real part of the top Hessian eigenvalue
  std::optional<Cx> sc0;          // alpha_PF(h lambda_0) * (g^T u_0); absent on Collapse
};

struct Trajectory {
  FlowSpec spec;
  std::string model_name;
  std::uint64_t seed = 0;
  double step = 0.0;
  int sample_every = 1;      // records every N substeps
  int spectrum_refresh = 1;  // spectrum recomputed every N substeps
  bool diverged = false;     // iterate norm crossed the divergence guard
  bool near_defective = false;
  std::vector<TrajectoryRecord> records;
};

struct SimOptions {
  double step = 5e-5;
  int sample_every = 0;          // 0 resolves to round(h / step): one record per modeled GD step
  int spectrum_refresh = 0;      // 0 resolves to 1 for dim <= 50, else 20
  bool record_spectrum = false;  // fill lambda0/sc0 even for flows that don't need a spectrum
  double divergence_guard = 1e12;
};

// Fixed-step explicit Euler on the flow field: theta <- theta + step * field.
// total_time is typically n*h for n modeled GD steps. Records start at t = 0
// and are spaced sample_every substeps apart. Terminates early (diverged flag)
// when the iterate norm exceeds the guard; Singular from a PF Collapse
// direction propagates with the offending index.
Trajectory euler_simulate(const FlowSpec& spec, const LossModel& model,
                          const ParameterState& theta0, double total_time,
                          const SimOptions& options = {});

// Closed-form PF trajectory for E = 1/2 theta^T M theta + b^T theta + c:
// theta(t) = sum_i e^{log(1-h*l_i) t/h} (theta0^T u_i) u_i
//          + t * sum_i log(1-h*l_i)/(h*l_i) (b^T u_i) u_i.
// Collapse directions contribute factor 1 at t = 0 and 0 for t > 0 on the
// theta0 part, and raise Singular when b has weight there.
ParameterState quadratic_pf_exact(const RealSymMatrix& M, const Vec& b,
                                  const ParameterState& theta0, double h, double t);

// Closed-form PF trajectory for E = 1/2 z^2:
//   h < 1: z(t) = (1-h)^{t/h} z0
//   h > 1: z(t) = (h-1)^{t/h} (cos(pi t/h) + i sin(pi t/h)) z0
// h = 1 within the singularity tolerance raises Singular.
Cx scalar_pf_exact(double h, Cx z0, double t);

// Entry k-1 is ||theta_GD,k - theta_flow(k h)|| for k = 1..n_steps, where GD
// runs the discrete update at rate h and the flow is Euler-integrated at
// `step` from the same starting point. Divergence of either side truncates
// the sequence at the last comparable step.
std::vector<double> flow_vs_gd_error(const FlowSpec& spec, const LossModel& model,
                                     const ParameterState& theta0, double h, int n_steps,
                                     double step = 5e-5);

}  // namespace flowlab
