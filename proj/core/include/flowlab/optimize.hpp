#pragma once

#include "flowlab/integrate.hpp"

namespace flowlab {

// Value-semantics optimizer state; every step function returns a new state.
struct OptimizerState {
  ParameterState theta;
  Vec velocity;  // momentum buffer, zero at initialization
  int step_index = 0;
  double last_lr = 0.0;
  double last_drift_estimate = 0.0;
};

OptimizerState make_optimizer_state(const ParameterState& theta0);

enum class CurvatureEstimator { ExactHvp, FdApprox };

struct DalConfig {
  double p = 1.0;
  double lr_cap = 5.0;
  CurvatureEstimator estimator = CurvatureEstimator::ExactHvp;
};

// Enforces p in (0, 2] and lr_cap > 0.
DalConfig validate(DalConfig cfg);

// theta' = theta - h g. Real parameter points only.
ParameterState gd_step(const LossModel& model, const ParameterState& theta, double h);

// v' = m v - h g; theta' = theta + v'. m = 0 reduces to gd_step.
OptimizerState momentum_step(const LossModel& model, OptimizerState state, double h, double m);

// min(lr_cap, 2 / ||H ghat||^p) with ghat = g/||g||. The exact estimator uses
// a Hessian-vector product; the approximate one uses hgp_fd scaled by 1/||g||.
// ||H ghat|| = 0 returns lr_cap (drift-free region, take the capped max step).
double dal_learning_rate(const LossModel& model, const ParameterState& theta,
                         const DalConfig& cfg);

struct DalStep {
  ParameterState theta;
  double lr = 0.0;
};

DalStep dal_step(const LossModel& model, const ParameterState& theta, const DalConfig& cfg);

// Momentum variant with the conservative printed coefficient: the rate is
// min(lr_cap, 1/(2 ||H ghat||)), a factor 4 below dal_learning_rate at p = 1.
// cfg.p is ignored by design; both rules ship verbatim under distinct names.
OptimizerState dal_momentum_step(const LossModel& model, OptimizerState state, double m,
                                 const DalConfig& cfg);

struct PerParamDalStep {
  ParameterState theta;
  Vec lr;  // elementwise rates actually applied
};

// h_i = min(cap, 2/|(Hg)_i|^p) elementwise; |(Hg)_i| < 1e-12 maps to cap.
PerParamDalStep per_param_dal_step(const LossModel& model, const ParameterState& theta, double p,
                                   double cap);

// ||gd_step(theta, h) - NGF(theta, h)|| with the NGF solution Euler-integrated
// at `step`: the measured one-step discretization drift.
double per_iteration_drift(const LossModel& model, const ParameterState& theta, double h,
                           double step = 5e-5);

// Leading-order drift (h^2/2) ||H g||.
double drift_estimate(const LossModel& model, const ParameterState& theta, double h);

// Momentum drift vector h^2/(2(1-m)^2) H g + m v - h m/(1-m) g; m = 0 reduces
// to the plain GD drift direction (h^2/2) H g.
Vec momentum_drift_estimate(const LossModel& model, const ParameterState& theta,
                            const Vec& velocity, double h, double m);

// Frozen-eigenpair prediction of g^T u after one step of size h, starting from
// x0 = g^T u, in a direction with eigenvalue lambda:
//   PF: x0 (1 - h lambda); NGF: x0 e^{-h lambda}; IGR: x0 e^{-h(lambda + h lambda^2/2)}.
double predict_dot_product(double x0, double lambda, double h, AlphaKind kind);

// 1/(ghat^T H ghat); throws NoMinimizerAlongRay when the curvature along the
// gradient ray is not positive.
double taylor_optimal_lr(const LossModel& model, const ParameterState& theta);

// Second-order Taylor prediction of one GD step's loss change:
// -h ||g||^2 + (h^2/2) g^T H g. Exact on quadratics.
double loss_change_quadratic(const LossModel& model, const ParameterState& theta, double h);

// Stability regime of the top eigenvalue at step size h (thresholds 1/h, 2/h).
Regime edge_state(double lambda0, double h);

}  // namespace flowlab
