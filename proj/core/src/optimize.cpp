#include "flowlab/optimize.hpp"

#include <cmath>

namespace flowlab {

namespace {

Vec real_gradient(const LossModel& model, const ParameterState& theta) {
  if (!theta.is_real()) {
    throw ValidationError("optimizer step requires a real parameter point");
  }
  return model.grad(theta).real();
}

// ||H ghat|| via the configured estimator. Throws ZeroGradient on ||g|| = 0.
double curvature_scale(const LossModel& model, const ParameterState& theta,
                       CurvatureEstimator estimator) {
  const CVec g = model.grad(theta);
  const double gn = g.norm();
  if (gn == 0.0) throw ZeroGradient();
  if (estimator == CurvatureEstimator::FdApprox) {
    return hgp_fd(model, theta).norm() / gn;
  }
  return model.hvp(theta, g).norm() / gn;
}

}  // namespace

OptimizerState make_optimizer_state(const ParameterState& theta0) {
  if (!theta0.is_real()) {
    throw ValidationError("optimizer state requires a real parameter point");
  }
  OptimizerState state;
  state.theta = theta0;
  state.velocity = Vec::Zero(theta0.dim());
  return state;
}

DalConfig validate(DalConfig cfg) {
  if (!(cfg.p > 0.0) || cfg.p > 2.0) throw ValidationError("dal: p must lie in (0, 2]");
  if (!(cfg.lr_cap > 0.0)) throw ValidationError("dal: lr_cap must be positive");
  return cfg;
}

ParameterState gd_step(const LossModel& model, const ParameterState& theta, double h) {
  const Vec g = real_gradient(model, theta);
  return ParameterState::real(theta.real_part() - h * g);
}

OptimizerState momentum_step(const LossModel& model, OptimizerState state, double h, double m) {
  if (m < 0.0 || m >= 1.0) throw ValidationError("momentum must lie in [0, 1)");
  const Vec g = real_gradient(model, state.theta);
  if (state.velocity.size() != state.theta.dim()) {
    throw ValidationError("momentum_step: velocity dimension mismatch");
  }
  state.velocity = m * state.velocity - h * g;
  state.theta = ParameterState::real(state.theta.real_part() + state.velocity);
  state.step_index += 1;
  state.last_lr = h;
  state.last_drift_estimate = drift_estimate(model, state.theta, h);
  return state;
}

double dal_learning_rate(const LossModel& model, const ParameterState& theta,
                         const DalConfig& cfg_in) {
  const DalConfig cfg = validate(cfg_in);
  const double scale = curvature_scale(model, theta, cfg.estimator);
  if (scale == 0.0) return cfg.lr_cap;
  return std::min(cfg.lr_cap, 2.0 / std::pow(scale, cfg.p));
}

DalStep dal_step(const LossModel& model, const ParameterState& theta, const DalConfig& cfg) {
  const double lr = dal_learning_rate(model, theta, cfg);
  return DalStep{gd_step(model, theta, lr), lr};
}

OptimizerState dal_momentum_step(const LossModel& model, OptimizerState state, double m,
                                 const DalConfig& cfg_in) {
  if (m < 0.0 || m >= 1.0) throw ValidationError("momentum must lie in [0, 1)");
  const DalConfig cfg = validate(cfg_in);
  const double scale = curvature_scale(model, state.theta, cfg.estimator);
  const double lr = scale == 0.0 ? cfg.lr_cap : std::min(cfg.lr_cap, 1.0 / (2.0 * scale));
  const Vec g = real_gradient(model, state.theta);
  state.velocity = m * state.velocity - lr * g;
  state.theta = ParameterState::real(state.theta.real_part() + state.velocity);
  state.step_index += 1;
  state.last_lr = lr;
  state.last_drift_estimate = drift_estimate(model, state.theta, lr);
  return state;
}

PerParamDalStep per_param_dal_step(const LossModel& model, const ParameterState& theta, double p,
                                   double cap) {
  DalConfig cfg;
  cfg.p = p;
  cfg.lr_cap = cap;
  validate(cfg);
  const Vec g = real_gradient(model, theta);
  const Vec hg = model.hvp(theta, g.cast<Cx>()).real();
  Vec lr(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double denom = std::abs(hg[i]);
    lr[i] = denom < 1e-12 ? cap : std::min(cap, 2.0 / std::pow(denom, p));
  }
  return PerParamDalStep{ParameterState::real(theta.real_part() - lr.cwiseProduct(g)), lr};
}

double per_iteration_drift(const LossModel& model, const ParameterState& theta, double h,
                           double step) {
  if (!theta.is_real()) throw ValidationError("per_iteration_drift: theta must be real");
  const ParameterState gd = gd_step(model, theta, h);
  SimOptions options;
  options.step = step;
  const Trajectory ngf = euler_simulate(FlowSpec::ngf(h), model, theta, h, options);
  const CVec& end = ngf.records.back().theta;
  return (gd.values() - end).norm();
}

double drift_estimate(const LossModel& model, const ParameterState& theta, double h) {
  if (!theta.is_real()) throw ValidationError("drift_estimate: theta must be real");
  const CVec g = model.grad(theta);
  return (h * h / 2.0) * model.hvp(theta, g).norm();
}

Vec momentum_drift_estimate(const LossModel& model, const ParameterState& theta,
                            const Vec& velocity, double h, double m) {
  if (m < 0.0 || m >= 1.0) throw ValidationError("momentum must lie in [0, 1)");
  if (!theta.is_real()) throw ValidationError("momentum_drift_estimate: theta must be real");
  if (velocity.size() != theta.dim()) {
    throw ValidationError("momentum_drift_estimate: velocity dimension mismatch");
  }
  const Vec g = model.grad(theta).real();
  const Vec hg = model.hvp(theta, g.cast<Cx>()).real();
  const double om = 1.0 - m;
  return (h * h / (2.0 * om * om)) * hg + m * velocity - (h * m / om) * g;
}

double predict_dot_product(double x0, double lambda, double h, AlphaKind kind) {
  if (!(h > 0.0)) throw ValidationError("predict_dot_product: h must be positive");
  switch (kind) {
    case AlphaKind::PF:
      return x0 * (1.0 - h * lambda);
    case AlphaKind::NGF:
      return x0 * std::exp(-h * lambda);
    case AlphaKind::IGR:
      return x0 * std::exp(-h * (lambda + h * lambda * lambda / 2.0));
  }
  throw ValidationError("unknown prediction kind");
}

double taylor_optimal_lr(const LossModel& model, const ParameterState& theta) {
  const CVec g = model.grad(theta);
  const double gn = g.norm();
  if (gn == 0.0) throw ZeroGradient();
  const CVec ghat = g / gn;
  const double curvature = transposed_dot(ghat, model.hvp(theta, ghat)).real();
  if (!(curvature > 0.0)) throw NoMinimizerAlongRay();
  return 1.0 / curvature;
}

double loss_change_quadratic(const LossModel& model, const ParameterState& theta, double h) {
  if (!theta.is_real()) throw ValidationError("loss_change_quadratic: theta must be real");
  const Vec g = model.grad(theta).real();
  const Vec hg = model.hvp(theta, g.cast<Cx>()).real();
  return -h * g.squaredNorm() + (h * h / 2.0) * g.dot(hg);
}

Regime edge_state(double lambda0, double h) {
  return classify_regime(lambda0, h);
}

}  // namespace flowlab
