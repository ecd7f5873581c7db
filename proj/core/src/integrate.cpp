#include "flowlab/integrate.hpp"

#include <cmath>
#include <numbers>

namespace flowlab {

namespace {

TrajectoryRecord make_record(const LossModel& model, const ParameterState& theta, double t,
                             double h, const Spectrum* spectrum) {
  TrajectoryRecord rec;
  rec.t = t;
  rec.theta = theta.values();
  rec.loss = model.eval(theta);
  const CVec g = model.grad(theta);
  rec.grad_norm = g.norm();
  if (spectrum && spectrum->count() > 0) {
    const Cx lambda0 = spectrum->eigenvalues[0];
    rec.lambda0 = lambda0.real();
    const Cx z = h * lambda0;
    if (std::abs(Cx(1.0, 0.0) - z) >= kSingularTol) {
      rec.sc0 = alpha(AlphaKind::PF, z) * transposed_dot(g, CVec(spectrum->eigenvectors.col(0)));
    }
  }
  return rec;
}

}  // namespace

Trajectory euler_simulate(const FlowSpec& spec, const LossModel& model,
                          const ParameterState& theta0, double total_time,
                          const SimOptions& options) {
  validate(spec);
  if (!(total_time >= 0.0) || !std::isfinite(total_time)) {
    throw ValidationError("euler_simulate: total_time must be non-negative and finite");
  }
  if (!(options.step > 0.0)) throw ValidationError("euler_simulate: step must be positive");
  if (options.sample_every < 0 || options.spectrum_refresh < 0) {
    throw ValidationError("euler_simulate: sampling/refresh intervals must be non-negative");
  }

  Trajectory traj;
  traj.spec = spec;
  traj.model_name = model.name();
  traj.step = options.step;
  traj.sample_every =
      options.sample_every > 0
          ? options.sample_every
          : static_cast<int>(std::max<long long>(1, std::llround(spec.h / options.step)));
  traj.spectrum_refresh =
      options.spectrum_refresh > 0 ? options.spectrum_refresh : (model.dim() <= 50 ? 1 : 20);

  const long long n_total = std::llround(total_time / options.step);
  const bool needs_spectrum = spec.needs_spectrum();

  ParameterState theta = theta0;
  Spectrum spectrum;

  for (long long k = 0;; ++k) {
    const bool is_final = (k == n_total);
    const bool record_now = (k % traj.sample_every == 0);
    if (needs_spectrum && ((!is_final && k % traj.spectrum_refresh == 0) ||
                           (is_final && record_now))) {
      spectrum = hessian_spectrum(model, theta);
      traj.near_defective = traj.near_defective || spectrum.near_defective;
    }
    if (record_now) {
      const Spectrum* rec_spectrum = nullptr;
      Spectrum local;
      if (needs_spectrum) {
        rec_spectrum = &spectrum;
      } else if (options.record_spectrum) {
        local = hessian_spectrum(model, theta);
        traj.near_defective = traj.near_defective || local.near_defective;
        rec_spectrum = &local;
      }
      traj.records.push_back(
          make_record(model, theta, static_cast<double>(k) * options.step, spec.h, rec_spectrum));
    }
    if (is_final) break;

    const CVec velocity = needs_spectrum ? field(spec, model, theta, spectrum)
                                         : field(spec, model, theta);
    CVec next = theta.values() + options.step * velocity;
    if (!next.allFinite() || next.norm() > options.divergence_guard) {
      traj.diverged = true;
      break;
    }
    theta = ParameterState(std::move(next));
  }
  return traj;
}

ParameterState quadratic_pf_exact(const RealSymMatrix& M, const Vec& b,
                                  const ParameterState& theta0, double h, double t) {
  if (!(h > 0.0)) throw ValidationError("quadratic_pf_exact: h must be positive");
  if (!(t >= 0.0)) throw ValidationError("quadratic_pf_exact: t must be non-negative");
  if (b.size() != M.dim() || theta0.dim() != M.dim()) {
    throw ValidationError("quadratic_pf_exact: dimension mismatch");
  }
  const Spectrum s = sym_eigh(M);
  const CVec bc = b.cast<Cx>();
  CVec out = CVec::Zero(M.dim());
  for (int i = 0; i < s.count(); ++i) {
    const double lambda = s.eigenvalues[i].real();
    const CVec u = s.eigenvectors.col(i);
    const double w = 1.0 - h * lambda;
    const Cx theta_coeff = transposed_dot(theta0.values(), u);
    const Cx b_coeff = transposed_dot(bc, u);
    Cx factor;
    if (std::abs(w) < kSingularTol) {
      // Collapse: GD reaches the minimum along u in one step.
      factor = (t == 0.0) ? Cx(1.0, 0.0) : Cx(0.0, 0.0);
      if (std::abs(b_coeff) > 0.0) throw Singular(i);
    } else if (w > 0.0) {
      factor = Cx(std::pow(w, t / h), 0.0);
      out += (t * alpha(AlphaKind::PF, Cx(h * lambda, 0.0)) * b_coeff) * u;
    } else {
      const double mag = std::pow(-w, t / h);
      const double phase = std::numbers::pi * t / h;
      factor = mag * Cx(std::cos(phase), std::sin(phase));
      out += (t * alpha(AlphaKind::PF, Cx(h * lambda, 0.0)) * b_coeff) * u;
    }
    out += factor * theta_coeff * u;
  }
  return ParameterState(std::move(out));
}

Cx scalar_pf_exact(double h, Cx z0, double t) {
  if (!(h > 0.0)) throw ValidationError("scalar_pf_exact: h must be positive");
  if (!(t >= 0.0)) throw ValidationError("scalar_pf_exact: t must be non-negative");
  if (std::abs(1.0 - h) < kSingularTol) throw Singular(0);
  if (h < 1.0) return std::pow(1.0 - h, t / h) * z0;
  const double mag = std::pow(h - 1.0, t / h);
  const double phase = std::numbers::pi * t / h;
  return mag * Cx(std::cos(phase), std::sin(phase)) * z0;
}

std::vector<double> flow_vs_gd_error(const FlowSpec& spec, const LossModel& model,
                                     const ParameterState& theta0, double h, int n_steps,
                                     double step) {
  if (!(h > 0.0)) throw ValidationError("flow_vs_gd_error: h must be positive");
  if (n_steps < 1) throw ValidationError("flow_vs_gd_error: need at least one step");

  SimOptions options;
  options.step = step;
  options.sample_every = std::max<long long>(1, std::llround(h / step));
  const Trajectory traj =
      euler_simulate(spec, model, theta0, static_cast<double>(n_steps) * h, options);

  constexpr double kGuard = 1e12;
  std::vector<double> errors;
  CVec gd = theta0.values();
  for (int k = 1; k <= n_steps; ++k) {
    gd -= h * model.grad(ParameterState(gd));
    if (!gd.allFinite() || gd.norm() > kGuard) break;
    if (static_cast<std::size_t>(k) >= traj.records.size()) break;
    errors.push_back((gd - traj.records[static_cast<std::size_t>(k)].theta).norm());
  }
  return errors;
}

}  // namespace flowlab
