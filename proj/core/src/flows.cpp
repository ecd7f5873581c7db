#include "flowlab/flows.hpp"

#include <cmath>
#include <numbers>

namespace flowlab {

namespace {

FlowSpec make_spec(FlowKind kind, double h, int order = 0, double momentum = 0.0) {
  FlowSpec s;
  s.kind = kind;
  s.h = h;
  s.order = order;
  s.momentum = momentum;
  return validate(s);
}

// Principal-branch log(1 - z) that treats exactly-real z explicitly: complex
// arithmetic can turn 1 - z into a negative real with a -0.0 imaginary part,
// which would silently pick arg = -pi instead of +pi.
Cx principal_log_one_minus(Cx z) {
  if (z.imag() == 0.0) {
    const double w = 1.0 - z.real();
    if (w > 0.0) return Cx(std::log(w), 0.0);
    return Cx(std::log(-w), std::numbers::pi);
  }
  return std::log(Cx(1.0, 0.0) - z);
}

CriticalLabel label_of(Cx jacobian) {
  if (jacobian.real() < 0.0) return CriticalLabel::Attracting;
  if (jacobian.real() > 0.0) return CriticalLabel::Repelling;
  return CriticalLabel::Marginal;
}

CVec spectrum_field(const FlowSpec& spec, const LossModel& model, const ParameterState& theta,
                    const CVec& g, const Spectrum& s) {
  const int count = s.count();
  CVec out;
  switch (spec.kind) {
    case FlowKind::PF:
    case FlowKind::PFPlusNonPrincipal: {
      // Complete spectrum: exact resummation. Top-k spectrum: exact factors on
      // the computed directions, NGF on the orthogonal remainder.
      out = s.complete ? CVec(CVec::Zero(g.size())) : CVec(-g);
      for (int i = 0; i < count; ++i) {
        const Cx z = spec.h * s.eigenvalues[i];
        if (std::abs(Cx(1.0, 0.0) - z) < kSingularTol) throw Singular(i);
        const Cx a = alpha(AlphaKind::PF, z);
        const Cx d = transposed_dot(g, CVec(s.eigenvectors.col(i)));
        const Cx coeff = s.complete ? a : a + 1.0;
        out += coeff * d * s.eigenvectors.col(i);
      }
      if (spec.kind == FlowKind::PFPlusNonPrincipal) {
        out -= (spec.h * spec.h / 12.0) * directional_third(model, theta, g);
      }
      return out;
    }
    case FlowKind::FlippedTop: {
      if (count < 1) throw ValidationError("flipped_top: empty spectrum");
      const Cx d0 = transposed_dot(g, CVec(s.eigenvectors.col(0)));
      if (s.complete) {
        out = CVec(CVec::Zero(g.size()));
        out += d0 * s.eigenvectors.col(0);
        for (int i = 1; i < count; ++i) {
          const Cx d = transposed_dot(g, CVec(s.eigenvectors.col(i)));
          out -= d * s.eigenvectors.col(i);
        }
      } else {
        // -g flips every component; restore the top direction twice.
        out = -g + 2.0 * d0 * s.eigenvectors.col(0);
      }
      return out;
    }
    default:
      throw ValidationError("flow kind does not take a spectrum");
  }
}

}  // namespace

std::string flow_kind_name(FlowKind kind) {
  switch (kind) {
    case FlowKind::NGF: return "ngf";
    case FlowKind::IGR: return "igr";
    case FlowKind::ThirdOrder: return "third_order";
    case FlowKind::TruncatedSeries: return "truncated";
    case FlowKind::PF: return "pf";
    case FlowKind::PFPlusNonPrincipal: return "pf_nonprincipal";
    case FlowKind::PositiveGradient: return "positive_gradient";
    case FlowKind::FlippedTop: return "flipped_top";
    case FlowKind::MomentumFlow: return "momentum_flow";
  }
  throw ValidationError("unknown flow kind");
}

FlowSpec FlowSpec::ngf(double h) { return make_spec(FlowKind::NGF, h); }
FlowSpec FlowSpec::igr(double h) { return make_spec(FlowKind::IGR, h); }
FlowSpec FlowSpec::third_order(double h) { return make_spec(FlowKind::ThirdOrder, h); }
FlowSpec FlowSpec::truncated(double h, int order) {
  return make_spec(FlowKind::TruncatedSeries, h, order);
}
FlowSpec FlowSpec::pf(double h) { return make_spec(FlowKind::PF, h); }
FlowSpec FlowSpec::pf_nonprincipal(double h) {
  return make_spec(FlowKind::PFPlusNonPrincipal, h);
}
FlowSpec FlowSpec::positive_gradient(double h) {
  return make_spec(FlowKind::PositiveGradient, h);
}
FlowSpec FlowSpec::flipped_top(double h) { return make_spec(FlowKind::FlippedTop, h); }
FlowSpec FlowSpec::momentum_flow(double h, double m) {
  return make_spec(FlowKind::MomentumFlow, h, 0, m);
}

FlowSpec validate(FlowSpec spec) {
  if (!(spec.h > 0.0) || !std::isfinite(spec.h)) {
    throw ValidationError("flow: step size h must be positive and finite");
  }
  if (spec.order < 0) throw ValidationError("flow: truncation order must be >= 0");
  if (spec.momentum < 0.0 || spec.momentum >= 1.0) {
    throw ValidationError("flow: momentum must lie in [0, 1)");
  }
  return spec;
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::RealStable: return "RealStable";
    case Regime::ComplexStable: return "ComplexStable";
    case Regime::UnstableComplex: return "UnstableComplex";
    case Regime::Collapse: return "Collapse";
  }
  throw ValidationError("unknown regime");
}

Regime classify_regime(double lambda, double h) {
  if (!(h > 0.0)) throw ValidationError("classify_regime: h must be positive");
  if (std::abs(1.0 - h * lambda) < kSingularTol) return Regime::Collapse;
  if (lambda < 1.0 / h) return Regime::RealStable;
  if (lambda < 2.0 / h) return Regime::ComplexStable;
  return Regime::UnstableComplex;
}

Cx alpha(AlphaKind kind, Cx z) {
  switch (kind) {
    case AlphaKind::NGF:
      return Cx(-1.0, 0.0);
    case AlphaKind::IGR:
      return -(Cx(1.0, 0.0) + z / 2.0);
    case AlphaKind::PF: {
      if (std::abs(Cx(1.0, 0.0) - z) < kSingularTol) throw Singular(-1);
      if (std::abs(z) < 1e-6) {
        // log(1 - z)/z loses all digits near z = 0; four series terms give
        // full double accuracy for |z| < 1e-6.
        return -1.0 - z / 2.0 - z * z / 3.0 - z * z * z / 4.0;
      }
      return principal_log_one_minus(z) / z;
    }
  }
  throw ValidationError("unknown alpha kind");
}

Spectrum hessian_spectrum(const LossModel& model, const ParameterState& theta) {
  const CVec g = model.grad(theta);
  Spectrum s;
  if (theta.is_real()) {
    const ComplexSymMatrix H = model.hessian(theta);
    s = sym_eigh(RealSymMatrix(H.entries().real()));
  } else {
    s = complex_eig(model.hessian(theta), DefectivePolicy::Warn);
  }
  return orient_spectrum(std::move(s), g);
}

Spectrum hessian_spectrum_topk(const LossModel& model, const ParameterState& theta, int k,
                               std::uint64_t seed) {
  if (!theta.is_real()) {
    throw ValidationError("top-k spectrum requires a real parameter point");
  }
  const LinOp apply = [&model, &theta](const Vec& v) -> Vec {
    return model.hvp(theta, v.cast<Cx>()).real();
  };
  Spectrum s = lanczos_topk(apply, theta.dim(), k, seed);
  return orient_spectrum(std::move(s), model.grad(theta));
}

CVec field(const FlowSpec& spec, const LossModel& model, const ParameterState& theta) {
  validate(spec);
  const CVec g = model.grad(theta);
  switch (spec.kind) {
    case FlowKind::NGF:
      return -g;
    case FlowKind::PositiveGradient:
      return g;
    case FlowKind::MomentumFlow:
      return -g / (1.0 - spec.momentum);
    case FlowKind::IGR:
      return -g - (spec.h / 2.0) * model.hvp(theta, g);
    case FlowKind::TruncatedSeries: {
      CVec acc = CVec::Zero(g.size());
      CVec power = g;  // H^p g by iterated products, never a matrix power
      double hp = 1.0;
      for (int p = 0; p <= spec.order; ++p) {
        acc += (-hp / (p + 1.0)) * power;
        if (p < spec.order) {
          power = model.hvp(theta, power);
          hp *= spec.h;
        }
      }
      return acc;
    }
    case FlowKind::ThirdOrder: {
      const CVec series = field(FlowSpec::truncated(spec.h, 2), model, theta);
      return series -
             (spec.h * spec.h / 12.0) * directional_third(model, theta, g);
    }
    case FlowKind::PF:
    case FlowKind::PFPlusNonPrincipal:
    case FlowKind::FlippedTop: {
      const Spectrum s = hessian_spectrum(model, theta);
      return spectrum_field(spec, model, theta, g, s);
    }
  }
  throw ValidationError("unknown flow kind");
}

CVec field(const FlowSpec& spec, const LossModel& model, const ParameterState& theta,
           const Spectrum& spectrum) {
  validate(spec);
  if (!spec.needs_spectrum()) return field(spec, model, theta);
  const CVec g = model.grad(theta);
  return spectrum_field(spec, model, theta, g, spectrum);
}

StabilityReport stability_report(const ParameterState& theta, const CVec& grad,
                                 const Spectrum& spectrum, double h) {
  if (!(h > 0.0)) throw ValidationError("stability_report: h must be positive");
  StabilityReport report;
  report.h = h;
  report.threshold = 2.0 / h;
  report.complete = spectrum.complete;
  report.near_defective = spectrum.near_defective;
  if (spectrum.count() < 1) throw ValidationError("stability_report: empty spectrum");
  report.lambda0 = spectrum.eigenvalues[0].real();
  for (int i = 0; i < spectrum.count(); ++i) {
    DirectionReport dir;
    dir.index = i;
    dir.lambda = spectrum.eigenvalues[i];
    dir.g_dot_u = transposed_dot(grad, CVec(spectrum.eigenvectors.col(i)));
    const Cx z = h * dir.lambda;
    dir.regime = classify_regime(dir.lambda.real(), h);
    if (std::abs(Cx(1.0, 0.0) - z) < kSingularTol) {
      dir.regime = Regime::Collapse;
      dir.singular = true;
    } else {
      dir.alpha_pf = alpha(AlphaKind::PF, z);
      dir.contribution = dir.alpha_pf * dir.g_dot_u;
    }
    report.directions.push_back(dir);
  }
  (void)theta;
  return report;
}

StabilityReport stability_report(const LossModel& model, const ParameterState& theta, double h) {
  const CVec g = model.grad(theta);
  const Spectrum s = hessian_spectrum(model, theta);
  return stability_report(theta, g, s, h);
}

Cx loss_rate(const LossModel& model, const ParameterState& theta, double h, AlphaKind kind) {
  if (!(h > 0.0)) throw ValidationError("loss_rate: h must be positive");
  const CVec g = model.grad(theta);
  const Spectrum s = hessian_spectrum(model, theta);
  Cx rate(0.0, 0.0);
  for (int i = 0; i < s.count(); ++i) {
    const Cx z = h * s.eigenvalues[i];
    if (kind == AlphaKind::PF && std::abs(Cx(1.0, 0.0) - z) < kSingularTol) throw Singular(i);
    const Cx d = transposed_dot(g, CVec(s.eigenvectors.col(i)));
    rate += alpha(kind, z) * d * d;
  }
  return rate;
}

std::vector<CriticalDirectionReport> critical_point_analysis(const Spectrum& s, double h) {
  if (!(h > 0.0)) throw ValidationError("critical_point_analysis: h must be positive");
  std::vector<CriticalDirectionReport> out;
  out.reserve(s.count());
  for (int i = 0; i < s.count(); ++i) {
    CriticalDirectionReport r;
    r.index = i;
    r.lambda = s.eigenvalues[i];
    const Cx z = h * r.lambda;
    r.ngf = -r.lambda;
    r.igr = -(r.lambda + h * r.lambda * r.lambda / 2.0);
    r.ngf_label = label_of(r.ngf);
    r.igr_label = label_of(r.igr);
    if (std::abs(Cx(1.0, 0.0) - z) < kSingularTol) {
      r.pf_singular = true;
      r.pf_label = CriticalLabel::Marginal;
    } else {
      r.pf = principal_log_one_minus(z) / h;
      r.pf_label = label_of(r.pf);
    }
    out.push_back(r);
  }
  return out;
}

NonPrincipalReport nonprincipal_decomposition(const LossModel& model, const ParameterState& theta,
                                              double h) {
  if (!(h > 0.0)) throw ValidationError("nonprincipal_decomposition: h must be positive");
  if (!theta.is_real()) {
    throw ValidationError("nonprincipal_decomposition: defined at real parameter points");
  }
  const CVec g = model.grad(theta);
  NonPrincipalReport report;
  report.raw_term = directional_third(model, theta, g);
  const Spectrum s = hessian_spectrum(model, theta);
  CVec summed = CVec::Zero(g.size());
  for (int i = 0; i < s.count(); ++i) {
    const Cx d = transposed_dot(g, CVec(s.eigenvectors.col(i)));
    CVec entry = (d * d) * directional_third(model, theta, CVec(s.eigenvectors.col(i)));
    summed += entry;
    report.per_direction.push_back(std::move(entry));
  }
  const double tn = report.raw_term.norm();
  report.mismatch = tn > 0.0 ? (report.raw_term - summed).norm() / tn : 0.0;
  return report;
}

}  // namespace flowlab
