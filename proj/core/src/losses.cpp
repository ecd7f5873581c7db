#include "flowlab/losses.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "flowlab/format.hpp"
#include "flowlab/rng.hpp"

namespace flowlab {

namespace {
constexpr double kRealTol = 1e-12;
}

ParameterState::ParameterState(CVec values) : v_(std::move(values)) {
  if (v_.size() < 1) throw ValidationError("parameter vector must have dimension >= 1");
  if (!v_.allFinite()) throw ValidationError("parameter vector has non-finite entries");
}

ParameterState ParameterState::real(const Vec& values) {
  return ParameterState(values.cast<Cx>());
}

bool ParameterState::is_real() const {
  return v_.imag().cwiseAbs().maxCoeff() <= kRealTol;
}

void LossModel::check(const ParameterState& theta) const {
  if (theta.dim() != dim()) {
    throw ValidationError("model '" + name() + "' expects dimension " + std::to_string(dim()) +
                          ", got " + std::to_string(theta.dim()));
  }
  if (!supports_complex() && !theta.is_real()) throw UnsupportedComplexDomain(name());
}

Cx LossModel::eval(const ParameterState& theta) const {
  check(theta);
  return do_eval(theta.values());
}

CVec LossModel::grad(const ParameterState& theta) const {
  check(theta);
  return do_grad(theta.values());
}

ComplexSymMatrix LossModel::hessian(const ParameterState& theta) const {
  check(theta);
  if (dim() > kDenseCap) throw DenseCapExceeded(dim(), kDenseCap);
  CMat h = do_hessian(theta.values());
  h = ((h + h.transpose()) / 2.0).eval();  // kill rounding asymmetry
  return ComplexSymMatrix(std::move(h));
}

CVec LossModel::hvp(const ParameterState& theta, const CVec& v) const {
  check(theta);
  if (v.size() != dim()) throw ValidationError("hvp: direction dimension mismatch");
  return do_hvp(theta.values(), v);
}

CVec LossModel::do_hvp(const CVec& theta, const CVec& v) const {
  return do_hessian(theta) * v;
}

// ---------------------------------------------------------------------------
// Quadratic: E = 1/2 theta^T M theta + b^T theta + c

namespace {

class QuadraticModel final : public LossModel {
 public:
  QuadraticModel(RealSymMatrix M, Vec b, double c)
      : M_(std::move(M)), b_(std::move(b)), c_(c), Mc_(M_.entries().cast<Cx>()),
        bc_(b_.cast<Cx>()) {
    if (b_.size() != M_.dim()) throw ValidationError("quadratic: b dimension mismatch");
  }

  int dim() const override { return M_.dim(); }
  bool supports_complex() const override { return true; }
  std::string name() const override { return "quadratic"; }

  const RealSymMatrix& matrix() const { return M_; }
  const Vec& offset() const { return b_; }

 protected:
  Cx do_eval(const CVec& t) const override {
    return 0.5 * transposed_dot(t, Mc_ * t) + transposed_dot(bc_, t) + c_;
  }
  CVec do_grad(const CVec& t) const override { return Mc_ * t + bc_; }
  CMat do_hessian(const CVec&) const override { return Mc_; }
  CVec do_hvp(const CVec&, const CVec& v) const override { return Mc_ * v; }

 private:
  RealSymMatrix M_;
  Vec b_;
  double c_;
  CMat Mc_;
  CVec bc_;
};

}  // namespace

LossModelPtr make_quadratic(const RealSymMatrix& M, const Vec& b, double c) {
  return std::make_shared<QuadraticModel>(M, b, c);
}

const RealSymMatrix& quadratic_matrix(const LossModel& model) {
  const auto* q = dynamic_cast<const QuadraticModel*>(&model);
  if (!q) throw ValidationError("model '" + model.name() + "' is not a quadratic");
  return q->matrix();
}

const Vec& quadratic_offset(const LossModel& model) {
  const auto* q = dynamic_cast<const QuadraticModel*>(&model);
  if (!q) throw ValidationError("model '" + model.name() + "' is not a quadratic");
  return q->offset();
}

// ---------------------------------------------------------------------------
// Scalar square: E = 1/2 (theta - center)^2

namespace {

class ScalarSquareModel final : public LossModel {
 public:
  explicit ScalarSquareModel(double center) : center_(center) {}

  int dim() const override { return 1; }
  bool supports_complex() const override { return true; }
  std::string name() const override { return "scalar_square"; }

 protected:
  Cx do_eval(const CVec& t) const override {
    const Cx d = t[0] - center_;
    return 0.5 * d * d;
  }
  CVec do_grad(const CVec& t) const override {
    CVec g(1);
    g[0] = t[0] - center_;
    return g;
  }
  CMat do_hessian(const CVec&) const override {
    CMat h(1, 1);
    h(0, 0) = 1.0;
    return h;
  }

 private:
  double center_;
};

}  // namespace

LossModelPtr make_scalar_square(double center) {
  return std::make_shared<ScalarSquareModel>(center);
}

// ---------------------------------------------------------------------------
// Rosenbrock: E = (a - x)^2 + b_hat (y - x^2)^2

namespace {

class RosenbrockModel final : public LossModel {
 public:
  RosenbrockModel(double a, double b_hat) : a_(a), b_(b_hat) {}

  int dim() const override { return 2; }
  bool supports_complex() const override { return true; }
  std::string name() const override { return "rosenbrock"; }

 protected:
  Cx do_eval(const CVec& t) const override {
    const Cx x = t[0], y = t[1];
    const Cx u = a_ - x, w = y - x * x;
    return u * u + b_ * w * w;
  }
  CVec do_grad(const CVec& t) const override {
    const Cx x = t[0], y = t[1];
    const Cx w = y - x * x;
    CVec g(2);
    g[0] = -2.0 * (a_ - x) - 4.0 * b_ * x * w;
    g[1] = 2.0 * b_ * w;
    return g;
  }
  CMat do_hessian(const CVec& t) const override {
    const Cx x = t[0], y = t[1];
    CMat h(2, 2);
    h(0, 0) = 2.0 - 4.0 * b_ * (y - x * x) + 8.0 * b_ * x * x;
    h(0, 1) = -4.0 * b_ * x;
    h(1, 0) = h(0, 1);
    h(1, 1) = 2.0 * b_;
    return h;
  }

 private:
  double a_;
  double b_;
};

}  // namespace

LossModelPtr make_rosenbrock(double a, double b_hat) {
  return std::make_shared<RosenbrockModel>(a, b_hat);
}

// ---------------------------------------------------------------------------
// Branch loss: cos(theta) + theta on Re < 0, quadratic bowl on Re >= 0.
// The two pieces meet with matching value (1) at theta = 0 but different
// slope and curvature, so both gradient and sharpness jump across the seam.

namespace {

class CosBranchModel final : public LossModel {
 public:
  int dim() const override { return 1; }
  bool supports_complex() const override { return true; }
  std::string name() const override { return "cos_branch"; }

 protected:
  Cx do_eval(const CVec& t) const override {
    const Cx z = t[0];
    if (z.real() < 0.0) return std::cos(z) + z;
    return (z / 3.0) * (z / 3.0) + 1.0 + z / 3.0;
  }
  CVec do_grad(const CVec& t) const override {
    const Cx z = t[0];
    CVec g(1);
    g[0] = z.real() < 0.0 ? -std::sin(z) + 1.0 : 2.0 * z / 9.0 + 1.0 / 3.0;
    return g;
  }
  CMat do_hessian(const CVec& t) const override {
    const Cx z = t[0];
    CMat h(1, 1);
    h(0, 0) = z.real() < 0.0 ? -std::cos(z) : Cx(2.0 / 9.0, 0.0);
    return h;
  }
};

}  // namespace

LossModelPtr make_cos_branch() {
  return std::make_shared<CosBranchModel>();
}

// ---------------------------------------------------------------------------
// MLP with Elu(1) activations and mean squared error.

namespace {

// Forward-mode tangent bundle over a base scalar; propagating (value, tangent)
// through the gradient computation yields exact Hessian-vector products.
template <class T>
struct Dual {
  T a{};  // value
  T b{};  // tangent

  Dual() = default;
  Dual(double x) : a(x), b(0.0) {}  // NOLINT: implicit by design
  Dual(T value, T tangent) : a(std::move(value)), b(std::move(tangent)) {}
};

template <class T>
Dual<T> operator+(const Dual<T>& x, const Dual<T>& y) {
  return {x.a + y.a, x.b + y.b};
}
template <class T>
Dual<T> operator-(const Dual<T>& x, const Dual<T>& y) {
  return {x.a - y.a, x.b - y.b};
}
template <class T>
Dual<T> operator*(const Dual<T>& x, const Dual<T>& y) {
  return {x.a * y.a, x.a * y.b + x.b * y.a};
}
template <class T>
Dual<T> operator*(double s, const Dual<T>& x) {
  return {s * x.a, s * x.b};
}
template <class T>
Dual<T> exp_s(const Dual<T>& x) {
  const T e = std::exp(x.a);
  return {e, e * x.b};
}
inline Cx exp_s(const Cx& x) { return std::exp(x); }
inline double re_part(const Cx& x) { return x.real(); }
template <class T>
double re_part(const Dual<T>& x) {
  return re_part(x.a);
}

template <class S>
S elu(const S& z) {
  if (re_part(z) > 0.0) return z;
  return exp_s(z) - S(1.0);
}
template <class S>
S elu_prime(const S& z) {
  if (re_part(z) > 0.0) return S(1.0);
  return exp_s(z);
}

struct Packing {
  // Offsets of W_l and b_l inside the flat parameter vector.
  std::vector<int> w_off, b_off;
  int total = 0;
};

Packing make_packing(const std::vector<int>& widths) {
  Packing p;
  int off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    p.w_off.push_back(off);
    off += widths[l + 1] * widths[l];
    p.b_off.push_back(off);
    off += widths[l + 1];
  }
  p.total = off;
  return p;
}

// Mean-squared-error loss and (optionally) its gradient for generic scalar S.
// theta layout: per layer, W row-major (out x in) then bias.
template <class S>
S mlp_loss_grad(const std::vector<int>& widths, const Packing& pack, const Mat& inputs,
                const Vec& targets, const std::vector<S>& theta, std::vector<S>* grad_out) {
  const int n = static_cast<int>(inputs.rows());
  const int layers = static_cast<int>(widths.size()) - 1;
  if (grad_out) grad_out->assign(pack.total, S(0.0));
  S loss(0.0);
  const double inv_n = 1.0 / n;

  std::vector<std::vector<S>> acts(layers + 1);  // activations entering each layer
  std::vector<std::vector<S>> pre(layers);       // pre-activations
  for (int ex = 0; ex < n; ++ex) {
    acts[0].assign(widths[0], S(0.0));
    for (int i = 0; i < widths[0]; ++i) acts[0][i] = S(inputs(ex, i));

    for (int l = 0; l < layers; ++l) {
      const int out_w = widths[l + 1], in_w = widths[l];
      pre[l].assign(out_w, S(0.0));
      for (int o = 0; o < out_w; ++o) {
        S z = theta[pack.b_off[l] + o];
        for (int i = 0; i < in_w; ++i) {
          z = z + theta[pack.w_off[l] + o * in_w + i] * acts[l][i];
        }
        pre[l][o] = z;
      }
      acts[l + 1].assign(out_w, S(0.0));
      const bool last = (l == layers - 1);
      for (int o = 0; o < out_w; ++o) {
        acts[l + 1][o] = last ? pre[l][o] : elu(pre[l][o]);
      }
    }

    const S resid = acts[layers][0] - S(targets[ex]);
    loss = loss + inv_n * (resid * resid);
    if (!grad_out) continue;

    std::vector<S> delta{(2.0 * inv_n) * resid};  // output layer is linear
    for (int l = layers - 1; l >= 0; --l) {
      const int out_w = widths[l + 1], in_w = widths[l];
      for (int o = 0; o < out_w; ++o) {
        (*grad_out)[pack.b_off[l] + o] = (*grad_out)[pack.b_off[l] + o] + delta[o];
        for (int i = 0; i < in_w; ++i) {
          auto& slot = (*grad_out)[pack.w_off[l] + o * in_w + i];
          slot = slot + delta[o] * acts[l][i];
        }
      }
      if (l == 0) break;
      std::vector<S> next(in_w, S(0.0));
      for (int i = 0; i < in_w; ++i) {
        S acc(0.0);
        for (int o = 0; o < out_w; ++o) {
          acc = acc + theta[pack.w_off[l] + o * in_w + i] * delta[o];
        }
        next[i] = acc * elu_prime(pre[l - 1][i]);
      }
      delta = std::move(next);
    }
  }
  return loss;
}

class MLPModel final : public LossModel {
 public:
  MLPModel(MLPSpec spec, MLPDataset data)
      : spec_(std::move(spec)), data_(std::move(data)), pack_(make_packing(spec_.widths)) {}

  int dim() const override { return pack_.total; }
  bool supports_complex() const override { return true; }
  std::string name() const override { return "mlp"; }

 protected:
  Cx do_eval(const CVec& t) const override {
    std::vector<Cx> theta(t.data(), t.data() + t.size());
    return mlp_loss_grad<Cx>(spec_.widths, pack_, data_.inputs, data_.targets, theta, nullptr);
  }

  CVec do_grad(const CVec& t) const override {
    std::vector<Cx> theta(t.data(), t.data() + t.size());
    std::vector<Cx> grad;
    mlp_loss_grad<Cx>(spec_.widths, pack_, data_.inputs, data_.targets, theta, &grad);
    return Eigen::Map<const CVec>(grad.data(), static_cast<Eigen::Index>(grad.size()));
  }

  CVec do_hvp(const CVec& t, const CVec& v) const override {
    std::vector<Dual<Cx>> theta(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) theta[i] = Dual<Cx>(t[i], v[i]);
    std::vector<Dual<Cx>> grad;
    mlp_loss_grad<Dual<Cx>>(spec_.widths, pack_, data_.inputs, data_.targets, theta, &grad);
    CVec out(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) out[i] = grad[i].b;
    return out;
  }

  CMat do_hessian(const CVec& t) const override {
    const int d = dim();
    CMat h(d, d);
    CVec basis = CVec::Zero(d);
    for (int j = 0; j < d; ++j) {
      basis[j] = 1.0;
      h.col(j) = do_hvp(t, basis);
      basis[j] = 0.0;
    }
    return h;
  }

 private:
  MLPSpec spec_;
  MLPDataset data_;
  Packing pack_;
};

void validate_spec(const MLPSpec& spec) {
  if (spec.widths.size() < 2) throw ValidationError("mlp: need at least input and output widths");
  for (int w : spec.widths) {
    if (w < 1) throw ValidationError("mlp: widths must be positive");
  }
  if (spec.widths.back() != 1) throw ValidationError("mlp: output width must be 1");
  if (spec.n_examples < 1) throw ValidationError("mlp: need at least one example");
}

}  // namespace

int MLPSpec::param_count() const {
  return make_packing(widths).total;
}

MLPDataset make_mlp_dataset(const MLPSpec& spec) {
  validate_spec(spec);
  Rng rng(derive_seed(spec.seed, 0));
  MLPDataset data;
  data.inputs.resize(spec.n_examples, spec.widths.front());
  for (int ex = 0; ex < spec.n_examples; ++ex) {
    for (int i = 0; i < spec.widths.front(); ++i) data.inputs(ex, i) = rng.gaussian();
  }
  data.targets.resize(spec.n_examples);
  for (int ex = 0; ex < spec.n_examples; ++ex) data.targets[ex] = rng.gaussian();
  return data;
}

std::string dataset_csv(const MLPDataset& data) {
  std::string out;
  for (int i = 0; i < data.inputs.cols(); ++i) {
    out += "x" + std::to_string(i) + ",";
  }
  out += "y\n";
  for (int ex = 0; ex < data.inputs.rows(); ++ex) {
    for (int i = 0; i < data.inputs.cols(); ++i) {
      out += format_double(data.inputs(ex, i)) + ",";
    }
    out += format_double(data.targets[ex]) + "\n";
  }
  return out;
}

LossModelPtr make_mlp(const MLPSpec& spec) {
  validate_spec(spec);
  return std::make_shared<MLPModel>(spec, make_mlp_dataset(spec));
}

Vec mlp_initial_parameters(const MLPSpec& spec) {
  validate_spec(spec);
  const Packing pack = make_packing(spec.widths);
  Rng rng(derive_seed(spec.seed, 1));
  Vec theta = Vec::Zero(pack.total);
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.widths[l]));
    const int count = spec.widths[l + 1] * spec.widths[l];
    for (int i = 0; i < count; ++i) theta[pack.w_off[l] + i] = scale * rng.gaussian();
    // biases stay zero
  }
  return theta;
}

// ---------------------------------------------------------------------------

CVec hgp_fd(const LossModel& model, const ParameterState& theta) {
  const CVec g = model.grad(theta);
  const double gn = g.norm();
  if (gn == 0.0) throw ZeroGradient();
  const double eps = 0.01 / gn;
  const ParameterState shifted(theta.values() + eps * g);
  return (model.grad(shifted) - g) / eps;
}

CVec directional_third(const LossModel& model, const ParameterState& theta, const CVec& v) {
  if (v.size() != theta.dim()) throw ValidationError("directional_third: dimension mismatch");
  const double vn = v.norm();
  if (vn == 0.0) return CVec::Zero(v.size());
  const double eps =
      std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + theta.norm());
  const CVec vhat = v / vn;
  const ParameterState plus(theta.values() + eps * vhat);
  const ParameterState minus(theta.values() - eps * vhat);
  return (model.hvp(plus, v) - model.hvp(minus, v)) * (vn / (2.0 * eps));
}

}  // namespace flowlab
