#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "flowlab/numlin.hpp"

namespace flowlab {

// Parameter vector over the complex field. Real trajectories stay exactly
// real: every model keeps zero imaginary parts closed under its arithmetic.
class ParameterState {
 public:
  ParameterState() = default;
  explicit ParameterState(CVec values);
  static ParameterState real(const Vec& values);

  const CVec& values() const { return v_; }
  Vec real_part() const { return v_.real(); }
  int dim() const { return static_cast<int>(v_.size()); }
  bool is_real() const;  // max |Im| <= 1e-12
  double norm() const { return v_.norm(); }

 private:
  CVec v_;
};

// Differentiable scalar loss. Derivatives are exact (closed form or exact
// algorithmic differentiation), never finite differences. Public entry points
// validate the parameter domain; hessian() additionally enforces the dense
// dimension cap. hvp never materializes the Hessian for models that provide
// a matrix-free product.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual int dim() const = 0;
  virtual bool supports_complex() const = 0;
  virtual std::string name() const = 0;

  Cx eval(const ParameterState& theta) const;
  CVec grad(const ParameterState& theta) const;
  ComplexSymMatrix hessian(const ParameterState& theta) const;
  CVec hvp(const ParameterState& theta, const CVec& v) const;

  static constexpr int kDenseCap = 5000;

 protected:
  virtual Cx do_eval(const CVec& theta) const = 0;
  virtual CVec do_grad(const CVec& theta) const = 0;
  virtual CMat do_hessian(const CVec& theta) const = 0;
  virtual CVec do_hvp(const CVec& theta, const CVec& v) const;  // default: dense product

  void check(const ParameterState& theta) const;
};

using LossModelPtr = std::shared_ptr<const LossModel>;

// E(theta) = 1/2 theta^T M theta + b^T theta + c with symmetric real M.
LossModelPtr make_quadratic(const RealSymMatrix& M, const Vec& b, double c);

// Convenience accessors for the quadratic model (used by the exact solver).
const RealSymMatrix& quadratic_matrix(const LossModel& model);
const Vec& quadratic_offset(const LossModel& model);

// E(theta) = 1/2 (theta - center)^2 in one dimension.
LossModelPtr make_scalar_square(double center = 0.0);

// E(x, y) = (a - x)^2 + b_hat (y - x^2)^2.
LossModelPtr make_rosenbrock(double a = 1.0, double b_hat = 100.0);

// One-dimensional piecewise-analytic branch loss:
//   Re(theta) <  0 : cos(theta) + theta
//   Re(theta) >= 0 : (theta/3)^2 + 1 + theta/3
LossModelPtr make_cos_branch();

// Fully connected Elu network trained by mean squared error.
struct MLPSpec {
  std::vector<int> widths{2, 10, 1};
  int n_examples = 5;
  std::uint64_t seed = 0;

  int param_count() const;
};

struct MLPDataset {
  Mat inputs;   // n_examples x in_dim, standard normal
  Vec targets;  // n_examples, standard normal
};

MLPDataset make_mlp_dataset(const MLPSpec& spec);
std::string dataset_csv(const MLPDataset& data);  // header x0,...,y

// The loss is E(theta) = (1/n) sum_i (f(x_i; theta) - y_i)^2 with Elu(alpha=1)
// hidden activations. Parameters pack as [W1 row-major, b1, W2 row-major, b2, ...].
LossModelPtr make_mlp(const MLPSpec& spec);

// Seeded init: weights Gaussian with scale 1/sqrt(fan_in), biases zero. The
// weight stream is derived from spec.seed independently of the dataset stream.
Vec mlp_initial_parameters(const MLPSpec& spec);

// g^T H g / ||g||-scaled curvature probe by forward differences of the
// gradient: (grad(theta + eps g) - grad(theta)) / eps with eps = 0.01/||g||.
// Throws ZeroGradient when ||grad|| = 0.
CVec hgp_fd(const LossModel& model, const ParameterState& theta);

// Third-derivative contraction D3E[v, v, .] by central differences of exact
// Hessian-vector products along v-hat, eps = cbrt(machine eps) * (1 + ||theta||).
// Exactly zero for quadratic models; v = 0 returns the zero vector.
CVec directional_third(const LossModel& model, const ParameterState& theta, const CVec& v);

}  // namespace flowlab
