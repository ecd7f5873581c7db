#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>

#include "flowlab/errors.hpp"

namespace flowlab {

using Cx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Plain transposed dot product sum_i a_i * b_i, with no conjugation. Complex
// loss surfaces here are analytic continuations, so every inner product in the
// formulas is the bilinear one; Eigen's .dot() conjugates and must not be used.
inline Cx transposed_dot(const CVec& a, const CVec& b) {
  return (a.transpose() * b)(0);
}

// Real square matrix validated symmetric on construction (max |A - A^T| <= 1e-10).
class RealSymMatrix {
 public:
  explicit RealSymMatrix(Mat m);
  int dim() const { return static_cast<int>(m_.rows()); }
  const Mat& entries() const { return m_; }

 private:
  Mat m_;
};

// Complex square matrix validated symmetric (not Hermitian) on construction.
class ComplexSymMatrix {
 public:
  explicit ComplexSymMatrix(CMat m);
  int dim() const { return static_cast<int>(m_.rows()); }
  const CMat& entries() const { return m_; }

 private:
  CMat m_;
};

// Eigenpairs sorted by descending real part; ties within 1e-12 on the real
// part break by descending imaginary part, then by pre-sort index. Column i of
// eigenvectors pairs with eigenvalues[i] and has unit Euclidean norm.
struct Spectrum {
  CVec eigenvalues;
  CMat eigenvectors;
  int dim = 0;           // ambient dimension
  bool complete = true;  // false when only a top-k subspace was computed
  bool near_defective = false;
  std::optional<CVec> orientation_reference;

  int count() const { return static_cast<int>(eigenvalues.size()); }
};

// Dense symmetric eigendecomposition. Eigenvalues are real (zero imaginary
// part) and eigenvectors orthonormal to 1e-8.
Spectrum sym_eigh(const RealSymMatrix& H);

enum class DefectivePolicy { Throw, Warn };

// Dense eigendecomposition of a complex symmetric matrix. Eigenvectors are
// scaled to unit norm; if the eigenvector matrix has condition number above
// 1e8 the matrix is treated as numerically defective: policy Throw raises
// DefectiveMatrix, policy Warn returns the result with near_defective set.
Spectrum complex_eig(const ComplexSymMatrix& H, DefectivePolicy policy = DefectivePolicy::Throw);

using LinOp = std::function<Vec(const Vec&)>;

// Top-k eigenpairs of a symmetric operator given only matrix-vector products.
// Lanczos with full reorthogonalization; on near-zero beta before k vectors
// are available the iteration restarts from a fresh seeded vector (at most 3
// restarts) and then raises LanczosBreakdown. Deterministic for a fixed seed.
Spectrum lanczos_topk(const LinOp& apply, int dim, int k, int iters, std::uint64_t seed);

// Same with the default iteration budget min(dim, 4k + 20).
Spectrum lanczos_topk(const LinOp& apply, int dim, int k, std::uint64_t seed);

// Deterministic eigenvector sign convention: flip column i when
// Re(g^T u_i) < 0; when that product is exactly zero, make the first nonzero
// component have positive real part (positive imaginary part if its real part
// is zero). Records g so callers can tell how the result was oriented.
// Idempotent, and total for g orthogonal to some eigenvector.
Spectrum orient_spectrum(Spectrum s, const CVec& g);

}  // namespace flowlab
