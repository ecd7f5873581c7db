#include "flowlab/numlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "flowlab/rng.hpp"

namespace flowlab {

namespace {

constexpr double kSymTol = 1e-10;
constexpr double kTieTol = 1e-12;
constexpr double kDefectiveCond = 1e8;

void check_square(Eigen::Index rows, Eigen::Index cols) {
  if (rows == 0 || rows != cols) {
    throw ValidationError("matrix must be square and non-empty");
  }
}

// Sort eigenpairs by descending real part; runs of eigenvalues whose real
// parts agree within kTieTol re-sort by descending imaginary part, keeping
// the pre-sort index as the final tie-break.
void sort_spectrum(CVec& values, CMat& vectors) {
  const int n = static_cast<int>(values.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (values[a].real() != values[b].real()) return values[a].real() > values[b].real();
    if (values[a].imag() != values[b].imag()) return values[a].imag() > values[b].imag();
    return a < b;
  });
  // Tolerance-based tie pass: re-sort each near-equal run by imaginary part.
  int start = 0;
  while (start < n) {
    int end = start + 1;
    while (end < n &&
           std::abs(values[idx[end]].real() - values[idx[end - 1]].real()) < kTieTol) {
      ++end;
    }
    std::stable_sort(idx.begin() + start, idx.begin() + end, [&](int a, int b) {
      return values[a].imag() > values[b].imag();
    });
    start = end;
  }
  CVec sorted_values(n);
  CMat sorted_vectors(vectors.rows(), n);
  for (int i = 0; i < n; ++i) {
    sorted_values[i] = values[idx[i]];
    sorted_vectors.col(i) = vectors.col(idx[i]);
  }
  values = std::move(sorted_values);
  vectors = std::move(sorted_vectors);
}

}  // namespace

RealSymMatrix::RealSymMatrix(Mat m) : m_(std::move(m)) {
  check_square(m_.rows(), m_.cols());
  const double dev = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
  if (dev > kSymTol) throw NonSymmetricMatrix(dev);
}

ComplexSymMatrix::ComplexSymMatrix(CMat m) : m_(std::move(m)) {
  check_square(m_.rows(), m_.cols());
  const double dev = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
  if (dev > kSymTol) throw NonSymmetricMatrix(dev);
}

Spectrum sym_eigh(const RealSymMatrix& H) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(H.entries());
  if (solver.info() != Eigen::Success) throw EigenConvergenceFailure(H.dim());
  CVec values = solver.eigenvalues().cast<Cx>();
  CMat vectors = solver.eigenvectors().cast<Cx>();
  sort_spectrum(values, vectors);
  Spectrum s;
  s.eigenvalues = std::move(values);
  s.eigenvectors = std::move(vectors);
  s.dim = H.dim();
  s.complete = true;
  return s;
}

Spectrum complex_eig(const ComplexSymMatrix& H, DefectivePolicy policy) {
  Eigen::ComplexEigenSolver<CMat> solver(H.entries());
  if (solver.info() != Eigen::Success) throw EigenConvergenceFailure(H.dim());
  CVec values = solver.eigenvalues();
  CMat vectors = solver.eigenvectors();
  for (int i = 0; i < vectors.cols(); ++i) {
    vectors.col(i).normalize();
  }
  Eigen::JacobiSVD<CMat> svd(vectors);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  bool near_defective = !(cond <= kDefectiveCond);
  if (near_defective && policy == DefectivePolicy::Throw) throw DefectiveMatrix(cond);
  sort_spectrum(values, vectors);
  Spectrum s;
  s.eigenvalues = std::move(values);
  s.eigenvectors = std::move(vectors);
  s.dim = H.dim();
  s.complete = true;
  s.near_defective = near_defective;
  return s;
}

Spectrum lanczos_topk(const LinOp& apply, int dim, int k, int iters, std::uint64_t seed) {
  if (dim < 1) throw ValidationError("lanczos_topk: dimension must be positive");
  if (k < 1 || k > dim) throw ValidationError("lanczos_topk: need 1 <= k <= dim");
  if (iters < k || iters > dim) throw ValidationError("lanczos_topk: need k <= iters <= dim");

  constexpr int kMaxRestarts = 3;
  for (int attempt = 0; attempt <= kMaxRestarts; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = rng.gaussian();
    v.normalize();

    Mat basis(dim, iters);
    std::vector<double> alpha;
    std::vector<double> beta;  // beta[j] couples vector j and j+1
    alpha.reserve(iters);
    beta.reserve(iters);

    basis.col(0) = v;
    int built = 0;
    double scale = 0.0;
    bool broke_down = false;
    for (int j = 0; j < iters; ++j) {
      Vec w = apply(basis.col(j));
      const double a = basis.col(j).dot(w);
      alpha.push_back(a);
      built = j + 1;
      w -= a * basis.col(j);
      if (j > 0) w -= beta[j - 1] * basis.col(j - 1);
      // Full reorthogonalization, twice, against everything built so far.
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          w -= basis.col(i).dot(w) * basis.col(i);
        }
      }
      scale = std::max(scale, std::abs(a));
      if (j > 0) scale = std::max(scale, beta[j - 1]);
      const double b = w.norm();
      if (j + 1 == iters) break;
      if (b <= 1e-12 * std::max(scale, 1.0)) {
        // Krylov space closed early. Enough vectors for k Ritz pairs means the
        // tridiagonal block is exact; otherwise retry from a fresh start vector.
        if (built >= k) break;
        broke_down = true;
        if (attempt == kMaxRestarts) throw LanczosBreakdown(j, kMaxRestarts);
        break;
      }
      beta.push_back(b);
      basis.col(j + 1) = w / b;
    }
    if (broke_down) continue;

    Mat tri = Mat::Zero(built, built);
    for (int i = 0; i < built; ++i) {
      tri(i, i) = alpha[i];
      if (i + 1 < built) {
        tri(i, i + 1) = beta[i];
        tri(i + 1, i) = beta[i];
      }
    }
    Eigen::SelfAdjointEigenSolver<Mat> solver(tri);
    if (solver.info() != Eigen::Success) throw EigenConvergenceFailure(built);

    // Ritz values ascend; take the top k.
    CVec values(k);
    CMat vectors(dim, k);
    for (int i = 0; i < k; ++i) {
      const int src = built - 1 - i;
      values[i] = Cx(solver.eigenvalues()[src], 0.0);
      Vec ritz = basis.leftCols(built) * solver.eigenvectors().col(src);
      ritz.normalize();
      vectors.col(i) = ritz.cast<Cx>();
    }
    sort_spectrum(values, vectors);
    Spectrum s;
    s.eigenvalues = std::move(values);
    s.eigenvectors = std::move(vectors);
    s.dim = dim;
    s.complete = (k == dim);
    return s;
  }
  throw LanczosBreakdown(0, kMaxRestarts);
}

Spectrum lanczos_topk(const LinOp& apply, int dim, int k, std::uint64_t seed) {
  const int iters = std::min(dim, 4 * k + 20);
  return lanczos_topk(apply, dim, k, iters, seed);
}

Spectrum orient_spectrum(Spectrum s, const CVec& g) {
  if (g.size() != s.eigenvectors.rows()) {
    throw ValidationError("orient_spectrum: reference vector dimension mismatch");
  }
  for (int i = 0; i < s.count(); ++i) {
    const Cx d = transposed_dot(g, CVec(s.eigenvectors.col(i)));
    bool flip = false;
    if (d.real() < 0.0) {
      flip = true;
    } else if (d.real() == 0.0) {
      for (Eigen::Index j = 0; j < s.eigenvectors.rows(); ++j) {
        const Cx c = s.eigenvectors(j, i);
        if (c != Cx(0.0, 0.0)) {
          flip = c.real() < 0.0 || (c.real() == 0.0 && c.imag() < 0.0);
          break;
        }
      }
    }
    if (flip) s.eigenvectors.col(i) = -s.eigenvectors.col(i);
  }
  s.orientation_reference = g;
  return s;
}

}  // namespace flowlab
