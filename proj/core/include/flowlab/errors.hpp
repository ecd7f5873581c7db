#pragma once

#include <stdexcept>
#include <string>

namespace flowlab {

// Root of the library's exception hierarchy. Two branches:
//   ValidationError  - the caller handed us something malformed (bad shapes,
//                      unsupported domains, out-of-range settings).
//   NumericalError   - the inputs were well-formed but the computation hit a
//                      genuine numerical obstruction (singular direction,
//                      defective matrix, non-convergence, divergence).
// The CLI maps ValidationError to exit code 1 and NumericalError to exit 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class NonSymmetricMatrix final : public ValidationError {
 public:
  explicit NonSymmetricMatrix(double deviation)
      : ValidationError("matrix is not symmetric within 1e-10 (max |A - A^T| = " +
                        std::to_string(deviation) + ")") {}
};

class UnsupportedComplexDomain final : public ValidationError {
 public:
  explicit UnsupportedComplexDomain(const std::string& model)
      : ValidationError("model '" + model + "' does not support complex parameters") {}
};

// Thrown where a formula divides by (1 - h*lambda) and that factor is below
// the singularity tolerance. Carries the offending eigendirection index.
class Singular final : public NumericalError {
 public:
  explicit Singular(int direction_index)
      : NumericalError(direction_index < 0
                           ? std::string("singular flow coefficient: |1 - h*lambda| below tolerance")
                           : "singular flow coefficient: |1 - h*lambda| below tolerance in "
                             "eigendirection " + std::to_string(direction_index)),
        direction_index_(direction_index) {}
  int direction_index() const noexcept { return direction_index_; }

 private:
  int direction_index_;
};

class DefectiveMatrix final : public NumericalError {
 public:
  explicit DefectiveMatrix(double condition)
      : NumericalError("eigenvector matrix is numerically defective (condition number " +
                       std::to_string(condition) + " > 1e8)") {}
};

class EigenConvergenceFailure final : public NumericalError {
 public:
  explicit EigenConvergenceFailure(int dim)
      : NumericalError("dense eigensolver failed to converge for a " +
                       std::to_string(dim) + "-dimensional matrix") {}
};

class LanczosBreakdown final : public NumericalError {
 public:
  LanczosBreakdown(int iteration, int restarts)
      : NumericalError("Lanczos breakdown at iteration " + std::to_string(iteration) +
                       " after " + std::to_string(restarts) + " restarts") {}
};

class ZeroGradient final : public NumericalError {
 public:
  ZeroGradient() : NumericalError("gradient norm is zero; finite-difference scale undefined") {}
};

class DenseCapExceeded final : public ValidationError {
 public:
  DenseCapExceeded(int dim, int cap)
      : ValidationError("dense Hessian requested for dimension " + std::to_string(dim) +
                        " above the cap " + std::to_string(cap) +
                        "; use hvp or a top-k spectrum instead") {}
};

class NoMinimizerAlongRay final : public NumericalError {
 public:
  NoMinimizerAlongRay()
      : NumericalError("quadratic model has no minimizer along the gradient ray "
                       "(curvature g^T H g is not positive)") {}
};

class DivergenceDetected final : public NumericalError {
 public:
  explicit DivergenceDetected(double norm)
      : NumericalError("iterate norm " + std::to_string(norm) +
                       " exceeded the divergence guard") {}
};

}  // namespace flowlab
