#pragma once

#include <complex>
#include <initializer_list>

#include "flowlab/numlin.hpp"
#include "flowlab/rng.hpp"

namespace flowlab::test {

inline CVec cvec(std::initializer_list<Cx> xs) {
  CVec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (const Cx& x : xs) v[i++] = x;
  return v;
}

inline Vec rvec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Mat random_symmetric(Rng& rng, int n) {
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.gaussian();
  return 0.5 * (a + a.transpose());
}

inline double cdist(const Cx& a, const Cx& b) { return std::abs(a - b); }

// Distance between unit vectors modulo overall sign (real) or phase is not
// needed here: the library pins signs, so direct comparison after a possible
// flip is enough.
inline double dist_up_to_sign(const CVec& a, const CVec& b) {
  const double direct = (a - b).norm();
  const double flipped = (a + b).norm();
  return direct < flipped ? direct : flipped;
}

}  // namespace flowlab::test
