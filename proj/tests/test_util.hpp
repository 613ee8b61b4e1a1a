#pragma once

#include <Eigen/Dense>
#include <functional>

#include "ipbo/core.hpp"
#include "ipbo/rng.hpp"

namespace ipbo::testing {

inline Matrix random_matrix(Rng& rng, Index rows, Index cols) {
  return rng.normal_matrix(rows, cols);
}

// Symmetric with strictly positive diagonal (a valid Laplacian source).
inline Matrix random_symmetric_posdiag(Rng& rng, Index d) {
  Matrix m = rng.normal_matrix(d, d);
  m = ((m + m.transpose()) / 2.0).eval();
  m.diagonal() = m.diagonal().cwiseAbs().array() + 0.5;
  return m;
}

inline Matrix random_spd(Rng& rng, Index d) {
  const Matrix a = rng.normal_matrix(d, d + 2);
  return (a * a.transpose()) / static_cast<double>(d + 2) +
         0.05 * Matrix::Identity(d, d);
}

inline Dataset random_dataset(Rng& rng, Index n, Index p, Index q) {
  return standardize(rng.normal_matrix(n, p), rng.normal_matrix(n, q));
}

// Dataset with planted sparse coefficients and unit noise.
inline Dataset planted_dataset(Rng& rng, Index n, Index p, Index q, const Matrix& b_true) {
  const Matrix x = rng.normal_matrix(n, p);
  const Matrix y = x * b_true + rng.normal_matrix(n, q);
  return standardize(x, y);
}

inline double central_difference(const std::function<double(const Vector&)>& f, const Vector& v,
                                 Index i, double h = 1e-6) {
  Vector lo = v, hi = v;
  lo(i) -= h;
  hi(i) += h;
  return (f(hi) - f(lo)) / (2.0 * h);
}

}  // namespace ipbo::testing
