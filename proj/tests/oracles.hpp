#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately naive: they certify the production solvers from a different
// algorithmic route.

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "ipbo/core.hpp"

namespace ipbo::testing {

// Least squares via the normal equations.
inline Matrix normal_equation_solve(const Matrix& x, const Matrix& y) {
  return (x.transpose() * x).ldlt().solve(x.transpose() * y);
}

// Proximal-gradient (ISTA) minimizer of
//   tr(S Theta) - log det Theta + sum_ij P_ij |theta_ij|
// over the positive-definite cone, with backtracking line search. Intended
// for d <= 3 where it can be run to near-exact optimality.
inline Matrix prox_gradient_glasso(const Matrix& s, const Matrix& penalty, int max_iter = 200000,
                                   double change_tol = 1e-13) {
  const Index d = s.rows();
  Matrix theta = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) theta(i, i) = 1.0 / (s(i, i) + penalty(i, i) + 1e-12);

  const auto smooth = [&](const Matrix& t) -> double {
    Eigen::LLT<Matrix> llt(t);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return (s.array() * t.array()).sum() - logdet;
  };

  double step = 1.0;
  double f_cur = smooth(theta);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix w = theta.llt().solve(Matrix::Identity(d, d));
    const Matrix grad = s - w;
    Matrix cand;
    double f_cand = 0.0;
    while (true) {
      cand = theta - step * grad;
      for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < d; ++i)
          cand(i, j) = soft_threshold(cand(i, j), step * penalty(i, j));
      cand = ((cand + cand.transpose()) / 2.0).eval();
      f_cand = smooth(cand);
      const Matrix diff = cand - theta;
      const double quad =
          f_cur + (grad.array() * diff.array()).sum() + diff.squaredNorm() / (2.0 * step);
      if (std::isfinite(f_cand) && f_cand <= quad + 1e-15) break;
      step /= 2.0;
      if (step < 1e-18) return theta;
    }
    const double change = (cand - theta).cwiseAbs().maxCoeff();
    theta = cand;
    f_cur = f_cand;
    step *= 1.05;
    if (change < change_tol) break;
  }
  return theta;
}

// Signed-difference evaluation of the Laplacian quadratic form, straight from
// the pairwise formula.
inline double signed_difference_form(const Matrix& theta, const Vector& v) {
  double total = 0.0;
  for (Index k = 0; k < theta.rows(); ++k) {
    for (Index kp = k + 1; kp < theta.cols(); ++kp) {
      const double t = theta(k, kp);
      if (t == 0.0) continue;
      const double sgn = t > 0 ? 1.0 : -1.0;
      const double diff = v(k) - sgn * v(kp);
      total += std::abs(t) * diff * diff;
    }
  }
  return total;
}

}  // namespace ipbo::testing
