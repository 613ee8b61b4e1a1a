#pragma once

#include "ipbo/core.hpp"

namespace ipbo {

// Signed graph Laplacian D - A with A the estimated precision matrix and
// d_k the full row sum of |a_kk'|. With a strictly positive diagonal the
// diagonal of A cancels, leaving gamma(k,k) = sum_{k'!=k} |a_kk'|.
struct LaplacianMatrix {
  Matrix gamma;          // d x d
  Vector source_degree;  // d_k = sum_k' |a_kk'|

  Index dim() const { return gamma.rows(); }

  static LaplacianMatrix zero(Index d) {
    return {Matrix::Zero(d, d), Vector::Zero(d)};
  }
};

LaplacianMatrix build_laplacian(const Matrix& theta);

// v' Gamma v. Equals the signed-difference sum
// sum_{k<k'} |theta_kk'| (v_k - sign(theta_kk') v_k')^2.
double quadratic_form(const LaplacianMatrix& lap, const Vector& v);

// Gradient of the quadratic form: 2 Gamma v.
Vector laplacian_gradient(const LaplacianMatrix& lap, const Vector& v);

}  // namespace ipbo
