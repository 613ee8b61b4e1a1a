#include "ipbo/laplacian.hpp"

namespace ipbo {

LaplacianMatrix build_laplacian(const Matrix& theta) {
  const Index d = theta.rows();
  if (theta.cols() != d) throw DimensionMismatch(d, theta.cols());
  for (Index k = 0; k < d; ++k)
    if (theta(k, k) <= 0.0) throw NonPositiveDiagonal(k);

  LaplacianMatrix lap;
  lap.source_degree = theta.cwiseAbs().rowwise().sum();
  lap.gamma = -theta;
  lap.gamma.diagonal() += lap.source_degree;
  return lap;
}

double quadratic_form(const LaplacianMatrix& lap, const Vector& v) {
  if (v.size() != lap.dim()) throw DimensionMismatch(lap.dim(), v.size());
  return v.dot(lap.gamma * v);
}

Vector laplacian_gradient(const LaplacianMatrix& lap, const Vector& v) {
  if (v.size() != lap.dim()) throw DimensionMismatch(lap.dim(), v.size());
  return 2.0 * (lap.gamma * v);
}

}  // namespace ipbo
