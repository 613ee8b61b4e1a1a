#include "ipbo/core.hpp"

namespace ipbo {

Dataset standardize(const Matrix& x_raw, const Matrix& y_raw) {
  if (x_raw.rows() != y_raw.rows()) throw ShapeMismatch(x_raw.rows(), y_raw.rows());
  const Index n = x_raw.rows();
  if (n < 2) throw ShapeMismatch("need at least 2 observations");
  const Index p = x_raw.cols();
  const Index q = y_raw.cols();
  if (p < 1 || q < 1) throw ShapeMismatch("x and y must each have at least one column");

  Dataset ds;
  ds.x = x_raw;
  ds.y = y_raw;
  ds.x_means = x_raw.colwise().mean();
  ds.y_means = y_raw.colwise().mean();
  ds.x_scales = Vector(p);

  ds.x.rowwise() -= ds.x_means.transpose();
  for (Index j = 0; j < p; ++j) {
    const double sd = std::sqrt(ds.x.col(j).squaredNorm() / static_cast<double>(n - 1));
    if (sd <= 0.0 || !std::isfinite(sd)) throw ZeroVarianceColumn(j);
    ds.x_scales(j) = sd;
    ds.x.col(j) /= sd;
  }
  ds.y.rowwise() -= ds.y_means.transpose();
  ds.standardized = true;
  return ds;
}

RawCoefficients unstandardize_coefficients(const CoefficientFit& fit, const Dataset& ds) {
  RawCoefficients out;
  out.b = fit.b_hat;
  for (Index j = 0; j < out.b.rows(); ++j) out.b.row(j) /= ds.x_scales(j);
  out.intercept = ds.y_means - out.b.transpose() * ds.x_means;
  return out;
}

}  // namespace ipbo
