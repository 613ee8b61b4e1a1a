#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "ipbo/errors.hpp"

namespace ipbo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Paired predictor/response samples. Columns of x are centered and scaled to
// unit sample standard deviation (divisor n-1), columns of y are centered
// only, so response-scale metrics stay interpretable. The stored means and
// scales are enough to map coefficients back to the original scale.
struct Dataset {
  Matrix x;  // n x p
  Matrix y;  // n x q
  Vector x_means, x_scales;  // length p
  Vector y_means;            // length q
  bool standardized = false;

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
  Index q() const { return y.cols(); }

  static Dataset raw(Matrix x, Matrix y) {
    if (x.rows() != y.rows()) throw ShapeMismatch(x.rows(), y.rows());
    Dataset ds;
    ds.x = std::move(x);
    ds.y = std::move(y);
    ds.x_means = Vector::Zero(ds.x.cols());
    ds.x_scales = Vector::Ones(ds.x.cols());
    ds.y_means = Vector::Zero(ds.y.cols());
    return ds;
  }
};

struct PenaltyConfig {
  double lambda1 = 0.0;  // l1 on B
  double lambda2 = 0.0;  // l1 on Theta
  double lambda3 = 0.0;  // l1 on Omega
  double gamma1 = 0.0;   // response-Laplacian weight
  double gamma2 = 0.0;   // predictor-Laplacian weight

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || gamma1 < 0 || gamma2 < 0)
      throw ConfigError("penalty parameters must be nonnegative");
  }
};

// Coordinate descent yields exact zeros, so the support is the literal
// nonzero pattern of b_hat; no epsilon thresholding.
struct CoefficientFit {
  Matrix b_hat;  // p x q
  double objective_value = 0.0;
  int n_sweeps = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  double final_max_change = 0.0;
  std::vector<double> objective_path;  // objective after each full sweep

  std::vector<std::pair<Index, Index>> support() const {
    std::vector<std::pair<Index, Index>> s;
    for (Index k = 0; k < b_hat.cols(); ++k)
      for (Index j = 0; j < b_hat.rows(); ++j)
        if (b_hat(j, k) != 0.0) s.emplace_back(j, k);
    return s;
  }

  std::vector<std::vector<Index>> per_response_support() const {
    std::vector<std::vector<Index>> s(b_hat.cols());
    for (Index k = 0; k < b_hat.cols(); ++k)
      for (Index j = 0; j < b_hat.rows(); ++j)
        if (b_hat(j, k) != 0.0) s[static_cast<std::size_t>(k)].push_back(j);
    return s;
  }

  Index support_size() const { return (b_hat.array() != 0.0).count(); }

  // Rows with at least one nonzero entry ("selected predictors/stocks").
  std::vector<Index> row_support() const {
    std::vector<Index> rows;
    for (Index j = 0; j < b_hat.rows(); ++j)
      if ((b_hat.row(j).array() != 0.0).any()) rows.push_back(j);
    return rows;
  }
};

inline double soft_threshold(double z, double lam) {
  if (z > lam) return z - lam;
  if (z < -lam) return z + lam;
  return 0.0;
}

Dataset standardize(const Matrix& x_raw, const Matrix& y_raw);

struct RawCoefficients {
  Matrix b;          // p x q, original predictor scale
  Vector intercept;  // length q
};

// Maps a fit on standardized data back to raw scale: predictions on raw
// inputs match the standardized model exactly, support pattern unchanged.
RawCoefficients unstandardize_coefficients(const CoefficientFit& fit, const Dataset& ds);

}  // namespace ipbo
