#include "ipbo/glasso.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "ipbo/rng.hpp"

namespace ipbo {

namespace {

Matrix inverse_spd(const Matrix& theta) {
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() != Eigen::Success)
    throw Error("matrix expected to be positive definite is not");
  return llt.solve(Matrix::Identity(theta.rows(), theta.cols()));
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw Error("log det of a non positive definite matrix");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// Drops row/column j from a symmetric matrix, and entry j from a vector.
Matrix drop_row_col(const Matrix& m, Index j) {
  const Index d = m.rows();
  Matrix out(d - 1, d - 1);
  out.topLeftCorner(j, j) = m.topLeftCorner(j, j);
  out.topRightCorner(j, d - 1 - j) = m.topRightCorner(j, d - 1 - j);
  out.bottomLeftCorner(d - 1 - j, j) = m.bottomLeftCorner(d - 1 - j, j);
  out.bottomRightCorner(d - 1 - j, d - 1 - j) = m.bottomRightCorner(d - 1 - j, d - 1 - j);
  return out;
}

Vector drop_entry(const Vector& v, Index j) {
  const Index d = v.size();
  Vector out(d - 1);
  out.head(j) = v.head(j);
  out.tail(d - 1 - j) = v.tail(d - 1 - j);
  return out;
}

}  // namespace

SampleCovariance sample_covariance(const Matrix& m) {
  if (m.rows() < 2) throw ShapeMismatch("sample covariance needs at least 2 rows");
  SampleCovariance out;
  out.n_obs = m.rows();
  out.s = (m.transpose() * m) / static_cast<double>(m.rows());
  return out;
}

double glasso_objective(const Matrix& s, const Matrix& theta, const Matrix& penalty) {
  return (s.array() * theta.array()).sum() - log_det_spd(theta) +
         (penalty.array() * theta.array().abs()).sum();
}

double glasso_objective(const Matrix& s, const Matrix& theta, double lam, bool penalize_diagonal) {
  Matrix penalty = Matrix::Constant(s.rows(), s.cols(), lam);
  if (!penalize_diagonal) penalty.diagonal().setZero();
  return glasso_objective(s, theta, penalty);
}

double glasso_kkt_residual(const Matrix& s, const Matrix& theta, const Matrix& penalty) {
  const Matrix w = inverse_spd(theta);
  double worst = 0.0;
  for (Index j = 0; j < s.cols(); ++j) {
    for (Index i = 0; i < s.rows(); ++i) {
      const double grad = s(i, j) - w(i, j);
      const double viol = theta(i, j) != 0.0
                              ? std::abs(grad + penalty(i, j) * (theta(i, j) > 0 ? 1.0 : -1.0))
                              : std::max(std::abs(grad) - penalty(i, j), 0.0);
      worst = std::max(worst, viol);
    }
  }
  return worst;
}

PrecisionEstimate fit_glasso_weighted(const SampleCovariance& cov, const Matrix& penalty,
                                      const GlassoOptions& opts) {
  const Matrix& s = cov.s;
  const Index d = s.rows();
  if (penalty.rows() != d || penalty.cols() != d) throw DimensionMismatch(d, penalty.rows());
  if (opts.tol <= 0.0) throw ConfigError("glasso tol must be positive");
  if ((penalty.array() < 0.0).any()) throw ConfigError("entrywise penalties must be nonnegative");

  {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (min_eig < -1e-8) throw NonPsdInput(min_eig);
    if (penalty.minCoeff() == 0.0 && min_eig <= 1e-12)
      throw NonPsdInput(min_eig);  // unpenalized entries need a PD input
  }

  PrecisionEstimate est;
  est.lambda = penalty.maxCoeff();

  // Exact maximum likelihood when nothing is penalized.
  if (penalty.maxCoeff() == 0.0) {
    est.theta = inverse_spd(s);
    est.theta = ((est.theta + est.theta.transpose()) / 2.0).eval();
    est.kkt_residual = glasso_kkt_residual(s, est.theta, penalty);
    est.n_iter = 0;
    est.converged = est.kkt_residual <= opts.tol;
    est.loglik_path.push_back(glasso_objective(s, est.theta, penalty));
    return est;
  }

  // W holds the working covariance estimate; its diagonal is fixed at
  // s_ii + penalty_ii (theta_ii > 0 makes that the stationary value).
  Matrix w = s;
  w.diagonal() += penalty.diagonal();
  Matrix beta = Matrix::Zero(d, d);  // column j: coefficients of column j's subproblem

  const double w_diag_max = w.diagonal().maxCoeff();
  const double inner_tol = opts.tol / (4.0 * std::max(w_diag_max, 1.0));
  const int max_inner = 1000;

  auto recover_theta = [&]() {
    Matrix theta(d, d);
    for (Index j = 0; j < d; ++j) {
      if (d == 1) {
        theta(0, 0) = 1.0 / w(0, 0);
        continue;
      }
      const Vector b = beta.col(j).head(d - 1);
      const Vector w12 = drop_entry(w.col(j), j);
      const double denom = std::max(w(j, j) - w12.dot(b), 1e-12);
      const double tjj = 1.0 / denom;
      theta(j, j) = tjj;
      Index r = 0;
      for (Index i = 0; i < d; ++i) {
        if (i == j) continue;
        theta(i, j) = b(r) == 0.0 ? 0.0 : -b(r) * tjj;
        ++r;
      }
    }
    // Symmetrize; entries are exactly zero only when both sides agree.
    for (Index j = 0; j < d; ++j)
      for (Index i = j + 1; i < d; ++i) {
        const double avg = (theta(i, j) + theta(j, i)) / 2.0;
        theta(i, j) = avg;
        theta(j, i) = avg;
      }
    return theta;
  };

  int sweeps_done = 0;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    for (Index j = 0; j < d && d > 1; ++j) {
      const Matrix w11 = drop_row_col(w, j);
      const Vector s12 = drop_entry(s.col(j), j);
      const Vector p12 = drop_entry(penalty.col(j), j);
      Vector b = beta.col(j).head(d - 1);
      Vector u = w11 * b;  // running W11 * beta

      for (int sweep = 0; sweep < max_inner; ++sweep) {
        double max_change = 0.0;
        for (Index i = 0; i < d - 1; ++i) {
          const double diag = std::max(w11(i, i), 1e-12);
          const double g = s12(i) - (u(i) - diag * b(i));
          const double bi = soft_threshold(g, p12(i)) / diag;
          const double delta = bi - b(i);
          if (delta != 0.0) {
            u += delta * w11.col(i);
            b(i) = bi;
            max_change = std::max(max_change, std::abs(delta));
          }
        }
        if (max_change <= inner_tol) break;
      }

      beta.col(j).head(d - 1) = b;
      Index r = 0;
      for (Index i = 0; i < d; ++i) {
        if (i == j) continue;
        w(i, j) = u(r);
        w(j, i) = u(r);
        ++r;
      }
    }

    ++sweeps_done;
    const Matrix theta = recover_theta();
    est.loglik_path.push_back(glasso_objective(s, theta, penalty));
    est.kkt_residual = glasso_kkt_residual(s, theta, penalty);
    est.theta = theta;
    if (est.kkt_residual <= opts.tol) {
      est.converged = true;
      break;
    }
  }
  est.n_iter = sweeps_done;
  if (est.theta.size() == 0) est.theta = recover_theta();
  return est;
}

PrecisionEstimate fit_glasso(const SampleCovariance& cov, double lam, const GlassoOptions& opts) {
  if (lam < 0.0) throw ConfigError("lambda must be nonnegative");
  Matrix penalty = Matrix::Constant(cov.s.rows(), cov.s.cols(), lam);
  if (!opts.penalize_diagonal) penalty.diagonal().setZero();
  PrecisionEstimate est = fit_glasso_weighted(cov, penalty, opts);
  est.lambda = lam;
  return est;
}

std::vector<double> default_lambda_grid(const Matrix& s, int n_points) {
  const Index d = s.rows();
  double lam_max = 0.0;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i)
      if (i != j) lam_max = std::max(lam_max, std::abs(s(i, j)));
  if (lam_max <= 0.0) lam_max = 0.1 * std::max(s.diagonal().maxCoeff(), 1.0);
  std::vector<double> grid(static_cast<std::size_t>(n_points));
  const double lo = std::log(0.01 * lam_max);
  const double hi = std::log(lam_max);
  for (int i = 0; i < n_points; ++i) {
    const double t = n_points == 1 ? 1.0 : static_cast<double>(i) / (n_points - 1);
    grid[static_cast<std::size_t>(i)] = std::exp(lo + t * (hi - lo));
  }
  return grid;
}

CvResult cv_select_lambda(const Matrix& m, const std::vector<double>& grid, int k_folds,
                          std::uint64_t seed, const GlassoOptions& opts) {
  if (k_folds < 2) throw ConfigError("k_folds must be at least 2");
  if (grid.empty()) throw ConfigError("lambda grid must be nonempty");
  for (double lam : grid)
    if (lam <= 0.0) throw ConfigError("lambda grid must be strictly positive");
  const Index n = m.rows();
  if (n < k_folds) throw ConfigError("fewer rows than folds");

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);

  // Balanced contiguous chunks of the shuffled order.
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k_folds));
  const Index base = n / k_folds;
  const Index extra = n % k_folds;
  std::size_t pos = 0;
  for (int f = 0; f < k_folds; ++f) {
    const Index len = base + (f < extra ? 1 : 0);
    auto& fold = folds[static_cast<std::size_t>(f)];
    fold.assign(order.begin() + static_cast<long>(pos), order.begin() + static_cast<long>(pos + len));
    pos += static_cast<std::size_t>(len);
  }

  const double inf = std::numeric_limits<double>::infinity();
  CvResult result;
  result.cv_scores.assign(grid.size(), 0.0);

  for (int f = 0; f < k_folds; ++f) {
    const auto& val_rows = folds[static_cast<std::size_t>(f)];
    Matrix train(n - static_cast<Index>(val_rows.size()), m.cols());
    Matrix val(static_cast<Index>(val_rows.size()), m.cols());
    std::vector<bool> in_val(static_cast<std::size_t>(n), false);
    for (Index r : val_rows) in_val[static_cast<std::size_t>(r)] = true;
    Index tr = 0, vr = 0;
    for (Index i = 0; i < n; ++i) {
      if (in_val[static_cast<std::size_t>(i)])
        val.row(vr++) = m.row(i);
      else
        train.row(tr++) = m.row(i);
    }
    const SampleCovariance s_train = sample_covariance(train);
    const Matrix s_val = (val.transpose() * val) / static_cast<double>(val.rows());

    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (result.cv_scores[g] == inf) continue;
      try {
        const PrecisionEstimate est = fit_glasso(s_train, grid[g], opts);
        if (!est.converged) {
          result.cv_scores[g] = inf;
          continue;
        }
        result.cv_scores[g] +=
            ((s_val.array() * est.theta.array()).sum() - log_det_spd(est.theta)) / k_folds;
      } catch (const Error&) {
        result.cv_scores[g] = inf;
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (result.cv_scores[g] < result.cv_scores[best]) best = g;
  result.lambda_star = grid[best];
  return result;
}

}  // namespace ipbo
