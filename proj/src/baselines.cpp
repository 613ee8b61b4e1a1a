#include "ipbo/baselines.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace ipbo {

namespace {

void require_standardized(const Dataset& ds) {
  if (!ds.standardized) throw ConfigError("baselines require a standardized dataset");
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw Error("log det of a non positive definite matrix");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

double lasso_objective(const Dataset& ds, double lambda1, const Matrix& b) {
  return (ds.y - ds.x * b).squaredNorm() / static_cast<double>(ds.n()) +
         lambda1 * b.cwiseAbs().sum();
}

CoefficientFit lasso(const Dataset& ds, double lambda1, const SolveOptions& opts) {
  require_standardized(ds);
  opts.validate();
  if (lambda1 < 0.0) throw ConfigError("lambda1 must be nonnegative");
  const Index p = ds.p();
  const Index q = ds.q();
  const double c = 2.0 / static_cast<double>(ds.n());
  const Matrix gram = ds.x.transpose() * ds.x;
  const Matrix xty = ds.x.transpose() * ds.y;

  CoefficientFit fit;
  fit.b_hat = Matrix::Zero(p, q);
  fit.converged = true;
  double worst_kkt = 0.0;

  for (Index k = 0; k < q; ++k) {
    Vector beta = Vector::Zero(p);
    Vector gb = Vector::Zero(p);  // gram * beta
    int sweeps = 0;
    bool ok = false;
    while (sweeps < opts.max_sweeps) {
      double max_change = 0.0;
      for (Index j = 0; j < p; ++j) {
        const double a = c * gram(j, j);
        const double z = c * (xty(j, k) - gb(j) + gram(j, j) * beta(j));
        const double next = soft_threshold(z, lambda1) / a;
        const double delta = next - beta(j);
        if (delta != 0.0) {
          gb += delta * gram.col(j);
          beta(j) = next;
          max_change = std::max(max_change, std::abs(delta));
        }
      }
      ++sweeps;
      if (max_change <= opts.tol) {
        ok = true;
        break;
      }
    }
    fit.b_hat.col(k) = beta;
    fit.n_sweeps = std::max(fit.n_sweeps, sweeps);
    fit.converged = fit.converged && ok;
    for (Index j = 0; j < p; ++j) {
      const double a = c * gram(j, j);
      const double z = c * (xty(j, k) - gb(j) + gram(j, j) * beta(j));
      const double viol = beta(j) != 0.0
                              ? std::abs(a * beta(j) - z + lambda1 * (beta(j) > 0 ? 1.0 : -1.0))
                              : std::max(std::abs(z) - lambda1, 0.0);
      worst_kkt = std::max(worst_kkt, viol);
    }
  }
  fit.kkt_residual = worst_kkt;
  fit.objective_value = lasso_objective(ds, lambda1, fit.b_hat);
  fit.objective_path.push_back(fit.objective_value);
  return fit;
}

double l21_objective(const Dataset& ds, double lambda, const Matrix& b) {
  return (ds.y - ds.x * b).squaredNorm() / static_cast<double>(ds.n()) +
         lambda * b.rowwise().norm().sum();
}

CoefficientFit l21(const Dataset& ds, double lambda, const SolveOptions& opts) {
  require_standardized(ds);
  opts.validate();
  if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  const Index p = ds.p();
  const double c = 2.0 / static_cast<double>(ds.n());
  const Vector xsq = ds.x.colwise().squaredNorm();

  CoefficientFit fit;
  fit.b_hat = Matrix::Zero(p, ds.q());
  Matrix r = ds.y;

  auto row_score = [&](Index j) -> Eigen::RowVectorXd {
    return c * (ds.x.col(j).transpose() * r) + c * xsq(j) * fit.b_hat.row(j);
  };

  int sweeps = 0;
  while (sweeps < opts.max_sweeps) {
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double a = c * xsq(j);
      const Eigen::RowVectorXd rj = row_score(j);
      const double norm = rj.norm();
      Eigen::RowVectorXd next;
      if (norm <= lambda)
        next = Eigen::RowVectorXd::Zero(ds.q());
      else
        next = rj * ((norm - lambda) / (a * norm));
      const Eigen::RowVectorXd delta = next - fit.b_hat.row(j);
      const double change = delta.cwiseAbs().maxCoeff();
      if (change > 0.0) {
        r -= ds.x.col(j) * delta;
        fit.b_hat.row(j) = next;
      }
      max_change = std::max(max_change, change);
    }
    ++sweeps;
    fit.objective_path.push_back(l21_objective(ds, lambda, fit.b_hat));
    fit.final_max_change = max_change;
    if (max_change <= opts.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.n_sweeps = sweeps;

  double worst = 0.0;  // block stationarity residual
  for (Index j = 0; j < p; ++j) {
    const double a = c * xsq(j);
    const Eigen::RowVectorXd rj = row_score(j);
    if ((fit.b_hat.row(j).array() == 0.0).all())
      worst = std::max(worst, std::max(rj.norm() - lambda, 0.0));
    else {
      const Eigen::RowVectorXd grad =
          a * fit.b_hat.row(j) - rj + lambda * fit.b_hat.row(j) / fit.b_hat.row(j).norm();
      worst = std::max(worst, grad.norm());
    }
  }
  fit.kkt_residual = worst;
  fit.objective_value = fit.objective_path.empty() ? l21_objective(ds, lambda, fit.b_hat)
                                                   : fit.objective_path.back();
  return fit;
}

double mrce_objective(const Dataset& ds, const Matrix& b, const Matrix& theta0, double lam_b,
                      double lam_theta) {
  const Matrix resid = ds.y - ds.x * b;
  const Matrix s_r = (resid.transpose() * resid) / static_cast<double>(ds.n());
  return (s_r.array() * theta0.array()).sum() - log_det_spd(theta0) +
         lam_theta * theta0.cwiseAbs().sum() + lam_b * b.cwiseAbs().sum();
}

MrceResult mrce_approx(const Dataset& ds, double lam_b, double lam_theta, int max_outer,
                       const SolveOptions& opts, const GlassoOptions& gopts) {
  require_standardized(ds);
  opts.validate();
  if (max_outer < 1) throw ConfigError("max_outer must be at least 1");
  if (lam_b < 0.0 || lam_theta < 0.0) throw ConfigError("penalties must be nonnegative");

  const Index p = ds.p();
  const Index q = ds.q();
  const double c = 2.0 / static_cast<double>(ds.n());
  const Matrix gram = ds.x.transpose() * ds.x;
  const Matrix xty = ds.x.transpose() * ds.y;

  MrceResult out;
  Matrix b = Matrix::Zero(p, q);
  int total_sweeps = 0;
  double b_kkt = 0.0;
  bool b_step_ok = true;

  for (int outer = 0; outer < max_outer; ++outer) {
    // (a) glasso on the residual covariance.
    const Matrix resid = ds.y - ds.x * b;
    out.theta0 = fit_glasso(sample_covariance(resid), lam_theta, gopts);
    const Matrix& theta = out.theta0.theta;
    out.objective_path.push_back(mrce_objective(ds, b, theta, lam_b, lam_theta));

    // (b) coordinate descent on B with Theta0 fixed.
    const Matrix xty_theta = xty * theta;
    Matrix gb = gram * b;  // maintained gram * B
    const Matrix b_before = b;
    int sweeps = 0;
    bool ok = false;
    while (sweeps < opts.max_sweeps) {
      double max_change = 0.0;
      for (Index k = 0; k < q; ++k) {
        for (Index j = 0; j < p; ++j) {
          const double a = c * gram(j, j) * theta(k, k);
          const double grad = c * (xty_theta(j, k) - gb.row(j).dot(theta.col(k)));
          const double z = a * b(j, k) + grad;
          const double next = soft_threshold(z, lam_b) / a;
          const double delta = next - b(j, k);
          if (delta != 0.0) {
            gb.col(k) += delta * gram.col(j);
            b(j, k) = next;
            max_change = std::max(max_change, std::abs(delta));
          }
        }
      }
      ++sweeps;
      if (max_change <= opts.tol) {
        ok = true;
        break;
      }
    }
    total_sweeps += sweeps;
    b_step_ok = ok;
    out.objective_path.push_back(mrce_objective(ds, b, theta, lam_b, lam_theta));

    b_kkt = 0.0;
    for (Index k = 0; k < q; ++k) {
      for (Index j = 0; j < p; ++j) {
        const double a = c * gram(j, j) * theta(k, k);
        const double grad = c * (xty_theta(j, k) - gb.row(j).dot(theta.col(k)));
        const double z = a * b(j, k) + grad;
        const double viol = b(j, k) != 0.0
                                ? std::abs(a * b(j, k) - z + lam_b * (b(j, k) > 0 ? 1.0 : -1.0))
                                : std::max(std::abs(z) - lam_b, 0.0);
        b_kkt = std::max(b_kkt, viol);
      }
    }

    out.n_outer = outer + 1;
    const double change = (b - b_before).norm();
    if (change <= opts.tol * (1.0 + b_before.norm())) {
      out.converged = b_step_ok && out.theta0.converged;
      break;
    }
  }

  out.fit.b_hat = b;
  out.fit.n_sweeps = total_sweeps;
  out.fit.converged = out.converged;
  out.fit.kkt_residual = b_kkt;
  out.fit.objective_value = out.objective_path.back();
  out.fit.objective_path = out.objective_path;
  return out;
}

}  // namespace ipbo
