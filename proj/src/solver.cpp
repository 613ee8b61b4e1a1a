#include "ipbo/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipbo {

namespace {

void check_fit_inputs(const Dataset& ds, const LaplacianMatrix* lap1, const LaplacianMatrix* lap2,
                      const PenaltyConfig& pen, const SolveOptions& opts) {
  opts.validate();
  pen.validate();
  if (!ds.standardized) throw ConfigError("fit_b requires a standardized dataset");
  if (lap1 && lap1->dim() != ds.q()) throw DimensionMismatch(ds.q(), lap1->dim());
  if (lap2 && lap2->dim() != ds.p()) throw DimensionMismatch(ds.p(), lap2->dim());
  if (opts.mode == FitMode::Sipbo && lap2 && pen.gamma2 > 0.0)
    throw ConfigError("SIPBO uses only the response Laplacian; gamma2 must be 0");
}

struct Workspace {
  const Matrix* g1 = nullptr;  // q x q Laplacian, scaled use via gamma1
  const Matrix* g2 = nullptr;  // p x p
  double gamma1 = 0.0, gamma2 = 0.0;
  bool use1 = false, use2 = false;
};

Workspace make_workspace(const LaplacianMatrix* lap1, const LaplacianMatrix* lap2,
                         const PenaltyConfig& pen) {
  Workspace w;
  w.gamma1 = pen.gamma1;
  w.gamma2 = pen.gamma2;
  w.use1 = lap1 != nullptr && pen.gamma1 > 0.0;
  w.use2 = lap2 != nullptr && pen.gamma2 > 0.0;
  if (w.use1) w.g1 = &lap1->gamma;
  if (w.use2) w.g2 = &lap2->gamma;
  return w;
}

// z and a of the scalar stationarity equation a*beta = z - lambda1*sign(beta).
inline double coordinate_z(const Dataset& ds, const Workspace& w, const Matrix& b, const Matrix& r,
                           const Vector& xsq, double c, Index j, Index k) {
  double z = c * (ds.x.col(j).dot(r.col(k)) + xsq(j) * b(j, k));
  if (w.use1) z -= 2.0 * w.gamma1 * (w.g1->row(k).dot(b.row(j)) - (*w.g1)(k, k) * b(j, k));
  if (w.use2) z -= 2.0 * w.gamma2 * (w.g2->col(j).dot(b.col(k)) - (*w.g2)(j, j) * b(j, k));
  return z;
}

inline double coordinate_a(const Workspace& w, const Vector& xsq, double c, Index j, Index k) {
  double a = c * xsq(j);
  if (w.use1) a += 2.0 * w.gamma1 * (*w.g1)(k, k);
  if (w.use2) a += 2.0 * w.gamma2 * (*w.g2)(j, j);
  return a;
}

}  // namespace

double fit_objective(const Dataset& ds, const LaplacianMatrix* lap1, const LaplacianMatrix* lap2,
                     const PenaltyConfig& pen, const Matrix& b) {
  const Matrix r = ds.y - ds.x * b;
  double obj = r.squaredNorm() / static_cast<double>(ds.n()) + pen.lambda1 * b.cwiseAbs().sum();
  if (lap1 && pen.gamma1 > 0.0) obj += pen.gamma1 * ((b * lap1->gamma).array() * b.array()).sum();
  if (lap2 && pen.gamma2 > 0.0) obj += pen.gamma2 * ((lap2->gamma * b).array() * b.array()).sum();
  return obj;
}

double fit_kkt_residual(const Dataset& ds, const LaplacianMatrix* lap1,
                        const LaplacianMatrix* lap2, const PenaltyConfig& pen, const Matrix& b) {
  const Workspace w = make_workspace(lap1, lap2, pen);
  const double c = 2.0 / static_cast<double>(ds.n());
  const Vector xsq = ds.x.colwise().squaredNorm();
  const Matrix r = ds.y - ds.x * b;
  double worst = 0.0;
  for (Index k = 0; k < ds.q(); ++k) {
    for (Index j = 0; j < ds.p(); ++j) {
      const double z = coordinate_z(ds, w, b, r, xsq, c, j, k);
      const double a = coordinate_a(w, xsq, c, j, k);
      const double beta = b(j, k);
      const double viol = beta != 0.0
                              ? std::abs(a * beta - z + pen.lambda1 * (beta > 0 ? 1.0 : -1.0))
                              : std::max(std::abs(z) - pen.lambda1, 0.0);
      worst = std::max(worst, viol);
    }
  }
  return worst;
}

double lambda1_max(const Dataset& ds) {
  return (2.0 / static_cast<double>(ds.n())) * (ds.x.transpose() * ds.y).cwiseAbs().maxCoeff();
}

CoefficientFit fit_b(const Dataset& ds, const LaplacianMatrix* lap1, const LaplacianMatrix* lap2,
                     const PenaltyConfig& pen, const SolveOptions& opts) {
  check_fit_inputs(ds, lap1, lap2, pen, opts);
  const Index p = ds.p();
  const Index q = ds.q();
  const Workspace w = make_workspace(lap1, lap2, pen);
  const double c = 2.0 / static_cast<double>(ds.n());
  const Vector xsq = ds.x.colwise().squaredNorm();

  CoefficientFit fit;
  fit.b_hat = Matrix::Zero(p, q);
  Matrix r = ds.y;  // residual Y - XB

  auto update_coordinate = [&](Index j, Index k) -> double {
    const double z = coordinate_z(ds, w, fit.b_hat, r, xsq, c, j, k);
    const double a = coordinate_a(w, xsq, c, j, k);
    const double next = soft_threshold(z, pen.lambda1) / a;
    const double delta = next - fit.b_hat(j, k);
    if (delta != 0.0) {
      r.col(k) -= delta * ds.x.col(j);
      fit.b_hat(j, k) = next;
    }
    return std::abs(delta);
  };

  auto record_objective = [&]() {
    fit.objective_path.push_back(fit_objective(ds, lap1, lap2, pen, fit.b_hat));
  };

  const double kkt_tol = 10.0 * opts.tol;
  int sweeps = 0;
  bool done = false;
  while (!done && sweeps < opts.max_sweeps) {
    // Full sweep.
    double max_change = 0.0;
    for (Index k = 0; k < q; ++k)
      for (Index j = 0; j < p; ++j) max_change = std::max(max_change, update_coordinate(j, k));
    ++sweeps;
    record_objective();
    fit.final_max_change = max_change;

    if (max_change <= opts.tol) {
      fit.kkt_residual = fit_kkt_residual(ds, lap1, lap2, pen, fit.b_hat);
      if (fit.kkt_residual <= kkt_tol) {
        fit.converged = true;
        done = true;
      } else if (max_change == 0.0) {
        done = true;  // stationary but outside certification; report as is
      }
      continue;
    }

    if (!opts.active_set) continue;

    // Active-set passes over the current nonzeros, full sweep every 10.
    std::vector<std::pair<Index, Index>> active = fit.support();
    for (int pass = 0; pass < 10 && sweeps < opts.max_sweeps && !active.empty(); ++pass) {
      double active_change = 0.0;
      for (const auto& [j, k] : active)
        active_change = std::max(active_change, update_coordinate(j, k));
      ++sweeps;
      record_objective();
      if (active_change <= opts.tol) break;
    }
  }

  fit.n_sweeps = sweeps;
  if (fit.kkt_residual == 0.0 && !fit.converged)
    fit.kkt_residual = fit_kkt_residual(ds, lap1, lap2, pen, fit.b_hat);
  fit.objective_value =
      fit.objective_path.empty() ? 0.0 : fit.objective_path.back();
  return fit;
}

TwoStageResult two_stage(const Dataset& ds, const PenaltyConfig& pen, const SolveOptions& opts,
                         const GlassoOptions& gopts) {
  pen.validate();
  TwoStageResult out;
  out.theta = fit_glasso(sample_covariance(ds.y), pen.lambda2, gopts);
  const LaplacianMatrix lap1 = build_laplacian(out.theta.theta);
  if (opts.mode == FitMode::Ipbo) {
    out.omega = fit_glasso(sample_covariance(ds.x), pen.lambda3, gopts);
    const LaplacianMatrix lap2 = build_laplacian(out.omega->theta);
    out.fit = fit_b(ds, &lap1, &lap2, pen, opts);
  } else {
    out.fit = fit_b(ds, &lap1, nullptr, pen, opts);
  }
  return out;
}

namespace {

// Frozen-sign coupling weights; entry penalty is per unordered pair, so the
// glasso penalty matrix carries half the weight on each ordered entry.
Matrix refine_penalty(const Matrix& b_rows_by, const Matrix& prev_theta, double lam, double gamma,
                      bool rows_are_responses) {
  const Index d = prev_theta.rows();
  Matrix pen = Matrix::Constant(d, d, lam);
  if (gamma <= 0.0) return pen;
  for (Index k = 0; k < d; ++k) {
    for (Index kp = k + 1; kp < d; ++kp) {
      const double t = prev_theta(k, kp);
      double wsum = 0.0;
      if (rows_are_responses) {  // couple columns of B (responses)
        const Index m = b_rows_by.rows();
        if (t != 0.0) {
          const double s = t > 0 ? 1.0 : -1.0;
          for (Index j = 0; j < m; ++j) {
            const double diff = b_rows_by(j, k) - s * b_rows_by(j, kp);
            wsum += diff * diff;
          }
        } else {
          for (Index j = 0; j < m; ++j)
            wsum += (b_rows_by(j, k) * b_rows_by(j, k) + b_rows_by(j, kp) * b_rows_by(j, kp)) / 2.0;
        }
      } else {  // couple rows of B (predictors)
        const Index m = b_rows_by.cols();
        if (t != 0.0) {
          const double s = t > 0 ? 1.0 : -1.0;
          for (Index kk = 0; kk < m; ++kk) {
            const double diff = b_rows_by(k, kk) - s * b_rows_by(kp, kk);
            wsum += diff * diff;
          }
        } else {
          for (Index kk = 0; kk < m; ++kk)
            wsum += (b_rows_by(k, kk) * b_rows_by(k, kk) + b_rows_by(kp, kk) * b_rows_by(kp, kk)) /
                    2.0;
        }
      }
      const double add = gamma * wsum / 2.0;
      pen(k, kp) += add;
      pen(kp, k) += add;
    }
  }
  return pen;
}

}  // namespace

TwoStageResult iterative_refine(const Dataset& ds, const TwoStageResult& init,
                                const PenaltyConfig& pen, const SolveOptions& opts, int max_outer,
                                const GlassoOptions& gopts) {
  pen.validate();
  opts.validate();
  if (max_outer < 1) throw ConfigError("max_outer must be at least 1");

  const SampleCovariance sy = sample_covariance(ds.y);
  const SampleCovariance sx =
      opts.mode == FitMode::Ipbo ? sample_covariance(ds.x) : SampleCovariance{};

  TwoStageResult cur = init;
  cur.outer_converged = false;
  for (int m = 0; m < max_outer; ++m) {
    const Matrix pen_theta =
        refine_penalty(cur.fit.b_hat, cur.theta.theta, pen.lambda2, pen.gamma1, true);
    TwoStageResult next;
    next.theta = fit_glasso_weighted(sy, pen_theta, gopts);
    const LaplacianMatrix lap1 = build_laplacian(next.theta.theta);
    if (opts.mode == FitMode::Ipbo) {
      const Matrix pen_omega =
          refine_penalty(cur.fit.b_hat, cur.omega->theta, pen.lambda3, pen.gamma2, false);
      next.omega = fit_glasso_weighted(sx, pen_omega, gopts);
      const LaplacianMatrix lap2 = build_laplacian(next.omega->theta);
      next.fit = fit_b(ds, &lap1, &lap2, pen, opts);
    } else {
      next.fit = fit_b(ds, &lap1, nullptr, pen, opts);
    }
    const double change = (next.fit.b_hat - cur.fit.b_hat).norm();
    const double scale = 1.0 + cur.fit.b_hat.norm();
    next.n_outer = m + 1;
    next.outer_converged = change <= opts.tol * scale;
    cur = std::move(next);
    if (cur.outer_converged) break;
  }
  return cur;
}

std::size_t BicReport::best_feasible() const {
  std::size_t pick = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!guard_ok[i] || degenerate[i]) continue;
    if (pick == scores.size() || scores[i] < scores[pick]) pick = i;
  }
  return pick == scores.size() ? best : pick;
}

BicReport bic_tune(const Dataset& ds, const LaplacianMatrix* lap1, const LaplacianMatrix* lap2,
                   const std::vector<std::array<double, 3>>& grid, const SolveOptions& opts) {
  if (grid.empty()) throw ConfigError("BIC grid must be nonempty");
  const Index q = ds.q();
  const double n = static_cast<double>(ds.n());
  const double inf = std::numeric_limits<double>::infinity();

  BicReport report;
  report.grid = grid;
  report.scores.assign(grid.size(), 0.0);
  report.per_response_rss.resize(static_cast<Index>(grid.size()), q);
  report.degenerate.assign(grid.size(), 0);
  report.guard_ok.assign(grid.size(), 1);

  for (std::size_t i = 0; i < grid.size(); ++i) {
    PenaltyConfig pen;
    pen.lambda1 = grid[i][0];
    pen.gamma1 = grid[i][1];
    pen.gamma2 = grid[i][2];
    pen.validate();
    const CoefficientFit fit = fit_b(ds, lap1, lap2, pen, opts);
    const Matrix resid = ds.y - ds.x * fit.b_hat;
    const auto support = fit.per_response_support();
    double score = 0.0;
    bool degenerate = false;
    for (Index k = 0; k < q; ++k) {
      const double rss = resid.col(k).squaredNorm();
      report.per_response_rss(static_cast<Index>(i), k) = rss;
      if (rss < 1e-12) {
        degenerate = true;
        continue;
      }
      score += n * std::log(rss) +
               std::log(n) * static_cast<double>(support[static_cast<std::size_t>(k)].size());
    }
    report.scores[i] = degenerate ? inf : score;
    report.degenerate[i] = degenerate ? 1 : 0;
    const double max_b = fit.b_hat.size() ? fit.b_hat.cwiseAbs().maxCoeff() : 0.0;
    report.guard_ok[i] = std::max(pen.gamma1, pen.gamma2) * max_b <= pen.lambda1 ? 1 : 0;
  }

  report.best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (report.scores[i] < report.scores[report.best]) report.best = i;
  return report;
}

int selected_count(const CoefficientFit& fit, CountMode mode) {
  return mode == CountMode::Cells ? static_cast<int>(fit.support_size())
                                  : static_cast<int>(fit.row_support().size());
}

SparsityTuneResult sparsity_target_tune(const Dataset& ds, const LaplacianMatrix* lap1,
                                        const LaplacianMatrix* lap2, double gamma1, double gamma2,
                                        int target_nnz, CountMode count_mode,
                                        const SolveOptions& opts) {
  if (target_nnz <= 0) throw ConfigError("target_nnz must be positive");

  const double lam_max = lambda1_max(ds);
  const double lam_floor = 1e-6 * lam_max;

  SparsityTuneResult result;
  auto probe = [&](double lam) {
    PenaltyConfig pen;
    pen.lambda1 = lam;
    pen.gamma1 = gamma1;
    pen.gamma2 = gamma2;
    ++result.n_probes;
    return fit_b(ds, lap1, lap2, pen, opts);
  };

  CoefficientFit floor_fit = probe(lam_floor);
  const int floor_count = selected_count(floor_fit, count_mode);
  if (floor_count < target_nnz) throw TargetUnreachable(target_nnz, floor_count);
  if (floor_count == target_nnz) {
    result.lambda1_star = lam_floor;
    result.fit = std::move(floor_fit);
    return result;
  }

  double lo = lam_floor;  // count > target here
  double hi = lam_max;    // count <= target here (zero fit at lam_max)
  int lo_count = floor_count;

  bool have_best = false;
  double best_lam = hi;
  int best_count = 0;
  CoefficientFit best_fit;
  bool monotone_suspect = false;

  auto consider = [&](double lam, int count, CoefficientFit&& fit) {
    const bool better = !have_best || count > best_count ||
                        (count == best_count && lam > best_lam);
    if (count <= target_nnz && better) {
      have_best = true;
      best_lam = lam;
      best_count = count;
      best_fit = std::move(fit);
    }
  };

  {
    CoefficientFit top = probe(lam_max);
    consider(lam_max, selected_count(top, count_mode), std::move(top));
  }

  while (result.n_probes < 40 && hi / lo > 1.0 + 1e-10) {
    const double mid = std::sqrt(lo * hi);
    CoefficientFit fit = probe(mid);
    const int count = selected_count(fit, count_mode);
    if (count > lo_count) monotone_suspect = true;  // count grew with lambda
    if (count <= target_nnz) {
      consider(mid, count, std::move(fit));
      hi = mid;
    } else {
      lo = mid;
      lo_count = count;
    }
  }

  // Bisection assumes a monotone count path; scan a grid when that failed.
  if (monotone_suspect || !have_best) {
    result.used_grid_fallback = true;
    const double llo = std::log(lam_floor), lhi = std::log(lam_max);
    for (int i = 0; i < 20; ++i) {
      const double lam = std::exp(llo + (lhi - llo) * i / 19.0);
      CoefficientFit fit = probe(lam);
      consider(lam, selected_count(fit, count_mode), std::move(fit));
    }
  }
  if (!have_best) throw TargetUnreachable(target_nnz, floor_count);

  result.lambda1_star = best_lam;
  result.fit = std::move(best_fit);
  return result;
}

}  // namespace ipbo
