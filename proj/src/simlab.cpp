#include "ipbo/simlab.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include <json.hpp>

#include "ipbo/csv.hpp"
#include "ipbo/parallel.hpp"
#include "ipbo/rng.hpp"

namespace ipbo {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

Matrix ar_matrix(Index d, double rho) {
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = std::pow(rho, std::abs(static_cast<double>(i - j)));
  return m;
}

Matrix block_diag_ar(Index d, Index block, double rho) {
  Matrix m = Matrix::Identity(d, d);
  for (Index start = 0; start < d; start += block) {
    const Index len = std::min(block, d - start);
    m.block(start, start, len, len) = ar_matrix(len, rho);
  }
  return m;
}

// Identity plus 0.5 on the first off-diagonal of the leading head x head block.
Matrix identity_plus_tridiag(Index d, Index head) {
  Matrix m = Matrix::Identity(d, d);
  for (Index i = 0; i + 1 < std::min(head, d); ++i) {
    m(i, i + 1) = 0.5;
    m(i + 1, i) = 0.5;
  }
  return m;
}

Matrix shared_coefficients(Index p, Index q) {
  Matrix b = Matrix::Zero(p, q);
  for (Index j = 0; j < 5; ++j) {
    const Index lo = 3 * j;       // k = 3j-2 .. 3j+7, one-based
    const Index hi = 3 * j + 9;
    for (Index k = lo; k <= std::min(hi, q - 1); ++k) b(j, k) = 3.0;
  }
  return b;
}

Eigen::LLT<Matrix> cholesky_or_throw(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw Error(std::string(what) + " is not positive definite");
  return llt;
}

}  // namespace

ScenarioSpec make_scenario(int example_id, Index p, Index q, Index n, std::uint64_t seed) {
  if (example_id < 1 || example_id > 6)
    throw ConfigError("example_id must be in 1..6, got " + std::to_string(example_id));
  if (n < 2) throw DimensionTooSmall(example_id, "n >= 2");

  ScenarioSpec spec;
  spec.example_id = example_id;
  spec.n = n;
  spec.p = p;
  spec.q = q;
  spec.seed = seed;

  switch (example_id) {
    case 1:
      if (p < 5 || q < 13) throw DimensionTooSmall(example_id, "p >= 5 and q >= 13");
      spec.sigma = block_diag_ar(p, 5, 0.8);
      spec.lambda_mat = Matrix::Identity(q, q);
      spec.b_true = shared_coefficients(p, q);
      break;
    case 2:
      if (p < 5 || q < 13) throw DimensionTooSmall(example_id, "p >= 5 and q >= 13");
      spec.sigma = Matrix::Identity(p, p);
      spec.lambda_mat = block_diag_ar(q, 5, 0.3);
      spec.b_true = shared_coefficients(p, q);
      break;
    case 3:
      if (p < 5 || q < 22) throw DimensionTooSmall(example_id, "p >= 5 and q >= 22");
      spec.sigma = Matrix::Identity(p, p);
      spec.lambda_mat = Matrix::Identity(q, q);
      spec.lambda_mat.topLeftCorner(22, 22) = ar_matrix(22, 0.6);
      spec.b_true = shared_coefficients(p, q);
      break;
    case 4:
      if (p < 5 || q < 13) throw DimensionTooSmall(example_id, "p >= 5 and q >= 13");
      spec.sigma = ar_matrix(p, 0.5);
      spec.lambda_mat = ar_matrix(q, 0.3);
      spec.b_true = shared_coefficients(p, q);
      break;
    case 5:
      if (p < 10 || q < 10) throw DimensionTooSmall(example_id, "p >= 10 and q >= 10");
      spec.sigma = identity_plus_tridiag(p, 10);
      spec.lambda_mat = identity_plus_tridiag(q, 10);
      spec.b_true = Matrix::Zero(p, q);
      spec.b_true.topLeftCorner(10, 10).setConstant(3.0);
      break;
    case 6: {
      if (p < 20 || q < 30) throw DimensionTooSmall(example_id, "p >= 20 and q >= 30");
      spec.sigma = identity_plus_tridiag(p, 20);
      spec.lambda_mat = identity_plus_tridiag(q, 30);
      spec.b_true = Matrix::Zero(p, q);
      Rng rng(seed);
      for (Index j = 0; j < 20; ++j)
        for (Index k = 0; k < 30; ++k)
          if (rng.bernoulli(0.6)) spec.b_true(j, k) = 3.0;
      break;
    }
    default:
      break;
  }
  cholesky_or_throw(spec.sigma, "sigma");
  cholesky_or_throw(spec.lambda_mat, "lambda_mat");
  return spec;
}

Dataset sample_data(const ScenarioSpec& spec, Index n, std::uint64_t seed) {
  const Matrix l_sigma = cholesky_or_throw(spec.sigma, "sigma").matrixL();
  const Matrix l_lambda = cholesky_or_throw(spec.lambda_mat, "lambda_mat").matrixL();
  Rng rng(seed);
  const Matrix zx = rng.normal_matrix(n, spec.p);
  const Matrix ze = rng.normal_matrix(n, spec.q);
  Matrix x = zx * l_sigma.transpose();
  Matrix y = x * spec.b_true + ze * l_lambda.transpose();
  return Dataset::raw(std::move(x), std::move(y));
}

MetricReport evaluate(const CoefficientFit& fit, const Dataset& train_ds, const ScenarioSpec& spec,
                      std::uint64_t test_seed) {
  if (fit.b_hat.rows() != spec.p || fit.b_hat.cols() != spec.q)
    throw DimensionMismatch(spec.p, fit.b_hat.rows());

  const RawCoefficients raw = unstandardize_coefficients(fit, train_ds);
  MetricReport report;
  report.l2_error = (raw.b - spec.b_true).norm();

  const Index n_test = train_ds.n();
  const Dataset test = sample_data(spec, n_test, test_seed);
  const Matrix pred = (test.x * raw.b).rowwise() + raw.intercept.transpose();
  report.mse = (test.y - pred).squaredNorm() / static_cast<double>(n_test);

  Index both = 0, est_nnz = 0, true_nnz = 0;
  bool same = true;
  for (Index k = 0; k < spec.q; ++k) {
    for (Index j = 0; j < spec.p; ++j) {
      const bool e = fit.b_hat(j, k) != 0.0;
      const bool t = spec.b_true(j, k) != 0.0;
      both += (e && t);
      est_nnz += e;
      true_nnz += t;
      same = same && (e == t);
    }
  }
  report.support_precision =
      est_nnz == 0 ? (true_nnz == 0 ? 1.0 : 0.0)
                   : static_cast<double>(both) / static_cast<double>(est_nnz);
  report.support_recall =
      true_nnz == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(true_nnz);
  report.exact_recovery = same;
  return report;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Sipbo: return "sipbo";
    case Method::Ipbo: return "ipbo";
    case Method::Lasso: return "lasso";
    case Method::L21: return "l21";
    case Method::Mrce: return "mrce";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "sipbo") return Method::Sipbo;
  if (name == "ipbo") return Method::Ipbo;
  if (name == "lasso") return Method::Lasso;
  if (name == "l21") return Method::L21;
  if (name == "mrce") return Method::Mrce;
  throw ConfigError("unknown method: " + name);
}

namespace {

std::vector<double> ratio_grid(double top, int points, double min_ratio) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double lo = std::log(min_ratio);
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
    grid[static_cast<std::size_t>(i)] = top * std::exp(lo * (1.0 - t));
  }
  return grid;
}

// BIC with per-response degrees of freedom supplied by the caller.
double bic_score(const Dataset& ds, const Matrix& b, const std::vector<double>& df) {
  const Matrix resid = ds.y - ds.x * b;
  const double n = static_cast<double>(ds.n());
  double score = 0.0;
  for (Index k = 0; k < ds.q(); ++k) {
    const double rss = resid.col(k).squaredNorm();
    if (rss < 1e-12) return std::numeric_limits<double>::infinity();
    score += n * std::log(rss) + std::log(n) * df[static_cast<std::size_t>(k)];
  }
  return score;
}

ProtocolFit protocol_sipbo_ipbo(Method method, const Dataset& ds, const StudyConfig& cfg,
                                std::uint64_t seed) {
  SolveOptions opts = cfg.solve;
  opts.mode = method == Method::Ipbo ? FitMode::Ipbo : FitMode::Sipbo;

  ProtocolFit out;
  const SampleCovariance sy = sample_covariance(ds.y);
  const auto grid_y = default_lambda_grid(sy.s, cfg.glasso_grid_points);
  const CvResult cv_y = cv_select_lambda(ds.y, grid_y, cfg.cv_folds, derive_seed(seed, 11),
                                         cfg.glasso);
  out.cv_lambda2 = cv_y.lambda_star;
  const PrecisionEstimate theta = fit_glasso(sy, cv_y.lambda_star, cfg.glasso);
  const LaplacianMatrix lap1 = build_laplacian(theta.theta);

  std::optional<LaplacianMatrix> lap2;
  if (method == Method::Ipbo) {
    const SampleCovariance sx = sample_covariance(ds.x);
    const auto grid_x = default_lambda_grid(sx.s, cfg.glasso_grid_points);
    const CvResult cv_x = cv_select_lambda(ds.x, grid_x, cfg.cv_folds, derive_seed(seed, 12),
                                           cfg.glasso);
    out.cv_lambda3 = cv_x.lambda_star;
    lap2 = build_laplacian(fit_glasso(sx, cv_x.lambda_star, cfg.glasso).theta);
  }

  const double lam_top = lambda1_max(ds);
  std::vector<std::array<double, 3>> grid;
  for (double lam1 : ratio_grid(lam_top, cfg.lambda1_points, cfg.lambda1_min_ratio))
    for (double f : cfg.gamma_factors)
      grid.push_back({lam1, f * lam1, method == Method::Ipbo ? f * lam1 : 0.0});

  const BicReport report =
      bic_tune(ds, &lap1, lap2 ? &*lap2 : nullptr, grid, opts);
  const std::size_t pick = report.best_feasible();
  out.guard_warning = !report.guard_ok[pick];

  out.pen.lambda1 = report.grid[pick][0];
  out.pen.gamma1 = report.grid[pick][1];
  out.pen.gamma2 = report.grid[pick][2];
  out.pen.lambda2 = cv_y.lambda_star;
  out.pen.lambda3 = out.cv_lambda3;
  out.fit = fit_b(ds, &lap1, lap2 ? &*lap2 : nullptr, out.pen, opts);
  return out;
}

ProtocolFit protocol_lasso(const Dataset& ds, const StudyConfig& cfg) {
  ProtocolFit out;
  const double lam_top = lambda1_max(ds);
  double best_score = std::numeric_limits<double>::infinity();
  for (double lam : ratio_grid(lam_top, cfg.lambda1_points, cfg.lambda1_min_ratio)) {
    CoefficientFit fit = lasso(ds, lam, cfg.solve);
    const auto support = fit.per_response_support();
    std::vector<double> df(static_cast<std::size_t>(ds.q()));
    for (Index k = 0; k < ds.q(); ++k)
      df[static_cast<std::size_t>(k)] =
          static_cast<double>(support[static_cast<std::size_t>(k)].size());
    const double score = bic_score(ds, fit.b_hat, df);
    if (score < best_score) {
      best_score = score;
      out.fit = std::move(fit);
      out.pen = PenaltyConfig{};
      out.pen.lambda1 = lam;
    }
  }
  return out;
}

ProtocolFit protocol_l21(const Dataset& ds, const StudyConfig& cfg) {
  ProtocolFit out;
  const double c = 2.0 / static_cast<double>(ds.n());
  double lam_top = 0.0;
  for (Index j = 0; j < ds.p(); ++j)
    lam_top = std::max(lam_top, (c * (ds.x.col(j).transpose() * ds.y)).norm());
  double best_score = std::numeric_limits<double>::infinity();
  for (double lam : ratio_grid(lam_top, cfg.lambda1_points, cfg.lambda1_min_ratio)) {
    CoefficientFit fit = l21(ds, lam, cfg.solve);
    const double rows = static_cast<double>(fit.row_support().size());
    const std::vector<double> df(static_cast<std::size_t>(ds.q()), rows);
    const double score = bic_score(ds, fit.b_hat, df);
    if (score < best_score) {
      best_score = score;
      out.fit = std::move(fit);
      out.pen = PenaltyConfig{};
      out.pen.lambda1 = lam;
    }
  }
  return out;
}

ProtocolFit protocol_mrce(const Dataset& ds, const StudyConfig& cfg) {
  ProtocolFit out;
  const double lam_b_top = lambda1_max(ds);
  const auto theta_grid =
      default_lambda_grid(sample_covariance(ds.y).s, cfg.mrce_theta_points);
  double best_score = std::numeric_limits<double>::infinity();
  for (double ratio : cfg.mrce_lam_b_ratios) {
    for (double lam_theta : theta_grid) {
      const double lam_b = ratio * lam_b_top;
      MrceResult res = mrce_approx(ds, lam_b, lam_theta, cfg.mrce_max_outer, cfg.solve,
                                   cfg.glasso);
      const auto support = res.fit.per_response_support();
      std::vector<double> df(static_cast<std::size_t>(ds.q()));
      for (Index k = 0; k < ds.q(); ++k)
        df[static_cast<std::size_t>(k)] =
            static_cast<double>(support[static_cast<std::size_t>(k)].size());
      const double score = bic_score(ds, res.fit.b_hat, df);
      if (score < best_score) {
        best_score = score;
        out.fit = std::move(res.fit);
        out.pen = PenaltyConfig{};
        out.pen.lambda1 = lam_b;
        out.pen.lambda2 = lam_theta;
      }
    }
  }
  return out;
}

}  // namespace

ProtocolFit fit_with_protocol(Method method, const Dataset& ds, const StudyConfig& cfg,
                              std::uint64_t seed) {
  switch (method) {
    case Method::Sipbo:
    case Method::Ipbo:
      return protocol_sipbo_ipbo(method, ds, cfg, seed);
    case Method::Lasso:
      return protocol_lasso(ds, cfg);
    case Method::L21:
      return protocol_l21(ds, cfg);
    case Method::Mrce:
      return protocol_mrce(ds, cfg);
  }
  throw ConfigError("unknown method");
}

StudyTable run_study(int example_id, const std::vector<std::pair<Index, Index>>& dims_grid,
                     Index n, const std::vector<Method>& methods, int reps,
                     std::uint64_t base_seed, const StudyConfig& cfg) {
  if (reps < 1) throw ConfigError("reps must be at least 1");
  if (dims_grid.empty() || methods.empty()) throw ConfigError("empty study grid");

  StudyTable table;
  table.example_id = example_id;
  table.n = n;
  table.base_seed = base_seed;

  const std::size_t n_dims = dims_grid.size();
  const std::size_t n_methods = methods.size();
  const std::size_t r = static_cast<std::size_t>(reps);

  std::vector<std::optional<MetricReport>> results(n_dims * r * n_methods);
  std::vector<std::string> errors(n_dims * r * n_methods);

  parallel_for_index(
      n_dims * r,
      [&](std::size_t task) {
        const std::size_t di = task / r;
        const std::size_t rep = task % r;
        const auto [p, q] = dims_grid[di];
        const std::uint64_t seed = base_seed + rep;
        ScenarioSpec spec;
        Dataset ds;
        std::uint64_t test_seed = 0;
        try {
          spec = make_scenario(example_id, p, q, n, seed);
          const Dataset raw = sample_data(spec, n, derive_seed(seed, 1));
          ds = standardize(raw.x, raw.y);
          test_seed = derive_seed(seed, 2);
        } catch (const std::exception& e) {
          for (std::size_t mi = 0; mi < n_methods; ++mi)
            errors[(di * r + rep) * n_methods + mi] = e.what();
          return;
        }
        for (std::size_t mi = 0; mi < n_methods; ++mi) {
          const std::size_t slot = (di * r + rep) * n_methods + mi;
          try {
            const ProtocolFit pf =
                fit_with_protocol(methods[mi], ds, cfg, derive_seed(seed, 3));
            results[slot] = evaluate(pf.fit, ds, spec, test_seed);
          } catch (const std::exception& e) {
            errors[slot] = e.what();
          }
        }
      },
      cfg.n_threads);

  for (std::size_t di = 0; di < n_dims; ++di) {
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      StudyCell cell;
      cell.p = dims_grid[di].first;
      cell.q = dims_grid[di].second;
      cell.method = methods[mi];
      std::vector<double> l2s, mses;
      for (std::size_t rep = 0; rep < r; ++rep) {
        const std::size_t slot = (di * r + rep) * n_methods + mi;
        if (results[slot]) {
          l2s.push_back(results[slot]->l2_error);
          mses.push_back(results[slot]->mse);
        } else {
          ++cell.failures;
          table.failure_log.push_back(
              "example=" + std::to_string(example_id) + " p=" + std::to_string(cell.p) +
              " q=" + std::to_string(cell.q) + " rep=" + std::to_string(rep) +
              " method=" + method_name(methods[mi]) + ": " + errors[slot]);
        }
      }
      cell.reps_done = static_cast<int>(l2s.size());
      auto mean_std = [](const std::vector<double>& v) {
        if (v.empty()) return std::pair<double, double>{0.0, 0.0};
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        if (v.size() == 1) return std::pair<double, double>{mean, 0.0};
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::pair<double, double>{mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
      };
      std::tie(cell.l2_mean, cell.l2_std) = mean_std(l2s);
      std::tie(cell.mse_mean, cell.mse_std) = mean_std(mses);
      cell.degenerate_std = cell.reps_done == 1;
      table.cells.push_back(cell);
    }
  }
  return table;
}

void write_study_csv(const std::string& path, const StudyTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "example,p,q,method,metric,mean,std,reps\n";
  for (const auto& cell : table.cells) {
    const std::string prefix = std::to_string(table.example_id) + "," +
                               std::to_string(cell.p) + "," + std::to_string(cell.q) + "," +
                               method_name(cell.method) + ",";
    out << prefix << "l2_error," << format_double(cell.l2_mean) << ","
        << format_double(cell.l2_std) << "," << cell.reps_done << "\n";
    out << prefix << "mse," << format_double(cell.mse_mean) << "," << format_double(cell.mse_std)
        << "," << cell.reps_done << "\n";
  }
}

std::string study_table_json(const StudyTable& table) {
  nlohmann::json doc;
  doc["example"] = table.example_id;
  doc["n"] = table.n;
  doc["base_seed"] = table.base_seed;
  doc["cells"] = nlohmann::json::array();
  for (const auto& cell : table.cells) {
    nlohmann::json c;
    c["p"] = cell.p;
    c["q"] = cell.q;
    c["method"] = method_name(cell.method);
    c["l2_error"] = {{"mean", cell.l2_mean}, {"std", cell.l2_std}};
    c["mse"] = {{"mean", cell.mse_mean}, {"std", cell.mse_std}};
    c["reps"] = cell.reps_done;
    c["failures"] = cell.failures;
    c["degenerate_std"] = cell.degenerate_std;
    doc["cells"].push_back(c);
  }
  doc["failures"] = table.failure_log;
  return doc.dump(2);
}

ConditionReport check_conditions(const ScenarioSpec& spec, const Matrix& x,
                                 const std::vector<std::vector<Index>>& per_response_support,
                                 bool kronecker_checks, std::uint64_t seed) {
  ConditionReport report;
  const Index n = x.rows();
  const Index p = spec.p;
  const Matrix c = (x.transpose() * x) / static_cast<double>(n);

  // max_k || C_{S_k^c} C_{S_k}^{-1} ||_inf
  for (const auto& sk : per_response_support) {
    if (sk.empty()) continue;
    const Index m = static_cast<Index>(sk.size());
    Matrix css(m, m);
    for (Index a = 0; a < m; ++a)
      for (Index b = 0; b < m; ++b)
        css(a, b) = c(sk[static_cast<std::size_t>(a)], sk[static_cast<std::size_t>(b)]);
    std::vector<Index> comp;
    std::vector<bool> in_s(static_cast<std::size_t>(p), false);
    for (Index j : sk) in_s[static_cast<std::size_t>(j)] = true;
    for (Index j = 0; j < p; ++j)
      if (!in_s[static_cast<std::size_t>(j)]) comp.push_back(j);
    if (comp.empty()) continue;
    Matrix csc(static_cast<Index>(comp.size()), m);
    for (Index a = 0; a < csc.rows(); ++a)
      for (Index b = 0; b < m; ++b)
        csc(a, b) = c(comp[static_cast<std::size_t>(a)], sk[static_cast<std::size_t>(b)]);
    const Matrix mat = csc * css.inverse();
    report.irrep_regression =
        std::max(report.irrep_regression, mat.cwiseAbs().rowwise().sum().maxCoeff());
  }

  // Kronecker-form quantities on the population matrices.
  const auto kron_irrep = [](const Matrix& base) {
    const Index d = base.rows();
    const Matrix prec = base.llt().solve(Matrix::Identity(d, d));
    std::vector<Index> support;
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b)
        if (std::abs(prec(a, b)) > 1e-10) support.push_back(a * d + b);
    const Index d2 = d * d;
    if (static_cast<Index>(support.size()) == d2) return 0.0;  // vacuous, no zero pattern
    Matrix t(d2, d2);
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b)
        for (Index e = 0; e < d; ++e)
          for (Index f = 0; f < d; ++f) t(a * d + b, e * d + f) = base(a, e) * base(b, f);
    const Index m = static_cast<Index>(support.size());
    Matrix tss(m, m);
    for (Index a = 0; a < m; ++a)
      for (Index b = 0; b < m; ++b)
        tss(a, b) = t(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
    const Matrix tss_inv = tss.inverse();
    double worst = 0.0;
    std::vector<bool> in_s(static_cast<std::size_t>(d2), false);
    for (Index e : support) in_s[static_cast<std::size_t>(e)] = true;
    Vector row(m);
    for (Index e = 0; e < d2; ++e) {
      if (in_s[static_cast<std::size_t>(e)]) continue;
      for (Index b = 0; b < m; ++b) row(b) = t(e, support[static_cast<std::size_t>(b)]);
      worst = std::max(worst, (row.transpose() * tss_inv).cwiseAbs().sum());
    }
    return worst;
  };

  Matrix theta_inv = spec.lambda_mat + spec.b_true.transpose() * spec.sigma * spec.b_true;
  if (kronecker_checks) {
    if (spec.p > 30 || spec.q > 30)
      throw DimensionGuard("Kronecker checks are limited to p, q <= 30");
    report.irrep_omega = kron_irrep(spec.sigma);
    report.irrep_theta = kron_irrep(theta_inv);
  }

  // Randomized restricted-eigenvalue proxy: an upper bound on tau_min, not a
  // certificate.
  Rng rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  const Index max_a = std::max<Index>(1, std::min(n, p) / 2);
  for (int trial = 0; trial < 10000; ++trial) {
    const Index a_size = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(max_a)));
    std::vector<Index> idx(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) idx[static_cast<std::size_t>(j)] = j;
    rng.shuffle(idx);
    Vector delta = Vector::Zero(p);
    double norm_a = 0.0;
    for (Index a = 0; a < a_size; ++a) {
      const double v = rng.normal();
      delta(idx[static_cast<std::size_t>(a)]) = v;
      norm_a += v * v;
    }
    norm_a = std::sqrt(norm_a);
    const double budget = 7.0 * norm_a * rng.uniform();
    double l1 = 0.0;
    for (Index a = a_size; a < p; ++a) {
      const double v = rng.normal();
      delta(idx[static_cast<std::size_t>(a)]) = v;
      l1 += std::abs(v);
    }
    if (l1 > 0.0) {
      const double scale = budget / l1;
      for (Index a = a_size; a < p; ++a) delta(idx[static_cast<std::size_t>(a)]) *= scale;
    }
    const double ratio = (x * delta).squaredNorm() /
                         (static_cast<double>(n) * delta.squaredNorm());
    worst = std::min(worst, ratio);
  }
  report.re_lower_bound_estimate = worst;

  const auto max_row_degree = [](const Matrix& prec) {
    int deg = 0;
    for (Index i = 0; i < prec.rows(); ++i) {
      int row = 0;
      for (Index j = 0; j < prec.cols(); ++j)
        if (std::abs(prec(i, j)) > 1e-10) ++row;
      deg = std::max(deg, row);
    }
    return deg;
  };
  const Matrix omega = spec.sigma.llt().solve(Matrix::Identity(p, p));
  const Matrix theta = theta_inv.llt().solve(Matrix::Identity(spec.q, spec.q));
  report.max_degree = std::max(max_row_degree(omega), max_row_degree(theta));
  return report;
}

}  // namespace ipbo
