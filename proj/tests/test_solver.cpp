#include <doctest.h>

#include <cmath>

#include "ipbo/baselines.hpp"
#include "ipbo/rng.hpp"
#include "ipbo/solver.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ipbo;

namespace {

Dataset tiny_unit_dataset() {
  // (1/n) X'X = 1 and (1/n) X'Y = 1.5 with n = 2.
  Dataset ds;
  ds.x = Matrix(2, 1);
  ds.x << 1.0, -1.0;
  ds.y = Matrix(2, 1);
  ds.y << 1.5, -1.5;
  ds.x_means = Vector::Zero(1);
  ds.x_scales = Vector::Ones(1);
  ds.y_means = Vector::Zero(1);
  ds.standardized = true;
  return ds;
}

}  // namespace

TEST_CASE("scalar fit matches the hand KKT solution") {
  const Dataset ds = tiny_unit_dataset();
  PenaltyConfig pen;
  pen.lambda1 = 1.0;
  const CoefficientFit fit = fit_b(ds, nullptr, nullptr, pen, SolveOptions{});
  CHECK(fit.converged);
  CHECK(fit.b_hat(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("lambda at or above lambda1_max yields the zero fit") {
  Rng rng(3);
  const Dataset ds = testing::random_dataset(rng, 30, 8, 4);
  const double top = lambda1_max(ds);
  PenaltyConfig pen;
  pen.lambda1 = top;
  const CoefficientFit fit = fit_b(ds, nullptr, nullptr, pen, SolveOptions{});
  CHECK(fit.support_size() == 0);
  CHECK(fit.converged);
  CHECK(fit_kkt_residual(ds, nullptr, nullptr, pen, Matrix::Zero(8, 4)) <= 1e-9);
  pen.lambda1 = 0.999 * top;
  const CoefficientFit below = fit_b(ds, nullptr, nullptr, pen, SolveOptions{});
  CHECK(below.support_size() > 0);
}

TEST_CASE("with zero smoothing the solver reduces to the lasso baseline") {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset ds = testing::random_dataset(rng, 40, 10, 3);
    PenaltyConfig pen;
    pen.lambda1 = 0.1 + 0.3 * rng.uniform();
    const CoefficientFit mine = fit_b(ds, nullptr, nullptr, pen, SolveOptions{});
    const CoefficientFit oracle = lasso(ds, pen.lambda1, SolveOptions{});
    CHECK(std::abs(mine.objective_value - oracle.objective_value) < 1e-8);
    CHECK(mine.support() == oracle.support());
    CHECK((mine.b_hat - oracle.b_hat).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("objective is non-increasing sweep by sweep") {
  Rng rng(11);
  Matrix b_true = Matrix::Zero(12, 4);
  b_true.topLeftCorner(3, 4).setConstant(2.0);
  const Dataset ds = testing::planted_dataset(rng, 50, 12, 4, b_true);
  const LaplacianMatrix lap1 = build_laplacian(testing::random_symmetric_posdiag(rng, 4));
  const LaplacianMatrix lap2 = build_laplacian(testing::random_symmetric_posdiag(rng, 12));
  PenaltyConfig pen;
  pen.lambda1 = 0.2;
  pen.gamma1 = 0.05;
  pen.gamma2 = 0.02;
  SolveOptions opts;
  opts.mode = FitMode::Ipbo;
  const CoefficientFit fit = fit_b(ds, &lap1, &lap2, pen, opts);
  REQUIRE(fit.objective_path.size() >= 2);
  for (std::size_t i = 1; i < fit.objective_path.size(); ++i)
    CHECK(fit.objective_path[i] <= fit.objective_path[i - 1] + 1e-12);
  CHECK(fit.objective_value ==
        doctest::Approx(fit_objective(ds, &lap1, &lap2, pen, fit.b_hat)));
}

TEST_CASE("KKT violations stay within ten times the sweep tolerance") {
  Rng rng(13);
  const Dataset ds = testing::random_dataset(rng, 40, 15, 5);
  const LaplacianMatrix lap1 = build_laplacian(testing::random_symmetric_posdiag(rng, 5));
  PenaltyConfig pen;
  pen.lambda1 = 0.15;
  pen.gamma1 = 0.05;
  SolveOptions opts;
  opts.tol = 1e-7;
  const CoefficientFit fit = fit_b(ds, &lap1, nullptr, pen, opts);
  CHECK(fit.converged);
  CHECK(fit.kkt_residual <= 10.0 * opts.tol);
  CHECK(fit_kkt_residual(ds, &lap1, nullptr, pen, fit.b_hat) <= 10.0 * opts.tol);
}

TEST_CASE("stronger smoothing pulls coupled coefficients together") {
  // Positive theta_12 penalizes (b_j1 - b_j2)^2; the gap must shrink as
  // gamma1 grows.
  Rng rng(17);
  Matrix b_true = Matrix::Zero(6, 2);
  b_true(0, 0) = 3.0;
  b_true(0, 1) = 1.0;
  const Dataset ds = testing::planted_dataset(rng, 80, 6, 2, b_true);
  Matrix theta(2, 2);
  theta << 1.0, 0.5, 0.5, 1.0;
  const LaplacianMatrix lap1 = build_laplacian(theta);
  double prev_gap = -1.0;
  int step = 0;
  for (double gamma1 : {0.0, 0.1, 1.0}) {
    PenaltyConfig pen;
    pen.lambda1 = 0.05;
    pen.gamma1 = gamma1;
    const CoefficientFit fit = fit_b(ds, &lap1, nullptr, pen, SolveOptions{});
    const double gap = std::abs(fit.b_hat(0, 0) - fit.b_hat(0, 1));
    if (step > 0) CHECK(gap < prev_gap);
    prev_gap = gap;
    ++step;
  }
}

TEST_CASE("two-stage pipeline") {
  Rng rng(19);
  Matrix b_true = Matrix::Zero(10, 5);
  for (Index k = 0; k < 5; ++k) b_true(k, k) = 2.0;
  const Dataset ds = testing::planted_dataset(rng, 200, 10, 5, b_true);
  PenaltyConfig pen;
  pen.lambda1 = 0.2;
  pen.lambda2 = 0.3;
  pen.lambda3 = 0.3;
  pen.gamma1 = 0.05;
  pen.gamma2 = 0.05;

  SUBCASE("SIPBO skips the predictor graph and gamma2") {
    SolveOptions opts;
    opts.mode = FitMode::Sipbo;
    PenaltyConfig sipbo_pen = pen;
    sipbo_pen.gamma2 = 0.0;
    const TwoStageResult res = two_stage(ds, sipbo_pen, opts);
    CHECK_FALSE(res.omega.has_value());
    CHECK(res.theta.converged);
    CHECK(res.fit.converged);
  }

  SUBCASE("independent responses reduce to the lasso") {
    // Nearly diagonal precision of Y: disjoint supports and unit noise.
    SolveOptions opts;
    opts.mode = FitMode::Sipbo;
    PenaltyConfig p2;
    p2.lambda1 = 0.2;
    p2.lambda2 = default_lambda_grid(sample_covariance(ds.y).s, 20).back();  // forces diagonal
    p2.gamma1 = 0.05;
    const TwoStageResult res = two_stage(ds, p2, opts);
    const CoefficientFit plain = lasso(ds, p2.lambda1, SolveOptions{});
    CHECK((res.fit.b_hat - plain.b_hat).cwiseAbs().maxCoeff() < 1e-4);
  }

  SUBCASE("deterministic given identical inputs") {
    SolveOptions opts;
    opts.mode = FitMode::Ipbo;
    const TwoStageResult a = two_stage(ds, pen, opts);
    const TwoStageResult b = two_stage(ds, pen, opts);
    CHECK((a.fit.b_hat - b.fit.b_hat).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.theta.theta - b.theta.theta).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("iterative refinement") {
  Rng rng(23);
  Matrix b_true = Matrix::Zero(8, 4);
  b_true.topLeftCorner(2, 2).setConstant(2.5);
  const Dataset ds = testing::planted_dataset(rng, 120, 8, 4, b_true);
  PenaltyConfig pen;
  pen.lambda1 = 0.15;
  pen.lambda2 = 0.25;

  SUBCASE("zero coupling is a fixed point after one outer pass") {
    SolveOptions opts;
    opts.mode = FitMode::Sipbo;
    const TwoStageResult init = two_stage(ds, pen, opts);
    const TwoStageResult refined = iterative_refine(ds, init, pen, opts, 5);
    CHECK(refined.outer_converged);
    CHECK(refined.n_outer == 1);
    CHECK((refined.fit.b_hat - init.fit.b_hat).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("zero coefficients reproduce the plain glasso refresh") {
    PenaltyConfig pg = pen;
    pg.gamma1 = 0.4;
    SolveOptions opts;
    opts.mode = FitMode::Sipbo;
    TwoStageResult init = two_stage(ds, pg, opts);
    init.fit.b_hat.setZero();
    const TwoStageResult refined = iterative_refine(ds, init, pg, opts, 1);
    const PrecisionEstimate plain = fit_glasso(sample_covariance(ds.y), pg.lambda2);
    CHECK((refined.theta.theta - plain.theta).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("joint objective is non-increasing over outer iterations") {
    PenaltyConfig pj;
    pj.lambda1 = 0.2;
    pj.lambda2 = 0.3;
    pj.gamma1 = 0.05;
    SolveOptions opts;
    opts.mode = FitMode::Sipbo;
    const SampleCovariance sy = sample_covariance(ds.y);
    const auto joint = [&](const TwoStageResult& r) {
      const LaplacianMatrix lap = build_laplacian(r.theta.theta);
      return fit_objective(ds, &lap, nullptr, pj, r.fit.b_hat) +
             glasso_objective(sy.s, r.theta.theta, pj.lambda2);
    };
    TwoStageResult cur = two_stage(ds, pj, opts);
    double prev = joint(cur);
    for (int outer = 1; outer <= 3; ++outer) {
      const TwoStageResult next = iterative_refine(ds, cur, pj, opts, 1);
      const double val = joint(next);
      CHECK(val <= prev + 1e-8);
      prev = val;
      cur = next;
      if (cur.outer_converged) break;
    }
  }
}

TEST_CASE("BIC tuning") {
  Rng rng(29);
  Matrix b_true = Matrix::Zero(10, 1);
  b_true(0, 0) = 3.0;
  b_true(1, 0) = -2.0;
  const Dataset ds = testing::planted_dataset(rng, 100, 10, 1, b_true);

  SUBCASE("scores follow the BIC formula") {
    const double top = lambda1_max(ds);
    const std::vector<std::array<double, 3>> grid = {{top, 0.0, 0.0}, {0.05 * top, 0.0, 0.0}};
    const BicReport report = bic_tune(ds, nullptr, nullptr, grid, SolveOptions{});
    // At lambda1_max the fit is empty: score = n*log(||y||^2).
    const double rss0 = ds.y.col(0).squaredNorm();
    CHECK(report.per_response_rss(0, 0) == doctest::Approx(rss0));
    CHECK(report.scores[0] == doctest::Approx(100.0 * std::log(rss0)));
    // Hand evaluation of the formula at the second grid point.
    PenaltyConfig pen;
    pen.lambda1 = 0.05 * top;
    const CoefficientFit fit = fit_b(ds, nullptr, nullptr, pen, SolveOptions{});
    const double rss = (ds.y - ds.x * fit.b_hat).squaredNorm();
    const double expected =
        100.0 * std::log(rss) + std::log(100.0) * static_cast<double>(fit.support_size());
    CHECK(report.scores[1] == doctest::Approx(expected));
    CHECK(report.best == 1);  // strong signal beats the null model
  }

  SUBCASE("reference value n=100, rss=10, |S|=3") {
    CHECK(100.0 * std::log(10.0) + std::log(100.0) * 3.0 ==
          doctest::Approx(244.0740).epsilon(1e-6));
  }

  SUBCASE("singleton grid and tie-breaking") {
    const std::vector<std::array<double, 3>> one = {{1.0, 0.0, 0.0}};
    CHECK(bic_tune(ds, nullptr, nullptr, one, SolveOptions{}).best == 0);
    const double top = 2.0 * lambda1_max(ds);
    const std::vector<std::array<double, 3>> ties = {{top, 0.0, 0.0}, {top * 1.5, 0.0, 0.0}};
    const BicReport report = bic_tune(ds, nullptr, nullptr, ties, SolveOptions{});
    CHECK(report.scores[0] == report.scores[1]);  // both fits are empty
    CHECK(report.best == 0);
  }

  SUBCASE("degenerate RSS is flagged and scored +inf") {
    Dataset noiseless;
    Rng rng2(31);
    noiseless.x = rng2.normal_matrix(20, 2);
    Matrix coeffs(2, 1);
    coeffs << 1.0, -1.0;
    Matrix y = noiseless.x * coeffs;
    const Dataset exact = standardize(noiseless.x, y);
    const std::vector<std::array<double, 3>> grid = {{1e-9, 0.0, 0.0}};
    SolveOptions opts;
    opts.tol = 1e-12;
    const BicReport report = bic_tune(exact, nullptr, nullptr, grid, opts);
    CHECK(report.degenerate[0] == 1);
    CHECK(std::isinf(report.scores[0]));
  }

  SUBCASE("the small-gamma guard flags oversized gamma") {
    const LaplacianMatrix lap = build_laplacian(Matrix::Identity(1, 1) * 2.0);
    const std::vector<std::array<double, 3>> grid = {
        {0.3, 5.0, 0.0},   // gamma1 * max|b| will exceed lambda1
        {0.3, 0.0, 0.0}};  // feasible
    const BicReport report = bic_tune(ds, &lap, nullptr, grid, SolveOptions{});
    CHECK(report.guard_ok[0] == 0);
    CHECK(report.guard_ok[1] == 1);
    CHECK(report.best_feasible() == 1);
  }
}

TEST_CASE("sparsity-targeted tuning") {
  Rng rng(37);
  Matrix b_true = Matrix::Zero(12, 2);
  for (Index j = 0; j < 6; ++j) b_true(j, 0) = 2.0 + static_cast<double>(j);
  for (Index j = 3; j < 9; ++j) b_true(j, 1) = 1.0 + static_cast<double>(j);
  const Dataset ds = testing::planted_dataset(rng, 150, 12, 2, b_true);

  SUBCASE("target zero is rejected") {
    CHECK_THROWS_AS(
        sparsity_target_tune(ds, nullptr, nullptr, 0.0, 0.0, 0, CountMode::Cells, SolveOptions{}),
        ConfigError);
  }

  SUBCASE("a loose target returns the near-zero-penalty fit") {
    // Dense truth: all 12 predictors carry signal at the floor penalty.
    Matrix dense = Matrix::Constant(12, 2, 1.5);
    const Dataset full = testing::planted_dataset(rng, 150, 12, 2, dense);
    const SparsityTuneResult res = sparsity_target_tune(full, nullptr, nullptr, 0.0, 0.0, 12,
                                                        CountMode::Predictors, SolveOptions{});
    CHECK(res.lambda1_star == doctest::Approx(1e-6 * lambda1_max(full)));
    CHECK(selected_count(res.fit, CountMode::Predictors) == 12);
  }

  SUBCASE("unreachable targets throw") {
    CHECK_THROWS_AS(sparsity_target_tune(ds, nullptr, nullptr, 0.0, 0.0, 1000, CountMode::Cells,
                                         SolveOptions{}),
                    TargetUnreachable);
  }

  SUBCASE("bisection hits an interior target") {
    const SparsityTuneResult res = sparsity_target_tune(ds, nullptr, nullptr, 0.0, 0.0, 5,
                                                        CountMode::Predictors, SolveOptions{});
    CHECK(selected_count(res.fit, CountMode::Predictors) <= 5);
    CHECK(selected_count(res.fit, CountMode::Predictors) >= 3);
    CHECK(res.n_probes <= 40);
  }

  SUBCASE("selected count is non-increasing along a lambda path") {
    int violations = 0;
    int prev = -1;
    const double top = lambda1_max(ds);
    for (int i = 0; i < 20; ++i) {
      PenaltyConfig pen;
      pen.lambda1 = top * std::pow(10.0, -3.0 * (19 - i) / 19.0);
      const CoefficientFit fit = fit_b(ds, nullptr, nullptr, pen, SolveOptions{});
      const int count = selected_count(fit, CountMode::Cells);
      if (prev >= 0 && count > prev) ++violations;
      prev = count;
    }
    CHECK(violations <= 2);
  }
}

TEST_CASE("SIPBO mode rejects a gamma2 Laplacian") {
  Rng rng(41);
  const Dataset ds = testing::random_dataset(rng, 20, 4, 2);
  const LaplacianMatrix lap2 = build_laplacian(Matrix::Identity(4, 4));
  PenaltyConfig pen;
  pen.lambda1 = 0.1;
  pen.gamma2 = 0.1;
  SolveOptions opts;
  opts.mode = FitMode::Sipbo;
  CHECK_THROWS_AS(fit_b(ds, nullptr, &lap2, pen, opts), ConfigError);
}
