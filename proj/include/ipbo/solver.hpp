#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "ipbo/core.hpp"
#include "ipbo/glasso.hpp"
#include "ipbo/laplacian.hpp"

namespace ipbo {

enum class FitMode { Sipbo, Ipbo };

struct SolveOptions {
  double tol = 1e-7;  // max coefficient change per sweep to declare convergence
  int max_sweeps = 1000;
  bool active_set = true;
  FitMode mode = FitMode::Sipbo;

  void validate() const {
    if (tol <= 0.0) throw ConfigError("solver tol must be positive");
    if (max_sweeps < 1) throw ConfigError("max_sweeps must be at least 1");
  }
};

// Coordinate-descent minimizer of
//   (1/n)||Y - XB||_F^2 + lambda1 ||B||_1
//   + gamma1 sum_j B_j.' Gamma1 B_j. + gamma2 sum_k B_.k' Gamma2 B_.k
// over a standardized dataset. Cycles k outer, j inner, with optional
// active-set passes (a full sweep every 10 active sweeps). B starts at zero.
// Every coordinate satisfies its KKT condition within 10*tol on convergence;
// a non-converged run returns the best iterate with converged = false.
// lap1/lap2 may be null (treated as zero Laplacians); SIPBO mode requires
// lap2 absent or gamma2 = 0.
CoefficientFit fit_b(const Dataset& ds, const LaplacianMatrix* lap1, const LaplacianMatrix* lap2,
                     const PenaltyConfig& pen, const SolveOptions& opts);

// Objective value and max KKT violation of a candidate B for the same problem.
double fit_objective(const Dataset& ds, const LaplacianMatrix* lap1, const LaplacianMatrix* lap2,
                     const PenaltyConfig& pen, const Matrix& b);
double fit_kkt_residual(const Dataset& ds, const LaplacianMatrix* lap1,
                        const LaplacianMatrix* lap2, const PenaltyConfig& pen, const Matrix& b);

// Smallest lambda1 at which B = 0 is optimal (gamma terms vanish at zero).
double lambda1_max(const Dataset& ds);

struct TwoStageResult {
  CoefficientFit fit;
  PrecisionEstimate theta;                 // response precision
  std::optional<PrecisionEstimate> omega;  // predictor precision (IPBO only)
  int n_outer = 0;                         // refinement iterations (0 for plain two-stage)
  bool outer_converged = true;
};

// Step 1: glasso on Y'Y/n (and X'X/n in IPBO mode); Step 2: build the signed
// Laplacians and solve for B. No iteration between stages.
TwoStageResult two_stage(const Dataset& ds, const PenaltyConfig& pen, const SolveOptions& opts,
                         const GlassoOptions& gopts = {});

// Step 3: alternate a weighted glasso refresh (entry (k,k') penalized by
// lambda + gamma * w_kk' per unordered pair, w from the current coefficients
// with signs frozen at the previous precision iterate) and a fit_b re-solve.
// Stops when ||B(m+1)-B(m)||_F <= tol*(1+||B(m)||_F) or max_outer is reached.
TwoStageResult iterative_refine(const Dataset& ds, const TwoStageResult& init,
                                const PenaltyConfig& pen, const SolveOptions& opts, int max_outer,
                                const GlassoOptions& gopts = {});

struct BicReport {
  std::vector<std::array<double, 3>> grid;  // (lambda1, gamma1, gamma2)
  std::vector<double> scores;
  std::size_t best = 0;  // argmin of scores, ties to the smallest index
  Matrix per_response_rss;  // grid x q
  std::vector<char> degenerate;  // rss underflow, score forced to +inf
  std::vector<char> guard_ok;    // max(gamma1,gamma2)*max|b| <= lambda1

  // argmin over guard-satisfying, non-degenerate points; falls back to best.
  std::size_t best_feasible() const;
};

// BIC(lambda1,gamma1,gamma2) = sum_k [ n*log(RSS_k) + log(n)*|S_k| ], natural log.
BicReport bic_tune(const Dataset& ds, const LaplacianMatrix* lap1, const LaplacianMatrix* lap2,
                   const std::vector<std::array<double, 3>>& grid, const SolveOptions& opts);

enum class CountMode { Cells, Predictors };

struct SparsityTuneResult {
  double lambda1_star = 0.0;
  CoefficientFit fit;
  int n_probes = 0;
  bool used_grid_fallback = false;
};

// Bisection on lambda1 in (0, lambda1_max] (at most 40 probes) for the fit
// whose selected count is <= target_nnz and closest to it, preferring the
// largest such lambda1. If even the floor 1e-6*lambda1_max selects fewer than
// target_nnz, throws TargetUnreachable; if the floor hits the target exactly
// the floor fit is returned. Falls back to a grid scan if the probed counts
// are visibly non-monotone.
SparsityTuneResult sparsity_target_tune(const Dataset& ds, const LaplacianMatrix* lap1,
                                        const LaplacianMatrix* lap2, double gamma1, double gamma2,
                                        int target_nnz, CountMode count_mode,
                                        const SolveOptions& opts);

int selected_count(const CoefficientFit& fit, CountMode mode);

}  // namespace ipbo
