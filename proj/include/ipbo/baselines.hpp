#pragma once

#include <vector>

#include "ipbo/core.hpp"
#include "ipbo/glasso.hpp"
#include "ipbo/solver.hpp"

namespace ipbo {

enum class BaselineKind { Lasso, L21, MrceApprox };

// Per-response lasso, (1/n)||Y-XB||_F^2 + lambda1*||B||_1, solved response by
// response with Gram-matrix coordinate descent (a deliberately separate code
// path from fit_b so the two can cross-check each other).
CoefficientFit lasso(const Dataset& ds, double lambda1, const SolveOptions& opts);

double lasso_objective(const Dataset& ds, double lambda1, const Matrix& b);

// l1/l2 row regularization, (1/n)||Y-XB||_F^2 + lambda*sum_j ||B_j.||_2,
// block coordinate descent with exact row updates. A row is exactly zero iff
// ||(2/n) X_j'(Y - X_{-j}B_{-j})||_2 <= lambda.
CoefficientFit l21(const Dataset& ds, double lambda, const SolveOptions& opts);

double l21_objective(const Dataset& ds, double lambda, const Matrix& b);

struct MrceResult {
  CoefficientFit fit;
  PrecisionEstimate theta0;  // inverse noise covariance
  std::vector<double> objective_path;  // joint objective after each half-step
  int n_outer = 0;
  bool converged = false;
};

// Approximate MRCE: alternate (a) glasso on the residual covariance and
// (b) coordinate descent on tr[(Y-XB)'(Y-XB) Theta0]/n + lam_b*||B||_1 with
// Theta0 fixed. Starts from B = 0, so the first (a) is glasso on Y'Y/n.
MrceResult mrce_approx(const Dataset& ds, double lam_b, double lam_theta, int max_outer,
                       const SolveOptions& opts, const GlassoOptions& gopts = {});

double mrce_objective(const Dataset& ds, const Matrix& b, const Matrix& theta0, double lam_b,
                      double lam_theta);

}  // namespace ipbo
