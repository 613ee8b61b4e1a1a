#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipbo/core.hpp"
#include "ipbo/glasso.hpp"
#include "ipbo/solver.hpp"

namespace ipbo {

// Price history, one row per trading date, strictly increasing dates, all
// prices positive. Rows with gaps or bad values are dropped at ingestion and
// counted. kind_labels tags each column with its price type (close/high/low/
// open) when the ticker carries a ".kind" suffix.
struct PricePanel {
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  Matrix prices;  // dates x tickers
  std::vector<std::string> kind_labels;
  int dropped_rows = 0;
};

PricePanel ingest_prices(const std::string& csv_path);

// Daily return rate r_t = (y_t - y_{t-1}) / y_{t-1}; length shrinks by one.
Vector returns(const Vector& series);

// sqrt(252) * sqrt( sum (e_t - mean(e))^2 / (T-1) )
double ate(const Vector& errors);

// sum e_t^2 / (T-1), exactly as printed (no square root); the root variant is
// available behind the flag for comparison with industry convention.
double mdte(const Vector& errors, bool sqrt_variant = false);

struct RollingPlan {
  int train_len = 100;
  int test_len = 20;
  int n_periods = 0;

  void validate(Index total_rows) const;
};

// Largest number of non-overlapping test windows that fit after the first
// training window.
RollingPlan auto_plan(Index total_rows, int train_len, int test_len);

struct TrackConfig {
  FitMode mode = FitMode::Ipbo;
  double gamma1 = 0.01;
  double gamma2 = 0.01;
  int cv_folds = 5;
  int glasso_grid_points = 10;
  std::uint64_t seed = 0;
  SolveOptions solve;
  GlassoOptions glasso;
  unsigned n_threads = 0;
};

struct PeriodIndexResult {
  double ate = 0.0;
  double mdte = 0.0;
  std::vector<Index> selected;  // stocks with a nonzero loading for this index
  Vector predictions;           // predicted prices over the test window
};

struct TrackingReport {
  std::vector<std::string> index_names;
  std::vector<std::string> stock_names;
  std::vector<std::string> index_kinds;
  std::vector<std::string> stock_kinds;
  int train_len = 0, test_len = 0;
  int target_nnz = 0;
  CountMode count_mode = CountMode::Predictors;
  std::vector<int> periods;  // ids of periods that produced results
  std::vector<std::vector<PeriodIndexResult>> results;  // [period][index]
  std::vector<std::vector<Index>> period_stock_support;  // distinct stocks per period
  std::vector<double> lambda1_per_period;
  std::vector<std::string> failures;
};

// Per period: standardize the training slice, run the two-stage fit with
// CV-selected glasso penalties, pick lambda1 by the sparsity target, predict
// the test window in price space and score ATE/MDTE on returns. Period
// failures are recorded and skipped. Panels are inner-joined on dates.
TrackingReport rolling_track(const PricePanel& stocks, const PricePanel& indices,
                             const RollingPlan& plan, const TrackConfig& cfg, int target_nnz,
                             CountMode count_mode);

// Rows are predictor price kinds, columns are response price kinds; each
// column averages, over periods and responses of that kind with a nonempty
// selection, the fraction of selected predictors per kind. Columns sum to 1.
Matrix attribution(const TrackingReport& report, const std::vector<std::string>& stock_kinds,
                   const std::vector<std::string>& index_kinds,
                   std::vector<std::string>* kinds_out = nullptr);

// Pearson correlations of the index price series.
Matrix correlation_summary(const PricePanel& indices);

void write_tracking_csv(const std::string& path, const TrackingReport& report);
std::string tracking_report_json(const TrackingReport& report);
void write_attribution_csv(const std::string& path, const Matrix& proportions,
                           const std::vector<std::string>& kinds);

}  // namespace ipbo
