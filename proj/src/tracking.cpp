#include "ipbo/tracking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ipbo/csv.hpp"
#include "ipbo/laplacian.hpp"
#include "ipbo/parallel.hpp"
#include "ipbo/simlab.hpp"

namespace ipbo {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_price(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  if (begin == end) return false;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::string kind_from_ticker(const std::string& ticker) {
  const auto dot = ticker.find_last_of('.');
  if (dot == std::string::npos) return "";
  const std::string suffix = ticker.substr(dot + 1);
  if (suffix == "close" || suffix == "high" || suffix == "low" || suffix == "open") return suffix;
  return "";
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

}  // namespace

PricePanel ingest_prices(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ParseError(0, "cannot open " + csv_path);

  std::string line;
  if (!std::getline(in, line)) throw EmptyPanel();
  const auto header = split_csv_line(line);
  if (header.size() < 2) throw ParseError(1, "header must list a date column and tickers");
  {
    double probe;
    if (parse_price(header[1], probe))
      throw ParseError(1, "expected a header row of tickers");
  }

  PricePanel panel;
  for (std::size_t i = 1; i < header.size(); ++i) panel.tickers.push_back(trim(header[i]));
  for (const auto& t : panel.tickers) panel.kind_labels.push_back(kind_from_ticker(t));

  std::vector<std::pair<std::string, std::vector<double>>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      ++panel.dropped_rows;
      continue;
    }
    std::vector<double> prices(panel.tickers.size());
    bool ok = true;
    for (std::size_t i = 0; i < panel.tickers.size(); ++i) {
      if (!parse_price(fields[i + 1], prices[i]) || prices[i] <= 0.0) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++panel.dropped_rows;
      continue;
    }
    rows.emplace_back(trim(fields[0]), std::move(prices));
  }
  if (rows.empty()) throw EmptyPanel();

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  // Strictly increasing dates: duplicates beyond the first are dropped.
  std::vector<std::pair<std::string, std::vector<double>>> unique_rows;
  for (auto& row : rows) {
    if (!unique_rows.empty() && unique_rows.back().first == row.first) {
      ++panel.dropped_rows;
      continue;
    }
    unique_rows.push_back(std::move(row));
  }

  panel.prices.resize(static_cast<Index>(unique_rows.size()),
                      static_cast<Index>(panel.tickers.size()));
  for (std::size_t i = 0; i < unique_rows.size(); ++i) {
    panel.dates.push_back(unique_rows[i].first);
    for (std::size_t j = 0; j < panel.tickers.size(); ++j)
      panel.prices(static_cast<Index>(i), static_cast<Index>(j)) = unique_rows[i].second[j];
  }
  return panel;
}

Vector returns(const Vector& series) {
  if (series.size() < 2) throw InsufficientData("returns need at least 2 prices");
  if ((series.array() <= 0.0).any()) throw Error("price series must be strictly positive");
  Vector r(series.size() - 1);
  for (Index t = 1; t < series.size(); ++t) r(t - 1) = (series(t) - series(t - 1)) / series(t - 1);
  return r;
}

double ate(const Vector& errors) {
  const Index t = errors.size();
  if (t < 2) throw InsufficientData("ATE needs at least 2 tracking errors");
  const double mean = errors.mean();
  const double var = (errors.array() - mean).square().sum() / static_cast<double>(t - 1);
  return std::sqrt(252.0) * std::sqrt(var);
}

double mdte(const Vector& errors, bool sqrt_variant) {
  const Index t = errors.size();
  if (t < 2) throw InsufficientData("MDTE needs at least 2 tracking errors");
  const double value = errors.squaredNorm() / static_cast<double>(t - 1);
  return sqrt_variant ? std::sqrt(value) : value;
}

void RollingPlan::validate(Index total_rows) const {
  if (train_len < 1 || test_len < 1) throw ConfigError("window lengths must be positive");
  if (n_periods < 1) throw ConfigError("plan needs at least one period");
  const Index need = static_cast<Index>(train_len) +
                     static_cast<Index>(n_periods) * static_cast<Index>(test_len);
  if (need > total_rows)
    throw WindowMisalignment("plan needs " + std::to_string(need) + " rows, panel has " +
                             std::to_string(total_rows));
}

RollingPlan auto_plan(Index total_rows, int train_len, int test_len) {
  RollingPlan plan;
  plan.train_len = train_len;
  plan.test_len = test_len;
  if (train_len < 1 || test_len < 1) throw ConfigError("window lengths must be positive");
  plan.n_periods = static_cast<int>((total_rows - train_len) / test_len);
  if (plan.n_periods < 1)
    throw WindowMisalignment("panel too short for one training + test window");
  return plan;
}

namespace {

struct AlignedPanels {
  std::vector<std::string> dates;
  Matrix x;  // stocks
  Matrix y;  // indices
};

AlignedPanels inner_join(const PricePanel& stocks, const PricePanel& indices) {
  std::map<std::string, Index> stock_rows;
  for (std::size_t i = 0; i < stocks.dates.size(); ++i)
    stock_rows[stocks.dates[i]] = static_cast<Index>(i);
  std::vector<std::pair<Index, Index>> matches;  // (stock row, index row)
  for (std::size_t i = 0; i < indices.dates.size(); ++i) {
    const auto it = stock_rows.find(indices.dates[i]);
    if (it != stock_rows.end()) matches.emplace_back(it->second, static_cast<Index>(i));
  }
  if (matches.empty()) throw WindowMisalignment("panels share no dates");
  AlignedPanels out;
  out.x.resize(static_cast<Index>(matches.size()), stocks.prices.cols());
  out.y.resize(static_cast<Index>(matches.size()), indices.prices.cols());
  for (std::size_t i = 0; i < matches.size(); ++i) {
    out.dates.push_back(stocks.dates[static_cast<std::size_t>(matches[i].first)]);
    out.x.row(static_cast<Index>(i)) = stocks.prices.row(matches[i].first);
    out.y.row(static_cast<Index>(i)) = indices.prices.row(matches[i].second);
  }
  return out;
}

}  // namespace

TrackingReport rolling_track(const PricePanel& stocks, const PricePanel& indices,
                             const RollingPlan& plan, const TrackConfig& cfg, int target_nnz,
                             CountMode count_mode) {
  if (target_nnz <= 0) throw ConfigError("target_nnz must be positive");
  if (plan.test_len < 3) throw ConfigError("test windows need at least 3 days for returns");
  const AlignedPanels joined = inner_join(stocks, indices);
  plan.validate(static_cast<Index>(joined.dates.size()));

  TrackingReport report;
  report.index_names = indices.tickers;
  report.stock_names = stocks.tickers;
  report.index_kinds = indices.kind_labels;
  report.stock_kinds = stocks.kind_labels;
  report.train_len = plan.train_len;
  report.test_len = plan.test_len;
  report.target_nnz = target_nnz;
  report.count_mode = count_mode;

  const Index q = joined.y.cols();
  struct PeriodOutcome {
    bool ok = false;
    std::string error;
    std::vector<PeriodIndexResult> per_index;
    std::vector<Index> stock_support;
    double lambda1 = 0.0;
  };
  std::vector<PeriodOutcome> outcomes(static_cast<std::size_t>(plan.n_periods));

  parallel_for_index(
      static_cast<std::size_t>(plan.n_periods),
      [&](std::size_t period) {
        PeriodOutcome& out = outcomes[period];
        try {
          const Index start = static_cast<Index>(period) * plan.test_len;
          const Index test_start = start + plan.train_len;
          const Matrix x_train = joined.x.middleRows(start, plan.train_len);
          const Matrix y_train = joined.y.middleRows(start, plan.train_len);
          const Matrix x_test = joined.x.middleRows(test_start, plan.test_len);
          const Matrix y_test = joined.y.middleRows(test_start, plan.test_len);

          const Dataset ds = standardize(x_train, y_train);
          const std::uint64_t seed = derive_seed(cfg.seed, period);

          const SampleCovariance sy = sample_covariance(ds.y);
          const auto grid_y = default_lambda_grid(sy.s, cfg.glasso_grid_points);
          const CvResult cv_y =
              cv_select_lambda(ds.y, grid_y, cfg.cv_folds, derive_seed(seed, 21), cfg.glasso);
          const PrecisionEstimate theta = fit_glasso(sy, cv_y.lambda_star, cfg.glasso);
          const LaplacianMatrix lap1 = build_laplacian(theta.theta);

          SolveOptions opts = cfg.solve;
          opts.mode = cfg.mode;
          std::optional<LaplacianMatrix> lap2;
          if (cfg.mode == FitMode::Ipbo) {
            const SampleCovariance sx = sample_covariance(ds.x);
            const auto grid_x = default_lambda_grid(sx.s, cfg.glasso_grid_points);
            const CvResult cv_x =
                cv_select_lambda(ds.x, grid_x, cfg.cv_folds, derive_seed(seed, 22), cfg.glasso);
            lap2 = build_laplacian(fit_glasso(sx, cv_x.lambda_star, cfg.glasso).theta);
          }

          const SparsityTuneResult tuned =
              sparsity_target_tune(ds, &lap1, lap2 ? &*lap2 : nullptr, cfg.gamma1,
                                   cfg.mode == FitMode::Ipbo ? cfg.gamma2 : 0.0, target_nnz,
                                   count_mode, opts);

          const RawCoefficients raw = unstandardize_coefficients(tuned.fit, ds);
          const Matrix pred = (x_test * raw.b).rowwise() + raw.intercept.transpose();

          out.per_index.resize(static_cast<std::size_t>(q));
          for (Index k = 0; k < q; ++k) {
            PeriodIndexResult& r = out.per_index[static_cast<std::size_t>(k)];
            r.predictions = pred.col(k);
            Vector pred_prices = pred.col(k);
            // Returns need positive prices; a wildly wrong fit could cross zero.
            if ((pred_prices.array() <= 0.0).any())
              throw Error("predicted prices not positive in period " + std::to_string(period));
            const Vector realized = returns(y_test.col(k));
            const Vector predicted = returns(pred_prices);
            const Vector err = realized - predicted;
            r.ate = ipbo::ate(err);
            r.mdte = ipbo::mdte(err);
            for (Index j = 0; j < tuned.fit.b_hat.rows(); ++j)
              if (tuned.fit.b_hat(j, k) != 0.0) r.selected.push_back(j);
          }
          out.stock_support = tuned.fit.row_support();
          out.lambda1 = tuned.lambda1_star;
          out.ok = true;
        } catch (const std::exception& e) {
          out.error = "period " + std::to_string(period) + ": " + e.what();
        }
      },
      cfg.n_threads);

  for (std::size_t period = 0; period < outcomes.size(); ++period) {
    auto& out = outcomes[period];
    if (!out.ok) {
      report.failures.push_back(out.error);
      continue;
    }
    report.periods.push_back(static_cast<int>(period));
    report.results.push_back(std::move(out.per_index));
    report.period_stock_support.push_back(std::move(out.stock_support));
    report.lambda1_per_period.push_back(out.lambda1);
  }
  return report;
}

Matrix attribution(const TrackingReport& report, const std::vector<std::string>& stock_kinds,
                   const std::vector<std::string>& index_kinds,
                   std::vector<std::string>* kinds_out) {
  if (stock_kinds.size() != report.stock_names.size() ||
      index_kinds.size() != report.index_names.size())
    throw MissingLabels("kind label count does not match panel width");
  for (const auto& k : stock_kinds)
    if (k.empty()) throw MissingLabels("a predictor column is missing its price-type label");
  for (const auto& k : index_kinds)
    if (k.empty()) throw MissingLabels("a response column is missing its price-type label");

  std::vector<std::string> kinds;
  for (const auto& k : index_kinds)
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
  for (const auto& k : stock_kinds)
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
  std::sort(kinds.begin(), kinds.end());
  const auto kind_id = [&](const std::string& k) {
    return static_cast<Index>(std::find(kinds.begin(), kinds.end(), k) - kinds.begin());
  };

  const Index nk = static_cast<Index>(kinds.size());
  Matrix sums = Matrix::Zero(nk, nk);
  Vector counts = Vector::Zero(nk);  // (period, response) observations per response kind

  for (const auto& period : report.results) {
    for (std::size_t k = 0; k < period.size(); ++k) {
      const auto& sel = period[k].selected;
      if (sel.empty()) continue;  // excluded from this response's average
      const Index resp = kind_id(index_kinds[k]);
      Vector frac = Vector::Zero(nk);
      for (Index j : sel) frac(kind_id(stock_kinds[static_cast<std::size_t>(j)])) += 1.0;
      frac /= static_cast<double>(sel.size());
      sums.col(resp) += frac;
      counts(resp) += 1.0;
    }
  }
  Matrix out = Matrix::Zero(nk, nk);
  for (Index b = 0; b < nk; ++b)
    if (counts(b) > 0.0) out.col(b) = sums.col(b) / counts(b);
  if (kinds_out) *kinds_out = kinds;
  return out;
}

Matrix correlation_summary(const PricePanel& indices) {
  const Index n = indices.prices.rows();
  if (n < 2) throw InsufficientData("correlation needs at least 2 dates");
  const Index q = indices.prices.cols();
  Matrix centered = indices.prices;
  centered.rowwise() -= indices.prices.colwise().mean();
  Vector sd(q);
  for (Index j = 0; j < q; ++j) {
    sd(j) = centered.col(j).norm();
    if (sd(j) <= 0.0) throw ConstantSeries(j);
  }
  Matrix corr(q, q);
  for (Index a = 0; a < q; ++a)
    for (Index b = 0; b < q; ++b)
      corr(a, b) = centered.col(a).dot(centered.col(b)) / (sd(a) * sd(b));
  return corr;
}

void write_tracking_csv(const std::string& path, const TrackingReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "period,index,ate,mdte,n_selected\n";
  for (std::size_t i = 0; i < report.periods.size(); ++i) {
    for (std::size_t k = 0; k < report.results[i].size(); ++k) {
      const auto& r = report.results[i][k];
      out << report.periods[i] << "," << report.index_names[k] << "," << format_double(r.ate)
          << "," << format_double(r.mdte) << "," << r.selected.size() << "\n";
    }
  }
}

std::string tracking_report_json(const TrackingReport& report) {
  nlohmann::json doc;
  doc["train_len"] = report.train_len;
  doc["test_len"] = report.test_len;
  doc["target_nnz"] = report.target_nnz;
  doc["count_mode"] = report.count_mode == CountMode::Cells ? "cells" : "predictors";
  doc["indices"] = report.index_names;
  doc["periods"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.periods.size(); ++i) {
    nlohmann::json period;
    period["period"] = report.periods[i];
    period["lambda1"] = report.lambda1_per_period[i];
    period["n_selected_stocks"] = report.period_stock_support[i].size();
    period["per_index"] = nlohmann::json::array();
    for (std::size_t k = 0; k < report.results[i].size(); ++k) {
      const auto& r = report.results[i][k];
      nlohmann::json entry;
      entry["index"] = report.index_names[k];
      entry["ate"] = r.ate;
      entry["mdte"] = r.mdte;
      entry["mdte_x1e4"] = r.mdte * 1e4;
      entry["n_selected"] = r.selected.size();
      nlohmann::json sel = nlohmann::json::array();
      for (Index j : r.selected) sel.push_back(report.stock_names[static_cast<std::size_t>(j)]);
      entry["selected"] = sel;
      nlohmann::json pred = nlohmann::json::array();
      for (Index t = 0; t < r.predictions.size(); ++t) pred.push_back(r.predictions(t));
      entry["predictions"] = pred;
      period["per_index"].push_back(entry);
    }
    doc["periods"].push_back(period);
  }
  doc["failures"] = report.failures;
  return doc.dump(2);
}

void write_attribution_csv(const std::string& path, const Matrix& proportions,
                           const std::vector<std::string>& kinds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "predictor_kind";
  for (const auto& k : kinds) out << "," << k;
  out << "\n";
  for (Index i = 0; i < proportions.rows(); ++i) {
    out << kinds[static_cast<std::size_t>(i)];
    for (Index j = 0; j < proportions.cols(); ++j) out << "," << format_double(proportions(i, j));
    out << "\n";
  }
}

}  // namespace ipbo
