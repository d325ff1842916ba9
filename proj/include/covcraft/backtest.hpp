#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/estimators.hpp"
#include "covcraft/market_data.hpp"
#include "covcraft/portfolio.hpp"
#include "covcraft/tuning.hpp"

namespace covcraft {

struct BacktestConfig {
  std::size_t train_len = 200;
  std::size_t rebalance_every = 30;
  double annual_return_target = 0.10;
  std::vector<EstimatorKind> estimators{
      EstimatorKind::kScm,        EstimatorKind::kIdentityTarget,
      EstimatorKind::kFTarget,    EstimatorKind::kShrink,
      EstimatorKind::kMp,         EstimatorKind::kCombined};
  GridSpec grid{};
};

struct RebalanceRecord {
  std::string date;  // first held day
  std::vector<double> weights;
  EstimatorMeta params;
  std::vector<std::string> warnings;
};

struct EstimatorRun {
  EstimatorKind kind = EstimatorKind::kScm;
  std::vector<double> realized_returns;  // concatenated held-period returns
  double annualized_risk_pct = 0.0;
  double mean_daily_return = 0.0;
  std::size_t warning_count = 0;
  std::vector<RebalanceRecord> rebalances;
};

struct BacktestReport {
  BacktestConfig config;
  std::vector<std::string> warnings;  // config-level, e.g. singular train window
  std::vector<EstimatorRun> estimators;
};

// Rolling-window protocol: train on `train_len` days, hold the solved
// weights fixed for `rebalance_every` days of raw returns, slide the window
// by the holding period, repeat while a full holding period remains. Only
// data inside the current train window ever reaches an estimator.
inline BacktestReport run_backtest(const ReturnsPanel& panel, const BacktestConfig& cfg) {
  if (cfg.train_len < 2)
    fail(ErrorCode::kInvalidParams, "train_len must be at least 2");
  if (cfg.rebalance_every < 1)
    fail(ErrorCode::kInvalidParams, "rebalance_every must be at least 1");
  if (!(cfg.annual_return_target > -1.0))
    fail(ErrorCode::kInvalidParams, "annual return target must exceed -100%");
  if (cfg.estimators.empty())
    fail(ErrorCode::kInvalidParams, "no estimators requested");
  for (std::size_t a = 0; a < cfg.estimators.size(); ++a) {
    if (cfg.estimators[a] == EstimatorKind::kPopulation)
      fail(ErrorCode::kInvalidParams, "population is not a backtestable estimator");
    for (std::size_t b = a + 1; b < cfg.estimators.size(); ++b)
      if (cfg.estimators[a] == cfg.estimators[b])
        fail(ErrorCode::kInvalidParams, "duplicate estimator in config");
  }
  validate(cfg.grid);

  const std::size_t m = panel.n_assets();
  const std::size_t n = panel.n_days();
  if (n < cfg.train_len + cfg.rebalance_every)
    fail(ErrorCode::kPanelTooShort,
         "panel has " + std::to_string(n) + " days; need at least " +
             std::to_string(cfg.train_len + cfg.rebalance_every));

  const bool needs_spectral =
      std::any_of(cfg.estimators.begin(), cfg.estimators.end(), [](EstimatorKind k) {
        return k == EstimatorKind::kMp || k == EstimatorKind::kCombined;
      });
  if (needs_spectral && m >= cfg.train_len)
    fail(ErrorCode::kInvalidParams,
         "spectral cleaning needs train_len > asset count (c < 1)");
  const bool needs_f = std::any_of(
      cfg.estimators.begin(), cfg.estimators.end(), [](EstimatorKind k) {
        return k == EstimatorKind::kFTarget || k == EstimatorKind::kShrink ||
               k == EstimatorKind::kCombined;
      });

  BacktestReport report;
  report.config = cfg;
  if (cfg.train_len < m)
    report.warnings.push_back(
        "train window is shorter than the asset count; the sample covariance is singular");

  report.estimators.resize(cfg.estimators.size());
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e)
    report.estimators[e].kind = cfg.estimators[e];

  const std::size_t n_rebalances = (n - cfg.train_len) / cfg.rebalance_every;
  const double c = static_cast<double>(m) / static_cast<double>(cfg.train_len);

  for (std::size_t k = 0; k < n_rebalances; ++k) {
    const WindowSlices slices = slice_window(
        panel, {k * cfg.rebalance_every, cfg.train_len, cfg.rebalance_every});
    const DemeanResult centered = demean(slices.train);
    const ReturnForecast forecast =
        forecast_returns(slices.train, cfg.annual_return_target);
    const CovarianceEstimate scm = sample_covariance(centered.panel);
    std::optional<CovarianceEstimate> f;
    if (needs_f) f = shrinkage_target_f(scm);
    std::optional<CovarianceEstimate> mp;
    if (needs_spectral) mp = mp_clean(scm, c);

    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      EstimatorRun& run = report.estimators[e];
      RebalanceRecord record;
      record.date = slices.test.dates().front();

      std::optional<CovarianceEstimate> cov;
      switch (cfg.estimators[e]) {
        case EstimatorKind::kScm:
          cov = scm;
          break;
        case EstimatorKind::kIdentityTarget:
          cov = identity_target(scm);
          break;
        case EstimatorKind::kFTarget:
          cov = *f;
          break;
        case EstimatorKind::kShrink: {
          const double rho = shrinkage_intensity(centered.panel, scm, *f,
                                                 cfg.grid.validation_fraction);
          cov = linear_shrinkage(scm, *f, rho);
          record.params.rho = rho;
          break;
        }
        case EstimatorKind::kMp:
          cov = *mp;
          break;
        case EstimatorKind::kCombined: {
          const CombinationWeights w = tune_weights(slices.train, forecast, cfg.grid);
          cov = combine(*f, *mp, scm, w);
          record.params.combination = w;
          break;
        }
        case EstimatorKind::kPopulation:
          break;  // rejected above
      }

      const MinVarianceResult solved = min_variance(*cov, forecast);
      if (solved.return_constraint_relaxed)
        record.warnings.push_back(
            "return floor unreachable in this window; constraint relaxed");
      record.weights = solved.portfolio.weights;

      const std::vector<double> held = portfolio_return_series(
          slices.test, solved.portfolio, 0, cfg.rebalance_every);
      run.realized_returns.insert(run.realized_returns.end(), held.begin(), held.end());
      run.warning_count += record.warnings.size();
      run.rebalances.push_back(std::move(record));
    }
  }

  for (EstimatorRun& run : report.estimators) {
    run.annualized_risk_pct = annualize_risk(population_variance(run.realized_returns));
    run.mean_daily_return = mean(run.realized_returns);
  }
  return report;
}

struct RankingRow {
  EstimatorKind kind = EstimatorKind::kScm;
  std::string name;
  double annualized_risk_pct = 0.0;
  double mean_daily_return = 0.0;
  std::size_t warning_count = 0;
};

// Rows sorted ascending by realized risk; exact ties fall back to the
// estimator name so the order is still total.
inline std::vector<RankingRow> compare_estimators(const BacktestReport& report) {
  if (report.estimators.empty()) fail(ErrorCode::kEmptyInput, "report has no estimators");
  std::vector<RankingRow> rows;
  rows.reserve(report.estimators.size());
  for (const EstimatorRun& run : report.estimators)
    rows.push_back({run.kind, std::string(estimator_name(run.kind)),
                    run.annualized_risk_pct, run.mean_daily_return, run.warning_count});
  std::stable_sort(rows.begin(), rows.end(), [](const RankingRow& a, const RankingRow& b) {
    if (a.annualized_risk_pct != b.annualized_risk_pct)
      return a.annualized_risk_pct < b.annualized_risk_pct;
    return a.name < b.name;
  });
  return rows;
}

}  // namespace covcraft
