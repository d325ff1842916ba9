// covcraft: covariance estimation and minimum-variance portfolio toolkit.
//
// Subcommands: estimate, portfolio, tune, backtest, mp-density, synth-eval.
// All outputs are deterministic for a fixed command line: fixed iteration
// orders, seeded generators, shortest round-trip number formatting, and
// atomic file writes (temp file + rename).
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 internal
// numerical failure (no convergence, loss of positive semi-definiteness).

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "covcraft/covcraft.hpp"
#include "json.hpp"

namespace {

using covcraft::CombinationWeights;
using covcraft::CovarianceEstimate;
using covcraft::Error;
using covcraft::ErrorCode;
using covcraft::EstimatorKind;
using covcraft::GridSpec;
using covcraft::Matrix;
using covcraft::MinVarianceResult;
using covcraft::ReturnForecast;
using covcraft::ReturnsPanel;
using ordered_json = nlohmann::ordered_json;

// Writes through a sibling temp file so readers never observe a partial
// output file. An empty path means stdout.
void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  const std::filesystem::path target(path);
  const std::filesystem::path temp = target.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) covcraft::fail(ErrorCode::kIoError, "cannot write " + temp.string());
    out << content;
    if (!out.flush()) covcraft::fail(ErrorCode::kIoError, "write failed: " + temp.string());
  }
  std::filesystem::rename(temp, target);
}

std::size_t thread_budget() {
  const char* env = std::getenv("COVCRAFT_THREADS");
  if (env != nullptr) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    // 0 or malformed falls through to auto
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

EstimatorKind parse_estimator_or_fail(const std::string& name) {
  const auto kind = covcraft::parse_estimator_name(name);
  if (!kind || *kind == EstimatorKind::kPopulation)
    covcraft::fail(ErrorCode::kInvalidParams, "unknown estimator '" + name + "'");
  return *kind;
}

std::string matrix_to_csv(const CovarianceEstimate& estimate,
                          const std::vector<std::string>& assets) {
  std::string out = "asset";
  for (const std::string& a : assets) {
    out += ',';
    out += a;
  }
  out += '\n';
  for (std::size_t i = 0; i < estimate.dim(); ++i) {
    out += assets[i];
    for (std::size_t j = 0; j < estimate.dim(); ++j) {
      out += ',';
      out += covcraft::format_double(estimate(i, j));
    }
    out += '\n';
  }
  return out;
}

// Shared flags for the subcommands that build a single estimate.
struct EstimateFlags {
  std::string input;
  std::string estimator = "scm";
  std::string target = "f";
  double annual_return = 0.10;
  double grid_step = 0.02;
  double validation_fraction = 0.25;
  std::optional<double> rho;
  std::optional<double> theta;
  std::optional<double> phi;
};

void add_estimate_flags(CLI::App* cmd, EstimateFlags& flags) {
  cmd->add_option("--input", flags.input, "returns panel CSV")->required();
  cmd->add_option("--estimator", flags.estimator,
                  "one of scm, identity, f, shrink, mp, combined");
  cmd->add_option("--target", flags.target, "shrinkage target: f or identity");
  cmd->add_option("--annual-return", flags.annual_return,
                  "annual return floor used when tuning weights");
  cmd->add_option("--grid-step", flags.grid_step, "tuning grid step");
  cmd->add_option("--validation-fraction", flags.validation_fraction,
                  "held-out fraction of the window for tuning");
  auto* rho = cmd->add_option("--rho", "shrinkage intensity; tuned when omitted");
  rho->check(CLI::Range(0.0, 1.0));
  rho->each([&flags](const std::string& v) { flags.rho = std::stod(v); });
  auto* theta = cmd->add_option("--theta", "combination split; tuned when omitted");
  theta->each([&flags](const std::string& v) { flags.theta = std::stod(v); });
  auto* phi = cmd->add_option("--phi", "combination strength; tuned when omitted");
  phi->each([&flags](const std::string& v) { flags.phi = std::stod(v); });
}

CovarianceEstimate target_for(const std::string& name, const CovarianceEstimate& scm) {
  if (name == "identity") return covcraft::identity_target(scm);
  if (name == "f") return covcraft::shrinkage_target_f(scm);
  covcraft::fail(ErrorCode::kInvalidParams, "unknown target '" + name + "'");
}

// Builds the requested estimate over the whole panel treated as one window.
CovarianceEstimate build_estimate(const EstimateFlags& flags, const ReturnsPanel& panel) {
  const covcraft::DemeanResult centered = covcraft::demean(panel);
  const CovarianceEstimate scm = covcraft::sample_covariance(centered.panel);
  const double c =
      static_cast<double>(panel.n_assets()) / static_cast<double>(panel.n_days());
  switch (parse_estimator_or_fail(flags.estimator)) {
    case EstimatorKind::kScm:
      return scm;
    case EstimatorKind::kIdentityTarget:
      return covcraft::identity_target(scm);
    case EstimatorKind::kFTarget:
      return covcraft::shrinkage_target_f(scm);
    case EstimatorKind::kShrink: {
      const CovarianceEstimate target = target_for(flags.target, scm);
      const double rho = flags.rho ? *flags.rho
                                   : covcraft::shrinkage_intensity(
                                         centered.panel, scm, target,
                                         flags.validation_fraction);
      return covcraft::linear_shrinkage(scm, target, rho);
    }
    case EstimatorKind::kMp:
      return covcraft::mp_clean(scm, c);
    case EstimatorKind::kCombined: {
      if (flags.theta.has_value() != flags.phi.has_value())
        covcraft::fail(ErrorCode::kInvalidParams,
                       "--theta and --phi must be given together");
      CombinationWeights w(0.0, 0.0);
      if (flags.theta) {
        w = CombinationWeights(*flags.theta, *flags.phi);
      } else {
        const ReturnForecast fc =
            covcraft::forecast_returns(panel, flags.annual_return);
        w = covcraft::tune_weights(panel, fc,
                                   {flags.grid_step, flags.validation_fraction});
      }
      const CovarianceEstimate f = covcraft::shrinkage_target_f(scm);
      const CovarianceEstimate mp = covcraft::mp_clean(scm, c);
      return covcraft::combine(f, mp, scm, w);
    }
    case EstimatorKind::kPopulation:
      break;
  }
  covcraft::fail(ErrorCode::kInvalidParams, "unsupported estimator");
}

ordered_json params_to_json(const covcraft::EstimatorMeta& meta) {
  ordered_json params = ordered_json::object();
  if (meta.rho) params["rho"] = *meta.rho;
  if (meta.combination) {
    params["theta"] = meta.combination->theta;
    params["phi"] = meta.combination->phi;
  }
  return params;
}

// ---------------------------------------------------------------------------
// Subcommand bodies.

int run_estimate(const EstimateFlags& flags, const std::string& out_path) {
  const ReturnsPanel panel = covcraft::load_panel(flags.input);
  const CovarianceEstimate estimate = build_estimate(flags, panel);
  write_output(out_path, matrix_to_csv(estimate, panel.assets()));
  return 0;
}

int run_portfolio(const EstimateFlags& flags, const std::string& weights_path,
                  const std::string& risk_path) {
  const ReturnsPanel panel = covcraft::load_panel(flags.input);
  const CovarianceEstimate estimate = build_estimate(flags, panel);
  const ReturnForecast forecast = covcraft::forecast_returns(panel, flags.annual_return);
  const MinVarianceResult solved = covcraft::min_variance(estimate, forecast);

  std::string weights = "asset,weight\n";
  for (std::size_t i = 0; i < panel.n_assets(); ++i)
    weights += panel.assets()[i] + ',' +
               covcraft::format_double(solved.portfolio.weights[i]) + '\n';
  write_output(weights_path, weights);

  ordered_json risk;
  risk["estimator"] = flags.estimator;
  risk["daily_variance"] = solved.objective;
  risk["annualized_risk_pct"] = covcraft::annualize_risk(solved.objective);
  risk["expected_daily_return"] = covcraft::dot(forecast.g, solved.portfolio.weights);
  risk["return_floor_daily"] = forecast.r_daily;
  risk["return_constraint_relaxed"] = solved.return_constraint_relaxed;
  risk["kkt_residual"] = solved.kkt_residual;
  risk["iterations"] = solved.iterations;
  write_output(risk_path, risk.dump(2) + "\n");
  return 0;
}

int run_tune(const EstimateFlags& flags, const std::string& out_path) {
  const ReturnsPanel panel = covcraft::load_panel(flags.input);
  const ReturnForecast forecast = covcraft::forecast_returns(panel, flags.annual_return);
  const covcraft::TuneResult result = covcraft::tune_weights_surface(
      panel, forecast, {flags.grid_step, flags.validation_fraction});
  std::string csv = "theta,phi,validation_variance,selected\n";
  for (const covcraft::GridCell& cell : result.surface) {
    const bool selected = cell.theta == result.weights.theta &&
                          cell.phi == result.weights.phi;
    csv += covcraft::format_double(cell.theta) + ',' +
           covcraft::format_double(cell.phi) + ',' +
           covcraft::format_double(cell.validation_variance) + ',' +
           (selected ? "1" : "0") + '\n';
  }
  write_output(out_path, csv);
  return 0;
}

int run_backtest(const std::string& input, std::size_t train_len,
                 const std::vector<std::size_t>& rebalance,
                 const std::vector<std::string>& estimator_names, double annual_return,
                 double grid_step, double validation_fraction,
                 const std::string& out_path) {
  const ReturnsPanel panel = covcraft::load_panel(input);
  covcraft::BacktestConfig cfg;
  cfg.train_len = train_len;
  cfg.annual_return_target = annual_return;
  cfg.grid = {grid_step, validation_fraction};
  cfg.estimators.clear();
  for (const std::string& name : estimator_names)
    cfg.estimators.push_back(parse_estimator_or_fail(name));
  if (rebalance.empty())
    covcraft::fail(ErrorCode::kInvalidParams, "at least one rebalance frequency");

  ordered_json config;
  config["input"] = input;
  config["train_len"] = train_len;
  config["rebalance"] = rebalance;
  config["annual_return_target"] = annual_return;
  config["estimators"] = estimator_names;
  config["grid"] = {{"step", grid_step}, {"validation_fraction", validation_fraction}};

  ordered_json estimators = ordered_json::array();
  std::vector<std::string> warnings;
  for (const std::size_t every : rebalance) {
    cfg.rebalance_every = every;
    const covcraft::BacktestReport report = covcraft::run_backtest(panel, cfg);
    for (const std::string& w : report.warnings)
      if (std::find(warnings.begin(), warnings.end(), w) == warnings.end())
        warnings.push_back(w);
    for (const covcraft::EstimatorRun& run : report.estimators) {
      ordered_json entry;
      entry["name"] = std::string(covcraft::estimator_name(run.kind));
      entry["rebalance_every"] = every;
      entry["annualized_risk_pct"] = run.annualized_risk_pct;
      entry["mean_daily_return"] = run.mean_daily_return;
      entry["warning_count"] = run.warning_count;
      ordered_json rebalances = ordered_json::array();
      for (const covcraft::RebalanceRecord& record : run.rebalances) {
        ordered_json r;
        r["date"] = record.date;
        r["weights"] = record.weights;
        r["params"] = params_to_json(record.params);
        r["warnings"] = record.warnings;
        rebalances.push_back(std::move(r));
      }
      entry["rebalances"] = std::move(rebalances);
      estimators.push_back(std::move(entry));
    }
  }

  ordered_json doc;
  doc["config"] = std::move(config);
  doc["warnings"] = warnings;
  doc["estimators"] = std::move(estimators);
  write_output(out_path, doc.dump(2) + "\n");
  return 0;
}

int run_mp_density(double c, double sigma2, std::size_t points,
                   const std::string& out_path) {
  if (points < 2) covcraft::fail(ErrorCode::kInvalidParams, "need at least 2 points");
  const covcraft::MpParams params(c, sigma2);
  const covcraft::MpBounds bounds = covcraft::mp_bounds(params);
  std::string csv = "x,density\n";
  for (std::size_t j = 0; j < points; ++j) {
    const double frac =
        static_cast<double>(j) / static_cast<double>(points - 1);
    const double x = bounds.lower + frac * (bounds.upper - bounds.lower);
    csv += covcraft::format_double(x) + ',' +
           covcraft::format_double(covcraft::mp_density(x, params)) + '\n';
  }
  write_output(out_path, csv);
  return 0;
}

struct SynthSeedRow {
  double scm_err = 0.0;
  double identity_err = 0.0;
  double f_err = 0.0;
  double mp_err = 0.0;
  double combined_err = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

SynthSeedRow eval_one_seed(const covcraft::SpikeSpec& base_spec, std::size_t n_days,
                           std::uint64_t seed) {
  covcraft::SpikeSpec spec = base_spec;
  if (!spec.spikes.empty()) {
    // Spike directions are drawn from a stream decoupled from the panel
    // stream so the data does not reuse the direction draws.
    std::mt19937_64 dir_gen(seed ^ 0x9e3779b97f4a7c15ull);
    const auto dirs = covcraft::random_orthonormal_directions(dir_gen, spec.dim,
                                                              spec.spikes.size());
    for (std::size_t k = 0; k < spec.spikes.size(); ++k)
      spec.spikes[k].direction = dirs[k];
  }
  const CovarianceEstimate population = covcraft::build_population(spec);
  const ReturnsPanel panel = covcraft::sample_panel(population, n_days, spec, seed);
  const covcraft::DemeanResult centered = covcraft::demean(panel);
  const CovarianceEstimate scm = covcraft::sample_covariance(centered.panel);
  const CovarianceEstimate identity = covcraft::identity_target(scm);
  const CovarianceEstimate f = covcraft::shrinkage_target_f(scm);
  const double c = static_cast<double>(spec.dim) / static_cast<double>(n_days);
  const CovarianceEstimate mp = covcraft::mp_clean(scm, c);
  const covcraft::OracleWeightsResult oracle =
      covcraft::oracle_weights(population, f, mp, scm);

  SynthSeedRow row;
  row.scm_err = covcraft::frobenius_error(population, scm);
  row.identity_err = covcraft::frobenius_error(population, identity);
  row.f_err = covcraft::frobenius_error(population, f);
  row.mp_err = covcraft::frobenius_error(population, mp);
  row.combined_err = oracle.frobenius_err;
  row.theta = oracle.weights.theta;
  row.phi = oracle.weights.phi;
  return row;
}

int run_synth_eval(const std::string& model, std::size_t m, std::size_t n_days,
                   const std::vector<double>& spikes, double base_variance,
                   const std::string& dist, double dof, double ar1, std::size_t seeds,
                   std::uint64_t seed_base, const std::string& out_path) {
  covcraft::SpikeSpec spec;
  spec.dim = m;
  spec.base_variance = base_variance;
  spec.temporal_ar1 = ar1;
  spec.student_t_dof = dof;
  if (dist == "gaussian") {
    spec.distribution = covcraft::Innovations::kGaussian;
  } else if (dist == "student") {
    spec.distribution = covcraft::Innovations::kStudentT;
  } else {
    covcraft::fail(ErrorCode::kInvalidParams, "unknown distribution '" + dist + "'");
  }
  if (model == "spike") {
    if (spikes.empty())
      covcraft::fail(ErrorCode::kInvalidParams, "spike model needs --spikes");
    for (double lambda : spikes) spec.spikes.push_back({lambda, std::nullopt});
  } else if (model != "null") {
    covcraft::fail(ErrorCode::kInvalidParams, "unknown model '" + model + "'");
  }
  if (seeds == 0) covcraft::fail(ErrorCode::kInvalidParams, "need at least one seed");

  // Seeds are processed independently; the row order in the output is by
  // seed regardless of scheduling, so parallel runs are byte-identical.
  std::vector<SynthSeedRow> rows(seeds);
  const std::size_t budget = std::min(thread_budget(), seeds);
  if (budget <= 1) {
    for (std::size_t s = 0; s < seeds; ++s)
      rows[s] = eval_one_seed(spec, n_days, seed_base + s);
  } else {
    std::size_t next = 0;
    while (next < seeds) {
      const std::size_t batch = std::min(budget, seeds - next);
      std::vector<std::future<SynthSeedRow>> futures;
      futures.reserve(batch);
      for (std::size_t b = 0; b < batch; ++b)
        futures.push_back(std::async(std::launch::async, eval_one_seed, spec, n_days,
                                     seed_base + next + b));
      for (std::size_t b = 0; b < batch; ++b) rows[next + b] = futures[b].get();
      next += batch;
    }
  }

  std::string csv = "seed,scm,identity,f,mp,combined,theta,phi\n";
  for (std::size_t s = 0; s < seeds; ++s) {
    const SynthSeedRow& row = rows[s];
    csv += std::to_string(seed_base + s) + ',' + covcraft::format_double(row.scm_err) +
           ',' + covcraft::format_double(row.identity_err) + ',' +
           covcraft::format_double(row.f_err) + ',' + covcraft::format_double(row.mp_err) +
           ',' + covcraft::format_double(row.combined_err) + ',' +
           covcraft::format_double(row.theta) + ',' + covcraft::format_double(row.phi) +
           '\n';
  }
  write_output(out_path, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariance estimation and minimum-variance portfolio toolkit"};
  app.require_subcommand(1);

  EstimateFlags est_flags;
  std::string est_out;
  CLI::App* estimate = app.add_subcommand("estimate", "write a covariance estimate as CSV");
  add_estimate_flags(estimate, est_flags);
  estimate->add_option("--out", est_out, "output CSV path (default stdout)");

  EstimateFlags pf_flags;
  std::string weights_out;
  std::string risk_out;
  CLI::App* portfolio =
      app.add_subcommand("portfolio", "solve the minimum-variance weights");
  add_estimate_flags(portfolio, pf_flags);
  portfolio->add_option("--weights-out", weights_out, "weights CSV path (default stdout)");
  portfolio->add_option("--risk-out", risk_out, "risk JSON path (default stdout)");

  EstimateFlags tune_flags;
  std::string tune_out;
  CLI::App* tune = app.add_subcommand("tune", "grid-search the combination weights");
  tune->add_option("--input", tune_flags.input, "returns panel CSV")->required();
  tune->add_option("--annual-return", tune_flags.annual_return, "annual return floor");
  tune->add_option("--grid-step", tune_flags.grid_step, "grid step");
  tune->add_option("--validation-fraction", tune_flags.validation_fraction,
                   "held-out fraction");
  tune->add_option("--out", tune_out, "output CSV path (default stdout)");

  std::string bt_input;
  std::size_t bt_train = 200;
  std::vector<std::size_t> bt_rebalance{30, 60, 90};
  std::vector<std::string> bt_estimators{"scm", "identity", "f", "shrink", "mp", "combined"};
  double bt_annual = 0.10;
  double bt_step = 0.02;
  double bt_validation = 0.25;
  std::string bt_out;
  CLI::App* backtest = app.add_subcommand("backtest", "rolling-window comparison");
  backtest->add_option("--input", bt_input, "returns panel CSV")->required();
  backtest->add_option("--train", bt_train, "training window length in days");
  backtest->add_option("--rebalance", bt_rebalance, "holding periods in days")
      ->delimiter(',');
  backtest->add_option("--estimators", bt_estimators, "estimators to compare")
      ->delimiter(',');
  backtest->add_option("--annual-return", bt_annual, "annual return floor");
  backtest->add_option("--grid-step", bt_step, "tuning grid step");
  backtest->add_option("--validation-fraction", bt_validation, "held-out fraction");
  backtest->add_option("--out", bt_out, "report JSON path (default stdout)");

  double mp_c = 0.5;
  double mp_sigma2 = 1.0;
  std::size_t mp_points = 201;
  std::string mp_out;
  CLI::App* mp_density = app.add_subcommand("mp-density", "tabulate the bulk density");
  mp_density->add_option("--c", mp_c, "dimensionality constant in (0,1)")->required();
  mp_density->add_option("--sigma2", mp_sigma2, "population variance scale");
  mp_density->add_option("--points", mp_points, "number of sample points");
  mp_density->add_option("--out", mp_out, "output CSV path (default stdout)");

  std::string se_model = "null";
  std::size_t se_m = 100;
  std::size_t se_n = 200;
  std::vector<double> se_spikes;
  double se_base_variance = 1.0;
  std::string se_dist = "gaussian";
  double se_dof = 3.0;
  double se_ar1 = 0.0;
  std::size_t se_seeds = 20;
  std::uint64_t se_seed_base = 1;
  std::string se_out;
  CLI::App* synth =
      app.add_subcommand("synth-eval", "known-population estimator comparison");
  synth->add_option("--model", se_model, "null or spike");
  synth->add_option("--m", se_m, "number of assets");
  synth->add_option("--n", se_n, "number of days");
  synth->add_option("--spikes", se_spikes, "spike eigenvalues (> 1)")->delimiter(',');
  synth->add_option("--base-variance", se_base_variance, "noise variance scale");
  synth->add_option("--dist", se_dist, "gaussian or student");
  synth->add_option("--dof", se_dof, "student-t degrees of freedom (> 2)");
  synth->add_option("--ar1", se_ar1, "AR(1) coefficient in [0,1)");
  synth->add_option("--seeds", se_seeds, "number of seeds");
  synth->add_option("--seed-base", se_seed_base, "first seed value");
  synth->add_option("--out", se_out, "output CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (estimate->parsed()) return run_estimate(est_flags, est_out);
    if (portfolio->parsed()) return run_portfolio(pf_flags, weights_out, risk_out);
    if (tune->parsed()) return run_tune(tune_flags, tune_out);
    if (backtest->parsed())
      return run_backtest(bt_input, bt_train, bt_rebalance, bt_estimators, bt_annual,
                          bt_step, bt_validation, bt_out);
    if (mp_density->parsed()) return run_mp_density(mp_c, mp_sigma2, mp_points, mp_out);
    if (synth->parsed())
      return run_synth_eval(se_model, se_m, se_n, se_spikes, se_base_variance, se_dist,
                            se_dof, se_ar1, se_seeds, se_seed_base, se_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool numerical =
        e.code() == ErrorCode::kNoConvergence || e.code() == ErrorCode::kNotPsd;
    return numerical ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
