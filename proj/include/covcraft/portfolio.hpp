#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/estimators.hpp"
#include "covcraft/market_data.hpp"
#include "covcraft/matrix.hpp"
#include "covcraft/spectral.hpp"

namespace covcraft {

// Long-only, fully invested weights: p >= 0, sum(p) = 1.
struct Portfolio {
  std::vector<double> weights;
};

// Per-asset expected daily returns plus the daily floor implied by the
// annual target: r_daily = (1 + annual)^(1/365) - 1.
struct ReturnForecast {
  std::vector<double> g;
  double r_daily = 0.0;
};

struct SolverOptions {
  double kkt_tol_rel = 1e-8;          // on ||gradient map|| relative to ||Sigma||_F
  std::size_t max_iterations = 50000;
  std::size_t restart_interval = 500;  // momentum reset cadence
  std::size_t check_interval = 1;      // KKT test cadence, in iterations
  std::optional<double> lipschitz_hint;             // known upper bound on lambda_max
  std::optional<std::vector<double>> warm_start;    // projected before use
};

struct MinVarianceResult {
  Portfolio portfolio;
  double objective = 0.0;       // p^T Sigma p at the returned point
  double kkt_residual = 0.0;    // norm of the projected gradient map
  std::size_t iterations = 0;
  bool return_constraint_relaxed = false;
};

namespace detail {

// Euclidean projection onto the probability simplex (sort-based).
inline void project_simplex(std::vector<double>& x, std::vector<double>& scratch) {
  const std::size_t n = x.size();
  scratch = x;
  std::sort(scratch.begin(), scratch.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = (scratch[0] - 1.0);  // overwritten below; rho = 0 always admissible
  for (std::size_t j = 0; j < n; ++j) {
    cumsum += scratch[j];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (scratch[j] - candidate > 0.0) tau = candidate;
  }
  for (double& v : x) v = std::max(v - tau, 0.0);
}

// Projection onto the intersection of the simplex with {g.p >= r} by
// Dykstra's alternating scheme. The halfspace is recentered first: on the
// simplex's hyperplane 1'p = 1, g.p >= r holds iff (g - mean(g)).p >=
// r - mean(g), and the centered normal lies in that hyperplane, keeping the
// angle between the two sets (which sets Dykstra's linear rate) healthy even
// when g is nearly constant. An exactly constant g leaves nothing to
// enforce: the caller reaches this projector only when max(g) >= r, and a
// constant g then satisfies the floor everywhere on the simplex. Terminates
// on the simplex projection so the budget constraint holds exactly; the
// halfspace residual is bounded by the final gap between the two
// projections.
class FeasibleSetProjector {
 public:
  FeasibleSetProjector(std::size_t n, const std::vector<double>* g, double r)
      : scratch_(n), y_(n), p_corr_(n), q_corr_(n), t_(n) {
    if (!g) return;
    const double g_mean = mean(*g);
    gc_.resize(n);
    for (std::size_t i = 0; i < n; ++i) gc_[i] = (*g)[i] - g_mean;
    rc_ = r - g_mean;
    gc_norm2_ = dot(gc_, gc_);
    has_floor_ = gc_norm2_ > 0.0;
  }

  void operator()(std::vector<double>& x) {
    if (!has_floor_) {
      project_simplex(x, scratch_);
      return;
    }
    const std::size_t n = x.size();
    const double tol = 1e-14 * std::max(1.0, max_abs(x));
    std::fill(p_corr_.begin(), p_corr_.end(), 0.0);
    std::fill(q_corr_.begin(), q_corr_.end(), 0.0);
    for (int cycle = 0; cycle < 2000; ++cycle) {
      for (std::size_t i = 0; i < n; ++i) y_[i] = x[i] + p_corr_[i];
      project_simplex(y_, scratch_);
      for (std::size_t i = 0; i < n; ++i) p_corr_[i] = (x[i] + p_corr_[i]) - y_[i];
      for (std::size_t i = 0; i < n; ++i) t_[i] = y_[i] + q_corr_[i];
      const double slack = rc_ - dot(gc_, t_);
      double gap = 0.0;
      if (slack > 0.0) {
        const double shift = slack / gc_norm2_;
        for (std::size_t i = 0; i < n; ++i) {
          const double z = t_[i] + shift * gc_[i];
          gap = std::max(gap, std::abs(z - y_[i]));
          q_corr_[i] = t_[i] - z;
          x[i] = z;
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          gap = std::max(gap, std::abs(t_[i] - y_[i]));
          q_corr_[i] = 0.0;
          x[i] = t_[i];
        }
      }
      if (gap <= tol) break;
    }
    x = y_;
  }

 private:
  std::vector<double> gc_;
  double rc_ = 0.0;
  double gc_norm2_ = 0.0;
  bool has_floor_ = false;
  std::vector<double> scratch_, y_, p_corr_, q_corr_, t_;
};

// Largest eigenvalue of a PSD matrix by power iteration. The start vector is
// fixed so the estimate is reproducible; for PSD input the iterate norm
// converges to lambda_max from below, which the caller pads.
inline double power_iteration_lmax(const Matrix& m) {
  const std::size_t n = m.rows();
  std::vector<double> v(n), w(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.25 * static_cast<double>(i % 3);
  double norm = std::sqrt(dot(v, v));
  for (double& x : v) x /= norm;
  double lambda = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    mat_vec(m, v, w);
    const double wnorm = std::sqrt(dot(w, w));
    if (wnorm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wnorm;
    if (std::abs(wnorm - lambda) <= 1e-12 * std::max(1.0, wnorm)) return wnorm;
    lambda = wnorm;
  }
  return lambda;
}

// Accelerated projected gradient (FISTA) for min p^T Sigma p over the
// feasible set. Fixed step 1/L, periodic momentum restarts, gradient-map
// stopping rule. Everything is deterministic: same inputs, same iterates.
inline MinVarianceResult solve_min_variance(const Matrix& sigma,
                                            const std::vector<double>* g, double r,
                                            const SolverOptions& opts) {
  const std::size_t n = sigma.rows();
  const double tr = trace(sigma);
  for (std::size_t i = 0; i < n; ++i)
    if (sigma(i, i) < -1e-12 * std::max(1.0, std::abs(tr)))
      fail(ErrorCode::kNotPsd, "negative diagonal entry in covariance");

  MinVarianceResult result;
  if (g) {
    // A constraint the simplex cannot meet is dropped rather than failed;
    // the caller surfaces the flag as a warning.
    const double gmax = *std::max_element(g->begin(), g->end());
    if (gmax < r) {
      result.return_constraint_relaxed = true;
      g = nullptr;
    }
  }

  double lmax = opts.lipschitz_hint ? *opts.lipschitz_hint : power_iteration_lmax(sigma);
  if (!(lmax > 0.0)) lmax = 1.0;
  // The objective's gradient is 2*sigma*p, so its Lipschitz constant is twice
  // the largest eigenvalue; stepping by 1/lmax instead stalls in oscillation.
  const double lips = 2.0 * lmax * (1.0 + 1e-6);
  const double step = 1.0 / lips;
  const double tol = opts.kkt_tol_rel * frobenius_norm(sigma);

  FeasibleSetProjector project(n, g, r);
  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  if (opts.warm_start) {
    if (opts.warm_start->size() != n)
      fail(ErrorCode::kDimensionMismatch, "warm start length does not match covariance");
    p = *opts.warm_start;
  }
  project(p);
  std::vector<double> p_prev = p;
  std::vector<double> y = p;
  std::vector<double> grad(n), cand(n);
  double tk = 1.0;

  const std::size_t check_every = std::max<std::size_t>(1, opts.check_interval);
  for (std::size_t iter = 1; iter <= opts.max_iterations; ++iter) {
    if (opts.restart_interval > 0 && iter % opts.restart_interval == 0) {
      tk = 1.0;
      p_prev = p;
    }
    const double tk_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    const double beta = (tk - 1.0) / tk_next;
    for (std::size_t i = 0; i < n; ++i) y[i] = p[i] + beta * (p[i] - p_prev[i]);
    mat_vec(sigma, y, grad);
    for (std::size_t i = 0; i < n; ++i) cand[i] = y[i] - step * 2.0 * grad[i];
    project(cand);
    p_prev.swap(p);
    p.swap(cand);
    tk = tk_next;
    // Adaptive restart (gradient test): momentum pointing against the latest
    // step is discarded, which restores a linear rate on ill-conditioned
    // covariances where fixed-interval restarts alone crawl.
    double restart_dot = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      restart_dot += (y[i] - p[i]) * (p[i] - p_prev[i]);
    if (restart_dot > 0.0) tk = 1.0;
    result.iterations = iter;

    if (iter % check_every == 0 || iter == opts.max_iterations) {
      mat_vec(sigma, p, grad);
      const double objective = dot(grad, p);
      if (objective < -1e-10 * std::max(1.0, std::abs(tr)))
        fail(ErrorCode::kNotPsd, "negative variance objective; input is not PSD");
      for (std::size_t i = 0; i < n; ++i) cand[i] = p[i] - step * 2.0 * grad[i];
      project(cand);
      double res2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = lips * (p[i] - cand[i]);
        res2 += d * d;
      }
      result.kkt_residual = std::sqrt(res2);
      result.objective = objective;
      if (result.kkt_residual <= tol) break;
    }
  }
  result.portfolio.weights = std::move(p);
  return result;
}

}  // namespace detail

// Minimum-variance weights subject to full investment, no short sales, and
// an expected-return floor g.p >= r_daily. If even the best single asset
// misses the floor the constraint is relaxed and flagged.
inline MinVarianceResult min_variance(const CovarianceEstimate& cov,
                                      const ReturnForecast& forecast,
                                      const SolverOptions& opts = {}) {
  if (forecast.g.size() != cov.dim())
    fail(ErrorCode::kDimensionMismatch, "forecast length does not match covariance");
  for (double v : forecast.g)
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidParams, "non-finite forecast entry");
  if (!std::isfinite(forecast.r_daily))
    fail(ErrorCode::kInvalidParams, "non-finite return floor");
  return detail::solve_min_variance(cov.matrix().matrix(), &forecast.g, forecast.r_daily,
                                    opts);
}

// Same objective without the return-floor constraint.
inline MinVarianceResult min_variance(const CovarianceEstimate& cov,
                                      const SolverOptions& opts = {}) {
  return detail::solve_min_variance(cov.matrix().matrix(), nullptr, 0.0, opts);
}

inline double portfolio_variance(const Portfolio& p, const CovarianceEstimate& cov) {
  if (p.weights.size() != cov.dim())
    fail(ErrorCode::kDimensionMismatch, "weights length does not match covariance");
  const std::vector<double> sp = mat_vec(cov.matrix().matrix(), p.weights);
  return dot(p.weights, sp);
}

// Unconstrained minimum of p^T Sigma p over the unit sphere: the smallest
// eigenvalue and its eigenvector.
struct MinEigResult {
  double lambda_min = 0.0;
  std::vector<double> direction;
};

inline MinEigResult min_eig_portfolio(const CovarianceEstimate& cov) {
  const SpectralDecomposition d = eigh(cov.matrix());
  const std::size_t n = d.eigenvalues.size();
  MinEigResult out;
  out.lambda_min = d.eigenvalues.back();
  out.direction.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.direction[i] = d.eigenvectors(i, n - 1);
  return out;
}

// Daily variance -> annualized risk in percent: 100 * sqrt(v) * sqrt(365).
inline double annualize_risk(double daily_variance) {
  if (daily_variance < 0.0)
    fail(ErrorCode::kNegativeVariance, "daily variance is negative");
  return 100.0 * std::sqrt(daily_variance) * std::sqrt(365.0);
}

// Expected daily returns as per-asset means of the raw (not demeaned) train
// window, plus the daily compounding floor for the annual target.
inline ReturnForecast forecast_returns(const ReturnsPanel& raw_train, double annual_target) {
  if (!(annual_target > -1.0))
    fail(ErrorCode::kInvalidParams, "annual return target must exceed -100%");
  ReturnForecast fc;
  fc.g.resize(raw_train.n_assets());
  for (std::size_t i = 0; i < raw_train.n_assets(); ++i)
    fc.g[i] = mean(raw_train.returns().row_span(i));
  fc.r_daily = std::pow(1.0 + annual_target, 1.0 / 365.0) - 1.0;
  return fc;
}

// Realized daily returns of fixed weights over a column range of a panel.
inline std::vector<double> portfolio_return_series(const ReturnsPanel& panel,
                                                   const Portfolio& p,
                                                   std::size_t col_start,
                                                   std::size_t col_len) {
  if (p.weights.size() != panel.n_assets())
    fail(ErrorCode::kDimensionMismatch, "weights length does not match panel");
  if (col_start > panel.n_days() || col_len > panel.n_days() - col_start)
    fail(ErrorCode::kWindowOutOfBounds, "column range exceeds panel");
  std::vector<double> out(col_len, 0.0);
  for (std::size_t i = 0; i < panel.n_assets(); ++i) {
    const double w = p.weights[i];
    if (w == 0.0) continue;
    for (std::size_t t = 0; t < col_len; ++t)
      out[t] += w * panel.returns()(i, col_start + t);
  }
  return out;
}

}  // namespace covcraft
