#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/estimators.hpp"
#include "covcraft/market_data.hpp"
#include "covcraft/matrix.hpp"
#include "covcraft/portfolio.hpp"

namespace covcraft {

// Search grid for the combination weights plus the chronological
// fit/validation split used to score each candidate.
struct GridSpec {
  double step = 0.02;                // 1/step must be an integer, step <= 0.5
  double validation_fraction = 0.25; // in (0, 0.5)
};

inline void validate(const GridSpec& grid) {
  if (!(grid.step > 0.0 && grid.step <= 0.5))
    fail(ErrorCode::kInvalidParams, "grid step must lie in (0, 0.5]");
  const double n = std::round(1.0 / grid.step);
  if (std::abs(n * grid.step - 1.0) > 1e-9)
    fail(ErrorCode::kInvalidParams, "1/step must be an integer");
  if (!(grid.validation_fraction > 0.0 && grid.validation_fraction < 0.5))
    fail(ErrorCode::kInvalidParams, "validation fraction must lie in (0, 0.5)");
}

// {0, step, ..., 1} computed as k/n so both endpoints are exact.
inline std::vector<double> grid_values(double step) {
  const auto n = static_cast<std::size_t>(std::llround(1.0 / step));
  std::vector<double> values(n + 1);
  for (std::size_t k = 0; k <= n; ++k)
    values[k] = static_cast<double>(k) / static_cast<double>(n);
  return values;
}

struct GridCell {
  double theta = 0.0;
  double phi = 0.0;
  double validation_variance = 0.0;
};

struct TuneResult {
  CombinationWeights weights;
  double validation_variance = 0.0;
  std::vector<GridCell> surface;  // theta-major, phi-minor order
};

namespace detail {

inline std::size_t validation_days(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

// Variance of the held-out portfolio returns; the score every candidate
// covariance is judged by.
inline double validation_variance(const ReturnsPanel& panel, const Portfolio& p,
                                  std::size_t col_start, std::size_t col_len) {
  const std::vector<double> series = portfolio_return_series(panel, p, col_start, col_len);
  return population_variance(series);
}

}  // namespace detail

// Grid search over (theta, phi): each candidate covariance is built from the
// fit segment, turned into minimum-variance weights, and scored on the
// validation segment. Ties prefer smaller phi, then smaller theta, i.e. the
// least intervention that achieves the risk.
inline TuneResult tune_weights_surface(const ReturnsPanel& train, const ReturnForecast& forecast,
                                       const GridSpec& grid = {}) {
  validate(grid);
  const std::size_t m = train.n_assets();
  const std::size_t n = train.n_days();
  const std::size_t n_val = detail::validation_days(n, grid.validation_fraction);
  if (m < 2 || n_val < 2 || n - n_val < 2)
    fail(ErrorCode::kWindowTooSmall, "train window too small to split for validation");
  const std::size_t n_fit = n - n_val;
  if (m >= n_fit)
    fail(ErrorCode::kWindowTooSmall,
         "fit segment must be longer than the asset count for spectral cleaning");

  const WindowSlices split = slice_window(train, {0, n_fit, n_val});
  const DemeanResult centered = demean(split.train);
  const CovarianceEstimate scm = sample_covariance(centered.panel);
  const CovarianceEstimate f = shrinkage_target_f(scm);
  const CovarianceEstimate mp =
      mp_clean(scm, static_cast<double>(m) / static_cast<double>(n_fit));

  // lambda_max is subadditive over the convex combination, so a per-cell
  // Lipschitz bound comes free from the three component estimates.
  const double lmax_f = detail::power_iteration_lmax(f.matrix().matrix());
  const double lmax_mp = detail::power_iteration_lmax(mp.matrix().matrix());
  const double lmax_scm = detail::power_iteration_lmax(scm.matrix().matrix());

  const std::vector<double> values = grid_values(grid.step);
  TuneResult result{CombinationWeights(0.0, 0.0), 0.0, {}};
  result.surface.reserve(values.size() * values.size());
  bool first = true;
  double best_var = 0.0;
  double best_theta = 0.0;
  double best_phi = 0.0;
  std::optional<std::vector<double>> warm;

  for (const double theta : values) {
    for (const double phi : values) {
      const CombinationWeights w(theta, phi);
      const CovarianceEstimate candidate = combine(f, mp, scm, w);
      SolverOptions opts;
      opts.lipschitz_hint =
          w.alpha() * lmax_f + w.beta() * lmax_mp + w.gamma() * lmax_scm;
      opts.warm_start = warm;
      const MinVarianceResult solved = min_variance(candidate, forecast, opts);
      warm = solved.portfolio.weights;
      const double var =
          detail::validation_variance(train, solved.portfolio, n_fit, n_val);
      result.surface.push_back({theta, phi, var});
      const bool better =
          first || var < best_var ||
          (var == best_var &&
           std::pair(phi, theta) < std::pair(best_phi, best_theta));
      if (better) {
        first = false;
        best_var = var;
        best_theta = theta;
        best_phi = phi;
      }
    }
  }
  result.weights = CombinationWeights(best_theta, best_phi);
  result.validation_variance = best_var;
  return result;
}

inline CombinationWeights tune_weights(const ReturnsPanel& train,
                                       const ReturnForecast& forecast,
                                       const GridSpec& grid = {}) {
  return tune_weights_surface(train, forecast, grid).weights;
}

// Shrinkage intensity selected the same way: rho grid {0, 0.05, ..., 1},
// scored by held-out variance of the unconstrained minimum-variance weights.
// Degenerate windows fall back to rho = 0.
inline double shrinkage_intensity(const ReturnsPanel& train, const CovarianceEstimate& scm,
                                  const CovarianceEstimate& target,
                                  double validation_fraction = 0.25) {
  if (scm.kind() != EstimatorKind::kScm)
    fail(ErrorCode::kInvalidParams, "shrinkage_intensity expects the sample covariance");
  if (target.kind() != EstimatorKind::kIdentityTarget &&
      target.kind() != EstimatorKind::kFTarget)
    fail(ErrorCode::kInvalidParams, "shrinkage_intensity expects a shrinkage target");
  if (scm.dim() != train.n_assets() || target.dim() != train.n_assets())
    fail(ErrorCode::kDimensionMismatch, "estimate dimensions do not match panel");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5))
    fail(ErrorCode::kInvalidParams, "validation fraction must lie in (0, 0.5)");

  const std::size_t n = train.n_days();
  const std::size_t n_val = detail::validation_days(n, validation_fraction);
  if (train.n_assets() < 2 || n_val < 2 || n - n_val < 2) return 0.0;
  const std::size_t n_fit = n - n_val;

  const WindowSlices split = slice_window(train, {0, n_fit, n_val});
  const DemeanResult centered = demean(split.train);
  const CovarianceEstimate scm_fit = sample_covariance(centered.panel);
  const CovarianceEstimate target_fit = target.kind() == EstimatorKind::kIdentityTarget
                                            ? identity_target(scm_fit)
                                            : shrinkage_target_f(scm_fit);

  const double lmax_t = detail::power_iteration_lmax(target_fit.matrix().matrix());
  const double lmax_s = detail::power_iteration_lmax(scm_fit.matrix().matrix());

  double best_var = 0.0;
  double best_rho = 0.0;
  bool first = true;
  std::optional<std::vector<double>> warm;
  for (std::size_t k = 0; k <= 20; ++k) {
    const double rho = static_cast<double>(k) / 20.0;
    const CovarianceEstimate candidate = linear_shrinkage(scm_fit, target_fit, rho);
    SolverOptions opts;
    opts.lipschitz_hint = rho * lmax_t + (1.0 - rho) * lmax_s;
    opts.warm_start = warm;
    const MinVarianceResult solved = min_variance(candidate, opts);
    warm = solved.portfolio.weights;
    const double var = detail::validation_variance(train, solved.portfolio, n_fit, n_val);
    if (first || var < best_var) {
      first = false;
      best_var = var;
      best_rho = rho;
    }
  }
  return best_rho;
}

// ---------------------------------------------------------------------------
// Oracle weights: nearest point to a known population covariance inside the
// convex hull of {F, MP, SCM} in Frobenius geometry.

struct OracleWeightsResult {
  CombinationWeights weights;
  double frobenius_err = 0.0;            // || population - combination ||_F
  std::array<double, 3> hull_weights{};  // on {F, MP, SCM}, sums to 1
};

namespace detail {

inline double frobenius_inner(const Matrix& a, const Matrix& b) {
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const double y = a.data()[k] * b.data()[k] - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

// Solves the equality-constrained quadratic on a candidate support by a tiny
// pivoted elimination; at most a 4x4 system.
inline bool solve_support_kkt(const std::array<std::array<double, 3>, 3>& gram,
                              const std::array<double, 3>& lin,
                              const std::vector<std::size_t>& support,
                              std::array<double, 3>& w_out) {
  const std::size_t k = support.size();
  const std::size_t dim = k + 1;
  double a[4][5] = {};
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) a[r][c] = 2.0 * gram[support[r]][support[c]];
    a[r][k] = 1.0;
    a[r][dim] = 2.0 * lin[support[r]];
  }
  for (std::size_t c = 0; c < k; ++c) a[k][c] = 1.0;
  a[k][k] = 0.0;
  a[k][dim] = 1.0;

  for (std::size_t col = 0; col < dim; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < dim; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-250) return false;
    if (pivot != col)
      for (std::size_t c = 0; c <= dim; ++c) std::swap(a[pivot][c], a[col][c]);
    for (std::size_t r = 0; r < dim; ++r) {
      if (r == col) continue;
      const double factor = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= dim; ++c) a[r][c] -= factor * a[col][c];
    }
  }
  w_out = {0.0, 0.0, 0.0};
  for (std::size_t r = 0; r < k; ++r) {
    const double v = a[r][dim] / a[r][r];
    if (!std::isfinite(v)) return false;
    w_out[support[r]] = v;
  }
  return true;
}

}  // namespace detail

// Frobenius projection of the population matrix onto the hull, reduced to a
// 3-variable simplex QP on the Gram matrix. Projected gradient finds the
// face; an exact solve on that face recovers vertices and edges to machine
// precision.
inline OracleWeightsResult oracle_weights(const CovarianceEstimate& population,
                                          const CovarianceEstimate& f,
                                          const CovarianceEstimate& mp,
                                          const CovarianceEstimate& scm) {
  const std::size_t dim = population.dim();
  if (f.dim() != dim || mp.dim() != dim || scm.dim() != dim)
    fail(ErrorCode::kDimensionMismatch, "component dimensions differ");

  const Matrix* comp[3] = {&f.matrix().matrix(), &mp.matrix().matrix(),
                           &scm.matrix().matrix()};
  const Matrix& target = population.matrix().matrix();
  std::array<std::array<double, 3>, 3> gram{};
  std::array<double, 3> lin{};
  for (std::size_t i = 0; i < 3; ++i) {
    lin[i] = detail::frobenius_inner(*comp[i], target);
    for (std::size_t j = i; j < 3; ++j)
      gram[i][j] = gram[j][i] = detail::frobenius_inner(*comp[i], *comp[j]);
  }

  // Scale for tolerances: the Gram matrix of the components.
  double gram_norm = 0.0;
  for (const auto& row : gram)
    for (double v : row) gram_norm += v * v;
  gram_norm = std::sqrt(gram_norm);
  const double scale = std::max(1.0, gram_norm);

  const auto objective = [&](const std::array<double, 3>& w) {
    double q = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) q += w[i] * gram[i][j] * w[j];
    for (std::size_t i = 0; i < 3; ++i) q -= 2.0 * w[i] * lin[i];
    return q;
  };

  // Power iteration on the 3x3 Gram matrix for the step size.
  double lmax = 0.0;
  {
    std::array<double, 3> v{1.0, 1.25, 1.5};
    for (int iter = 0; iter < 200; ++iter) {
      std::array<double, 3> w{};
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) w[i] += gram[i][j] * v[j];
      const double norm = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
      if (norm == 0.0) break;
      for (std::size_t i = 0; i < 3; ++i) v[i] = w[i] / norm;
      lmax = norm;
    }
  }
  if (!(lmax > 0.0)) lmax = 1.0;
  const double step = 1.0 / (2.0 * lmax * (1.0 + 1e-6));

  std::vector<double> w{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::vector<double> scratch(3), grad(3), cand(3);
  std::vector<double> w_prev = w;
  double tk = 1.0;
  for (std::size_t iter = 1; iter <= 100000; ++iter) {
    if (iter % 500 == 0) {
      tk = 1.0;
      w_prev = w;
    }
    const double tk_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    const double beta = (tk - 1.0) / tk_next;
    std::vector<double> y(3);
    for (std::size_t i = 0; i < 3; ++i) y[i] = w[i] + beta * (w[i] - w_prev[i]);
    for (std::size_t i = 0; i < 3; ++i) {
      grad[i] = -2.0 * lin[i];
      for (std::size_t j = 0; j < 3; ++j) grad[i] += 2.0 * gram[i][j] * y[j];
    }
    for (std::size_t i = 0; i < 3; ++i) cand[i] = y[i] - step * grad[i];
    detail::project_simplex(cand, scratch);
    w_prev = w;
    w = cand;
    tk = tk_next;

    if (iter % 50 == 0 || iter == 100000) {
      for (std::size_t i = 0; i < 3; ++i) {
        grad[i] = -2.0 * lin[i];
        for (std::size_t j = 0; j < 3; ++j) grad[i] += 2.0 * gram[i][j] * w[j];
      }
      for (std::size_t i = 0; i < 3; ++i) cand[i] = w[i] - step * grad[i];
      detail::project_simplex(cand, scratch);
      double res = 0.0;
      for (std::size_t i = 0; i < 3; ++i)
        res += (w[i] - cand[i]) * (w[i] - cand[i]);
      if (std::sqrt(res) / step <= 1e-13 * scale) break;
    }
  }

  // Exact finish: enumerate every face of the simplex, solve the equality-
  // restricted problem on it, and keep the best feasible point. Singletons
  // come first so exact ties resolve to the sparsest support.
  std::array<double, 3> w_arr{w[0], w[1], w[2]};
  double best_obj = objective(w_arr);
  static constexpr std::array<std::array<std::size_t, 3>, 7> kFaces{{
      {0, 3, 3}, {1, 3, 3}, {2, 3, 3}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}, {0, 1, 2}}};
  for (const auto& face : kFaces) {
    std::vector<std::size_t> support;
    for (std::size_t idx : face)
      if (idx < 3) support.push_back(idx);
    std::array<double, 3> candidate{};
    if (!detail::solve_support_kkt(gram, lin, support, candidate)) continue;
    bool feasible = true;
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      if (candidate[i] < -1e-12) feasible = false;
      candidate[i] = std::max(candidate[i], 0.0);
      sum += candidate[i];
    }
    if (!feasible || !(sum > 0.0)) continue;
    for (double& v : candidate) v /= sum;
    const double obj = objective(candidate);
    if (obj < best_obj) {
      best_obj = obj;
      w_arr = candidate;
    }
  }

  const double alpha = w_arr[0];
  const double beta_w = w_arr[1];
  const double phi = std::clamp(alpha + beta_w, 0.0, 1.0);
  const double theta = phi > 0.0 ? std::clamp(alpha / phi, 0.0, 1.0) : 0.0;

  OracleWeightsResult out{CombinationWeights(theta, phi)};
  out.hull_weights = w_arr;
  Matrix blend(dim, dim);
  for (std::size_t idx = 0; idx < blend.data().size(); ++idx)
    blend.data()[idx] = w_arr[0] * comp[0]->data()[idx] +
                        w_arr[1] * comp[1]->data()[idx] +
                        w_arr[2] * comp[2]->data()[idx];
  out.frobenius_err = frobenius_distance(target, blend);
  return out;
}

}  // namespace covcraft
