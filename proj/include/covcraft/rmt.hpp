#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/matrix.hpp"
#include "covcraft/spectral.hpp"

namespace covcraft {

// Spectral-bulk model for a pure-noise sample covariance: M assets, N days,
// c = M/N in (0,1), population variance sigma2.
struct MpParams {
  MpParams(double c_, double sigma2_) : c(c_), sigma2(sigma2_) {
    if (!(c > 0.0 && c < 1.0))
      fail(ErrorCode::kInvalidParams, "dimensionality constant must lie in (0,1)");
    if (!(sigma2 > 0.0)) fail(ErrorCode::kInvalidParams, "sigma2 must be positive");
  }
  double c;
  double sigma2;
};

struct MpBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Bulk edges sigma2 * (1 -+ sqrt(c))^2.
inline MpBounds mp_bounds(const MpParams& p) {
  const double root = std::sqrt(p.c);
  return {p.sigma2 * (1.0 - root) * (1.0 - root),
          p.sigma2 * (1.0 + root) * (1.0 + root)};
}

// Bulk density sqrt((x - lower)(upper - x)) / (2 pi c sigma2 x); zero outside
// the open interval (lower, upper).
inline double mp_density(double x, const MpParams& p) {
  const MpBounds b = mp_bounds(p);
  if (!(x > b.lower && x < b.upper)) return 0.0;
  return std::sqrt((x - b.lower) * (b.upper - x)) /
         (2.0 * std::numbers::pi * p.c * p.sigma2 * x);
}

namespace detail {

template <typename F>
double adaptive_simpson_step(const F& f, double a, double b, double fa, double fm,
                             double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_step(f, a, b, fa, fm, fb, whole, tol, 60);
}

}  // namespace detail

// CDF of the bulk law by adaptive Simpson quadrature of mp_density.
inline double mp_cdf(double x, const MpParams& p, double tol = 1e-9) {
  const MpBounds b = mp_bounds(p);
  if (x <= b.lower) return 0.0;
  if (x >= b.upper) return 1.0;
  const double integral = detail::adaptive_simpson(
      [&](double t) { return mp_density(t, p); }, b.lower, x, tol);
  return std::clamp(integral, 0.0, 1.0);
}

// Right-continuous step function x -> #{lambda_i <= x} / M.
class EmpiricalSpectralCdf {
 public:
  explicit EmpiricalSpectralCdf(std::vector<double> eigenvalues)
      : sorted_(std::move(eigenvalues)) {
    if (sorted_.empty()) fail(ErrorCode::kEmptyInput, "no eigenvalues");
    for (double v : sorted_)
      if (!std::isfinite(v)) fail(ErrorCode::kInvalidParams, "non-finite eigenvalue");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  const std::vector<double>& sorted_eigenvalues() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

inline EmpiricalSpectralCdf empirical_spectral_cdf(std::vector<double> eigenvalues) {
  return EmpiricalSpectralCdf(std::move(eigenvalues));
}

// Replaces every eigenvalue strictly inside (lower, upper) by the mean of
// that group, which preserves the trace. Eigenvalues on or outside the
// bounds, and all eigenvectors, pass through unchanged.
inline SpectralDecomposition clip_eigenvalues(const SpectralDecomposition& d,
                                              const MpBounds& bounds) {
  if (!(bounds.lower < bounds.upper))
    fail(ErrorCode::kInvalidParams, "bounds must satisfy lower < upper");
  SpectralDecomposition out = d;
  std::vector<std::size_t> inside;
  for (std::size_t k = 0; k < d.eigenvalues.size(); ++k)
    if (d.eigenvalues[k] > bounds.lower && d.eigenvalues[k] < bounds.upper)
      inside.push_back(k);
  if (inside.empty()) return out;
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t k : inside) {
    const double y = d.eigenvalues[k] - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  const double bulk_mean = sum / static_cast<double>(inside.size());
  for (std::size_t k : inside) out.eigenvalues[k] = bulk_mean;
  return out;
}

}  // namespace covcraft
