#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/estimators.hpp"
#include "covcraft/market_data.hpp"
#include "covcraft/matrix.hpp"
#include "covcraft/spectral.hpp"

namespace covcraft {

// Population covariance model: base_variance * (I + sum_k (lambda_k - 1)
// u_k u_k^T). With no spikes this is pure noise; each spike plants one
// eigenvalue base_variance * lambda_k along u_k.
struct Spike {
  double eigenvalue = 0.0;                       // > 1
  std::optional<std::vector<double>> direction;  // unit vector; e_k if absent
};

enum class Innovations { kGaussian, kStudentT };

struct SpikeSpec {
  std::size_t dim = 0;
  std::vector<Spike> spikes;
  double base_variance = 1.0;
  Innovations distribution = Innovations::kGaussian;
  double student_t_dof = 3.0;  // > 2 so the variance normalization exists
  double temporal_ar1 = 0.0;   // in [0, 1)
};

namespace detail {

inline void validate(const SpikeSpec& spec) {
  if (spec.dim == 0) fail(ErrorCode::kInvalidSpec, "dimension must be positive");
  if (!(spec.base_variance > 0.0))
    fail(ErrorCode::kInvalidSpec, "base variance must be positive");
  if (spec.spikes.size() > spec.dim)
    fail(ErrorCode::kInvalidSpec, "more spikes than dimensions");
  if (spec.distribution == Innovations::kStudentT && !(spec.student_t_dof > 2.0))
    fail(ErrorCode::kInvalidSpec, "student-t needs dof > 2 for unit-variance scaling");
  if (!(spec.temporal_ar1 >= 0.0 && spec.temporal_ar1 < 1.0))
    fail(ErrorCode::kInvalidSpec, "AR(1) coefficient must lie in [0, 1)");
  std::size_t with_direction = 0;
  for (const Spike& s : spec.spikes) {
    if (!(s.eigenvalue > 1.0))
      fail(ErrorCode::kInvalidSpec, "spike eigenvalues must exceed 1");
    if (s.direction) ++with_direction;
  }
  if (with_direction != 0 && with_direction != spec.spikes.size())
    fail(ErrorCode::kInvalidSpec, "give directions for all spikes or none");
  for (std::size_t a = 0; a < spec.spikes.size(); ++a) {
    if (!spec.spikes[a].direction) continue;
    const std::vector<double>& u = *spec.spikes[a].direction;
    if (u.size() != spec.dim)
      fail(ErrorCode::kInvalidSpec, "spike direction length does not match dim");
    if (std::abs(dot(u, u) - 1.0) > 1e-8)
      fail(ErrorCode::kInvalidSpec, "spike direction is not a unit vector");
    for (std::size_t b = a + 1; b < spec.spikes.size(); ++b) {
      if (!spec.spikes[b].direction) continue;
      if (std::abs(dot(u, *spec.spikes[b].direction)) > 1e-8)
        fail(ErrorCode::kInvalidSpec, "spike directions are not orthogonal");
    }
  }
}

}  // namespace detail

inline CovarianceEstimate build_population(const SpikeSpec& spec) {
  detail::validate(spec);
  const std::size_t m = spec.dim;
  Matrix sigma = Matrix::identity(m);
  for (std::size_t k = 0; k < spec.spikes.size(); ++k) {
    const Spike& s = spec.spikes[k];
    std::vector<double> unit(m, 0.0);
    if (s.direction) unit = *s.direction;
    else unit[k] = 1.0;
    const double excess = s.eigenvalue - 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double w = excess * unit[i];
      if (w == 0.0) continue;
      sigma(i, i) += w * unit[i];
      for (std::size_t j = i + 1; j < m; ++j) {
        sigma(i, j) += w * unit[j];
        sigma(j, i) = sigma(i, j);
      }
    }
  }
  for (double& v : sigma.data()) v *= spec.base_variance;
  return CovarianceEstimate(SymmetricMatrix(std::move(sigma)), EstimatorKind::kPopulation);
}

// ---------------------------------------------------------------------------
// Seeded draws. std::mt19937_64 has a bit-exact sequence fixed by the
// standard; all mappings below are hand-rolled so panels reproduce across
// platforms and library versions.

namespace detail {

// Uniform on (0, 1]: top 53 bits, shifted away from zero so log() is safe.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>((gen() >> 11) + 1) * 0x1.0p-53;
}

// Box-Muller without state: two uniforms per normal draw.
inline double standard_normal(std::mt19937_64& gen) {
  const double u1 = uniform01(gen);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Marsaglia-Tsang for shape >= 1, scale 1.
inline double standard_gamma(std::mt19937_64& gen, double shape) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    const double x = standard_normal(gen);
    const double base = 1.0 + c * x;
    if (base <= 0.0) continue;
    const double v = base * base * base;
    const double u = uniform01(gen);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// Unit-variance innovation for the configured distribution. Student-t draws
// are scaled by sqrt((dof-2)/dof) so the population covariance is exact.
inline double innovation(std::mt19937_64& gen, const SpikeSpec& spec) {
  const double z = standard_normal(gen);
  if (spec.distribution == Innovations::kGaussian) return z;
  const double nu = spec.student_t_dof;
  const double chi2 = 2.0 * standard_gamma(gen, 0.5 * nu);
  const double t = z / std::sqrt(chi2 / nu);
  return t * std::sqrt((nu - 2.0) / nu);
}

}  // namespace detail

inline std::vector<double> random_unit_vector(std::mt19937_64& gen, std::size_t m) {
  if (m == 0) fail(ErrorCode::kInvalidSpec, "dimension must be positive");
  std::vector<double> v(m);
  double norm2 = 0.0;
  do {
    for (std::size_t i = 0; i < m; ++i) v[i] = detail::standard_normal(gen);
    norm2 = dot(v, v);
  } while (!(norm2 > 0.0));
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

// Gram-Schmidt on fresh normal draws; redraws on near-degeneracy.
inline std::vector<std::vector<double>> random_orthonormal_directions(std::mt19937_64& gen,
                                                                      std::size_t m,
                                                                      std::size_t count) {
  if (count > m) fail(ErrorCode::kInvalidSpec, "more directions than dimensions");
  std::vector<std::vector<double>> dirs;
  while (dirs.size() < count) {
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = detail::standard_normal(gen);
    for (const std::vector<double>& u : dirs) {
      const double proj = dot(u, v);
      for (std::size_t i = 0; i < m; ++i) v[i] -= proj * u[i];
    }
    const double norm2 = dot(v, v);
    if (!(norm2 > 1e-12)) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

// Draws an M x n_days panel x_t = A z_t with A the symmetric square root of
// the population matrix. Draw order is fixed (day-major, asset-minor), and
// AR(1) streams burn in 100 steps from zero, so a (population, spec, seed)
// triple always yields the same panel. Dates are consecutive calendar days
// from 2014-01-01.
inline ReturnsPanel sample_panel(const CovarianceEstimate& population, std::size_t n_days,
                                 const SpikeSpec& spec, std::uint64_t seed) {
  detail::validate(spec);
  if (population.dim() != spec.dim)
    fail(ErrorCode::kDimensionMismatch, "population does not match spec dimension");
  if (n_days < 2) fail(ErrorCode::kInvalidSpec, "need at least 2 days");
  const std::size_t m = spec.dim;

  const SpectralDecomposition d = eigh(population.matrix());
  const double tr = trace(population.matrix().matrix());
  std::vector<double> roots(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (d.eigenvalues[k] < -1e-10 * std::max(1.0, tr))
      fail(ErrorCode::kNotPsd, "population covariance has a negative eigenvalue");
    roots[k] = std::sqrt(std::max(d.eigenvalues[k], 0.0));
  }
  Matrix a(m, m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      const double w = roots[k] * d.eigenvectors(i, k);
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) a(i, j) += w * d.eigenvectors(j, k);
    }
  }

  std::mt19937_64 gen(seed);
  const double ar = spec.temporal_ar1;
  std::vector<double> state(m, 0.0);
  if (ar > 0.0) {
    const double fresh = std::sqrt(1.0 - ar * ar);
    for (int burn = 0; burn < 100; ++burn)
      for (std::size_t i = 0; i < m; ++i)
        state[i] = ar * state[i] + fresh * detail::innovation(gen, spec);
  }

  Matrix x(m, n_days);
  std::vector<double> z(m), col(m);
  for (std::size_t t = 0; t < n_days; ++t) {
    if (ar > 0.0) {
      const double fresh = std::sqrt(1.0 - ar * ar);
      for (std::size_t i = 0; i < m; ++i)
        state[i] = ar * state[i] + fresh * detail::innovation(gen, spec);
      z = state;
    } else {
      for (std::size_t i = 0; i < m; ++i) z[i] = detail::innovation(gen, spec);
    }
    mat_vec(a, z, col);
    for (std::size_t i = 0; i < m; ++i) x(i, t) = col[i];
  }

  const std::int64_t epoch = detail::days_from_civil(2014, 1, 1);
  std::vector<std::string> dates(n_days);
  for (std::size_t t = 0; t < n_days; ++t)
    dates[t] = format_iso_date(epoch + static_cast<std::int64_t>(t));
  std::vector<std::string> assets(m);
  int width = 1;
  for (std::size_t v = m; v >= 10; v /= 10) ++width;
  for (std::size_t i = 0; i < m; ++i) {
    std::string num = std::to_string(i + 1);
    assets[i] = "A" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
  }
  return ReturnsPanel(std::move(assets), std::move(dates), std::move(x));
}

// Frobenius distance between two covariance estimates of equal dimension.
inline double frobenius_error(const CovarianceEstimate& a, const CovarianceEstimate& b) {
  return frobenius_distance(a.matrix().matrix(), b.matrix().matrix());
}

}  // namespace covcraft
