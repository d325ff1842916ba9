#pragma once

#include <cmath>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/market_data.hpp"
#include "covcraft/matrix.hpp"
#include "covcraft/rmt.hpp"
#include "covcraft/spectral.hpp"

namespace covcraft {

enum class EstimatorKind {
  kScm,
  kIdentityTarget,
  kFTarget,
  kShrink,
  kMp,
  kCombined,
  kPopulation,
};

inline std::string_view estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kScm: return "scm";
    case EstimatorKind::kIdentityTarget: return "identity";
    case EstimatorKind::kFTarget: return "f";
    case EstimatorKind::kShrink: return "shrink";
    case EstimatorKind::kMp: return "mp";
    case EstimatorKind::kCombined: return "combined";
    case EstimatorKind::kPopulation: return "population";
  }
  return "unknown";
}

inline std::optional<EstimatorKind> parse_estimator_name(std::string_view name) {
  for (EstimatorKind k :
       {EstimatorKind::kScm, EstimatorKind::kIdentityTarget, EstimatorKind::kFTarget,
        EstimatorKind::kShrink, EstimatorKind::kMp, EstimatorKind::kCombined,
        EstimatorKind::kPopulation})
    if (estimator_name(k) == name) return k;
  return std::nullopt;
}

// Point on the unit square that parameterizes the three-way convex
// combination: alpha = theta*phi on the structured target, beta =
// (1-theta)*phi on the spectrally cleaned matrix, gamma = 1-phi on the raw
// sample covariance. phi is the total strength of intervention, theta splits
// it between the two cleaned alternatives.
struct CombinationWeights {
  CombinationWeights(double theta_, double phi_) : theta(theta_), phi(phi_) {
    if (!(theta >= 0.0 && theta <= 1.0 && phi >= 0.0 && phi <= 1.0))
      fail(ErrorCode::kInvalidParams, "combination weights must lie in [0,1]^2");
  }
  double theta;
  double phi;

  double alpha() const { return theta * phi; }
  double beta() const { return (1.0 - theta) * phi; }
  double gamma() const { return 1.0 - phi; }
};

struct EstimatorMeta {
  std::optional<double> rho;
  std::optional<CombinationWeights> combination;
};

// A covariance matrix tagged with how it was produced. Symmetry and a
// non-negative diagonal are enforced here; positive semi-definiteness is a
// property of the construction paths and is checked by their tests.
class CovarianceEstimate {
 public:
  CovarianceEstimate(SymmetricMatrix matrix, EstimatorKind kind, EstimatorMeta meta = {})
      : matrix_(std::move(matrix)), kind_(kind), meta_(std::move(meta)) {
    for (std::size_t i = 0; i < matrix_.dim(); ++i)
      if (matrix_(i, i) < 0.0)
        fail(ErrorCode::kInvalidParams,
             "negative variance on the diagonal at " + std::to_string(i));
  }

  std::size_t dim() const { return matrix_.dim(); }
  EstimatorKind kind() const { return kind_; }
  const EstimatorMeta& meta() const { return meta_; }
  const SymmetricMatrix& matrix() const { return matrix_; }
  double operator()(std::size_t i, std::size_t j) const { return matrix_(i, j); }

 private:
  SymmetricMatrix matrix_;
  EstimatorKind kind_;
  EstimatorMeta meta_;
};

namespace detail {

inline void require_kind(const CovarianceEstimate& e, EstimatorKind kind,
                         const char* what) {
  if (e.kind() != kind)
    fail(ErrorCode::kInvalidParams,
         std::string(what) + " expects a " + std::string(estimator_name(kind)) +
             " input, got " + std::string(estimator_name(e.kind())));
}

}  // namespace detail

// X X^T / N over a demeaned panel (rows are assets). The 1/N normalization
// is deliberate: windows are treated as full populations.
inline CovarianceEstimate sample_covariance(const Matrix& demeaned_rows) {
  const std::size_t m = demeaned_rows.rows();
  const std::size_t n = demeaned_rows.cols();
  if (m == 0 || n == 0) fail(ErrorCode::kEmptyInput, "empty data matrix");
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = demeaned_rows.row_span(i);
    const double magnitude = max_abs(row);
    if (std::abs(mean(row)) > 1e-10 * magnitude)
      fail(ErrorCode::kNotDemeaned, "row " + std::to_string(i) + " is not demeaned");
  }
  Matrix sigma(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double v = dot(demeaned_rows.row_span(i), demeaned_rows.row_span(j)) /
                       static_cast<double>(n);
      sigma(i, j) = sigma(j, i) = v;
    }
  }
  return CovarianceEstimate(SymmetricMatrix(std::move(sigma)), EstimatorKind::kScm);
}

inline CovarianceEstimate sample_covariance(const ReturnsPanel& demeaned_panel) {
  return sample_covariance(demeaned_panel.returns());
}

// Scaled identity target: (trace / M) * I.
inline CovarianceEstimate identity_target(const CovarianceEstimate& scm) {
  detail::require_kind(scm, EstimatorKind::kScm, "identity_target");
  const std::size_t m = scm.dim();
  const double mean_variance = trace(scm.matrix().matrix()) / static_cast<double>(m);
  Matrix t(m, m);
  for (std::size_t i = 0; i < m; ++i) t(i, i) = mean_variance;
  return CovarianceEstimate(SymmetricMatrix(std::move(t)), EstimatorKind::kIdentityTarget);
}

// Structured target F: sample variances on the diagonal, the mean of all
// off-diagonal covariances everywhere else.
inline CovarianceEstimate shrinkage_target_f(const CovarianceEstimate& scm) {
  detail::require_kind(scm, EstimatorKind::kScm, "shrinkage_target_f");
  const std::size_t m = scm.dim();
  if (m < 2) fail(ErrorCode::kInvalidParams, "target needs at least 2 assets");
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const double y = scm(i, j) - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
  }
  const double mean_cov = sum / static_cast<double>(m * (m - 1));
  Matrix f(m, m, mean_cov);
  for (std::size_t i = 0; i < m; ++i) f(i, i) = scm(i, i);
  return CovarianceEstimate(SymmetricMatrix(std::move(f)), EstimatorKind::kFTarget);
}

// rho * target + (1 - rho) * scm, entrywise.
inline CovarianceEstimate linear_shrinkage(const CovarianceEstimate& scm,
                                           const CovarianceEstimate& target, double rho) {
  detail::require_kind(scm, EstimatorKind::kScm, "linear_shrinkage");
  if (target.kind() != EstimatorKind::kIdentityTarget &&
      target.kind() != EstimatorKind::kFTarget)
    fail(ErrorCode::kInvalidParams, "linear_shrinkage expects a shrinkage target");
  if (target.dim() != scm.dim())
    fail(ErrorCode::kDimensionMismatch, "target and scm dimensions differ");
  if (!(rho >= 0.0 && rho <= 1.0))
    fail(ErrorCode::kRhoOutOfRange, "rho must lie in [0,1]");
  const std::size_t m = scm.dim();
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      out(i, j) = rho * target(i, j) + (1.0 - rho) * scm(i, j);
  EstimatorMeta meta;
  meta.rho = rho;
  return CovarianceEstimate(SymmetricMatrix(std::move(out)), EstimatorKind::kShrink,
                            std::move(meta));
}

// Spectral cleaning of the correlation matrix: eigenvalues inside the
// pure-noise bulk are flattened to their mean, the original variances are
// restored afterwards. c is the train-window M/N.
inline CovarianceEstimate mp_clean(const CovarianceEstimate& scm, double c) {
  detail::require_kind(scm, EstimatorKind::kScm, "mp_clean");
  const MpParams params(c, 1.0);
  const std::size_t m = scm.dim();
  std::vector<double> scale(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(scm(i, i) > 0.0))
      fail(ErrorCode::kZeroVariance,
           "asset " + std::to_string(i) + " has no variance in this window");
    scale[i] = std::sqrt(scm(i, i));
  }
  Matrix corr(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    corr(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j)
      corr(i, j) = corr(j, i) = scm(i, j) / (scale[i] * scale[j]);
  }
  const SpectralDecomposition cleaned =
      clip_eigenvalues(eigh(SymmetricMatrix(std::move(corr))), mp_bounds(params));
  Matrix rebuilt = reconstruct(cleaned).matrix();
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    out(i, i) = scm(i, i);
    for (std::size_t j = i + 1; j < m; ++j)
      out(i, j) = out(j, i) = rebuilt(i, j) * scale[i] * scale[j];
  }
  return CovarianceEstimate(SymmetricMatrix(std::move(out)), EstimatorKind::kMp);
}

// theta*phi * F + (1-theta)*phi * MP + (1-phi) * SCM. Each term is applied
// left to right so the boundary cases collapse to their components exactly.
inline CovarianceEstimate combine(const CovarianceEstimate& f, const CovarianceEstimate& mp,
                                  const CovarianceEstimate& scm,
                                  const CombinationWeights& weights) {
  detail::require_kind(f, EstimatorKind::kFTarget, "combine");
  detail::require_kind(mp, EstimatorKind::kMp, "combine");
  detail::require_kind(scm, EstimatorKind::kScm, "combine");
  const std::size_t m = scm.dim();
  if (f.dim() != m || mp.dim() != m)
    fail(ErrorCode::kDimensionMismatch, "component dimensions differ");
  const double a = weights.alpha();
  const double b = weights.beta();
  const double g = weights.gamma();
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      out(i, j) = a * f(i, j) + b * mp(i, j) + g * scm(i, j);
  EstimatorMeta meta;
  meta.combination = weights;
  return CovarianceEstimate(SymmetricMatrix(std::move(out)), EstimatorKind::kCombined,
                            std::move(meta));
}

}  // namespace covcraft
