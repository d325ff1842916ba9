#include "covcraft/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/estimators.hpp"
#include "covcraft/market_data.hpp"
#include "covcraft/matrix.hpp"
#include "covcraft/spectral.hpp"

namespace covcraft {
namespace {

ErrorCode spec_error(const SpikeSpec& spec) {
  try {
    build_population(spec);
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected build_population to fail");
}

TEST(BuildPopulation, NoSpikesGivesIdentity) {
  SpikeSpec spec;
  spec.dim = 3;
  const CovarianceEstimate pop = build_population(spec);
  EXPECT_EQ(pop.kind(), EstimatorKind::kPopulation);
  EXPECT_EQ(pop.matrix().matrix(), Matrix::identity(3));
}

TEST(BuildPopulation, CanonicalSpikesPlantEigenvalues) {
  SpikeSpec spec;
  spec.dim = 5;
  spec.spikes = {{8.0, std::nullopt}, {4.0, std::nullopt}};
  const CovarianceEstimate pop = build_population(spec);
  const SpectralDecomposition d = eigh(pop.matrix());
  ASSERT_EQ(d.eigenvalues.size(), 5u);
  EXPECT_NEAR(d.eigenvalues[0], 8.0, 1e-12);
  EXPECT_NEAR(d.eigenvalues[1], 4.0, 1e-12);
  for (std::size_t k = 2; k < 5; ++k) EXPECT_NEAR(d.eigenvalues[k], 1.0, 1e-12);

  spec.base_variance = 2.0;
  const SpectralDecomposition scaled = eigh(build_population(spec).matrix());
  EXPECT_NEAR(scaled.eigenvalues[0], 16.0, 1e-12);
  EXPECT_NEAR(scaled.eigenvalues[1], 8.0, 1e-12);
  EXPECT_NEAR(scaled.eigenvalues[4], 2.0, 1e-12);
}

TEST(BuildPopulation, ExplicitDirectionShapesTheMatrix) {
  const double h = std::sqrt(0.5);
  SpikeSpec spec;
  spec.dim = 2;
  spec.spikes = {{3.0, std::vector<double>{h, h}}};
  const CovarianceEstimate pop = build_population(spec);
  EXPECT_NEAR(pop(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(pop(1, 1), 2.0, 1e-12);
  EXPECT_NEAR(pop(0, 1), 1.0, 1e-12);
  const SpectralDecomposition d = eigh(pop.matrix());
  EXPECT_NEAR(d.eigenvalues[0], 3.0, 1e-12);
  EXPECT_NEAR(d.eigenvalues[1], 1.0, 1e-12);
}

TEST(BuildPopulation, ValidatesSpec) {
  SpikeSpec spec;
  spec.dim = 0;
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);

  spec.dim = 2;
  spec.base_variance = 0.0;
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);
  spec.base_variance = 1.0;

  spec.spikes = {{2.0, std::nullopt}, {2.0, std::nullopt}, {2.0, std::nullopt}};
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);  // more spikes than dims

  spec.spikes = {{1.0, std::nullopt}};
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);  // eigenvalue not above 1

  spec.spikes = {{2.0, std::vector<double>{1.0, 1.0}}};
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);  // not a unit vector

  spec.spikes = {{2.0, std::vector<double>{1.0}}};
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);  // wrong length

  spec.spikes = {{2.0, std::vector<double>{1.0, 0.0}},
                 {1.5, std::vector<double>{1.0, 0.0}}};
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);  // not orthogonal

  spec.spikes = {{2.0, std::vector<double>{1.0, 0.0}}, {1.5, std::nullopt}};
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);  // mixed direction styles

  spec.spikes.clear();
  spec.temporal_ar1 = 1.0;
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);
  spec.temporal_ar1 = -0.1;
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);
  spec.temporal_ar1 = 0.0;

  spec.distribution = Innovations::kStudentT;
  spec.student_t_dof = 2.0;
  EXPECT_EQ(spec_error(spec), ErrorCode::kInvalidSpec);
}

TEST(SamplePanel, DeterministicPerSeed) {
  SpikeSpec spec;
  spec.dim = 3;
  spec.spikes = {{4.0, std::nullopt}};
  const CovarianceEstimate pop = build_population(spec);
  const ReturnsPanel a = sample_panel(pop, 50, spec, 99);
  const ReturnsPanel b = sample_panel(pop, 50, spec, 99);
  const ReturnsPanel c = sample_panel(pop, 50, spec, 100);
  EXPECT_EQ(a.returns(), b.returns());
  EXPECT_NE(a.returns(), c.returns());
}

TEST(SamplePanel, LabelsAndShape) {
  SpikeSpec spec;
  spec.dim = 12;
  const CovarianceEstimate pop = build_population(spec);
  const ReturnsPanel panel = sample_panel(pop, 5, spec, 1);
  EXPECT_EQ(panel.n_assets(), 12u);
  EXPECT_EQ(panel.n_days(), 5u);
  EXPECT_EQ(panel.assets()[0], "A01");
  EXPECT_EQ(panel.assets()[9], "A10");
  EXPECT_EQ(panel.assets()[11], "A12");
  EXPECT_EQ(panel.dates()[0], "2014-01-01");
  EXPECT_EQ(panel.dates()[4], "2014-01-05");
}

TEST(SamplePanel, ValidatesArguments) {
  SpikeSpec spec;
  spec.dim = 3;
  const CovarianceEstimate pop = build_population(spec);
  try {
    sample_panel(pop, 1, spec, 1);
    FAIL() << "expected failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidSpec);
  }
  SpikeSpec other;
  other.dim = 4;
  try {
    sample_panel(pop, 10, other, 1);
    FAIL() << "expected failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(SamplePanel, GaussianMomentsMatchPopulation) {
  SpikeSpec spec;
  spec.dim = 4;
  spec.spikes = {{6.0, std::nullopt}};
  const CovarianceEstimate pop = build_population(spec);
  const std::size_t n = 20000;
  const ReturnsPanel panel = sample_panel(pop, n, spec, 2024);
  const CovarianceEstimate scm = sample_covariance(demean(panel).panel);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const double se = std::sqrt(
          (pop(i, i) * pop(j, j) + pop(i, j) * pop(i, j)) / static_cast<double>(n));
      EXPECT_NEAR(scm(i, j), pop(i, j), 5.0 * se) << "entry " << i << "," << j;
    }
  }
}

TEST(SamplePanel, StudentTVarianceIsNormalized) {
  SpikeSpec spec;
  spec.dim = 2;
  spec.distribution = Innovations::kStudentT;
  spec.student_t_dof = 8.0;
  const CovarianceEstimate pop = build_population(spec);
  const ReturnsPanel panel = sample_panel(pop, 20000, spec, 77);
  const CovarianceEstimate scm = sample_covariance(demean(panel).panel);
  // Excess kurtosis at dof 8 widens the variance estimator's spread; the
  // bound below is ~6 standard errors.
  EXPECT_NEAR(scm(0, 0), 1.0, 0.08);
  EXPECT_NEAR(scm(1, 1), 1.0, 0.08);
  EXPECT_NEAR(scm(0, 1), 0.0, 0.08);
}

TEST(SamplePanel, HeavyTailsStayDeterministic) {
  SpikeSpec spec;
  spec.dim = 2;
  spec.distribution = Innovations::kStudentT;
  spec.student_t_dof = 3.0;
  const CovarianceEstimate pop = build_population(spec);
  const ReturnsPanel a = sample_panel(pop, 200, spec, 5);
  const ReturnsPanel b = sample_panel(pop, 200, spec, 5);
  EXPECT_EQ(a.returns(), b.returns());
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t t = 0; t < 200; ++t)
      EXPECT_TRUE(std::isfinite(a.returns()(i, t)));
}

TEST(SamplePanel, Ar1InducesLagOneCorrelation) {
  SpikeSpec spec;
  spec.dim = 1;
  spec.temporal_ar1 = 0.6;
  const CovarianceEstimate pop = build_population(spec);
  const std::size_t n = 20000;
  const ReturnsPanel panel = sample_panel(pop, n, spec, 31);
  const auto row = panel.returns().row_span(0);
  const double mu = mean(row);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t + 1 < n; ++t)
    num += (row[t] - mu) * (row[t + 1] - mu);
  for (std::size_t t = 0; t < n; ++t) den += (row[t] - mu) * (row[t] - mu);
  EXPECT_NEAR(num / den, 0.6, 0.05);
  // The sqrt(1 - a^2) innovation scaling keeps the marginal variance at 1.
  EXPECT_NEAR(den / static_cast<double>(n), 1.0, 0.08);
}

TEST(SamplePanel, SpikedDirectionCarriesTheVariance) {
  const std::size_t m = 20;
  std::mt19937_64 dir_gen(606);
  SpikeSpec spec;
  spec.dim = m;
  spec.spikes = {{12.0, random_unit_vector(dir_gen, m)}};
  const CovarianceEstimate pop = build_population(spec);
  const std::size_t n = 8000;
  const ReturnsPanel panel = sample_panel(pop, n, spec, 99991);
  const CovarianceEstimate scm = sample_covariance(demean(panel).panel);
  const std::vector<double>& u = *spec.spikes[0].direction;
  const std::vector<double> su = mat_vec(scm.matrix().matrix(), u);
  EXPECT_NEAR(dot(u, su), 12.0, 1.2);  // within 10%
}

TEST(RandomDirections, OrthonormalByConstruction) {
  std::mt19937_64 gen(8);
  const auto dirs = random_orthonormal_directions(gen, 10, 4);
  ASSERT_EQ(dirs.size(), 4u);
  for (std::size_t a = 0; a < 4; ++a) {
    EXPECT_NEAR(dot(dirs[a], dirs[a]), 1.0, 1e-12);
    for (std::size_t b = a + 1; b < 4; ++b)
      EXPECT_NEAR(dot(dirs[a], dirs[b]), 0.0, 1e-12);
  }
  try {
    random_orthonormal_directions(gen, 3, 4);
    FAIL() << "expected failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidSpec);
  }
}

TEST(FrobeniusError, MatchesHandComputedDistance) {
  Matrix a(2, 2);
  a(0, 0) = 1.0; a(1, 1) = 2.0;
  Matrix b(2, 2);
  b(0, 0) = 1.0; b(1, 1) = 2.0;
  b(0, 1) = b(1, 0) = 3.0;
  const CovarianceEstimate ca(SymmetricMatrix(std::move(a)), EstimatorKind::kPopulation);
  const CovarianceEstimate cb(SymmetricMatrix(std::move(b)), EstimatorKind::kScm);
  EXPECT_EQ(frobenius_error(ca, ca), 0.0);
  EXPECT_DOUBLE_EQ(frobenius_error(ca, cb), std::sqrt(18.0));
  EXPECT_DOUBLE_EQ(frobenius_error(ca, cb), frobenius_error(cb, ca));
}

}  // namespace
}  // namespace covcraft
