#include "covcraft/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/matrix.hpp"

namespace covcraft {
namespace {

SymmetricMatrix diag3(double a, double b, double c) {
  Matrix m(3, 3);
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  return SymmetricMatrix(m);
}

SymmetricMatrix random_symmetric(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto u = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = u();
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = u();
  }
  return SymmetricMatrix(m);
}

TEST(Eigh, DiagonalMatrixSortsDescending) {
  const SpectralDecomposition d = eigh(diag3(5.0, 2.0, -1.0));
  ASSERT_EQ(d.eigenvalues.size(), 3u);
  EXPECT_EQ(d.eigenvalues[0], 5.0);
  EXPECT_EQ(d.eigenvalues[1], 2.0);
  EXPECT_EQ(d.eigenvalues[2], -1.0);
  // Already diagonal: eigenvectors are signed unit columns.
  EXPECT_EQ(d.eigenvectors(0, 0), 1.0);
  EXPECT_EQ(d.eigenvectors(1, 1), 1.0);
  EXPECT_EQ(d.eigenvectors(2, 2), 1.0);
}

TEST(Eigh, TwoByTwoKnownPair) {
  Matrix m(2, 2);
  m(0, 0) = m(1, 1) = 2.0;
  m(0, 1) = m(1, 0) = 1.0;
  const SpectralDecomposition d = eigh(SymmetricMatrix(m));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(d.eigenvalues[0], 3.0, 1e-14);
  EXPECT_NEAR(d.eigenvalues[1], 1.0, 1e-14);
  EXPECT_NEAR(d.eigenvectors(0, 0), inv_sqrt2, 1e-14);
  EXPECT_NEAR(d.eigenvectors(1, 0), inv_sqrt2, 1e-14);
  // Sign convention: first of the tied max-magnitude entries is positive.
  EXPECT_NEAR(d.eigenvectors(0, 1), inv_sqrt2, 1e-14);
  EXPECT_NEAR(d.eigenvectors(1, 1), -inv_sqrt2, 1e-14);
}

TEST(Eigh, ThreeByThreeMatchesReference) {
  Matrix m(3, 3);
  m(0, 0) = 4.0; m(0, 1) = 1.0; m(0, 2) = 0.5;
  m(1, 0) = 1.0; m(1, 1) = 3.0; m(1, 2) = 0.25;
  m(2, 0) = 0.5; m(2, 1) = 0.25; m(2, 2) = 2.0;
  const SpectralDecomposition d = eigh(SymmetricMatrix(m));
  EXPECT_NEAR(d.eigenvalues[0], 4.731559415452212, 1e-12);
  EXPECT_NEAR(d.eigenvalues[1], 2.3867603743778876, 1e-12);
  EXPECT_NEAR(d.eigenvalues[2], 1.8816802101698977, 1e-12);
}

TEST(Eigh, ZeroMatrix) {
  const SpectralDecomposition d = eigh(SymmetricMatrix(Matrix(4, 4)));
  for (double v : d.eigenvalues) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(d.eigenvectors, Matrix::identity(4));
}

TEST(Eigh, ResidualAndOrthonormality) {
  const SymmetricMatrix a = random_symmetric(20, 7u);
  const SpectralDecomposition d = eigh(a);
  const std::size_t n = a.dim();
  const double scale = frobenius_norm(a.matrix());
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = d.eigenvectors(i, k);
    const std::vector<double> av = mat_vec(a.matrix(), v);
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(av[i], d.eigenvalues[k] * v[i], 1e-10 * scale);
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k; l < n; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        s += d.eigenvectors(i, k) * d.eigenvectors(i, l);
      EXPECT_NEAR(s, k == l ? 1.0 : 0.0, 1e-10);
    }
  }
  // Descending order and trace identity.
  for (std::size_t k = 1; k < n; ++k)
    EXPECT_GE(d.eigenvalues[k - 1], d.eigenvalues[k]);
  EXPECT_NEAR(kahan_sum(d.eigenvalues), trace(a.matrix()), 1e-12 * std::max(1.0, scale));
}

TEST(Eigh, SignConventionPositiveDominantEntry) {
  const SpectralDecomposition d = eigh(random_symmetric(9, 21u));
  for (std::size_t k = 0; k < 9; ++k) {
    double best = 0.0;
    for (std::size_t i = 0; i < 9; ++i)
      if (std::abs(d.eigenvectors(i, k)) > std::abs(best)) best = d.eigenvectors(i, k);
    EXPECT_GT(best, 0.0);
  }
}

TEST(Eigh, Deterministic) {
  const SymmetricMatrix a = random_symmetric(12, 99u);
  const SpectralDecomposition d1 = eigh(a);
  const SpectralDecomposition d2 = eigh(a);
  EXPECT_EQ(d1.eigenvalues, d2.eigenvalues);
  EXPECT_EQ(d1.eigenvectors, d2.eigenvectors);
}

TEST(Reconstruct, RoundTripsWithinTolerance) {
  const SymmetricMatrix a = random_symmetric(15, 3u);
  const SymmetricMatrix back = reconstruct(eigh(a));
  EXPECT_LE(frobenius_distance(a.matrix(), back.matrix()),
            1e-12 * std::max(1.0, frobenius_norm(a.matrix())));
}

TEST(Reconstruct, RejectsShapeMismatch) {
  SpectralDecomposition d{std::vector<double>(3, 1.0), Matrix(2, 2)};
  try {
    reconstruct(d);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

}  // namespace
}  // namespace covcraft
