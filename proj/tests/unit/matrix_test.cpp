#include "covcraft/matrix.hpp"

#include <gtest/gtest.h>

#include <vector>

#include "covcraft/errors.hpp"

namespace covcraft {
namespace {

TEST(KahanSum, RecoversCancelledTerm) {
  const std::vector<double> xs{1e16, 1.0, -1e16};
  EXPECT_EQ(kahan_sum(xs), 1.0);
}

TEST(KahanSum, EmptyIsZero) {
  EXPECT_EQ(kahan_sum(std::vector<double>{}), 0.0);
}

TEST(Mean, SmallSeries) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 6.0};
  EXPECT_DOUBLE_EQ(mean(xs), 3.0);
}

TEST(PopulationVariance, UsesOneOverT) {
  const std::vector<double> xs{-1.0, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(population_variance(xs), 2.0 / 3.0);
}

TEST(PopulationVariance, ConstantSeriesIsZero) {
  const std::vector<double> xs{0.25, 0.25, 0.25, 0.25};
  EXPECT_EQ(population_variance(xs), 0.0);
}

TEST(PopulationVariance, EmptyThrows) {
  try {
    population_variance(std::vector<double>{});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

TEST(MatrixBasics, IdentityAndAccess) {
  const Matrix id = Matrix::identity(3);
  EXPECT_EQ(id(0, 0), 1.0);
  EXPECT_EQ(id(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(frobenius_norm(Matrix::identity(4)), 2.0);
  EXPECT_DOUBLE_EQ(trace(id), 3.0);
}

TEST(MatrixBasics, MatVec) {
  Matrix m(2, 3);
  m(0, 0) = 1.0; m(0, 1) = 2.0; m(0, 2) = 3.0;
  m(1, 0) = -1.0; m(1, 1) = 0.0; m(1, 2) = 1.0;
  const std::vector<double> x{1.0, 1.0, 1.0};
  const std::vector<double> y = mat_vec(m, x);
  EXPECT_DOUBLE_EQ(y[0], 6.0);
  EXPECT_DOUBLE_EQ(y[1], 0.0);
}

TEST(FrobeniusDistance, KnownValue) {
  Matrix a(2, 2);
  a(0, 0) = 1.0; a(1, 1) = 1.0;
  Matrix b(2, 2);
  b(0, 0) = 4.0; b(1, 1) = 5.0;
  EXPECT_DOUBLE_EQ(frobenius_distance(a, b), 5.0);
}

TEST(FrobeniusDistance, ShapeMismatchThrows) {
  try {
    frobenius_distance(Matrix(2, 2), Matrix(3, 3));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(SymmetricMatrix, AcceptsSymmetric) {
  Matrix m(2, 2);
  m(0, 0) = 2.0; m(0, 1) = m(1, 0) = 0.5; m(1, 1) = 3.0;
  const SymmetricMatrix sym(m);
  EXPECT_EQ(sym.dim(), 2u);
  EXPECT_EQ(sym(0, 1), 0.5);
}

TEST(SymmetricMatrix, ToleratesRoundingLevelAsymmetry) {
  Matrix m(2, 2);
  m(0, 0) = 1.0; m(1, 1) = 1.0;
  m(0, 1) = 0.5;
  m(1, 0) = 0.5 + 2e-13;  // inside the 1e-12 * max(1, |a|) budget
  EXPECT_NO_THROW(SymmetricMatrix{m});
}

TEST(SymmetricMatrix, RejectsAsymmetry) {
  Matrix m(2, 2);
  m(0, 0) = 1.0; m(1, 1) = 1.0;
  m(0, 1) = 0.5;
  m(1, 0) = 0.5001;
  try {
    SymmetricMatrix sym(m);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotSymmetric);
  }
}

TEST(SymmetricMatrix, RejectsNonSquare) {
  try {
    SymmetricMatrix sym(Matrix{2, 3});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotSymmetric);
  }
}

}  // namespace
}  // namespace covcraft
