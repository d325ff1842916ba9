#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "covcraft/errors.hpp"

namespace covcraft {

// Dense row-major matrix of doubles. Rows are contiguous so per-asset time
// series can be handed out as spans without copying.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row_span(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row_span(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Compensated summation (Neumaier variant): recovers terms cancelled by a
// larger addend, and keeps panel means accurate enough that demeaned rows
// test as zero-mean at 1e-14 of their magnitude.
inline double kahan_sum(std::span<const double> xs) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

inline double mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : kahan_sum(xs) / static_cast<double>(xs.size());
}

// Population variance (1/T normalization) about the sample mean.
inline double population_variance(std::span<const double> xs) {
  if (xs.empty()) fail(ErrorCode::kEmptyInput, "variance of an empty series");
  const double m = mean(xs);
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double d = (x - m) * (x - m);
    const double y = d - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(xs.size());
}

inline double max_abs(std::span<const double> xs) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, std::abs(x));
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data()) s += x * x;
  return std::sqrt(s);
}

// Frobenius distance between two equally sized matrices, compensated.
inline double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorCode::kDimensionMismatch, "frobenius distance needs matching shapes");
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    const double y = d * d - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return std::sqrt(sum);
}

inline double trace(const Matrix& m) {
  double s = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) {
    const double y = m(i, i) - comp;
    const double t = s + y;
    comp = (t - s) - y;
    s = t;
  }
  return s;
}

// y = m * x for a square or rectangular m.
inline void mat_vec(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row_span(i), x);
}

inline std::vector<double> mat_vec(const Matrix& m, std::span<const double> x) {
  std::vector<double> y(m.rows());
  mat_vec(m, x, y);
  return y;
}

// Square matrix with |a_ij - a_ji| <= 1e-12 * max(1, |a_ij|) enforced at
// construction. Off-pair entries are kept as given, not averaged.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols())
      fail(ErrorCode::kNotSymmetric, "matrix is not square");
    for (std::size_t i = 0; i < m_.rows(); ++i) {
      for (std::size_t j = i + 1; j < m_.cols(); ++j) {
        const double d = std::abs(m_(i, j) - m_(j, i));
        if (d > 1e-12 * std::max(1.0, std::abs(m_(i, j))))
          fail(ErrorCode::kNotSymmetric, "asymmetric entry at (" + std::to_string(i) +
                                             "," + std::to_string(j) + ")");
      }
    }
  }

  std::size_t dim() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_;
};

}  // namespace covcraft
