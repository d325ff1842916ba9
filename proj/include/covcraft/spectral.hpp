#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/matrix.hpp"

namespace covcraft {

// Eigendecomposition of a symmetric matrix. Eigenvalues are sorted
// descending; eigenvector k is column k of `eigenvectors`. Sign convention:
// the largest-magnitude component of each eigenvector is positive (first
// index wins ties), which makes the decomposition reproducible bit for bit.
struct SpectralDecomposition {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) s += 2.0 * a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace detail

// Cyclic Jacobi rotations. Dependency-free and deterministic: fixed sweep
// order, convergence when the off-diagonal Frobenius norm drops below
// 1e-12 * ||A||_F, hard cap of 100 sweeps.
inline SpectralDecomposition eigh(const SymmetricMatrix& input) {
  const std::size_t n = input.dim();
  Matrix a = input.matrix();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = a(j, i) = v;
    }
  }
  Matrix v = Matrix::identity(n);

  const double norm_a = frobenius_norm(a);
  if (norm_a > 0.0) {
    const double tol = 1e-12 * norm_a;
    int sweep = 0;
    while (detail::off_diagonal_norm(a) >= tol) {
      if (sweep == 100)
        fail(ErrorCode::kNoConvergence, "jacobi eigensolver hit the 100-sweep cap");
      for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (apq == 0.0) continue;
          const double app = a(p, p);
          const double aqq = a(q, q);
          const double tau = (aqq - app) / (2.0 * apq);
          const double t = tau >= 0.0 ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                      : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = t * c;
          a(p, p) = app - t * apq;
          a(q, q) = aqq + t * apq;
          a(p, q) = a(q, p) = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            if (i == p || i == q) continue;
            const double aip = a(i, p);
            const double aiq = a(i, q);
            a(i, p) = a(p, i) = c * aip - s * aiq;
            a(i, q) = a(q, i) = s * aip + c * aiq;
          }
          for (std::size_t i = 0; i < n; ++i) {
            const double vip = v(i, p);
            const double viq = v(i, q);
            v(i, p) = c * vip - s * viq;
            v(i, q) = s * vip + c * viq;
          }
        }
      }
      ++sweep;
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SpectralDecomposition out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = a(src, src);
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::abs(v(i, src));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = sign * v(i, src);
  }
  return out;
}

// V diag(lambda) V^T with an exact symmetrization of the rounding residue.
inline SymmetricMatrix reconstruct(const SpectralDecomposition& d) {
  const std::size_t n = d.eigenvalues.size();
  if (d.eigenvectors.rows() != n || d.eigenvectors.cols() != n)
    fail(ErrorCode::kDimensionMismatch, "eigenvector matrix does not match eigenvalue count");
  Matrix b(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda = d.eigenvalues[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double w = lambda * d.eigenvectors(i, k);
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) b(i, j) += w * d.eigenvectors(j, k);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (b(i, j) + b(j, i));
      b(i, j) = b(j, i) = v;
    }
  }
  return SymmetricMatrix(std::move(b));
}

}  // namespace covcraft
