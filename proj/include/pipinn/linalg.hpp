#pragma once

// Dense 64-bit linear algebra for the weighted constraint system:
// gram products X^T X, SPD Cholesky factorization, and the regularized
// normal-equations solve [lambda_pi I + X^T X] w = X^T y.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "pipinn/errors.hpp"

namespace pipinn {

inline constexpr double kPi = 3.14159265358979323846;

using Vector = std::vector<double>;

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  double* row(std::size_t i) { return a.data() + i * cols; }
  const double* row(std::size_t i) const { return a.data() + i * cols; }
  bool empty() const { return a.empty(); }
};

inline double dot(const Vector& x, const Vector& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const Vector& x) { return std::sqrt(dot(x, x)); }

inline void axpy(double a, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline bool all_finite(const Vector& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) {
  for (double v : m.a)
    if (!std::isfinite(v)) return false;
  return true;
}

// y = M x
inline Vector matvec(const Matrix& m, const Vector& x) {
  if (x.size() != m.cols) throw DimensionMismatch("matvec: x length != cols");
  Vector y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

// y = M^T x
inline Vector mat_t_vec(const Matrix& m, const Vector& x) {
  if (x.size() != m.rows) throw DimensionMismatch("mat_t_vec: x length != rows");
  Vector y(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    const double xi = x[i];
    for (std::size_t j = 0; j < m.cols; ++j) y[j] += xi * r[j];
  }
  return y;
}

// X^T X, cols x cols. The upper triangle is accumulated once (row-major rank-1
// updates, k outermost) and mirrored, which makes the result exactly symmetric;
// this coincides with averaging the (i,j)/(j,i) accumulations since both sum
// the same products in the same order.
inline Matrix gram(const Matrix& x) {
  if (x.empty()) throw DimensionMismatch("gram: empty matrix");
  const std::size_t n = x.cols;
  Matrix g(n, n, 0.0);
  for (std::size_t k = 0; k < x.rows; ++k) {
    const double* r = x.row(k);
    for (std::size_t i = 0; i < n; ++i) {
      const double ri = r[i];
      double* gi = g.row(i);
      for (std::size_t j = i; j < n; ++j) gi[j] += ri * r[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

// Lower-triangular Cholesky factor plus the smallest pivot seen before its
// square root was taken. The pivot floor is what grid searches inspect when
// lambda_pi is being raised.
struct CholFactor {
  Matrix l;
  double min_pivot = std::numeric_limits<double>::infinity();
};

inline CholFactor cholesky(const Matrix& a) {
  if (a.rows != a.cols) throw DimensionMismatch("cholesky: matrix not square");
  const std::size_t n = a.rows;
  CholFactor f;
  f.l = Matrix(n, n, 0.0);
  Matrix& l = f.l;
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j);
    const double* lj = l.row(j);
    for (std::size_t k = 0; k < j; ++k) pivot -= lj[k] * lj[k];
    if (!(pivot > 0.0)) {
      throw NotPositiveDefinite("cholesky: non-positive pivot " + std::to_string(pivot) +
                                " at column " + std::to_string(j));
    }
    if (pivot < f.min_pivot) f.min_pivot = pivot;
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    const double inv = 1.0 / ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      const double* li = l.row(i);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      l(i, j) = s * inv;
    }
  }
  return f;
}

// Solves L L^T x = b from a precomputed factor.
inline Vector chol_solve(const CholFactor& f, const Vector& b) {
  const Matrix& l = f.l;
  const std::size_t n = l.rows;
  if (b.size() != n) throw DimensionMismatch("chol_solve: rhs length mismatch");
  Vector x(b);
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    const double* li = l.row(i);
    for (std::size_t k = 0; k < i; ++k) s -= li[k] * x[k];
    x[i] = s / li[i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

// A x = b for symmetric positive definite A.
inline Vector spd_solve(const Matrix& a, const Vector& b) {
  return chol_solve(cholesky(a), b);
}

struct RidgeSolution {
  Vector w;
  CholFactor factor;  // factor of lambda_pi I + X^T X, reusable by the adjoint
};

// [lambda_pi I + X^T X] w = X^T y. The gram system is factored rather than the
// tall matrix itself; the cols x cols inversion is the smaller problem.
inline RidgeSolution ridge_solve_keep(const Matrix& x, const Vector& y, double lambda_pi) {
  if (y.size() != x.rows) throw DimensionMismatch("ridge_solve: y length != rows");
  if (lambda_pi < 0.0) throw DimensionMismatch("ridge_solve: lambda_pi must be >= 0");
  Matrix a = gram(x);
  for (std::size_t i = 0; i < a.rows; ++i) a(i, i) += lambda_pi;
  Vector rhs = mat_t_vec(x, y);
  RidgeSolution sol;
  sol.factor = cholesky(a);
  sol.w = chol_solve(sol.factor, rhs);
  return sol;
}

inline Vector ridge_solve(const Matrix& x, const Vector& y, double lambda_pi) {
  return ridge_solve_keep(x, y, lambda_pi).w;
}

}  // namespace pipinn
