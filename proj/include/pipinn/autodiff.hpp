#pragma once

// Reverse-mode pieces that sit on top of the trunk jet engine: the parameter
// gradient container and implicit differentiation of the ridge solve.

#include <cstddef>
#include <vector>

#include "pipinn/errors.hpp"
#include "pipinn/linalg.hpp"
#include "pipinn/trunk.hpp"

namespace pipinn {

// Per-parameter gradient aligned with flatten_trunk (plus any auxiliary
// learnable scalars a trainer appends).
struct GradReport {
  Vector values;
};

struct RidgeAdjoint {
  Matrix x_bar;
  Vector y_bar;
  double lambda_bar = 0.0;
};

// With A = lambda_pi I + X^T X and s = A^{-1} w_bar:
//   y_bar = X s,  lambda_bar = -s.w,  X_bar = (y - X w) s^T - (X s) w^T.
inline RidgeAdjoint adjoint_ridge_solve(const Matrix& x, const Vector& y, double lambda_pi,
                                        const Vector& w, const Vector& w_bar,
                                        const CholFactor* factor = nullptr) {
  if (y.size() != x.rows) throw DimensionMismatch("adjoint_ridge_solve: y length != rows");
  if (w.size() != x.cols || w_bar.size() != x.cols)
    throw DimensionMismatch("adjoint_ridge_solve: w length != cols");

  Vector s;
  if (factor) {
    s = chol_solve(*factor, w_bar);
  } else {
    Matrix a = gram(x);
    for (std::size_t i = 0; i < a.rows; ++i) a(i, i) += lambda_pi;
    s = spd_solve(a, w_bar);
  }

  RidgeAdjoint adj;
  adj.y_bar = matvec(x, s);
  adj.lambda_bar = -dot(s, w);
  const Vector xw = matvec(x, w);
  adj.x_bar = Matrix(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double ri = y[i] - xw[i];
    const double qi = adj.y_bar[i];
    double* xb = adj.x_bar.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) xb[j] = ri * s[j] - qi * w[j];
  }
  return adj;
}

}  // namespace pipinn
