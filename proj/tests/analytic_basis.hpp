#pragma once

// Hand-built feature bases with closed-form derivatives, used to exercise the
// assembly/adaptation path independently of any network trunk.

#include <cmath>
#include <functional>
#include <vector>

#include "pipinn/pinv.hpp"
#include "pipinn/problems.hpp"

namespace testbasis {

using pipinn::Collocation;
using pipinn::FeatureSet;
using pipinn::Matrix;
using pipinn::Problem;

struct BasisFn {
  std::function<double(const double*)> v;
  std::function<double(const double*)> dx;
  std::function<double(const double*)> dt;   // or d/dy
  std::function<double(const double*)> dxx;
  std::function<double(const double*)> dyy;
};

inline FeatureSet analytic_features(const Problem& prob, const Collocation& col,
                                    const std::vector<BasisFn>& basis) {
  FeatureSet fs;
  fs.width = static_cast<int>(basis.size());
  auto fill = [&](const Matrix& pts, Matrix& out,
                  std::function<double(const BasisFn&, const double*)> pick) {
    if (pts.rows == 0) return;
    out = Matrix(pts.rows, basis.size());
    for (std::size_t r = 0; r < pts.rows; ++r)
      for (std::size_t j = 0; j < basis.size(); ++j) out(r, j) = pick(basis[j], pts.row(r));
  };
  fill(col.pde, fs.pde_v, [](const BasisFn& b, const double* p) { return b.v(p); });
  if (basis[0].dx) fill(col.pde, fs.pde_dx, [](const BasisFn& b, const double* p) { return b.dx(p); });
  if (basis[0].dt) fill(col.pde, fs.pde_dt, [](const BasisFn& b, const double* p) { return b.dt(p); });
  if (basis[0].dxx)
    fill(col.pde, fs.pde_dxx, [](const BasisFn& b, const double* p) { return b.dxx(p); });
  if (basis[0].dyy)
    fill(col.pde, fs.pde_dyy, [](const BasisFn& b, const double* p) { return b.dyy(p); });
  fill(col.bc, fs.bc_v, [](const BasisFn& b, const double* p) { return b.v(p); });
  fill(col.bc_pair, fs.bc_pair_v, [](const BasisFn& b, const double* p) { return b.v(p); });
  fill(col.ic, fs.ic_v, [](const BasisFn& b, const double* p) { return b.v(p); });
  fill(col.eval, fs.eval_v, [](const BasisFn& b, const double* p) { return b.v(p); });
  return fs;
}

// {sin(w1 x), sin(w2 x), x, 1}: contains every term of the Poisson family's
// exact solutions.
inline std::vector<BasisFn> poisson_span_basis(double w1, double w2) {
  std::vector<BasisFn> basis;
  auto sine = [](double w) {
    BasisFn b;
    b.v = [w](const double* p) { return std::sin(w * p[0]); };
    b.dxx = [w](const double* p) { return -w * w * std::sin(w * p[0]); };
    return b;
  };
  basis.push_back(sine(w1));
  basis.push_back(sine(w2));
  BasisFn lin;
  lin.v = [](const double* p) { return p[0]; };
  lin.dxx = [](const double*) { return 0.0; };
  basis.push_back(lin);
  BasisFn one;
  one.v = [](const double*) { return 1.0; };
  one.dxx = [](const double*) { return 0.0; };
  basis.push_back(one);
  return basis;
}

// sin(k pi x) * T_m(2t - 1): rich enough that Picard iterations on the
// sine-IC Burgers problem converge well below percent level.
inline std::vector<BasisFn> burgers_sine_chebyshev_basis(int k_modes = 16, int m_profiles = 8) {
  std::vector<BasisFn> basis;
  for (int k = 1; k <= k_modes; ++k) {
    for (int m = 0; m <= m_profiles; ++m) {
      const double kw = k * pipinn::kPi;
      auto cheb = [m](double t, double& T, double& dT) {
        const double tau = 2.0 * t - 1.0;
        double t0 = 1.0, t1 = tau, d0 = 0.0, d1 = 1.0;
        if (m == 0) {
          T = 1.0;
          dT = 0.0;
          return;
        }
        for (int q = 2; q <= m; ++q) {
          const double t2 = 2.0 * tau * t1 - t0;
          const double d2 = 2.0 * t1 + 2.0 * tau * d1 - d0;
          t0 = t1;
          t1 = t2;
          d0 = d1;
          d1 = d2;
        }
        T = t1;
        dT = 2.0 * d1;  // chain rule through tau = 2t - 1
      };
      BasisFn b;
      b.v = [kw, cheb](const double* p) {
        double T, dT;
        cheb(p[1], T, dT);
        return std::sin(kw * p[0]) * T;
      };
      b.dx = [kw, cheb](const double* p) {
        double T, dT;
        cheb(p[1], T, dT);
        return kw * std::cos(kw * p[0]) * T;
      };
      b.dt = [kw, cheb](const double* p) {
        double T, dT;
        cheb(p[1], T, dT);
        return std::sin(kw * p[0]) * dT;
      };
      b.dxx = [kw, cheb](const double* p) {
        double T, dT;
        cheb(p[1], T, dT);
        return -kw * kw * std::sin(kw * p[0]) * T;
      };
      basis.push_back(b);
    }
  }
  return basis;
}

}  // namespace testbasis
