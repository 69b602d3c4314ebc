#pragma once

// Closed-form head adaptation: stack the weighted PDE/BC/IC constraint rows
// into X w = y, solve the regularized normal equations, and for nonlinear
// operators iterate with the advection coefficient frozen at the previous
// iterate (Picard linearization, fixed iteration count, no damping).
//
// Assembly consumes a FeatureSet: per-feature values and the input-derivative
// slots the operator needs, evaluated at the collocation sets. Feature sets
// come from a trunk (features.hpp) or from hand-built bases in tests; this
// module never touches network internals.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pipinn/errors.hpp"
#include "pipinn/grid.hpp"
#include "pipinn/linalg.hpp"
#include "pipinn/problems.hpp"

namespace pipinn {

struct AdaptConfig {
  double lambda_pde = 1.0;
  double lambda_bc = 1.0;
  double lambda_ic = 1.0;
  double lambda_pi = 1e-6;
  int picard_iters = 1;
  enum class PicardInit { zero, ic_extension };
  PicardInit picard_init = PicardInit::ic_extension;

  void validate() const {
    if (!(lambda_pde > 0.0) || !(lambda_bc > 0.0) || !(lambda_ic > 0.0))
      throw ConfigError("AdaptConfig: constraint weights must be > 0");
    if (lambda_pi < 0.0) throw ConfigError("AdaptConfig: lambda_pi must be >= 0");
    if (picard_iters < 1) throw ConfigError("AdaptConfig: picard_iters must be >= 1");
  }
};

enum class RowTag { pde, bc, ic };

struct AssembledSystem {
  Matrix x;
  Vector y;
  std::vector<RowTag> row_tags;
};

struct AdaptedHead {
  Vector w;
  std::array<double, 3> residual_norms{};  // unweighted, indexed by RowTag
  std::vector<double> picard_history;      // ||w1||, then ||wk - wk-1||
};

// Per-feature values and input derivatives at the collocation sets. Only the
// slots a problem's operator consumes are populated.
struct FeatureSet {
  int width = 0;
  Matrix pde_v, pde_dx, pde_dt, pde_dxx, pde_dyy;
  Matrix bc_v, bc_pair_v;
  Matrix ic_v;
  Matrix eval_v;
};

// Instance data at the collocation sets (the instance stripped of any
// reference solution; adaptation cannot see labels by construction).
struct InstanceTargets {
  Vector h_pde;
  Vector g_bc;    // empty for periodic problems
  Vector u0_ic;
  Vector u0_pde;  // IC extended over the PDE set, for picard_init
  double gamma = 0.0;
};

inline InstanceTargets instance_targets(const Problem& prob, const Collocation& col,
                                        const Vector& theta) {
  InstanceTargets t;
  t.h_pde.resize(col.pde.rows);
  for (std::size_t r = 0; r < col.pde.rows; ++r) t.h_pde[r] = source_term(prob, theta, col.pde.row(r));
  if (prob.bc_kind == BcKind::dirichlet) {
    t.g_bc.resize(col.bc.rows);
    for (std::size_t r = 0; r < col.bc.rows; ++r) t.g_bc[r] = bc_value(prob, theta, col.bc.row(r));
  }
  if (col.ic.rows > 0) {
    t.u0_ic.resize(col.ic.rows);
    for (std::size_t r = 0; r < col.ic.rows; ++r) t.u0_ic[r] = ic_value(prob, theta, col.ic(r, 0));
    t.u0_pde.resize(col.pde.rows);
    for (std::size_t r = 0; r < col.pde.rows; ++r) t.u0_pde[r] = ic_value(prob, theta, col.pde(r, 0));
  }
  if (!prob.linear) t.gamma = viscosity(prob, theta);
  return t;
}

namespace detail {

// Unweighted PDE operator rows. For the Burgers operators the advection
// coefficient is frozen at coeff (one value per PDE point).
inline void operator_rows(const Problem& prob, const FeatureSet& fs, const InstanceTargets& tg,
                          const Vector* coeff, Matrix& out) {
  const std::size_t m = fs.pde_v.rows, n = static_cast<std::size_t>(fs.width);
  out = Matrix(m, n);
  switch (prob.kind) {
    case ProblemKind::poisson:
      for (std::size_t i = 0; i < m * n; ++i) out.a[i] = fs.pde_dxx.a[i];
      return;
    case ProblemKind::helmholtz:
      for (std::size_t i = 0; i < m * n; ++i)
        out.a[i] = fs.pde_dxx.a[i] + fs.pde_dyy.a[i] + fs.pde_v.a[i];
      return;
    case ProblemKind::burgers_sine:
    case ProblemKind::burgers_family: {
      if (!coeff) throw MissingLinearization("operator_rows: nonlinear operator needs current_u");
      if (coeff->size() != m) throw DimensionMismatch("operator_rows: coefficient length mismatch");
      const double gamma = tg.gamma;
      for (std::size_t r = 0; r < m; ++r) {
        const double c = (*coeff)[r];
        const double* dt = fs.pde_dt.row(r);
        const double* dx = fs.pde_dx.row(r);
        const double* dxx = fs.pde_dxx.row(r);
        double* o = out.row(r);
        for (std::size_t j = 0; j < n; ++j) o[j] = dt[j] + c * dx[j] - gamma * dxx[j];
      }
      return;
    }
  }
  throw ConfigError("operator_rows: unknown problem kind");
}

}  // namespace detail

inline AssembledSystem assemble(const Problem& prob, const FeatureSet& fs,
                                const InstanceTargets& tg, const AdaptConfig& cfg,
                                const Vector* current_u = nullptr) {
  cfg.validate();
  if (!prob.linear && !current_u)
    throw MissingLinearization("assemble: nonlinear operator requires current_u");
  const std::size_t np = fs.pde_v.rows, nb = fs.bc_v.rows, ni = fs.ic_v.rows;
  const std::size_t n = static_cast<std::size_t>(fs.width);

  Matrix op;
  detail::operator_rows(prob, fs, tg, current_u, op);

  AssembledSystem sys;
  sys.x = Matrix(np + nb + ni, n);
  sys.y.resize(np + nb + ni);
  sys.row_tags.resize(np + nb + ni);

  for (std::size_t r = 0; r < np; ++r) {
    const double* src = op.row(r);
    double* dst = sys.x.row(r);
    for (std::size_t j = 0; j < n; ++j) dst[j] = cfg.lambda_pde * src[j];
    sys.y[r] = cfg.lambda_pde * tg.h_pde[r];
    sys.row_tags[r] = RowTag::pde;
  }
  for (std::size_t r = 0; r < nb; ++r) {
    const double* src = fs.bc_v.row(r);
    double* dst = sys.x.row(np + r);
    if (prob.bc_kind == BcKind::periodic) {
      const double* pair = fs.bc_pair_v.row(r);
      for (std::size_t j = 0; j < n; ++j) dst[j] = cfg.lambda_bc * (src[j] - pair[j]);
      sys.y[np + r] = 0.0;
    } else {
      for (std::size_t j = 0; j < n; ++j) dst[j] = cfg.lambda_bc * src[j];
      sys.y[np + r] = cfg.lambda_bc * tg.g_bc[r];
    }
    sys.row_tags[np + r] = RowTag::bc;
  }
  for (std::size_t r = 0; r < ni; ++r) {
    const double* src = fs.ic_v.row(r);
    double* dst = sys.x.row(np + nb + r);
    for (std::size_t j = 0; j < n; ++j) dst[j] = cfg.lambda_ic * src[j];
    sys.y[np + nb + r] = cfg.lambda_ic * tg.u0_ic[r];
    sys.row_tags[np + nb + r] = RowTag::ic;
  }
  if (!all_finite(sys.x) || !all_finite(sys.y))
    throw NonFinite("assemble: non-finite entries in the constraint system");
  return sys;
}

// Unweighted L2 norms of the PDE/BC/IC violations of a given head. For the
// Burgers operators the reported PDE residual is the genuine nonlinear one,
// with the advecting velocity taken from the head's own prediction.
inline std::array<double, 3> residual_report(const Problem& prob, const FeatureSet& fs,
                                             const InstanceTargets& tg, const Vector& w) {
  std::array<double, 3> norms{};
  Vector coeff;
  const Vector* coeff_ptr = nullptr;
  if (!prob.linear) {
    coeff = matvec(fs.pde_v, w);
    coeff_ptr = &coeff;
  }
  Matrix op;
  detail::operator_rows(prob, fs, tg, coeff_ptr, op);
  {
    Vector r = matvec(op, w);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= tg.h_pde[i];
    norms[0] = norm2(r);
  }
  if (fs.bc_v.rows > 0) {
    Vector r = matvec(fs.bc_v, w);
    if (prob.bc_kind == BcKind::periodic) {
      const Vector rp = matvec(fs.bc_pair_v, w);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= rp[i];
    } else {
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= tg.g_bc[i];
    }
    norms[1] = norm2(r);
  }
  if (fs.ic_v.rows > 0) {
    Vector r = matvec(fs.ic_v, w);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= tg.u0_ic[i];
    norms[2] = norm2(r);
  }
  return norms;
}

inline AdaptedHead adapt_linear(const Problem& prob, const FeatureSet& fs,
                                const InstanceTargets& tg, const AdaptConfig& cfg) {
  if (!prob.linear) throw MissingLinearization("adapt_linear: operator is nonlinear");
  const AssembledSystem sys = assemble(prob, fs, tg, cfg);
  AdaptedHead head;
  head.w = ridge_solve(sys.x, sys.y, cfg.lambda_pi);
  head.picard_history = {norm2(head.w)};
  head.residual_norms = residual_report(prob, fs, tg, head.w);
  return head;
}

inline AdaptedHead adapt_nonlinear(const Problem& prob, const FeatureSet& fs,
                                   const InstanceTargets& tg, const AdaptConfig& cfg) {
  cfg.validate();
  Vector u_prev(fs.pde_v.rows, 0.0);
  if (cfg.picard_init == AdaptConfig::PicardInit::ic_extension) {
    if (tg.u0_pde.size() != fs.pde_v.rows)
      throw DimensionMismatch("adapt_nonlinear: u0 extension missing");
    u_prev = tg.u0_pde;
  }
  AdaptedHead head;
  Vector w_prev;
  for (int k = 1; k <= cfg.picard_iters; ++k) {
    const AssembledSystem sys = assemble(prob, fs, tg, cfg, &u_prev);
    Vector w = ridge_solve(sys.x, sys.y, cfg.lambda_pi);
    Vector u = matvec(fs.pde_v, w);
    if (!all_finite(u) || !all_finite(w))
      throw NonFiniteIteration("adapt_nonlinear: non-finite iterate at step " + std::to_string(k));
    if (k == 1) {
      head.picard_history.push_back(norm2(w));
    } else {
      Vector d = w;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= w_prev[i];
      head.picard_history.push_back(norm2(d));
    }
    w_prev = w;
    head.w = std::move(w);
    u_prev = std::move(u);
  }
  head.residual_norms = residual_report(prob, fs, tg, head.w);
  return head;
}

// Predictions over an evaluation point set laid out like the stored grid.
inline Grid predict_grid(const Problem& prob, const FeatureSet& fs, const Vector& w) {
  Grid g;
  g.n0 = prob.n0;
  g.n1 = prob.n1;
  g.v = matvec(fs.eval_v, w);
  return g;
}

}  // namespace pipinn
