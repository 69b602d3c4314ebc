#pragma once

// Model building: the plain data-driven MLP, the multi-head shared-trunk
// variant, pseudoinverse-in-the-loop training (differentiating through
// assembly, the ridge solve, and the unrolled Picard iterations), and the
// single-instance physics-trained baseline. Plus the lambda grid search and
// zero-shot adapt-and-evaluate driver.
//
// Every trainer is deterministic given (seed, config, dataset): minibatches
// come from one seeded stream and per-instance gradients are reduced in
// sampling order.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pipinn/autodiff.hpp"
#include "pipinn/errors.hpp"
#include "pipinn/features.hpp"
#include "pipinn/pinv.hpp"
#include "pipinn/problems.hpp"
#include "pipinn/rng.hpp"
#include "pipinn/trunk.hpp"

namespace pipinn {

// ---------------------------------------------------------------------------
// Config and model containers
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-3;
  int steps = 2000;
  int batch_instances = 4;  // instances per pseudoinverse-in-the-loop step
  int batch_points = 0;     // points per data/physics step; 0 = full batch
  std::uint64_t seed = 0;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int picard_iters = 0;     // 0 = problem default
  double target_loss = 0.0; // single_pinn: stop when the physics loss falls below
  bool head_only = false;   // single_pinn: freeze the trunk, train the head alone

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("TrainConfig: lr must be > 0");
    if (steps < 1) throw ConfigError("TrainConfig: steps must be >= 1");
    if (batch_instances < 1) throw ConfigError("TrainConfig: batch_instances must be >= 1");
    if (batch_points < 0) throw ConfigError("TrainConfig: batch_points must be >= 0");
  }
};

struct LearnableWeights {
  double rho_pde = 0.0;
  double rho_pi = 0.0;

  static double softplus(double r) { return r > 30.0 ? r : std::log1p(std::exp(r)); }
  static double softplus_inv(double lam) {
    return lam > 30.0 ? lam : std::log(std::expm1(lam));
  }
  static double sigmoid(double r) { return 1.0 / (1.0 + std::exp(-r)); }

  double lambda_pde() const { return softplus(rho_pde); }
  double lambda_pi() const { return softplus(rho_pi); }

  static LearnableWeights init(double lambda_pde0 = 1.0, double lambda_pi0 = 1e-6) {
    LearnableWeights lw;
    lw.rho_pde = softplus_inv(lambda_pde0);
    lw.rho_pi = softplus_inv(lambda_pi0);
    return lw;
  }
};

enum class ModelKind { mlp, hydra, pil, single_pinn };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::mlp: return "mlp";
    case ModelKind::hydra: return "hydra";
    case ModelKind::pil: return "pil";
    case ModelKind::single_pinn: return "single_pinn";
  }
  return "?";
}

struct TraceRow {
  int step;
  double loss, lambda_pde, lambda_pi;
};

struct TrainedModel {
  ModelKind kind = ModelKind::mlp;
  std::string problem;
  NetConfig config;
  NetParams params;  // heads: 1 (mlp, single_pinn), K (hydra), 0 (pil)
  bool has_lw = false;
  LearnableWeights lw;
  std::vector<TraceRow> trace;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct Adam {
  double lr, b1, b2, eps;
  Vector m, v;
  long t = 0;

  Adam(std::size_t n, const TrainConfig& cfg)
      : lr(cfg.lr), b1(cfg.beta1), b2(cfg.beta2), eps(cfg.adam_eps), m(n, 0.0), v(n, 0.0) {}

  void step(Vector& x, const Vector& g) {
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

namespace detail {

inline void check_finite_loss(double loss, const char* who) {
  if (!std::isfinite(loss)) throw NonFiniteLoss(std::string(who) + ": loss is not finite");
}

// rank-1 accumulate: out (P x n) += a (P) * b (n)^T
inline void add_outer(const Vector& a, const Vector& b, Matrix& out) {
  if (out.empty()) out = Matrix(a.size(), b.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    double* row = out.row(i);
    for (std::size_t j = 0; j < b.size(); ++j) row[j] += ai * b[j];
  }
}

// out (m x n) += c * src[row_off .. row_off+m)
inline void add_scaled(Matrix& out, const Matrix& src, double c, std::size_t row_off) {
  if (out.empty()) throw DimensionMismatch("add_scaled: output not allocated");
  if (row_off + out.rows > src.rows) throw DimensionMismatch("add_scaled: source block out of range");
  for (std::size_t i = 0; i < out.rows; ++i) {
    double* o = out.row(i);
    const double* s = src.row(row_off + i);
    for (std::size_t j = 0; j < out.cols; ++j) o[j] += c * s[j];
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Differentiable pseudoinverse adaptation (one instance)
// ---------------------------------------------------------------------------

struct PilGrads {
  Vector trunk;          // flatten_trunk layout
  double rho_pde = 0.0;  // chain through softplus already applied
  double rho_pi = 0.0;
};

// Relative-MSE data loss of the adapted prediction, differentiated w.r.t. the
// trunk and the learnable weights. `scale` multiplies the loss and gradients
// (1/batch for minibatch means).
inline double pil_instance_loss_grad(const Problem& prob, const Collocation& col,
                                     const NetConfig& cfg, const NetParams& params,
                                     const InstanceTargets& tg, const Vector& theta,
                                     const Grid& ref, const LearnableWeights& lw,
                                     int picard_iters, AdaptConfig::PicardInit picard_init,
                                     double scale, PilGrads& grads) {
  const double lambda_pde = lw.lambda_pde();
  const double lambda_pi = lw.lambda_pi();

  FeatureBundle fb = build_features(prob, col, cfg, params, theta, /*want_trace=*/true);
  const FeatureSet& fs = fb.fs;

  AdaptConfig acfg;
  acfg.lambda_pde = lambda_pde;
  acfg.lambda_pi = lambda_pi;
  acfg.picard_iters = prob.linear ? 1 : picard_iters;
  acfg.picard_init = picard_init;

  const int iters = acfg.picard_iters;
  std::vector<Vector> w_hist(static_cast<std::size_t>(iters));
  std::vector<Vector> coeff_hist;  // Picard coefficients per iteration (nonlinear)
  std::vector<CholFactor> fact_hist(static_cast<std::size_t>(iters));

  Vector u_prev;
  if (!prob.linear) {
    u_prev.assign(fs.pde_v.rows, 0.0);
    if (picard_init == AdaptConfig::PicardInit::ic_extension) u_prev = tg.u0_pde;
  }
  for (int k = 0; k < iters; ++k) {
    if (!prob.linear) coeff_hist.push_back(u_prev);
    const AssembledSystem sys =
        assemble(prob, fs, tg, acfg, prob.linear ? nullptr : &u_prev);
    RidgeSolution sol = ridge_solve_keep(sys.x, sys.y, lambda_pi);
    if (!all_finite(sol.w))
      throw NonFiniteIteration("pil adaptation: non-finite head at iteration " + std::to_string(k + 1));
    if (!prob.linear && k + 1 < iters) u_prev = matvec(fs.pde_v, sol.w);
    w_hist[static_cast<std::size_t>(k)] = std::move(sol.w);
    fact_hist[static_cast<std::size_t>(k)] = std::move(sol.factor);
  }
  const Vector& w_final = w_hist.back();

  // loss = ||pred - ref||^2 / ||ref||^2
  Vector pred = matvec(fs.eval_v, w_final);
  double ref_sq = 0.0;
  for (double v : ref.v) ref_sq += v * v;
  if (ref_sq == 0.0) throw ZeroReference("pil adaptation: zero reference grid");
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - ref.v[i];
    loss += d * d;
  }
  loss /= ref_sq;
  detail::check_finite_loss(loss, "pil adaptation");

  // ---- reverse pass ----
  FeatureCotangents cot;
  cot.pde_v = Matrix(fs.pde_v.rows, fs.pde_v.cols, 0.0);

  Vector pred_bar(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    pred_bar[i] = scale * 2.0 * (pred[i] - ref.v[i]) / ref_sq;
  std::vector<Vector> w_bar(static_cast<std::size_t>(iters),
                            Vector(w_final.size(), 0.0));
  w_bar.back() = mat_t_vec(fs.eval_v, pred_bar);
  detail::add_outer(pred_bar, w_final, cot.eval_v);

  double lambda_pde_bar = 0.0, lambda_pi_bar = 0.0;
  const std::size_t np = fs.pde_v.rows, nb = fs.bc_v.rows;

  for (int k = iters - 1; k >= 0; --k) {
    const Vector* coeff = prob.linear ? nullptr : &coeff_hist[static_cast<std::size_t>(k)];
    const AssembledSystem sys = assemble(prob, fs, tg, acfg, coeff);
    const Vector& wk = w_hist[static_cast<std::size_t>(k)];
    const RidgeAdjoint adj = adjoint_ridge_solve(sys.x, sys.y, lambda_pi, wk,
                                                 w_bar[static_cast<std::size_t>(k)],
                                                 &fact_hist[static_cast<std::size_t>(k)]);
    lambda_pi_bar += adj.lambda_bar;

    // PDE block: X_pde = lambda_pde * R, y_pde = lambda_pde * h
    Matrix op;
    detail::operator_rows(prob, fs, tg, coeff, op);
    for (std::size_t r = 0; r < np; ++r) {
      const double* xb = adj.x_bar.row(r);
      const double* rr = op.row(r);
      double acc = 0.0;
      for (std::size_t j = 0; j < op.cols; ++j) acc += xb[j] * rr[j];
      lambda_pde_bar += acc + adj.y_bar[r] * tg.h_pde[r];
    }
    switch (prob.kind) {
      case ProblemKind::poisson:
        if (cot.pde_dxx.empty()) cot.pde_dxx = Matrix(np, fs.pde_v.cols, 0.0);
        detail::add_scaled(cot.pde_dxx, adj.x_bar, lambda_pde, 0);
        break;
      case ProblemKind::helmholtz:
        if (cot.pde_dxx.empty()) cot.pde_dxx = Matrix(np, fs.pde_v.cols, 0.0);
        if (cot.pde_dyy.empty()) cot.pde_dyy = Matrix(np, fs.pde_v.cols, 0.0);
        detail::add_scaled(cot.pde_dxx, adj.x_bar, lambda_pde, 0);
        detail::add_scaled(cot.pde_dyy, adj.x_bar, lambda_pde, 0);
        detail::add_scaled(cot.pde_v, adj.x_bar, lambda_pde, 0);
        break;
      case ProblemKind::burgers_sine:
      case ProblemKind::burgers_family: {
        if (cot.pde_dt.empty()) cot.pde_dt = Matrix(np, fs.pde_v.cols, 0.0);
        if (cot.pde_dx.empty()) cot.pde_dx = Matrix(np, fs.pde_v.cols, 0.0);
        if (cot.pde_dxx.empty()) cot.pde_dxx = Matrix(np, fs.pde_v.cols, 0.0);
        detail::add_scaled(cot.pde_dt, adj.x_bar, lambda_pde, 0);
        detail::add_scaled(cot.pde_dxx, adj.x_bar, -lambda_pde * tg.gamma, 0);
        Vector coeff_bar(np, 0.0);
        for (std::size_t r = 0; r < np; ++r) {
          const double c = (*coeff)[r];
          const double* xb = adj.x_bar.row(r);
          const double* dx = fs.pde_dx.row(r);
          double* ct = cot.pde_dx.row(r);
          double acc = 0.0;
          for (std::size_t j = 0; j < fs.pde_dx.cols; ++j) {
            ct[j] += lambda_pde * c * xb[j];
            acc += xb[j] * dx[j];
          }
          coeff_bar[r] = lambda_pde * acc;
        }
        // coefficient of iteration k is the previous head's prediction
        if (k > 0) {
          Vector& wprev_bar = w_bar[static_cast<std::size_t>(k - 1)];
          const Vector add = mat_t_vec(fs.pde_v, coeff_bar);
          for (std::size_t j = 0; j < add.size(); ++j) wprev_bar[j] += add[j];
          detail::add_outer(coeff_bar, w_hist[static_cast<std::size_t>(k - 1)], cot.pde_v);
        }
        break;
      }
    }

    // BC / IC blocks (fixed unit weights)
    if (nb > 0) {
      if (cot.bc_v.empty()) cot.bc_v = Matrix(nb, fs.bc_v.cols, 0.0);
      detail::add_scaled(cot.bc_v, adj.x_bar, acfg.lambda_bc, np);
      if (prob.bc_kind == BcKind::periodic) {
        if (cot.bc_pair_v.empty()) cot.bc_pair_v = Matrix(nb, fs.bc_v.cols, 0.0);
        detail::add_scaled(cot.bc_pair_v, adj.x_bar, -acfg.lambda_bc, np);
      }
    }
    if (fs.ic_v.rows > 0) {
      if (cot.ic_v.empty()) cot.ic_v = Matrix(fs.ic_v.rows, fs.ic_v.cols, 0.0);
      detail::add_scaled(cot.ic_v, adj.x_bar, acfg.lambda_ic, np + nb);
    }
  }

  if (grads.trunk.size() != params.trunk_param_count())
    grads.trunk.assign(params.trunk_param_count(), 0.0);
  features_vjp(cfg, params, fb, cot, grads.trunk);
  grads.rho_pde += lambda_pde_bar * LearnableWeights::sigmoid(lw.rho_pde);
  grads.rho_pi += lambda_pi_bar * LearnableWeights::sigmoid(lw.rho_pi);
  return loss * scale;
}

// ---------------------------------------------------------------------------
// Data-driven trainers
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                           std::size_t k) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(std::min(n, k));
  return idx;
}

}  // namespace detail

// Plain MLP on (x[,t|y], theta) -> u samples pooled over the seen instances.
inline TrainedModel train_mlp(const Problem& prob, const Dataset& ds,
                              const std::vector<std::size_t>& seen, const NetConfig& cfg,
                              const TrainConfig& tc, const NetParams* warm_start = nullptr) {
  tc.validate();
  if (seen.empty()) throw ConfigError("train_mlp: need at least one seen instance");
  if (cfg.variant != Variant::plain_mlp) throw ConfigError("train_mlp: config must be plain_mlp");

  const Matrix grid_pts = full_grid_points(prob);
  const std::size_t g = grid_pts.rows;
  Matrix inputs(seen.size() * g, static_cast<std::size_t>(cfg.input_dim));
  Vector targets(seen.size() * g);
  for (std::size_t s = 0; s < seen.size(); ++s) {
    const PdeInstance& inst = ds.instances[seen[s]];
    if (!inst.reference) throw ConfigError("train_mlp: seen instance lacks a reference grid");
    for (std::size_t r = 0; r < g; ++r) {
      double* row = inputs.row(s * g + r);
      for (std::size_t j = 0; j < grid_pts.cols; ++j) row[j] = grid_pts(r, j);
      for (std::size_t j = 0; j < inst.theta.size(); ++j) row[grid_pts.cols + j] = inst.theta[j];
      targets[s * g + r] = inst.reference->v[r];
    }
  }

  TrainedModel model;
  model.kind = ModelKind::mlp;
  model.problem = prob.name;
  model.config = cfg;
  model.params = warm_start ? *warm_start : init_params(cfg);
  if (model.params.heads.empty()) {
    Rng head_rng(split_seed(cfg.init_seed, 0x6ead));
    model.params.heads.push_back(make_head(cfg, head_rng));
  }

  const std::size_t n_trunk = model.params.trunk_param_count();
  const std::size_t width = static_cast<std::size_t>(cfg.embedding_width());
  Vector flat = flatten_trunk(model.params);
  flat.insert(flat.end(), model.params.heads[0].begin(), model.params.heads[0].end());
  Adam adam(flat.size(), tc);
  Rng rng(tc.seed);
  JetSpec value_only;
  value_only.input_dim = cfg.input_dim;

  const std::size_t total = inputs.rows;
  const std::size_t batch = tc.batch_points == 0
                                ? total
                                : std::min<std::size_t>(static_cast<std::size_t>(tc.batch_points), total);
  for (int step = 0; step < tc.steps; ++step) {
    std::vector<std::size_t> pick;
    if (batch == total) {
      pick.resize(total);
      std::iota(pick.begin(), pick.end(), std::size_t{0});
    } else {
      pick = detail::sample_without_replacement(rng, total, batch);
    }
    Matrix bx(pick.size(), inputs.cols);
    Vector bt(pick.size());
    for (std::size_t i = 0; i < pick.size(); ++i) {
      const double* src = inputs.row(pick[i]);
      double* dst = bx.row(i);
      for (std::size_t j = 0; j < inputs.cols; ++j) dst[j] = src[j];
      bt[i] = targets[pick[i]];
    }

    TrunkTrace trace;
    const SlotMats emb = trunk_jets(cfg, model.params, bx, value_only, &trace);
    const Vector& head = model.params.heads[0];
    Vector resid = matvec(emb.v, head);
    double loss = 0.0;
    for (std::size_t i = 0; i < resid.size(); ++i) {
      resid[i] -= bt[i];
      loss += resid[i] * resid[i];
    }
    loss /= static_cast<double>(resid.size());
    detail::check_finite_loss(loss, "train_mlp");

    Vector grad(flat.size(), 0.0);
    Vector pbar(resid.size());
    for (std::size_t i = 0; i < resid.size(); ++i)
      pbar[i] = 2.0 * resid[i] / static_cast<double>(resid.size());
    const Vector head_bar = mat_t_vec(emb.v, pbar);
    SlotMats ebar;
    detail::add_outer(pbar, head, ebar.v);
    Vector trunk_grad(n_trunk, 0.0);
    trunk_jets_vjp(cfg, model.params, trace, ebar, trunk_grad);
    std::copy(trunk_grad.begin(), trunk_grad.end(), grad.begin());
    std::copy(head_bar.begin(), head_bar.end(), grad.begin() + static_cast<std::ptrdiff_t>(n_trunk));

    adam.step(flat, grad);
    unflatten_trunk(Vector(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_trunk)),
                    model.params);
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(n_trunk), flat.end(),
              model.params.heads[0].begin());
    model.trace.push_back({step, loss, 0.0, 0.0});
    (void)width;
  }
  return model;
}

// Shared concat-skip trunk with one head per seen instance; the loss is the
// mean over instances of the per-instance MSE, so head gradients stay block
// separable.
inline TrainedModel train_hydra(const Problem& prob, const Dataset& ds,
                                const std::vector<std::size_t>& seen, const NetConfig& cfg,
                                const TrainConfig& tc, const NetParams* warm_start = nullptr) {
  tc.validate();
  if (seen.empty()) throw ConfigError("train_hydra: need at least one seen instance");
  if (cfg.variant != Variant::concat_skip)
    throw ConfigError("train_hydra: config must be concat_skip");

  const Matrix grid_pts = full_grid_points(prob);
  const std::size_t g = grid_pts.rows;
  const std::size_t kcount = seen.size();

  TrainedModel model;
  model.kind = ModelKind::hydra;
  model.problem = prob.name;
  model.config = cfg;
  model.params = warm_start ? *warm_start : init_params(cfg);
  if (model.params.heads.size() != kcount) {
    model.params.heads.clear();
    Rng head_rng(split_seed(cfg.init_seed, 0x6ead));
    for (std::size_t k = 0; k < kcount; ++k) model.params.heads.push_back(make_head(cfg, head_rng));
  }

  const std::size_t n_trunk = model.params.trunk_param_count();
  const std::size_t width = static_cast<std::size_t>(cfg.embedding_width());
  Vector flat = flatten_trunk(model.params);
  for (const Vector& h : model.params.heads) flat.insert(flat.end(), h.begin(), h.end());
  Adam adam(flat.size(), tc);
  Rng rng(tc.seed);
  JetSpec value_only;
  value_only.input_dim = cfg.input_dim;

  const std::size_t batch = tc.batch_points == 0
                                ? g
                                : std::min<std::size_t>(static_cast<std::size_t>(tc.batch_points), g);
  for (int step = 0; step < tc.steps; ++step) {
    std::vector<std::size_t> pick;
    if (batch == g) {
      pick.resize(g);
      std::iota(pick.begin(), pick.end(), std::size_t{0});
    } else {
      pick = detail::sample_without_replacement(rng, g, batch);
    }
    Matrix bx(pick.size(), grid_pts.cols);
    for (std::size_t i = 0; i < pick.size(); ++i) {
      const double* src = grid_pts.row(pick[i]);
      double* dst = bx.row(i);
      for (std::size_t j = 0; j < grid_pts.cols; ++j) dst[j] = src[j];
    }

    TrunkTrace trace;
    const SlotMats emb = trunk_jets(cfg, model.params, bx, value_only, &trace);
    double loss = 0.0;
    SlotMats ebar;
    ebar.v = Matrix(pick.size(), width, 0.0);
    Vector grad(flat.size(), 0.0);
    const double inv = 1.0 / (static_cast<double>(pick.size()) * static_cast<double>(kcount));
    for (std::size_t k = 0; k < kcount; ++k) {
      const Vector& head = model.params.heads[k];
      const Grid& ref = *ds.instances[seen[k]].reference;
      Vector resid = matvec(emb.v, head);
      for (std::size_t i = 0; i < pick.size(); ++i) resid[i] -= ref.v[pick[i]];
      double lk = 0.0;
      for (double r : resid) lk += r * r;
      loss += lk * inv;
      Vector pbar(resid.size());
      for (std::size_t i = 0; i < resid.size(); ++i) pbar[i] = 2.0 * resid[i] * inv;
      const Vector head_bar = mat_t_vec(emb.v, pbar);
      std::copy(head_bar.begin(), head_bar.end(),
                grad.begin() + static_cast<std::ptrdiff_t>(n_trunk + k * width));
      detail::add_outer(pbar, head, ebar.v);
    }
    detail::check_finite_loss(loss, "train_hydra");
    Vector trunk_grad(n_trunk, 0.0);
    trunk_jets_vjp(cfg, model.params, trace, ebar, trunk_grad);
    std::copy(trunk_grad.begin(), trunk_grad.end(), grad.begin());

    adam.step(flat, grad);
    unflatten_trunk(Vector(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_trunk)),
                    model.params);
    for (std::size_t k = 0; k < kcount; ++k)
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(n_trunk + k * width),
                flat.begin() + static_cast<std::ptrdiff_t>(n_trunk + (k + 1) * width),
                model.params.heads[k].begin());
    model.trace.push_back({step, loss, 0.0, 0.0});
  }
  return model;
}

// ---------------------------------------------------------------------------
// Pseudoinverse-in-the-loop training
// ---------------------------------------------------------------------------

inline TrainedModel train_pil(const Problem& prob, const Dataset& ds,
                              const std::vector<std::size_t>& seen, const NetConfig& cfg,
                              const TrainConfig& tc, const NetParams* warm_start = nullptr,
                              const LearnableWeights* lw_start = nullptr) {
  tc.validate();
  if (seen.empty()) throw ConfigError("train_pil: need at least one seen instance");
  if (cfg.variant != Variant::concat_skip) throw ConfigError("train_pil: config must be concat_skip");

  const Collocation col = collocation(prob);
  std::vector<InstanceTargets> targets;
  targets.reserve(seen.size());
  for (std::size_t id : seen) {
    if (!ds.instances[id].reference) throw ConfigError("train_pil: seen instance lacks a reference");
    targets.push_back(instance_targets(prob, col, ds.instances[id].theta));
  }
  const int picard = tc.picard_iters > 0 ? tc.picard_iters : prob.default_picard;

  TrainedModel model;
  model.kind = ModelKind::pil;
  model.problem = prob.name;
  model.config = cfg;
  model.params = warm_start ? *warm_start : init_params(cfg);
  model.params.heads.clear();
  model.has_lw = true;
  model.lw = lw_start ? *lw_start : LearnableWeights::init();

  const std::size_t n_trunk = model.params.trunk_param_count();
  Vector flat = flatten_trunk(model.params);
  flat.push_back(model.lw.rho_pde);
  flat.push_back(model.lw.rho_pi);
  Adam adam(flat.size(), tc);
  Rng rng(tc.seed);

  const std::size_t batch =
      std::min<std::size_t>(static_cast<std::size_t>(tc.batch_instances), seen.size());
  for (int step = 0; step < tc.steps; ++step) {
    const std::vector<std::size_t> pick =
        detail::sample_without_replacement(rng, seen.size(), batch);
    PilGrads grads;
    grads.trunk.assign(n_trunk, 0.0);
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(pick.size());
    for (std::size_t s : pick) {
      loss += pil_instance_loss_grad(prob, col, cfg, model.params, targets[s],
                                     ds.instances[seen[s]].theta, *ds.instances[seen[s]].reference,
                                     model.lw, picard, AdaptConfig::PicardInit::ic_extension, scale,
                                     grads);
    }
    detail::check_finite_loss(loss, "train_pil");

    Vector grad(flat.size(), 0.0);
    std::copy(grads.trunk.begin(), grads.trunk.end(), grad.begin());
    grad[n_trunk] = grads.rho_pde;
    grad[n_trunk + 1] = grads.rho_pi;
    adam.step(flat, grad);
    unflatten_trunk(Vector(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_trunk)),
                    model.params);
    model.lw.rho_pde = flat[n_trunk];
    model.lw.rho_pi = flat[n_trunk + 1];
    model.trace.push_back({step, loss, model.lw.lambda_pde(), model.lw.lambda_pi()});
  }
  return model;
}

// ---------------------------------------------------------------------------
// Single-instance physics-trained baseline
// ---------------------------------------------------------------------------

struct SinglePinnResult {
  TrainedModel model;
  double train_seconds = 0.0;
  int steps_run = 0;
  double final_loss = 0.0;
  // optional instrumentation: prediction error measured every eval_every
  // steps against a reference grid (never used by the optimizer)
  double final_rel_l2 = std::numeric_limits<double>::quiet_NaN();
};

struct SinglePinnStop {
  int eval_every = 0;  // 0 = never
  double stop_rel_l2 = 0.0;
  const Grid* reference = nullptr;
};

inline SinglePinnResult train_single_pinn(const Problem& prob, const PdeInstance& inst,
                                          const NetConfig& cfg, const TrainConfig& tc,
                                          const AdaptConfig& weights,
                                          const SinglePinnStop& stop = {},
                                          const NetParams* warm_start = nullptr) {
  tc.validate();
  weights.validate();
  const Collocation col = collocation(prob);
  const InstanceTargets tg = instance_targets(prob, col, inst.theta);

  SinglePinnResult out;
  TrainedModel& model = out.model;
  model.kind = ModelKind::single_pinn;
  model.problem = prob.name;
  model.config = cfg;
  model.params = warm_start ? *warm_start : init_params(cfg);
  if (model.params.heads.empty()) {
    Rng head_rng(split_seed(cfg.init_seed, 0x6ead));
    model.params.heads.push_back(make_head(cfg, head_rng));
  }

  const std::size_t n_trunk = model.params.trunk_param_count();
  const std::size_t width = static_cast<std::size_t>(cfg.embedding_width());
  Vector flat = flatten_trunk(model.params);
  flat.insert(flat.end(), model.params.heads[0].begin(), model.params.heads[0].end());
  Adam adam(flat.size(), tc);
  Rng rng(tc.seed);

  const double l2_pde = weights.lambda_pde * weights.lambda_pde;
  const double l2_bc = weights.lambda_bc * weights.lambda_bc;
  const double l2_ic = weights.lambda_ic * weights.lambda_ic;

  if (tc.head_only) {
    // frozen trunk: the physics objective is the same quadratic the ridge
    // solve minimizes, so plain gradient descent on the head must agree
    if (!prob.linear)
      throw ConfigError("train_single_pinn: head_only supports linear operators only");
    const FeatureBundle fb = build_features(prob, col, cfg, model.params, inst.theta);
    AdaptConfig acfg = weights;
    const AssembledSystem sys = assemble(prob, fb.fs, tg, acfg);
    const double inv_n = 1.0 / static_cast<double>(sys.x.rows);
    Vector& head = model.params.heads[0];
    Vector head_flat = head;
    Adam head_adam(head_flat.size(), tc);
    const auto t0 = std::chrono::steady_clock::now();
    for (int step = 0; step < tc.steps; ++step) {
      Vector r = matvec(sys.x, head_flat);
      double loss = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] -= sys.y[i];
        loss += r[i] * r[i];
      }
      loss *= inv_n;
      detail::check_finite_loss(loss, "train_single_pinn");
      Vector grad = mat_t_vec(sys.x, r);
      for (double& gv : grad) gv *= 2.0 * inv_n;
      head_adam.step(head_flat, grad);
      model.trace.push_back({step, loss, weights.lambda_pde, weights.lambda_pi});
      out.steps_run = step + 1;
      out.final_loss = loss;
      if (tc.target_loss > 0.0 && loss <= tc.target_loss) break;
    }
    head = head_flat;
    out.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

  const std::size_t np_all = col.pde.rows;
  const std::size_t batch = tc.batch_points == 0
                                ? np_all
                                : std::min<std::size_t>(static_cast<std::size_t>(tc.batch_points), np_all);
  const auto t_start = std::chrono::steady_clock::now();

  for (int step = 0; step < tc.steps; ++step) {
    std::vector<std::size_t> pick;
    if (batch == np_all) {
      pick.resize(np_all);
      std::iota(pick.begin(), pick.end(), std::size_t{0});
    } else {
      pick = detail::sample_without_replacement(rng, np_all, batch);
    }
    Collocation sub;
    sub.pde = Matrix(pick.size(), col.pde.cols);
    for (std::size_t i = 0; i < pick.size(); ++i)
      for (std::size_t j = 0; j < col.pde.cols; ++j) sub.pde(i, j) = col.pde(pick[i], j);
    sub.bc = col.bc;
    sub.bc_pair = col.bc_pair;
    sub.ic = col.ic;
    sub.eval = Matrix(0, col.pde.cols);

    FeatureBundle fb = build_features(prob, sub, cfg, model.params, inst.theta, true);
    const FeatureSet& fs = fb.fs;
    const Vector& head = model.params.heads[0];
    const double n_total = static_cast<double>(pick.size() + fs.bc_v.rows + fs.ic_v.rows);

    Vector head_bar(width, 0.0);
    FeatureCotangents cot;
    double loss = 0.0;

    {  // PDE residuals (genuine nonlinear term where applicable)
      Vector h_sub(pick.size());
      for (std::size_t i = 0; i < pick.size(); ++i) h_sub[i] = tg.h_pde[pick[i]];
      Vector r;
      Vector u, ux;
      if (prob.linear) {
        InstanceTargets tg_sub;
        tg_sub.h_pde = h_sub;
        Matrix op;
        detail::operator_rows(prob, fs, tg_sub, nullptr, op);
        r = matvec(op, head);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= h_sub[i];
        Vector rbar(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) {
          loss += l2_pde * r[i] * r[i] / n_total;
          rbar[i] = 2.0 * l2_pde * r[i] / n_total;
        }
        const Vector hb = mat_t_vec(op, rbar);
        for (std::size_t j = 0; j < width; ++j) head_bar[j] += hb[j];
        if (prob.kind == ProblemKind::poisson) {
          detail::add_outer(rbar, head, cot.pde_dxx);
        } else {  // helmholtz
          detail::add_outer(rbar, head, cot.pde_dxx);
          detail::add_outer(rbar, head, cot.pde_dyy);
          detail::add_outer(rbar, head, cot.pde_v);
        }
      } else {
        u = matvec(fs.pde_v, head);
        ux = matvec(fs.pde_dx, head);
        const Vector ut = matvec(fs.pde_dt, head);
        const Vector uxx = matvec(fs.pde_dxx, head);
        r.resize(pick.size());
        Vector rbar(pick.size());
        for (std::size_t i = 0; i < pick.size(); ++i) {
          r[i] = ut[i] + u[i] * ux[i] - tg.gamma * uxx[i] - h_sub[i];
          loss += l2_pde * r[i] * r[i] / n_total;
          rbar[i] = 2.0 * l2_pde * r[i] / n_total;
        }
        // d r / d head = dt + u * dx + ux * v - gamma * dxx
        for (std::size_t i = 0; i < pick.size(); ++i) {
          const double rb = rbar[i];
          const double* vt = fs.pde_dt.row(i);
          const double* vv = fs.pde_v.row(i);
          const double* vx = fs.pde_dx.row(i);
          const double* vxx = fs.pde_dxx.row(i);
          for (std::size_t j = 0; j < width; ++j)
            head_bar[j] += rb * (vt[j] + u[i] * vx[j] + ux[i] * vv[j] - tg.gamma * vxx[j]);
        }
        detail::add_outer(rbar, head, cot.pde_dt);
        Vector rbu(pick.size()), rbux(pick.size());
        for (std::size_t i = 0; i < pick.size(); ++i) {
          rbu[i] = rbar[i] * ux[i];   // dr/du contribution to value slot
          rbux[i] = rbar[i] * u[i];   // dr/dux contribution to dx slot
        }
        detail::add_outer(rbu, head, cot.pde_v);
        detail::add_outer(rbux, head, cot.pde_dx);
        Vector rbg(pick.size());
        for (std::size_t i = 0; i < pick.size(); ++i) rbg[i] = -tg.gamma * rbar[i];
        detail::add_outer(rbg, head, cot.pde_dxx);
      }
    }

    if (fs.bc_v.rows > 0) {
      Vector r = matvec(fs.bc_v, head);
      if (prob.bc_kind == BcKind::periodic) {
        const Vector rp = matvec(fs.bc_pair_v, head);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= rp[i];
      } else {
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= tg.g_bc[i];
      }
      Vector rbar(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) {
        loss += l2_bc * r[i] * r[i] / n_total;
        rbar[i] = 2.0 * l2_bc * r[i] / n_total;
      }
      Vector hb = mat_t_vec(fs.bc_v, rbar);
      if (prob.bc_kind == BcKind::periodic) {
        const Vector hb2 = mat_t_vec(fs.bc_pair_v, rbar);
        for (std::size_t j = 0; j < width; ++j) hb[j] -= hb2[j];
        Vector neg = rbar;
        for (double& v : neg) v = -v;
        detail::add_outer(neg, head, cot.bc_pair_v);
      }
      for (std::size_t j = 0; j < width; ++j) head_bar[j] += hb[j];
      detail::add_outer(rbar, head, cot.bc_v);
    }
    if (fs.ic_v.rows > 0) {
      Vector r = matvec(fs.ic_v, head);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= tg.u0_ic[i];
      Vector rbar(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) {
        loss += l2_ic * r[i] * r[i] / n_total;
        rbar[i] = 2.0 * l2_ic * r[i] / n_total;
      }
      const Vector hb = mat_t_vec(fs.ic_v, rbar);
      for (std::size_t j = 0; j < width; ++j) head_bar[j] += hb[j];
      detail::add_outer(rbar, head, cot.ic_v);
    }
    detail::check_finite_loss(loss, "train_single_pinn");

    Vector grad(flat.size(), 0.0);
    Vector trunk_grad(n_trunk, 0.0);
    features_vjp(cfg, model.params, fb, cot, trunk_grad);
    std::copy(trunk_grad.begin(), trunk_grad.end(), grad.begin());
    std::copy(head_bar.begin(), head_bar.end(), grad.begin() + static_cast<std::ptrdiff_t>(n_trunk));
    adam.step(flat, grad);
    unflatten_trunk(Vector(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_trunk)),
                    model.params);
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(n_trunk), flat.end(),
              model.params.heads[0].begin());
    model.trace.push_back({step, loss, weights.lambda_pde, weights.lambda_pi});
    out.steps_run = step + 1;
    out.final_loss = loss;

    if (tc.target_loss > 0.0 && loss <= tc.target_loss) break;
    if (stop.eval_every > 0 && stop.reference && (step + 1) % stop.eval_every == 0) {
      const FeatureBundle evb = build_features(prob, collocation(prob), cfg, model.params,
                                               inst.theta, false);
      const Grid pred = predict_grid(prob, evb.fs, model.params.heads[0]);
      out.final_rel_l2 = rel_l2(pred, *stop.reference);
      if (out.final_rel_l2 <= stop.stop_rel_l2) break;
    }
  }
  out.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

// ---------------------------------------------------------------------------
// Grid search and zero-shot evaluation
// ---------------------------------------------------------------------------

inline std::vector<double> default_lambda_pde_grid() {
  return {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
}

inline std::vector<double> default_lambda_pi_grid() {
  return {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
}

struct GridSearchItem {
  FeatureSet fs;
  InstanceTargets tg;
  const Grid* ref = nullptr;
};

// Mean seen-instance rel-L2 of the pseudoinverse adaptation per grid cell;
// argmin wins, ties break toward the larger lambda_pi. Failed factorizations
// score +inf.
inline AdaptConfig grid_search_cached(const Problem& prob, const std::vector<GridSearchItem>& items,
                                      const std::vector<double>& pde_grid,
                                      const std::vector<double>& pi_grid, int picard_iters = 0) {
  if (items.empty()) throw ConfigError("grid_search: need seen instances");
  if (pde_grid.empty() || pi_grid.empty()) throw ConfigError("grid_search: empty grid");
  AdaptConfig best;
  best.picard_iters = picard_iters > 0 ? picard_iters : prob.default_picard;
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double lp : pde_grid) {
    for (double li : pi_grid) {
      AdaptConfig cfg;
      cfg.lambda_pde = lp;
      cfg.lambda_pi = li;
      cfg.picard_iters = best.picard_iters;
      double score = 0.0;
      try {
        for (const GridSearchItem& c : items) {
          const AdaptedHead head = prob.linear ? adapt_linear(prob, c.fs, c.tg, cfg)
                                               : adapt_nonlinear(prob, c.fs, c.tg, cfg);
          score += rel_l2(predict_grid(prob, c.fs, head.w), *c.ref);
        }
        score /= static_cast<double>(items.size());
      } catch (const Error&) {
        score = std::numeric_limits<double>::infinity();
      }
      if (!std::isfinite(score)) continue;
      if (score < best_score || (score == best_score && li > best.lambda_pi)) {
        best_score = score;
        best.lambda_pde = lp;
        best.lambda_pi = li;
        found = true;
      }
    }
  }
  if (!found) throw NotPositiveDefinite("grid_search: every cell failed to factorize");
  return best;
}

inline AdaptConfig grid_search(const Problem& prob, const Dataset& ds,
                               const std::vector<std::size_t>& seen, const TrainedModel& model,
                               const std::vector<double>& pde_grid = default_lambda_pde_grid(),
                               const std::vector<double>& pi_grid = default_lambda_pi_grid(),
                               int picard_iters = 0) {
  const Collocation col = collocation(prob);
  std::vector<GridSearchItem> items;
  for (std::size_t id : seen) {
    GridSearchItem c;
    c.fs = build_features(prob, col, model.config, model.params, ds.instances[id].theta).fs;
    c.tg = instance_targets(prob, col, ds.instances[id].theta);
    if (!ds.instances[id].reference) throw ConfigError("grid_search: seen instance lacks reference");
    c.ref = &*ds.instances[id].reference;
    items.push_back(std::move(c));
  }
  return grid_search_cached(prob, items, pde_grid, pi_grid, picard_iters);
}

struct EvalRow {
  std::size_t instance_id = 0;
  bool seen = false;
  double rel_l2 = 0.0;
  double adapt_ms = 0.0;
};

enum class EvalMode { interpolate, adapt };

// Zero-shot evaluation: per instance, build features, adapt the head (or
// predict directly for the interpolating MLP), and score against the
// reference. The timer covers feature building + assembly + solve + grid
// prediction; references are touched only after the clock stops.
inline std::vector<EvalRow> adapt_and_eval(const Problem& prob, const Dataset& ds,
                                           const std::vector<std::size_t>& ids,
                                           const TrainedModel& model, const AdaptConfig& cfg,
                                           EvalMode mode,
                                           const std::vector<std::size_t>& seen_ids = {}) {
  const Collocation col = collocation(prob);
  std::vector<EvalRow> rows;
  rows.reserve(ids.size());
  for (std::size_t id : ids) {
    const PdeInstance& inst = ds.instances[id];
    EvalRow row;
    row.instance_id = id;
    row.seen = std::find(seen_ids.begin(), seen_ids.end(), id) != seen_ids.end();

    const auto t0 = std::chrono::steady_clock::now();
    Grid pred;
    if (mode == EvalMode::interpolate) {
      if (model.params.heads.empty()) throw ConfigError("adapt_and_eval: model has no head");
      const FeatureBundle fb = build_features(prob, col, model.config, model.params, inst.theta);
      pred = predict_grid(prob, fb.fs, model.params.heads[0]);
    } else {
      const FeatureBundle fb = build_features(prob, col, model.config, model.params, inst.theta);
      const InstanceTargets tg = instance_targets(prob, col, inst.theta);
      const AdaptedHead head = prob.linear ? adapt_linear(prob, fb.fs, tg, cfg)
                                           : adapt_nonlinear(prob, fb.fs, tg, cfg);
      pred = predict_grid(prob, fb.fs, head.w);
    }
    row.adapt_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    if (!inst.reference) throw ConfigError("adapt_and_eval: instance lacks a reference grid");
    row.rel_l2 = rel_l2(pred, *inst.reference);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pipinn
