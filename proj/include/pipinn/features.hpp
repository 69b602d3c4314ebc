#pragma once

// Builds FeatureSets from a trunk: jet slots at the PDE points, plain values
// at the BC/IC/eval points. For plain-MLP trunks the instance's task
// parameters are appended to every input point (they are known in the
// zero-shot setting); derivative directions keep referring to the spatial
// coordinates. When built with traces, features_vjp scatters feature-matrix
// cotangents back into trunk parameter gradients.

#include <utility>
#include <vector>

#include "pipinn/pinv.hpp"
#include "pipinn/problems.hpp"
#include "pipinn/trunk.hpp"

namespace pipinn {

// Network input bounds: spatial coordinates are mapped to [-1,1]; task
// parameters enter raw (identity bounds), matching the convention that the
// data-driven baseline sees theta exactly as sampled.
inline NetConfig problem_net_config(const Problem& prob, Variant variant, int hidden_layers,
                                    int nodes, double freq_factor, Activation activation,
                                    std::uint64_t seed, int theta_dim = -1) {
  NetConfig cfg;
  cfg.variant = variant;
  cfg.activation = activation;
  cfg.hidden_layers = hidden_layers;
  cfg.nodes = nodes;
  cfg.freq_factor = freq_factor;
  cfg.init_seed = seed;
  cfg.input_bounds = spatial_bounds(prob);
  if (variant == Variant::plain_mlp) {
    const int td = theta_dim >= 0 ? theta_dim : prob.theta_dim;
    for (int d = 0; d < td; ++d) cfg.input_bounds.emplace_back(-1.0, 1.0);
  }
  cfg.input_dim = static_cast<int>(cfg.input_bounds.size());
  cfg.validate();
  return cfg;
}

namespace detail {

inline Matrix augment_points(const Matrix& pts, const Vector& theta) {
  if (theta.empty()) return pts;
  Matrix out(pts.rows, pts.cols + theta.size());
  for (std::size_t r = 0; r < pts.rows; ++r) {
    double* o = out.row(r);
    const double* p = pts.row(r);
    for (std::size_t j = 0; j < pts.cols; ++j) o[j] = p[j];
    for (std::size_t j = 0; j < theta.size(); ++j) o[pts.cols + j] = theta[j];
  }
  return out;
}

struct SlotMap {
  int cx = -1, ct = -1;   // first-order channels for x and t/y
  int kxx = -1, kyy = -1; // second-order channels
};

inline SlotMap slot_map(const DirPlan& plan) {
  SlotMap m;
  for (int c = 0; c < plan.n_first; ++c) {
    if (plan.first_input[c] == 0) m.cx = c;
    if (plan.first_input[c] == 1) m.ct = c;
  }
  for (int k = 0; k < plan.n_second; ++k) {
    if (plan.first_input[plan.second_first[k]] == 0) m.kxx = k;
    if (plan.first_input[plan.second_first[k]] == 1) m.kyy = k;
  }
  return m;
}

}  // namespace detail

struct FeatureBundle {
  FeatureSet fs;
  // traces for the reverse pass (populated only when built with want_trace)
  TrunkTrace pde, bc, bc_pair, ic, eval;
  DirPlan pde_plan;
  bool has_trace = false;
};

inline FeatureBundle build_features(const Problem& prob, const Collocation& col,
                                    const NetConfig& cfg, const NetParams& params,
                                    const Vector& theta, bool want_trace = false) {
  const bool mlp = cfg.variant == Variant::plain_mlp;
  const Vector aug = mlp ? theta : Vector{};
  if (static_cast<int>(col.pde.cols + aug.size()) != cfg.input_dim)
    throw DimensionMismatch("build_features: input_dim mismatch");

  JetSpec pde_spec = jet_spec(prob);
  pde_spec.input_dim = cfg.input_dim;
  JetSpec value_only;
  value_only.input_dim = cfg.input_dim;

  FeatureBundle fb;
  fb.pde_plan = plan_dirs(pde_spec);
  fb.has_trace = want_trace;
  fb.fs.width = cfg.embedding_width();
  const detail::SlotMap sm = detail::slot_map(fb.pde_plan);

  {
    const Matrix pts = detail::augment_points(col.pde, aug);
    const SlotMats s = trunk_jets(cfg, params, pts, pde_spec, want_trace ? &fb.pde : nullptr);
    fb.fs.pde_v = s.v;
    if (sm.cx >= 0) fb.fs.pde_dx = s.a[sm.cx];
    if (sm.ct >= 0) fb.fs.pde_dt = s.a[sm.ct];
    if (sm.kxx >= 0) fb.fs.pde_dxx = s.s[sm.kxx];
    if (sm.kyy >= 0) fb.fs.pde_dyy = s.s[sm.kyy];
  }
  if (col.bc.rows > 0) {
    const Matrix pts = detail::augment_points(col.bc, aug);
    fb.fs.bc_v = trunk_jets(cfg, params, pts, value_only, want_trace ? &fb.bc : nullptr).v;
  }
  if (col.bc_pair.rows > 0) {
    const Matrix pts = detail::augment_points(col.bc_pair, aug);
    fb.fs.bc_pair_v =
        trunk_jets(cfg, params, pts, value_only, want_trace ? &fb.bc_pair : nullptr).v;
  }
  if (col.ic.rows > 0) {
    const Matrix pts = detail::augment_points(col.ic, aug);
    fb.fs.ic_v = trunk_jets(cfg, params, pts, value_only, want_trace ? &fb.ic : nullptr).v;
  }
  {
    const Matrix pts = detail::augment_points(col.eval, aug);
    fb.fs.eval_v = trunk_jets(cfg, params, pts, value_only, want_trace ? &fb.eval : nullptr).v;
  }
  return fb;
}

// Cotangents of the feature matrices; empty slots mean zero.
struct FeatureCotangents {
  Matrix pde_v, pde_dx, pde_dt, pde_dxx, pde_dyy;
  Matrix bc_v, bc_pair_v, ic_v, eval_v;
};

inline void features_vjp(const NetConfig& cfg, const NetParams& params, const FeatureBundle& fb,
                         const FeatureCotangents& cot, Vector& grad) {
  if (!fb.has_trace) throw DimensionMismatch("features_vjp: bundle built without traces");
  const detail::SlotMap sm = detail::slot_map(fb.pde_plan);
  {
    SlotMats ebar;
    ebar.v = cot.pde_v;
    if (sm.cx >= 0) ebar.a[sm.cx] = cot.pde_dx;
    if (sm.ct >= 0) ebar.a[sm.ct] = cot.pde_dt;
    if (sm.kxx >= 0) ebar.s[sm.kxx] = cot.pde_dxx;
    if (sm.kyy >= 0) ebar.s[sm.kyy] = cot.pde_dyy;
    trunk_jets_vjp(cfg, params, fb.pde, ebar, grad);
  }
  auto value_vjp = [&](const TrunkTrace& trace, const Matrix& vbar) {
    if (vbar.empty()) return;
    SlotMats ebar;
    ebar.v = vbar;
    trunk_jets_vjp(cfg, params, trace, ebar, grad);
  };
  value_vjp(fb.bc, cot.bc_v);
  value_vjp(fb.bc_pair, cot.bc_pair_v);
  value_vjp(fb.ic, cot.ic_v);
  value_vjp(fb.eval, cot.eval_v);
}

}  // namespace pipinn
