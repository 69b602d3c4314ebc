#pragma once

// The trunk evaluation engine. A forward pass propagates jets: each slot next
// to the value carries a first or diagonal-second input derivative,
//     value:  x = f(z)
//     first:  x_d = f'(z) z_d
//     second: x_dd = f'(z) z_dd + f''(z) z_d^2
// batched over collocation points as P x n matrices per slot. Plain embedding
// evaluation is the value slot of the same kernel, so the primal is identical
// bit for bit whether or not derivatives ride along. trunk_jets_vjp reverse-
// accumulates exact parameter gradients over the augmented pass.

#include <cmath>
#include <cstddef>
#include <vector>

#include "pipinn/errors.hpp"
#include "pipinn/jet.hpp"
#include "pipinn/linalg.hpp"
#include "pipinn/network.hpp"

namespace pipinn {

// ---------------------------------------------------------------------------
// Derivative channel bookkeeping
// ---------------------------------------------------------------------------

struct DirPlan {
  int n_first = 0;            // internal first-order channels
  int n_second = 0;           // diagonal second-order channels
  int first_input[2] = {-1, -1};   // input coordinate per first channel
  int second_first[2] = {-1, -1};  // first channel each second channel rides on
  int spec_first[2] = {-1, -1};    // JetSpec first_dirs -> channel
  int spec_second[2] = {-1, -1};   // JetSpec second_dirs -> second channel
};

inline DirPlan plan_dirs(const JetSpec& spec) {
  spec.validate();
  DirPlan plan;
  auto first_channel = [&](int input) {
    for (int c = 0; c < plan.n_first; ++c)
      if (plan.first_input[c] == input) return c;
    if (plan.n_first == 2) throw DimensionMismatch("jet plan: more than two first directions");
    plan.first_input[plan.n_first] = input;
    return plan.n_first++;
  };
  for (std::size_t i = 0; i < spec.first_dirs.size(); ++i)
    plan.spec_first[i] = first_channel(spec.first_dirs[i]);
  for (std::size_t i = 0; i < spec.second_dirs.size(); ++i) {
    const int c = first_channel(spec.second_dirs[i]);
    int k = -1;
    for (int q = 0; q < plan.n_second; ++q)
      if (plan.second_first[q] == c) k = q;
    if (k < 0) {
      k = plan.n_second++;
      plan.second_first[k] = c;
    }
    plan.spec_second[i] = k;
  }
  return plan;
}

struct SlotMats {
  Matrix v;
  Matrix a[2];
  Matrix s[2];
};

struct TrunkTrace {
  DirPlan plan;
  SlotMats input;              // seeded (normalized) inputs, P x input_dim
  std::vector<SlotMats> z;     // pre-activations per layer, P x n
  std::vector<SlotMats> x;     // activations per layer, P x n
};

// ---------------------------------------------------------------------------
// Batched linear-layer kernels (accumulation order fixed: bias, then ascending
// input index, so the value slot reproduces embed() exactly)
// ---------------------------------------------------------------------------

namespace detail {

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

// z (P x n) = [bias] + x (P x fan) * wt (fan x n)
inline void linear_forward(const Matrix& x, const Matrix& wt, const Vector* bias, Matrix& z) {
  const std::size_t p_count = x.rows, fan = x.cols, n = wt.cols;
  z = Matrix(p_count, n);
  for (std::size_t p = 0; p < p_count; ++p) {
    double* zp = z.row(p);
    if (bias)
      for (std::size_t o = 0; o < n; ++o) zp[o] = (*bias)[o];
    const double* xp = x.row(p);
    for (std::size_t j = 0; j < fan; ++j) {
      const double xj = xp[j];
      const double* wj = wt.row(j);
      for (std::size_t o = 0; o < n; ++o) zp[o] += xj * wj[o];
    }
  }
}

// wbar (n x fan) += zbar^T * xin
inline void accumulate_wbar(const Matrix& zbar, const Matrix& xin, Matrix& wbar) {
  for (std::size_t p = 0; p < zbar.rows; ++p) {
    const double* zp = zbar.row(p);
    const double* xp = xin.row(p);
    for (std::size_t o = 0; o < zbar.cols; ++o) {
      const double zo = zp[o];
      if (zo == 0.0) continue;
      double* wo = wbar.row(o);
      for (std::size_t j = 0; j < xin.cols; ++j) wo[j] += zo * xp[j];
    }
  }
}

// xbar (P x fan) += zbar (P x n) * w (n x fan)
inline void accumulate_xbar(const Matrix& zbar, const Matrix& w, Matrix& xbar) {
  for (std::size_t p = 0; p < zbar.rows; ++p) {
    const double* zp = zbar.row(p);
    double* xp = xbar.row(p);
    for (std::size_t o = 0; o < zbar.cols; ++o) {
      const double zo = zp[o];
      if (zo == 0.0) continue;
      const double* wo = w.row(o);
      for (std::size_t j = 0; j < w.cols; ++j) xp[j] += zo * wo[j];
    }
  }
}

inline void scale_in_place(Matrix& m, double c) {
  for (double& v : m.a) v *= c;
}

struct ActDerivs {
  double f, f1, f2, f3;  // value and first three derivatives at z
};

inline ActDerivs act_derivs(Activation act, double z) {
  switch (act) {
    case Activation::sine: {
      const double s = std::sin(z), c = std::cos(z);
      return {s, c, -s, -c};
    }
    case Activation::tanh: {
      const double t = std::tanh(z);
      const double d = 1.0 - t * t;
      return {t, d, -2.0 * t * d, -2.0 * d * (1.0 - 3.0 * t * t)};
    }
  }
  throw UnsupportedOperator("activation without registered derivative rules");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward jet propagation
// ---------------------------------------------------------------------------

inline SlotMats trunk_jets(const NetConfig& cfg, const NetParams& params, const Matrix& pts,
                           const JetSpec& spec, TrunkTrace* trace = nullptr) {
  cfg.validate();
  if (static_cast<int>(pts.cols) != cfg.input_dim)
    throw DimensionMismatch("trunk_jets: point dimension != input_dim");
  if (spec.input_dim != cfg.input_dim)
    throw DimensionMismatch("trunk_jets: JetSpec input_dim mismatch");
  const DirPlan plan = plan_dirs(spec);
  const std::size_t p_count = pts.rows;
  const std::size_t n = static_cast<std::size_t>(cfg.nodes);
  const std::size_t h = static_cast<std::size_t>(cfg.hidden_layers);

  // seed normalized inputs: value slot holds coordinates, first slots hold the
  // chain-rule factor of the affine normalization, second slots are zero
  SlotMats in;
  in.v = Matrix(p_count, static_cast<std::size_t>(cfg.input_dim));
  for (int c = 0; c < plan.n_first; ++c)
    in.a[c] = Matrix(p_count, static_cast<std::size_t>(cfg.input_dim), 0.0);
  for (int k = 0; k < plan.n_second; ++k)
    in.s[k] = Matrix(p_count, static_cast<std::size_t>(cfg.input_dim), 0.0);
  for (std::size_t p = 0; p < p_count; ++p) {
    for (int d = 0; d < cfg.input_dim; ++d)
      in.v(p, static_cast<std::size_t>(d)) = (pts(p, static_cast<std::size_t>(d)) - cfg.norm_mid(d)) / cfg.norm_half(d);
    for (int c = 0; c < plan.n_first; ++c) {
      const int d = plan.first_input[c];
      in.a[c](p, static_cast<std::size_t>(d)) = 1.0 / cfg.norm_half(d);
    }
  }

  if (trace) {
    trace->plan = plan;
    trace->input = in;
    trace->z.assign(h, SlotMats{});
    trace->x.assign(h, SlotMats{});
  }

  SlotMats emb;
  const int width = cfg.embedding_width();
  if (cfg.variant == Variant::concat_skip) {
    emb.v = Matrix(p_count, static_cast<std::size_t>(width));
    for (int c = 0; c < plan.n_first; ++c) emb.a[c] = Matrix(p_count, static_cast<std::size_t>(width));
    for (int k = 0; k < plan.n_second; ++k) emb.s[k] = Matrix(p_count, static_cast<std::size_t>(width));
  }

  SlotMats cur = std::move(in);
  for (std::size_t l = 0; l < h; ++l) {
    const Matrix wt = detail::transpose(params.w[l]);
    SlotMats z;
    detail::linear_forward(cur.v, wt, &params.b[l], z.v);
    for (int c = 0; c < plan.n_first; ++c) detail::linear_forward(cur.a[c], wt, nullptr, z.a[c]);
    for (int k = 0; k < plan.n_second; ++k) detail::linear_forward(cur.s[k], wt, nullptr, z.s[k]);
    if (l == 0) {
      const double scale = cfg.first_layer_scale();
      if (scale != 1.0) {
        detail::scale_in_place(z.v, scale);
        for (int c = 0; c < plan.n_first; ++c) detail::scale_in_place(z.a[c], scale);
        for (int k = 0; k < plan.n_second; ++k) detail::scale_in_place(z.s[k], scale);
      }
    }

    SlotMats x;
    x.v = Matrix(p_count, n);
    for (int c = 0; c < plan.n_first; ++c) x.a[c] = Matrix(p_count, n);
    for (int k = 0; k < plan.n_second; ++k) x.s[k] = Matrix(p_count, n);
    for (std::size_t p = 0; p < p_count; ++p) {
      for (std::size_t o = 0; o < n; ++o) {
        const detail::ActDerivs d = detail::act_derivs(cfg.activation, z.v(p, o));
        x.v(p, o) = d.f;
        for (int c = 0; c < plan.n_first; ++c) x.a[c](p, o) = d.f1 * z.a[c](p, o);
        for (int k = 0; k < plan.n_second; ++k) {
          const double zd = z.a[plan.second_first[k]](p, o);
          x.s[k](p, o) = d.f1 * z.s[k](p, o) + d.f2 * zd * zd;
        }
      }
    }

    if (cfg.variant == Variant::concat_skip) {
      const std::size_t block = (h - 1 - l) * n;
      auto copy_block = [&](const Matrix& src, Matrix& dst) {
        for (std::size_t p = 0; p < p_count; ++p) {
          const double* sp = src.row(p);
          double* dp = dst.row(p) + block;
          for (std::size_t o = 0; o < n; ++o) dp[o] = sp[o];
        }
      };
      copy_block(x.v, emb.v);
      for (int c = 0; c < plan.n_first; ++c) copy_block(x.a[c], emb.a[c]);
      for (int k = 0; k < plan.n_second; ++k) copy_block(x.s[k], emb.s[k]);
    }

    if (trace) {
      trace->z[l] = std::move(z);
      trace->x[l] = x;
    }
    if (l + 1 == h && cfg.variant == Variant::plain_mlp) emb = x;
    cur = std::move(x);
  }
  return emb;
}

// ---------------------------------------------------------------------------
// Reverse pass: embedding-slot cotangents -> trunk parameter gradients
// ---------------------------------------------------------------------------

inline void trunk_jets_vjp(const NetConfig& cfg, const NetParams& params, const TrunkTrace& trace,
                           const SlotMats& ebar, Vector& grad) {
  const DirPlan& plan = trace.plan;
  const std::size_t n = static_cast<std::size_t>(cfg.nodes);
  const std::size_t h = static_cast<std::size_t>(cfg.hidden_layers);
  const std::size_t p_count = trace.input.v.rows;
  if (grad.size() != params.trunk_param_count()) grad.assign(params.trunk_param_count(), 0.0);

  auto slot_or_zero = [&](const Matrix& m) { return !m.empty(); };

  // per-layer activation cotangents, seeded from the embedding blocks
  std::vector<SlotMats> xbar(h);
  for (std::size_t l = 0; l < h; ++l) {
    xbar[l].v = Matrix(p_count, n, 0.0);
    for (int c = 0; c < plan.n_first; ++c) xbar[l].a[c] = Matrix(p_count, n, 0.0);
    for (int k = 0; k < plan.n_second; ++k) xbar[l].s[k] = Matrix(p_count, n, 0.0);
  }
  auto scatter_block = [&](const Matrix& src, std::size_t block, Matrix& dst) {
    for (std::size_t p = 0; p < p_count; ++p) {
      const double* sp = src.row(p) + block;
      double* dp = dst.row(p);
      for (std::size_t o = 0; o < n; ++o) dp[o] += sp[o];
    }
  };
  if (cfg.variant == Variant::concat_skip) {
    for (std::size_t l = 0; l < h; ++l) {
      const std::size_t block = (h - 1 - l) * n;
      if (slot_or_zero(ebar.v)) scatter_block(ebar.v, block, xbar[l].v);
      for (int c = 0; c < plan.n_first; ++c)
        if (slot_or_zero(ebar.a[c])) scatter_block(ebar.a[c], block, xbar[l].a[c]);
      for (int k = 0; k < plan.n_second; ++k)
        if (slot_or_zero(ebar.s[k])) scatter_block(ebar.s[k], block, xbar[l].s[k]);
    }
  } else {
    if (slot_or_zero(ebar.v)) scatter_block(ebar.v, 0, xbar[h - 1].v);
    for (int c = 0; c < plan.n_first; ++c)
      if (slot_or_zero(ebar.a[c])) scatter_block(ebar.a[c], 0, xbar[h - 1].a[c]);
    for (int k = 0; k < plan.n_second; ++k)
      if (slot_or_zero(ebar.s[k])) scatter_block(ebar.s[k], 0, xbar[h - 1].s[k]);
  }

  // gradient segment offsets in the flattened layout
  std::vector<std::size_t> w_off(h), b_off(h);
  {
    std::size_t off = 0;
    for (std::size_t l = 0; l < h; ++l) {
      w_off[l] = off;
      off += params.w[l].a.size();
      b_off[l] = off;
      off += params.b[l].size();
    }
  }

  for (std::size_t li = h; li-- > 0;) {
    const SlotMats& z = trace.z[li];
    SlotMats zbar;
    zbar.v = Matrix(p_count, n, 0.0);
    for (int c = 0; c < plan.n_first; ++c) zbar.a[c] = Matrix(p_count, n, 0.0);
    for (int k = 0; k < plan.n_second; ++k) zbar.s[k] = Matrix(p_count, n, 0.0);

    for (std::size_t p = 0; p < p_count; ++p) {
      for (std::size_t o = 0; o < n; ++o) {
        const detail::ActDerivs d = detail::act_derivs(cfg.activation, z.v(p, o));
        double zv_bar = xbar[li].v(p, o) * d.f1;
        for (int c = 0; c < plan.n_first; ++c) {
          const double ab = xbar[li].a[c](p, o);
          const double za = z.a[c](p, o);
          zv_bar += ab * d.f2 * za;
          zbar.a[c](p, o) += ab * d.f1;
        }
        for (int k = 0; k < plan.n_second; ++k) {
          const double sb = xbar[li].s[k](p, o);
          const int c = plan.second_first[k];
          const double za = z.a[c](p, o);
          zv_bar += sb * (d.f2 * z.s[k](p, o) + d.f3 * za * za);
          zbar.a[c](p, o) += sb * 2.0 * d.f2 * za;
          zbar.s[k](p, o) = sb * d.f1;
        }
        zbar.v(p, o) = zv_bar;
      }
    }

    if (li == 0) {
      const double scale = cfg.first_layer_scale();
      if (scale != 1.0) {
        detail::scale_in_place(zbar.v, scale);
        for (int c = 0; c < plan.n_first; ++c) detail::scale_in_place(zbar.a[c], scale);
        for (int k = 0; k < plan.n_second; ++k) detail::scale_in_place(zbar.s[k], scale);
      }
    }

    const SlotMats& xin = li == 0 ? trace.input : trace.x[li - 1];
    Matrix wbar(n, params.w[li].cols, 0.0);
    detail::accumulate_wbar(zbar.v, xin.v, wbar);
    for (int c = 0; c < plan.n_first; ++c) detail::accumulate_wbar(zbar.a[c], xin.a[c], wbar);
    for (int k = 0; k < plan.n_second; ++k) detail::accumulate_wbar(zbar.s[k], xin.s[k], wbar);
    for (std::size_t i = 0; i < wbar.a.size(); ++i) grad[w_off[li] + i] += wbar.a[i];
    for (std::size_t p = 0; p < p_count; ++p) {
      const double* zp = zbar.v.row(p);
      for (std::size_t o = 0; o < n; ++o) grad[b_off[li] + o] += zp[o];
    }

    if (li > 0) {
      detail::accumulate_xbar(zbar.v, params.w[li], xbar[li - 1].v);
      for (int c = 0; c < plan.n_first; ++c)
        detail::accumulate_xbar(zbar.a[c], params.w[li], xbar[li - 1].a[c]);
      for (int k = 0; k < plan.n_second; ++k)
        detail::accumulate_xbar(zbar.s[k], params.w[li], xbar[li - 1].s[k]);
    }
  }
}

// ---------------------------------------------------------------------------
// Single-point jets (one Jet per embedding feature)
// ---------------------------------------------------------------------------

inline std::vector<Jet> propagate_jets(const NetConfig& cfg, const NetParams& params,
                                       const double* point, const JetSpec& spec) {
  Matrix pts(1, static_cast<std::size_t>(cfg.input_dim));
  for (int d = 0; d < cfg.input_dim; ++d) pts(0, static_cast<std::size_t>(d)) = point[d];
  const DirPlan plan = plan_dirs(spec);
  const SlotMats emb = trunk_jets(cfg, params, pts, spec);
  const int width = cfg.embedding_width();
  std::vector<Jet> jets(static_cast<std::size_t>(width));
  for (int f = 0; f < width; ++f) {
    Jet& j = jets[static_cast<std::size_t>(f)];
    j.value = emb.v(0, static_cast<std::size_t>(f));
    j.first.resize(spec.first_dirs.size());
    for (std::size_t i = 0; i < spec.first_dirs.size(); ++i)
      j.first[i] = emb.a[plan.spec_first[i]](0, static_cast<std::size_t>(f));
    j.second.resize(spec.second_dirs.size());
    for (std::size_t i = 0; i < spec.second_dirs.size(); ++i)
      j.second[i] = emb.s[plan.spec_second[i]](0, static_cast<std::size_t>(f));
  }
  return jets;
}

// ---------------------------------------------------------------------------
// Plain evaluation (the zeroth-order jet)
// ---------------------------------------------------------------------------

inline SlotMats embed_batch(const NetConfig& cfg, const NetParams& params, const Matrix& pts) {
  JetSpec value_only;
  value_only.input_dim = cfg.input_dim;
  return trunk_jets(cfg, params, pts, value_only);
}

inline Vector embed(const NetConfig& cfg, const NetParams& params, const double* point) {
  Matrix pts(1, static_cast<std::size_t>(cfg.input_dim));
  for (int d = 0; d < cfg.input_dim; ++d) pts(0, static_cast<std::size_t>(d)) = point[d];
  const SlotMats e = embed_batch(cfg, params, pts);
  return Vector(e.v.row(0), e.v.row(0) + e.v.cols);
}

inline double predict(const NetConfig& cfg, const NetParams& params, const Vector& head,
                      const double* point) {
  if (static_cast<int>(head.size()) != cfg.embedding_width())
    throw DimensionMismatch("predict: head length != embedding width");
  return dot(head, embed(cfg, params, point));
}

}  // namespace pipinn
