#pragma once

// Trunk architectures producing the embedding the linear head consumes:
//  - concat_skip: sine hidden layers whose activations are all concatenated,
//    deepest layer first, with the first pre-activation scaled by F*pi.
//  - plain_mlp: conventional MLP embedding = last hidden activation; inputs
//    may include task parameters.
// Inputs are affinely mapped to [-1,1] per coordinate when bounds are set;
// derivative seeds pick up the matching chain-rule factors.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "pipinn/errors.hpp"
#include "pipinn/linalg.hpp"
#include "pipinn/rng.hpp"

namespace pipinn {

enum class Variant { concat_skip, plain_mlp };
enum class Activation { sine, tanh };

struct NetConfig {
  Variant variant = Variant::concat_skip;
  Activation activation = Activation::sine;
  int input_dim = 2;
  int hidden_layers = 4;
  int nodes = 50;
  double freq_factor = 1.0;
  std::uint64_t init_seed = 0;
  // per-coordinate [lo, hi]; empty means identity (no normalization)
  std::vector<std::pair<double, double>> input_bounds;

  int embedding_width() const {
    return variant == Variant::concat_skip ? hidden_layers * nodes : nodes;
  }

  void validate() const {
    if (hidden_layers < 2) throw ConfigError("NetConfig: hidden_layers must be >= 2");
    if (nodes < 1) throw ConfigError("NetConfig: nodes must be >= 1");
    if (!(freq_factor > 0.0)) throw ConfigError("NetConfig: freq_factor must be > 0");
    if (input_dim < 1) throw ConfigError("NetConfig: input_dim must be >= 1");
    if (!input_bounds.empty() && static_cast<int>(input_bounds.size()) != input_dim)
      throw ConfigError("NetConfig: input_bounds size must match input_dim");
  }

  // frequency-annealing factor on the first pre-activation (concat_skip only)
  double first_layer_scale() const {
    return variant == Variant::concat_skip ? freq_factor * kPi : 1.0;
  }

  double norm_mid(int d) const {
    return input_bounds.empty() ? 0.0 : 0.5 * (input_bounds[d].first + input_bounds[d].second);
  }
  double norm_half(int d) const {
    if (input_bounds.empty()) return 1.0;
    const double h = 0.5 * (input_bounds[d].second - input_bounds[d].first);
    return h > 0.0 ? h : 1.0;
  }
};

struct NetParams {
  std::vector<Matrix> w;       // w[l]: nodes x fan_in (fan_in = input_dim for l=0)
  std::vector<Vector> b;       // b[l]: nodes
  std::vector<Vector> heads;   // zero or more vectors of embedding width

  std::size_t trunk_param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < w.size(); ++l) n += w[l].a.size() + b[l].size();
    return n;
  }
};

inline NetParams init_params(const NetConfig& cfg) {
  cfg.validate();
  NetParams p;
  Rng rng(cfg.init_seed);
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    const int fan_in = l == 0 ? cfg.input_dim : cfg.nodes;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Matrix w(static_cast<std::size_t>(cfg.nodes), static_cast<std::size_t>(fan_in));
    for (double& v : w.a) v = rng.uniform(-bound, bound);
    p.w.push_back(std::move(w));
    p.b.emplace_back(static_cast<std::size_t>(cfg.nodes), 0.0);
  }
  return p;
}

inline Vector make_head(const NetConfig& cfg, Rng& rng) {
  const int width = cfg.embedding_width();
  const double bound = std::sqrt(6.0 / static_cast<double>(width));
  Vector h(static_cast<std::size_t>(width));
  for (double& v : h) v = rng.uniform(-bound, bound);
  return h;
}

// Canonical trunk flattening: W0 row-major, b0, W1, b1, ...
inline Vector flatten_trunk(const NetParams& p) {
  Vector out;
  out.reserve(p.trunk_param_count());
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    out.insert(out.end(), p.w[l].a.begin(), p.w[l].a.end());
    out.insert(out.end(), p.b[l].begin(), p.b[l].end());
  }
  return out;
}

inline void unflatten_trunk(const Vector& flat, NetParams& p) {
  std::size_t k = 0;
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    for (double& v : p.w[l].a) v = flat[k++];
    for (double& v : p.b[l]) v = flat[k++];
  }
  if (k != flat.size()) throw DimensionMismatch("unflatten_trunk: size mismatch");
}

}  // namespace pipinn
