#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pipinn/autodiff.hpp"
#include "pipinn/network.hpp"

using namespace pipinn;

namespace {

NetConfig tiny_config(Activation act = Activation::sine, int input_dim = 1) {
  NetConfig cfg;
  cfg.variant = Variant::concat_skip;
  cfg.activation = act;
  cfg.input_dim = input_dim;
  cfg.hidden_layers = 2;
  cfg.nodes = 3;
  cfg.freq_factor = 1.0;
  cfg.init_seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("first hidden feature of sin(2x) carries the analytic jet") {
  NetConfig cfg;
  cfg.variant = Variant::concat_skip;
  cfg.activation = Activation::sine;
  cfg.input_dim = 1;
  cfg.hidden_layers = 2;
  cfg.nodes = 1;
  cfg.freq_factor = 1.0 / kPi;  // first-layer scale becomes exactly 1
  NetParams p = init_params(cfg);
  p.w[0](0, 0) = 2.0;
  p.b[0][0] = 0.0;

  JetSpec spec{1, {0}, {0}};
  const double x0 = 0.0;
  const auto jets = propagate_jets(cfg, p, &x0, spec);
  // embedding order is deepest layer first; the first hidden layer is feature 1
  REQUIRE(jets.size() == 2);
  REQUIRE(jets[1].value == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(jets[1].first[0] == Catch::Approx(2.0));
  REQUIRE(jets[1].second[0] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("jet value slot reproduces embed exactly") {
  for (Activation act : {Activation::sine, Activation::tanh}) {
    NetConfig cfg = tiny_config(act, 2);
    cfg.hidden_layers = 3;
    cfg.nodes = 5;
    cfg.freq_factor = 2.0;
    cfg.input_bounds = {{-1.0, 3.0}, {0.0, 1.0}};
    const NetParams p = init_params(cfg);
    JetSpec spec{2, {0, 1}, {0}};
    Rng rng(17);
    Matrix pts(4, 2);
    for (double& v : pts.a) v = rng.uniform(-1.0, 1.0);
    const SlotMats emb = trunk_jets(cfg, p, pts, spec);
    for (std::size_t i = 0; i < pts.rows; ++i) {
      const Vector direct = embed(cfg, p, pts.row(i));
      for (std::size_t f = 0; f < direct.size(); ++f) REQUIRE(emb.v(i, f) == direct[f]);
    }
  }
}

TEST_CASE("zero trunk gives all-zero jets") {
  NetConfig cfg = tiny_config();
  NetParams p = init_params(cfg);
  for (auto& w : p.w)
    for (double& v : w.a) v = 0.0;
  const double x0 = 0.4;
  JetSpec spec{1, {0}, {0}};
  for (const Jet& j : propagate_jets(cfg, p, &x0, spec)) {
    REQUIRE(j.value == 0.0);
    REQUIRE(j.first[0] == 0.0);
    REQUIRE(j.second[0] == 0.0);
  }
}

TEST_CASE("jets match central finite differences on a random sine net") {
  NetConfig cfg = tiny_config(Activation::sine, 1);
  cfg.nodes = 6;
  cfg.init_seed = 21;
  const NetParams p = init_params(cfg);
  JetSpec spec{1, {0}, {0}};
  const double x0 = 0.3;
  const auto jets = propagate_jets(cfg, p, &x0, spec);
  const int width = cfg.embedding_width();
  for (int f = 0; f < width; ++f) {
    auto feature = [&](double x) { return embed(cfg, p, &x)[static_cast<std::size_t>(f)]; };
    const double fd1 = oracle::central_fd(feature, x0, 1e-4);
    const double fd2 = oracle::central_fd2(feature, x0, 1e-4);
    REQUIRE(oracle::close_rel(jets[static_cast<std::size_t>(f)].first[0], fd1, 1e-6, 1e-9));
    REQUIRE(oracle::close_rel(jets[static_cast<std::size_t>(f)].second[0], fd2, 1e-6, 1e-7));
  }
}

TEST_CASE("jets respect input normalization chain factors") {
  NetConfig cfg = tiny_config(Activation::tanh, 2);
  cfg.input_bounds = {{-10.0, 10.0}, {0.0, 5.0}};
  cfg.init_seed = 4;
  const NetParams p = init_params(cfg);
  JetSpec spec{2, {0, 1}, {0, 1}};
  const double pt[2] = {3.5, 1.25};
  const auto jets = propagate_jets(cfg, p, pt, spec);
  for (int f = 0; f < cfg.embedding_width(); ++f) {
    for (int d = 0; d < 2; ++d) {
      auto feature = [&](double c) {
        double q[2] = {pt[0], pt[1]};
        q[d] = c;
        return embed(cfg, p, q)[static_cast<std::size_t>(f)];
      };
      const double fd1 = oracle::central_fd(feature, pt[d], 1e-4);
      const double fd2 = oracle::central_fd2(feature, pt[d], 1e-4);
      REQUIRE(oracle::close_rel(jets[static_cast<std::size_t>(f)].first[static_cast<std::size_t>(d)], fd1, 1e-6, 1e-9));
      REQUIRE(oracle::close_rel(jets[static_cast<std::size_t>(f)].second[static_cast<std::size_t>(d)], fd2, 1e-5, 1e-7));
    }
  }
}

TEST_CASE("jets are linear in head combinations") {
  NetConfig cfg = tiny_config(Activation::sine, 1);
  const NetParams p = init_params(cfg);
  JetSpec spec{1, {0}, {0}};
  Matrix pts(1, 1);
  pts(0, 0) = 0.7;
  const SlotMats emb = trunk_jets(cfg, p, pts, spec);
  Rng rng(10);
  const int width = cfg.embedding_width();
  Vector h1 = oracle::random_vector(static_cast<std::size_t>(width), rng);
  Vector h2 = oracle::random_vector(static_cast<std::size_t>(width), rng);
  const double alpha = 0.3, beta = -1.7;
  auto contract = [&](const Matrix& slot, const Vector& h) {
    double s = 0.0;
    for (int f = 0; f < width; ++f) s += slot(0, static_cast<std::size_t>(f)) * h[static_cast<std::size_t>(f)];
    return s;
  };
  Vector mix(h1.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * h1[i] + beta * h2[i];
  for (const Matrix* slot : {&emb.v, &emb.a[0], &emb.s[0]}) {
    const double lhs = contract(*slot, mix);
    const double rhs = alpha * contract(*slot, h1) + beta * contract(*slot, h2);
    REQUIRE(std::fabs(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("unregistered activation raises UnsupportedOperator") {
  NetConfig cfg = tiny_config();
  cfg.activation = static_cast<Activation>(99);
  const NetParams p = init_params(tiny_config());
  const double x0 = 0.1;
  REQUIRE_THROWS_AS(propagate_jets(cfg, p, &x0, JetSpec{1, {0}, {}}), UnsupportedOperator);
}

TEST_CASE("adjoint_ridge_solve with zero cotangent returns zeros") {
  Rng rng(2);
  const Matrix x = oracle::random_matrix(6, 3, rng);
  const Vector y = oracle::random_vector(6, rng);
  const Vector w = ridge_solve(x, y, 0.5);
  const RidgeAdjoint adj = adjoint_ridge_solve(x, y, 0.5, w, Vector(3, 0.0));
  for (double v : adj.x_bar.a) REQUIRE(v == 0.0);
  for (double v : adj.y_bar) REQUIRE(v == 0.0);
  REQUIRE(adj.lambda_bar == 0.0);
}

TEST_CASE("adjoint_ridge_solve scalar case matches hand calculus") {
  Matrix x(2, 1);
  x(0, 0) = x(1, 0) = 1.0;
  const Vector y = {1.0, 3.0};
  const double lambda = 2.0;
  const Vector w = ridge_solve(x, y, lambda);
  REQUIRE(w[0] == Catch::Approx(1.0));
  const RidgeAdjoint adj = adjoint_ridge_solve(x, y, lambda, w, {1.0});
  REQUIRE(adj.y_bar[0] == Catch::Approx(0.25));
  REQUIRE(adj.y_bar[1] == Catch::Approx(0.25));
  REQUIRE(adj.lambda_bar == Catch::Approx(-0.25));
  REQUIRE(adj.x_bar(0, 0) == Catch::Approx(-0.25));
  REQUIRE(adj.x_bar(1, 0) == Catch::Approx(0.25));
}

TEST_CASE("adjoint_ridge_solve satisfies the directional product rule") {
  Rng rng(13);
  const Matrix x = oracle::random_matrix(8, 4, rng);
  const Vector y = oracle::random_vector(8, rng);
  const double lambda = 0.3;
  const Vector w = ridge_solve(x, y, lambda);
  const Vector w_bar = oracle::random_vector(4, rng);
  const RidgeAdjoint adj = adjoint_ridge_solve(x, y, lambda, w, w_bar);

  const Matrix dx = oracle::random_matrix(8, 4, rng);
  const Vector dy = oracle::random_vector(8, rng);
  const double dlam = rng.uniform(-1.0, 1.0);

  const double eps = 1e-6;
  auto solve_at = [&](double t) {
    Matrix xt = x;
    for (std::size_t i = 0; i < xt.a.size(); ++i) xt.a[i] += t * dx.a[i];
    Vector yt = y;
    for (std::size_t i = 0; i < yt.size(); ++i) yt[i] += t * dy[i];
    return ridge_solve(xt, yt, lambda + t * dlam);
  };
  const Vector wp = solve_at(eps), wm = solve_at(-eps);
  double lhs = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) lhs += w_bar[i] * (wp[i] - wm[i]) / (2.0 * eps);

  double rhs = adj.lambda_bar * dlam;
  for (std::size_t i = 0; i < adj.x_bar.a.size(); ++i) rhs += adj.x_bar.a[i] * dx.a[i];
  for (std::size_t i = 0; i < dy.size(); ++i) rhs += adj.y_bar[i] * dy[i];
  REQUIRE(oracle::close_rel(lhs, rhs, 1e-5, 1e-8));
}

TEST_CASE("trunk VJP matches finite differences over every parameter") {
  for (Activation act : {Activation::sine, Activation::tanh}) {
    NetConfig cfg = tiny_config(act, 2);
    cfg.nodes = 3;
    cfg.hidden_layers = 2;
    cfg.freq_factor = 1.5;
    cfg.input_bounds = {{-1.0, 1.0}, {0.0, 2.0}};
    cfg.init_seed = 31;
    NetParams p = init_params(cfg);
    JetSpec spec{2, {0, 1}, {0}};

    Rng rng(55);
    Matrix pts(4, 2);
    for (std::size_t i = 0; i < pts.rows; ++i) {
      pts(i, 0) = rng.uniform(-1.0, 1.0);
      pts(i, 1) = rng.uniform(0.0, 2.0);
    }
    const int width = cfg.embedding_width();
    const DirPlan plan = plan_dirs(spec);
    SlotMats cot;
    cot.v = oracle::random_matrix(pts.rows, static_cast<std::size_t>(width), rng);
    for (int c = 0; c < plan.n_first; ++c)
      cot.a[c] = oracle::random_matrix(pts.rows, static_cast<std::size_t>(width), rng);
    for (int k = 0; k < plan.n_second; ++k)
      cot.s[k] = oracle::random_matrix(pts.rows, static_cast<std::size_t>(width), rng);

    auto loss_of = [&](const NetParams& q) {
      const SlotMats emb = trunk_jets(cfg, q, pts, spec);
      double s = 0.0;
      for (std::size_t i = 0; i < emb.v.a.size(); ++i) s += emb.v.a[i] * cot.v.a[i];
      for (int c = 0; c < plan.n_first; ++c)
        for (std::size_t i = 0; i < emb.a[c].a.size(); ++i) s += emb.a[c].a[i] * cot.a[c].a[i];
      for (int k = 0; k < plan.n_second; ++k)
        for (std::size_t i = 0; i < emb.s[k].a.size(); ++i) s += emb.s[k].a[i] * cot.s[k].a[i];
      return s;
    };

    TrunkTrace trace;
    trunk_jets(cfg, p, pts, spec, &trace);
    Vector grad(p.trunk_param_count(), 0.0);
    trunk_jets_vjp(cfg, p, trace, cot, grad);

    Vector flat = flatten_trunk(p);
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const double save = flat[k];
      const double step = 1e-5;
      flat[k] = save + step;
      unflatten_trunk(flat, p);
      const double up = loss_of(p);
      flat[k] = save - step;
      unflatten_trunk(flat, p);
      const double dn = loss_of(p);
      flat[k] = save;
      unflatten_trunk(flat, p);
      const double fd = (up - dn) / (2.0 * step);
      INFO("param " << k << " act " << static_cast<int>(act));
      REQUIRE(oracle::close_rel(grad[k], fd, 1e-4, 1e-8));
    }
  }
}

TEST_CASE("plain_mlp VJP matches finite differences") {
  NetConfig cfg;
  cfg.variant = Variant::plain_mlp;
  cfg.activation = Activation::tanh;
  cfg.input_dim = 3;
  cfg.hidden_layers = 2;
  cfg.nodes = 4;
  cfg.init_seed = 77;
  NetParams p = init_params(cfg);
  JetSpec spec{3, {0, 1}, {0}};

  Rng rng(91);
  Matrix pts(3, 3);
  for (double& v : pts.a) v = rng.uniform(-0.8, 0.8);
  const DirPlan plan = plan_dirs(spec);
  SlotMats cot;
  cot.v = oracle::random_matrix(pts.rows, static_cast<std::size_t>(cfg.embedding_width()), rng);
  for (int c = 0; c < plan.n_first; ++c)
    cot.a[c] = oracle::random_matrix(pts.rows, static_cast<std::size_t>(cfg.embedding_width()), rng);
  cot.s[0] = oracle::random_matrix(pts.rows, static_cast<std::size_t>(cfg.embedding_width()), rng);

  auto loss_of = [&](const NetParams& q) {
    const SlotMats emb = trunk_jets(cfg, q, pts, spec);
    double s = 0.0;
    for (std::size_t i = 0; i < emb.v.a.size(); ++i) s += emb.v.a[i] * cot.v.a[i];
    for (int c = 0; c < plan.n_first; ++c)
      for (std::size_t i = 0; i < emb.a[c].a.size(); ++i) s += emb.a[c].a[i] * cot.a[c].a[i];
    for (std::size_t i = 0; i < emb.s[0].a.size(); ++i) s += emb.s[0].a[i] * cot.s[0].a[i];
    return s;
  };

  TrunkTrace trace;
  trunk_jets(cfg, p, pts, spec, &trace);
  Vector grad(p.trunk_param_count(), 0.0);
  trunk_jets_vjp(cfg, p, trace, cot, grad);

  Vector flat = flatten_trunk(p);
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double save = flat[k];
    flat[k] = save + 1e-5;
    unflatten_trunk(flat, p);
    const double up = loss_of(p);
    flat[k] = save - 1e-5;
    unflatten_trunk(flat, p);
    const double dn = loss_of(p);
    flat[k] = save;
    unflatten_trunk(flat, p);
    REQUIRE(oracle::close_rel(grad[k], (up - dn) / 2e-5, 1e-4, 1e-8));
  }
}
