#include <catch2/catch_amalgamated.hpp>

#include "analytic_basis.hpp"
#include "oracles.hpp"
#include "pipinn/burgers_exact.hpp"
#include "pipinn/features.hpp"
#include "pipinn/pinv.hpp"

using namespace pipinn;

TEST_CASE("poisson PDE rows carry the symbolic second derivatives") {
  const Problem prob = make_problem(ProblemKind::poisson);
  const Collocation col = collocation(prob);
  const double w1 = 0.7, w2 = 1.9;
  const FeatureSet fs = testbasis::analytic_features(prob, col, testbasis::poisson_span_basis(w1, w2));
  const Vector theta = {w1, w2};
  const InstanceTargets tg = instance_targets(prob, col, theta);

  AdaptConfig cfg;
  cfg.lambda_pde = 3.5;
  const AssembledSystem sys = assemble(prob, fs, tg, cfg);
  for (std::size_t r = 0; r < col.pde.rows; ++r) {
    const double x = col.pde(r, 0);
    REQUIRE(sys.x(r, 0) == Catch::Approx(3.5 * -w1 * w1 * std::sin(w1 * x)).margin(1e-12));
    REQUIRE(sys.x(r, 1) == Catch::Approx(3.5 * -w2 * w2 * std::sin(w2 * x)).margin(1e-12));
    REQUIRE(sys.x(r, 2) == 0.0);
    REQUIRE(sys.x(r, 3) == 0.0);
  }
}

TEST_CASE("zero features give a zero matrix and stacked targets") {
  const Problem prob = make_problem(ProblemKind::burgers_sine);
  const Collocation col = collocation(prob);
  FeatureSet fs;
  fs.width = 3;
  fs.pde_v = Matrix(col.pde.rows, 3, 0.0);
  fs.pde_dx = fs.pde_v;
  fs.pde_dt = fs.pde_v;
  fs.pde_dxx = fs.pde_v;
  fs.bc_v = Matrix(col.bc.rows, 3, 0.0);
  fs.ic_v = Matrix(col.ic.rows, 3, 0.0);
  fs.eval_v = Matrix(col.eval.rows, 3, 0.0);
  const Vector theta = {0.01};
  const InstanceTargets tg = instance_targets(prob, col, theta);
  AdaptConfig cfg;
  const Vector u0(col.pde.rows, 0.0);
  const AssembledSystem sys = assemble(prob, fs, tg, cfg, &u0);
  for (double v : sys.x.a) REQUIRE(v == 0.0);
  for (std::size_t r = 0; r < col.pde.rows; ++r) REQUIRE(sys.y[r] == tg.h_pde[r]);
  for (std::size_t r = 0; r < col.bc.rows; ++r) REQUIRE(sys.y[col.pde.rows + r] == 0.0);
  for (std::size_t r = 0; r < col.ic.rows; ++r)
    REQUIRE(sys.y[col.pde.rows + col.bc.rows + r] == tg.u0_ic[r]);
}

TEST_CASE("doubling lambda_pde scales exactly the PDE rows") {
  const Problem prob = make_problem(ProblemKind::poisson);
  const Collocation col = collocation(prob);
  const FeatureSet fs =
      testbasis::analytic_features(prob, col, testbasis::poisson_span_basis(0.4, 1.1));
  const Vector theta = {0.4, 1.1};
  const InstanceTargets tg = instance_targets(prob, col, theta);
  AdaptConfig a, b;
  b.lambda_pde = 2.0 * a.lambda_pde;
  const AssembledSystem sa = assemble(prob, fs, tg, a);
  const AssembledSystem sb = assemble(prob, fs, tg, b);
  for (std::size_t r = 0; r < sa.x.rows; ++r) {
    const double f = sa.row_tags[r] == RowTag::pde ? 2.0 : 1.0;
    for (std::size_t j = 0; j < sa.x.cols; ++j) REQUIRE(sb.x(r, j) == f * sa.x(r, j));
    REQUIRE(sb.y[r] == f * sa.y[r]);
  }
}

TEST_CASE("row bookkeeping matches the collocation sets") {
  const Problem prob = make_problem(ProblemKind::burgers_family);
  const Collocation col = collocation(prob);
  FeatureSet fs;
  fs.width = 2;
  fs.pde_v = Matrix(col.pde.rows, 2, 0.1);
  fs.pde_dx = fs.pde_v;
  fs.pde_dt = fs.pde_v;
  fs.pde_dxx = fs.pde_v;
  fs.bc_v = Matrix(col.bc.rows, 2, 0.2);
  fs.bc_pair_v = Matrix(col.bc_pair.rows, 2, 0.3);
  fs.ic_v = Matrix(col.ic.rows, 2, 0.4);
  fs.eval_v = Matrix(col.eval.rows, 2, 0.0);
  const Dataset ds_dummy = poisson_make(2, 1);  // unrelated; just need theta
  Vector theta(20, 0.0);
  const InstanceTargets tg = instance_targets(prob, col, theta);
  AdaptConfig cfg;
  const Vector u0(col.pde.rows, 0.0);
  const AssembledSystem sys = assemble(prob, fs, tg, cfg, &u0);
  REQUIRE(sys.x.rows == col.pde.rows + col.bc.rows + col.ic.rows);
  std::size_t np = 0, nb = 0, ni = 0;
  for (RowTag t : sys.row_tags) {
    np += t == RowTag::pde;
    nb += t == RowTag::bc;
    ni += t == RowTag::ic;
  }
  REQUIRE(np == col.pde.rows);
  REQUIRE(nb == col.bc.rows);
  REQUIRE(ni == col.ic.rows);
  // periodic rows are value differences with zero targets
  for (std::size_t r = col.pde.rows; r < col.pde.rows + nb; ++r) {
    REQUIRE(sys.y[r] == 0.0);
    for (std::size_t j = 0; j < 2; ++j) REQUIRE(sys.x(r, j) == Catch::Approx(0.2 - 0.3));
  }
}

TEST_CASE("exact-span recovery on the Poisson family") {
  const Dataset ds = poisson_make(3, 41);
  const Problem& prob = ds.problem;
  const Collocation col = collocation(prob);
  const PdeInstance& inst = ds.instances[0];
  const FeatureSet fs = testbasis::analytic_features(
      prob, col, testbasis::poisson_span_basis(inst.theta[0], inst.theta[1]));
  const InstanceTargets tg = instance_targets(prob, col, inst.theta);
  AdaptConfig cfg;
  cfg.lambda_pi = 0.0;
  const AdaptedHead head = adapt_linear(prob, fs, tg, cfg);
  REQUIRE(head.w[0] == Catch::Approx(1.0).margin(1e-8));
  REQUIRE(head.w[1] == Catch::Approx(1.0).margin(1e-8));
  REQUIRE(head.w[2] == Catch::Approx(-0.1).margin(1e-8));
  REQUIRE(head.w[3] == Catch::Approx(0.0).margin(1e-8));
  const Grid pred = predict_grid(prob, fs, head.w);
  REQUIRE(rel_l2(pred, *inst.reference) <= 1e-8);
  for (double r : head.residual_norms) REQUIRE(r <= 1e-7);
}

TEST_CASE("huge lambda_pi shrinks the head to zero") {
  const Dataset ds = poisson_make(2, 42);
  const Problem& prob = ds.problem;
  const Collocation col = collocation(prob);
  const FeatureSet fs = testbasis::analytic_features(
      prob, col, testbasis::poisson_span_basis(ds.instances[0].theta[0], ds.instances[0].theta[1]));
  const InstanceTargets tg = instance_targets(prob, col, ds.instances[0].theta);
  AdaptConfig cfg;
  cfg.lambda_pi = 1e12;
  const AdaptedHead head = adapt_linear(prob, fs, tg, cfg);
  REQUIRE(norm2(head.w) <= 1e-6);
}

TEST_CASE("joint constraint-weight scaling leaves the lambda_pi=0 head unchanged") {
  const Dataset ds = poisson_make(2, 43);
  const Problem& prob = ds.problem;
  const Collocation col = collocation(prob);
  const FeatureSet fs = testbasis::analytic_features(
      prob, col, testbasis::poisson_span_basis(ds.instances[1].theta[0], ds.instances[1].theta[1]));
  const InstanceTargets tg = instance_targets(prob, col, ds.instances[1].theta);
  AdaptConfig base;
  base.lambda_pi = 0.0;
  const AdaptedHead h0 = adapt_linear(prob, fs, tg, base);
  for (double c : {0.25, 7.0}) {
    AdaptConfig scaled = base;
    scaled.lambda_pde *= c;
    scaled.lambda_bc *= c;
    scaled.lambda_ic *= c;
    const AdaptedHead hc = adapt_linear(prob, fs, tg, scaled);
    for (std::size_t i = 0; i < h0.w.size(); ++i)
      REQUIRE(hc.w[i] == Catch::Approx(h0.w[i]).margin(1e-9));
  }
}

TEST_CASE("lambda_pi=0 head equals the brute-force least-squares oracle") {
  const Dataset ds = poisson_make(2, 44);
  const Problem& prob = ds.problem;
  const Collocation col = collocation(prob);
  const FeatureSet fs = testbasis::analytic_features(
      prob, col, testbasis::poisson_span_basis(ds.instances[0].theta[0], ds.instances[0].theta[1]));
  const InstanceTargets tg = instance_targets(prob, col, ds.instances[0].theta);
  AdaptConfig cfg;
  cfg.lambda_pi = 0.0;
  const AssembledSystem sys = assemble(prob, fs, tg, cfg);
  const AdaptedHead head = adapt_linear(prob, fs, tg, cfg);
  const Vector ref = oracle::ridge_naive(sys.x, sys.y, 0.0);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += (head.w[i] - ref[i]) * (head.w[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  REQUIRE(std::sqrt(num / den) <= 1e-8);
}

TEST_CASE("missing linearization state is reported") {
  const Problem prob = make_problem(ProblemKind::burgers_sine);
  const Collocation col = collocation(prob);
  const FeatureSet fs =
      testbasis::analytic_features(prob, col, testbasis::burgers_sine_chebyshev_basis(2, 1));
  const Vector theta = {0.02};
  const InstanceTargets tg = instance_targets(prob, col, theta);
  AdaptConfig cfg;
  REQUIRE_THROWS_AS(assemble(prob, fs, tg, cfg), MissingLinearization);
  REQUIRE_THROWS_AS(adapt_linear(prob, fs, tg, cfg), MissingLinearization);
}

TEST_CASE("heat-equation system is a Picard fixed point after one iteration") {
  // zeroing the advection slot turns the operator into the linear heat
  // equation, so every iterate equals the single linear solve
  const Problem prob = make_problem(ProblemKind::burgers_sine);
  const Collocation col = collocation(prob);
  FeatureSet fs =
      testbasis::analytic_features(prob, col, testbasis::burgers_sine_chebyshev_basis(6, 4));
  for (double& v : fs.pde_dx.a) v = 0.0;
  const Vector theta = {0.03};
  const InstanceTargets tg = instance_targets(prob, col, theta);
  AdaptConfig cfg;
  cfg.picard_iters = 4;
  cfg.lambda_pi = 1e-10;
  const AdaptedHead head = adapt_nonlinear(prob, fs, tg, cfg);
  REQUIRE(head.picard_history.size() == 4);
  REQUIRE(head.picard_history[0] > 0.0);
  for (std::size_t k = 1; k < 4; ++k) REQUIRE(head.picard_history[k] <= 1e-9);

  // and the initial-guess policy cannot matter on a linear system
  AdaptConfig zero_init = cfg;
  zero_init.picard_init = AdaptConfig::PicardInit::zero;
  const AdaptedHead head0 = adapt_nonlinear(prob, fs, tg, zero_init);
  for (std::size_t i = 0; i < head.w.size(); ++i)
    REQUIRE(head.w[i] == Catch::Approx(head0.w[i]).margin(1e-9));
}

TEST_CASE("Picard iterations drive rel-L2 against the Cole-Hopf oracle down monotonically") {
  const Problem prob = make_problem(ProblemKind::burgers_sine);
  const Collocation col = collocation(prob);
  const double gamma = 0.05;
  const FeatureSet fs =
      testbasis::analytic_features(prob, col, testbasis::burgers_sine_chebyshev_basis());
  const Vector theta = {gamma};
  const InstanceTargets tg = instance_targets(prob, col, theta);

  const BurgersLineProblem line = burgers_sine_line_problem();
  Grid ref;
  ref.n0 = prob.n0;
  ref.n1 = prob.n1;
  ref.v.resize(static_cast<std::size_t>(prob.n0) * prob.n1);
  for (int i0 = 0; i0 < prob.n0; ++i0)
    for (int i1 = 0; i1 < prob.n1; ++i1)
      ref.at(i0, i1) =
          burgers_line_solution(line, gamma, grid_coord0(prob, i1), grid_coord1(prob, i0));

  AdaptConfig cfg;
  cfg.lambda_pi = 1e-10;
  double prev = 1e300;
  for (int iters = 1; iters <= 4; ++iters) {
    cfg.picard_iters = iters;
    const AdaptedHead head = adapt_nonlinear(prob, fs, tg, cfg);
    const double err = rel_l2(predict_grid(prob, fs, head.w), ref);
    REQUIRE(err < prev);
    prev = err;
  }
  REQUIRE(prev < 1e-2);
}

TEST_CASE("adaptation of trunk-built features never mutates the trunk") {
  const Dataset ds = poisson_make(2, 45);
  const Problem& prob = ds.problem;
  const Collocation col = collocation(prob);
  const NetConfig cfg = problem_net_config(prob, Variant::concat_skip, 3, 8, 2.0,
                                           Activation::sine, 7);
  const NetParams params = init_params(cfg);
  const Vector before = flatten_trunk(params);
  const FeatureBundle fb = build_features(prob, col, cfg, params, ds.instances[0].theta);
  const InstanceTargets tg = instance_targets(prob, col, ds.instances[0].theta);
  AdaptConfig acfg;
  const AdaptedHead head = adapt_linear(prob, fb.fs, tg, acfg);
  REQUIRE(head.w.size() == static_cast<std::size_t>(cfg.embedding_width()));
  REQUIRE(flatten_trunk(params) == before);
}

TEST_CASE("residual report is unweighted by definition") {
  const Dataset ds = poisson_make(2, 46);
  const Problem& prob = ds.problem;
  const Collocation col = collocation(prob);
  const FeatureSet fs = testbasis::analytic_features(
      prob, col, testbasis::poisson_span_basis(ds.instances[0].theta[0], ds.instances[0].theta[1]));
  const InstanceTargets tg = instance_targets(prob, col, ds.instances[0].theta);
  AdaptConfig weighted;
  weighted.lambda_pde = 17.0;
  weighted.lambda_bc = 0.3;
  const AdaptedHead head = adapt_linear(prob, fs, tg, weighted);

  // recompute the unweighted norms directly
  AdaptConfig unit;
  const AssembledSystem sys = assemble(prob, fs, tg, unit);
  Vector r = matvec(sys.x, head.w);
  double pde = 0.0, bc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - sys.y[i];
    if (sys.row_tags[i] == RowTag::pde) pde += d * d;
    if (sys.row_tags[i] == RowTag::bc) bc += d * d;
  }
  REQUIRE(head.residual_norms[0] == Catch::Approx(std::sqrt(pde)).epsilon(1e-12));
  REQUIRE(head.residual_norms[1] == Catch::Approx(std::sqrt(bc)).epsilon(1e-12));
}

TEST_CASE("zero head on a fully homogeneous instance leaves zero residuals") {
  // the all-zero-coefficient family instance has h = 0, u0 = 0 and periodic
  // matching rows with zero targets
  const Problem prob = make_problem(ProblemKind::burgers_family);
  const Collocation col = collocation(prob);
  const Vector theta(20, 0.0);
  const InstanceTargets tg = instance_targets(prob, col, theta);
  for (double v : tg.h_pde) REQUIRE(v == 0.0);
  for (double v : tg.u0_ic) REQUIRE(v == 0.0);

  const FeatureSet fs =
      testbasis::analytic_features(prob, col, testbasis::burgers_sine_chebyshev_basis(3, 2));
  const Vector zero_head(static_cast<std::size_t>(fs.width), 0.0);
  const auto norms = residual_report(prob, fs, tg, zero_head);
  REQUIRE(norms[0] == 0.0);
  REQUIRE(norms[1] == 0.0);
  REQUIRE(norms[2] == 0.0);
}
