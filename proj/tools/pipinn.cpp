// Command-line harness: dataset generation, training, zero-shot evaluation,
// lambda grid search, and latency benchmarking.
//
//   pipinn gen <problem> <count> [--seed N] [--out DIR] ...
//   pipinn train --config FILE [--out DIR] [--resume MODEL]
//   pipinn eval --config FILE [--out DIR] [--emit-grids] [--grid-search]
//   pipinn gridsearch --config FILE [--out DIR]
//   pipinn bench --config FILE [--out DIR]
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O failure.
// PIPINN_OUT sets the default output root. results/trace CSVs and all model
// and dataset files are byte-reproducible from config + seed at --threads 1;
// timing CSVs and bench reports are measurements and are written separately.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pipinn/config.hpp"
#include "pipinn/io.hpp"
#include "pipinn/parallel.hpp"
#include "pipinn/problems.hpp"
#include "pipinn/training.hpp"

namespace fs = std::filesystem;
using namespace pipinn;

namespace {

std::string default_out_root() {
  if (const char* env = std::getenv("PIPINN_OUT")) return env;
  return "out";
}

struct Experiment {
  Problem problem;
  std::string dataset_dir;
  std::string method = "hydra_pi2";
  int k = 2;
  std::uint64_t seed = 0;
  // network
  int hidden_layers = 4;
  int nodes = 50;
  double freq_factor = 0.0;  // 0 = problem default
  std::string activation;   // "" = variant default
  // training
  TrainConfig tc;
  // adaptation
  double lambda_pde = 0.0;  // 0 = not set (grid search or learned)
  double lambda_pi = -1.0;  // <0 = not set
  int picard_iters = 0;
  std::string picard_init = "ic_extension";
  // eval / bench
  std::string model_path;
  bool grid_search = false;
  long instance = -1;  // single_pinn / bench target; -1 = first unseen
  double target_loss = 0.0;
};

Experiment read_experiment(const KvConfig& cfg) {
  Experiment e;
  e.problem = problem_by_name(cfg.get_string("problem"));
  e.dataset_dir = cfg.get_string("dataset", "");
  e.method = cfg.get_string("method", "hydra_pi2");
  e.k = static_cast<int>(cfg.get_int("K", 2));
  e.seed = cfg.get_u64("seed", 0);
  e.hidden_layers = static_cast<int>(cfg.get_int("hidden_layers", 4));
  e.nodes = static_cast<int>(cfg.get_int("nodes", 50));
  e.freq_factor = cfg.get_double("freq_factor", 0.0);
  e.activation = cfg.get_string("activation", "");
  e.tc.lr = cfg.get_double("lr", 1e-3);
  e.tc.steps = static_cast<int>(cfg.get_int("steps", 2000));
  e.tc.batch_instances = static_cast<int>(cfg.get_int("batch_instances", 4));
  e.tc.batch_points = static_cast<int>(cfg.get_int("batch_points", 0));
  e.tc.seed = e.seed;
  e.lambda_pde = cfg.get_double("lambda_pde", 0.0);
  e.lambda_pi = cfg.get_double("lambda_pi", -1.0);
  e.picard_iters = static_cast<int>(cfg.get_int("picard_iters", 0));
  e.picard_init = cfg.get_string("picard_init", "ic_extension");
  e.model_path = cfg.get_string("model", "");
  e.grid_search = cfg.get_bool("grid_search", false);
  e.instance = cfg.get_int("instance", -1);
  e.target_loss = cfg.get_double("target_loss", 0.0);
  e.tc.target_loss = e.target_loss;
  e.tc.picard_iters = e.picard_iters;
  cfg.reject_unknown();

  static const std::vector<std::string> methods = {"mlp", "mlp_pi2", "hydra_pi2", "pil",
                                                   "single_pinn"};
  if (std::find(methods.begin(), methods.end(), e.method) == methods.end())
    throw ConfigError("key 'method': '" + e.method +
                      "' is not one of mlp|mlp_pi2|hydra_pi2|pil|single_pinn");
  if (e.picard_init != "zero" && e.picard_init != "ic_extension")
    throw ConfigError("key 'picard_init': expected zero|ic_extension");
  if (e.k < 1) throw ConfigError("key 'K': must be >= 1");
  return e;
}

Variant method_variant(const std::string& method) {
  return (method == "mlp" || method == "mlp_pi2") ? Variant::plain_mlp : Variant::concat_skip;
}

NetConfig experiment_net_config(const Experiment& e) {
  const Variant variant = method_variant(e.method);
  Activation act = variant == Variant::plain_mlp ? Activation::tanh : Activation::sine;
  if (e.activation == "sine") act = Activation::sine;
  if (e.activation == "tanh") act = Activation::tanh;
  const double freq = e.freq_factor > 0.0 ? e.freq_factor : e.problem.default_freq;
  return problem_net_config(e.problem, variant, e.hidden_layers, e.nodes, freq, act, e.seed);
}

AdaptConfig experiment_adapt_config(const Experiment& e) {
  AdaptConfig cfg;
  cfg.lambda_pde = e.lambda_pde > 0.0 ? e.lambda_pde : 1.0;
  cfg.lambda_pi = e.lambda_pi >= 0.0 ? e.lambda_pi : 1e-6;
  cfg.picard_iters = e.picard_iters > 0 ? e.picard_iters : e.problem.default_picard;
  cfg.picard_init = e.picard_init == "zero" ? AdaptConfig::PicardInit::zero
                                            : AdaptConfig::PicardInit::ic_extension;
  return cfg;
}

std::vector<std::size_t> seen_split(const Experiment& e, const Dataset& ds) {
  if (static_cast<std::size_t>(e.k) > ds.instances.size())
    throw ConfigError("key 'K': exceeds the dataset's " + std::to_string(ds.instances.size()) +
                      " instances");
  std::vector<std::size_t> seen(static_cast<std::size_t>(e.k));
  std::iota(seen.begin(), seen.end(), std::size_t{0});
  return seen;
}

void copy_config_into(const std::string& cfg_path, const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::copy_file(cfg_path, fs::path(out_dir) / "config.txt", fs::copy_options::overwrite_existing);
}

void write_trace_csv(const std::string& path, const TrainedModel& model) {
  CsvWriter csv(path, "step,loss,lambda_pde,lambda_pi");
  for (const TraceRow& r : model.trace) csv.row(r.step, r.loss, r.lambda_pde, r.lambda_pi);
}

Dataset load_experiment_dataset(const Experiment& e) {
  if (e.dataset_dir.empty()) throw ConfigError("key 'dataset': required for this command");
  Dataset ds = load_dataset(e.dataset_dir);
  if (ds.problem.kind != e.problem.kind)
    throw ConfigError("key 'dataset': holds problem '" + ds.problem.name + "', config says '" +
                      e.problem.name + "'");
  return ds;
}

// ---------------------------------------------------------------------------

int cmd_gen(const std::string& problem, long count, std::uint64_t seed, const std::string& out,
            int refinement, bool ic_perturb) {
  const Problem prob = problem_by_name(problem);
  if (count < 2) throw ConfigError("argument 'count': need at least 2 instances");
  Dataset ds;
  switch (prob.kind) {
    case ProblemKind::poisson: ds = poisson_make(static_cast<int>(count), seed); break;
    case ProblemKind::helmholtz: ds = helmholtz_make(static_cast<int>(count), seed); break;
    case ProblemKind::burgers_sine: ds = burgers_sine_make(static_cast<int>(count), seed); break;
    case ProblemKind::burgers_family: {
      FamilyMakeOptions opts;
      opts.refinement = refinement;
      opts.ic_perturb = ic_perturb;
      ds = burgers_family_make(static_cast<int>(count), seed, opts);
      break;
    }
  }
  save_dataset(out, ds);
  std::printf("wrote %zu %s instances to %s\n", ds.instances.size(), prob.name.c_str(),
              out.c_str());
  return 0;
}

int cmd_train(const std::string& cfg_path, const std::string& out, const std::string& resume) {
  const Experiment e = read_experiment(KvConfig::parse_file(cfg_path));
  const Dataset ds = load_experiment_dataset(e);
  const std::vector<std::size_t> seen = seen_split(e, ds);
  const NetConfig net = experiment_net_config(e);

  std::optional<TrainedModel> prev;
  if (!resume.empty()) {
    prev = load_model(resume);
    if (prev->problem != e.problem.name)
      throw ConfigError("--resume: model was trained on '" + prev->problem + "'");
  }

  TrainedModel model;
  if (e.method == "mlp" || e.method == "mlp_pi2") {
    model = train_mlp(e.problem, ds, seen, net, e.tc, prev ? &prev->params : nullptr);
  } else if (e.method == "hydra_pi2") {
    model = train_hydra(e.problem, ds, seen, net, e.tc, prev ? &prev->params : nullptr);
  } else if (e.method == "pil") {
    model = train_pil(e.problem, ds, seen, net, e.tc, prev ? &prev->params : nullptr,
                      prev && prev->has_lw ? &prev->lw : nullptr);
  } else {  // single_pinn
    const std::size_t id = e.instance >= 0 ? static_cast<std::size_t>(e.instance) : 0;
    if (id >= ds.instances.size()) throw ConfigError("key 'instance': out of range");
    const SinglePinnResult res = train_single_pinn(e.problem, ds.instances[id], net, e.tc,
                                                   experiment_adapt_config(e));
    model = res.model;
    std::printf("single_pinn: %d steps in %.2f s\n", res.steps_run, res.train_seconds);
  }

  copy_config_into(cfg_path, out);
  save_model((fs::path(out) / "model.pim").string(), model);
  write_trace_csv((fs::path(out) / "trace.csv").string(), model);
  std::printf("final training loss: %.6e\n", model.trace.empty() ? 0.0 : model.trace.back().loss);
  std::printf("model written to %s\n", (fs::path(out) / "model.pim").string().c_str());
  return 0;
}

AdaptConfig resolve_eval_adapt(const Experiment& e, const Dataset& ds, const TrainedModel& model,
                               const std::vector<std::size_t>& seen) {
  AdaptConfig cfg = experiment_adapt_config(e);
  if (model.has_lw) {
    cfg.lambda_pde = model.lw.lambda_pde();
    cfg.lambda_pi = model.lw.lambda_pi();
  }
  if (e.grid_search)
    cfg = grid_search(e.problem, ds, seen, model, default_lambda_pde_grid(),
                      default_lambda_pi_grid(), cfg.picard_iters);
  if (e.lambda_pde > 0.0) cfg.lambda_pde = e.lambda_pde;
  if (e.lambda_pi >= 0.0) cfg.lambda_pi = e.lambda_pi;
  return cfg;
}

int cmd_eval(const std::string& cfg_path, const std::string& out, bool emit_grids) {
  const Experiment e = read_experiment(KvConfig::parse_file(cfg_path));
  const Dataset ds = load_experiment_dataset(e);
  const std::vector<std::size_t> seen = seen_split(e, ds);
  const std::string model_path =
      e.model_path.empty() ? (fs::path(out) / "model.pim").string() : e.model_path;
  const TrainedModel model = load_model(model_path);
  if (model.problem != e.problem.name)
    throw ConfigError("key 'model': trained on '" + model.problem + "', config says '" +
                      e.problem.name + "'");

  const AdaptConfig acfg = resolve_eval_adapt(e, ds, model, seen);
  const EvalMode mode = e.method == "mlp" ? EvalMode::interpolate : EvalMode::adapt;

  std::vector<std::size_t> ids(ds.instances.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  const std::vector<EvalRow> rows = adapt_and_eval(e.problem, ds, ids, model, acfg, mode, seen);

  copy_config_into(cfg_path, out);
  CsvWriter results((fs::path(out) / "results.csv").string(),
                    "problem,method,K,instance_id,split,rel_l2");
  CsvWriter timings((fs::path(out) / "timings.csv").string(),
                    "problem,method,K,instance_id,adapt_ms");
  double mean_unseen = 0.0;
  std::size_t n_unseen = 0;
  for (const EvalRow& r : rows) {
    results.row(e.problem.name, e.method, static_cast<long>(e.k), r.instance_id,
                r.seen ? "seen" : "unseen", r.rel_l2);
    timings.row(e.problem.name, e.method, static_cast<long>(e.k), r.instance_id, r.adapt_ms);
    if (!r.seen) {
      mean_unseen += r.rel_l2;
      ++n_unseen;
    }
  }
  if (emit_grids) {
    const Collocation col = collocation(e.problem);
    for (std::size_t id : ids) {
      const FeatureBundle fb =
          build_features(e.problem, col, model.config, model.params, ds.instances[id].theta);
      Grid pred;
      if (mode == EvalMode::interpolate) {
        pred = predict_grid(e.problem, fb.fs, model.params.heads[0]);
      } else {
        const InstanceTargets tg = instance_targets(e.problem, col, ds.instances[id].theta);
        const AdaptedHead head = e.problem.linear ? adapt_linear(e.problem, fb.fs, tg, acfg)
                                                  : adapt_nonlinear(e.problem, fb.fs, tg, acfg);
        pred = predict_grid(e.problem, fb.fs, head.w);
      }
      write_grid_file((fs::path(out) / ("pred_" + instance_grid_name(id))).string(), pred);
    }
  }
  if (n_unseen > 0)
    std::printf("mean unseen rel_l2: %.6e over %zu instances\n", mean_unseen / n_unseen, n_unseen);
  std::printf("results written to %s\n", (fs::path(out) / "results.csv").string().c_str());
  return 0;
}

int cmd_gridsearch(const std::string& cfg_path, const std::string& out) {
  const Experiment e = read_experiment(KvConfig::parse_file(cfg_path));
  const Dataset ds = load_experiment_dataset(e);
  const std::vector<std::size_t> seen = seen_split(e, ds);
  const std::string model_path =
      e.model_path.empty() ? (fs::path(out) / "model.pim").string() : e.model_path;
  const TrainedModel model = load_model(model_path);
  const int picard = e.picard_iters > 0 ? e.picard_iters : e.problem.default_picard;
  const AdaptConfig best = grid_search(e.problem, ds, seen, model, default_lambda_pde_grid(),
                                       default_lambda_pi_grid(), picard);
  copy_config_into(cfg_path, out);
  std::ofstream f(fs::path(out) / "gridsearch.txt");
  f << "lambda_pde = " << best.lambda_pde << "\n";
  f << "lambda_pi = " << best.lambda_pi << "\n";
  std::printf("selected lambda_pde = %g, lambda_pi = %g\n", best.lambda_pde, best.lambda_pi);
  return 0;
}

int cmd_bench(const std::string& cfg_path, const std::string& out) {
  const Experiment e = read_experiment(KvConfig::parse_file(cfg_path));
  const Dataset ds = load_experiment_dataset(e);
  const std::vector<std::size_t> seen = seen_split(e, ds);
  const std::string model_path =
      e.model_path.empty() ? (fs::path(out) / "model.pim").string() : e.model_path;
  const TrainedModel model = load_model(model_path);
  const AdaptConfig acfg = resolve_eval_adapt(e, ds, model, seen);

  std::size_t id = e.instance >= 0 ? static_cast<std::size_t>(e.instance)
                                   : (seen.size() < ds.instances.size() ? seen.size() : 0);
  if (id >= ds.instances.size()) throw ConfigError("key 'instance': out of range");

  // median-of-5 adaptation wall time
  std::vector<double> times;
  for (int rep = 0; rep < 5; ++rep) {
    const std::vector<EvalRow> rows =
        adapt_and_eval(e.problem, ds, {id}, model, acfg, EvalMode::adapt, seen);
    times.push_back(rows[0].adapt_ms);
  }
  std::sort(times.begin(), times.end());
  const double adapt_ms = times[2];
  std::printf("adaptation wall time (median of 5) on instance %zu: %.2f ms\n", id, adapt_ms);

  double ratio = 0.0, pinn_s = 0.0;
  if (e.target_loss > 0.0 || e.tc.steps > 0) {
    const NetConfig net = experiment_net_config(e);
    const SinglePinnResult res =
        train_single_pinn(e.problem, ds.instances[id], net, e.tc, acfg);
    pinn_s = res.train_seconds;
    ratio = pinn_s * 1000.0 / adapt_ms;
    std::printf("single-instance physics training: %d steps, %.2f s\n", res.steps_run, pinn_s);
    std::printf("speedup ratio (train / adapt): %.0fx\n", ratio);
  }
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream f(fs::path(out) / "bench.txt");
    f << "instance = " << id << "\n";
    f << "adapt_ms_median5 = " << adapt_ms << "\n";
    f << "single_pinn_s = " << pinn_s << "\n";
    f << "speedup_ratio = " << ratio << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudoinverse physics-informed networks"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker cap (1 = canonical bit-exact output)");

  std::string gen_problem, gen_out;
  long gen_count = 0;
  std::uint64_t gen_seed = 0;
  int gen_refinement = 4;
  bool gen_perturb = false;
  CLI::App* gen = app.add_subcommand("gen", "generate a dataset");
  gen->add_option("problem", gen_problem, "poisson|helmholtz|burgers_sine|burgers_family")
      ->required();
  gen->add_option("count", gen_count, "number of instances")->required();
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--refinement", gen_refinement, "family solver refinement");
  gen->add_flag("--ic-perturb", gen_perturb, "perturb family initial conditions");

  std::string train_cfg, train_out, train_resume;
  CLI::App* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", train_cfg, "experiment config")->required();
  train->add_option("--out", train_out, "output directory");
  train->add_option("--resume", train_resume, "continue from a model file");

  std::string eval_cfg, eval_out;
  bool emit_grids = false;
  CLI::App* eval = app.add_subcommand("eval", "zero-shot evaluation");
  eval->add_option("--config", eval_cfg, "experiment config")->required();
  eval->add_option("--out", eval_out, "output directory");
  eval->add_flag("--emit-grids", emit_grids, "write per-instance prediction grids");

  std::string gs_cfg, gs_out;
  CLI::App* gs = app.add_subcommand("gridsearch", "select lambda_pde/lambda_pi on seen instances");
  gs->add_option("--config", gs_cfg, "experiment config")->required();
  gs->add_option("--out", gs_out, "output directory");

  std::string bench_cfg, bench_out;
  CLI::App* bench = app.add_subcommand("bench", "adaptation latency and speedup report");
  bench->add_option("--config", bench_cfg, "experiment config")->required();
  bench->add_option("--out", bench_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  worker_count() = std::max(1, threads);
  const std::string out_root = default_out_root();
  auto out_or = [&](const std::string& v) { return v.empty() ? out_root : v; };

  try {
    if (*gen) return cmd_gen(gen_problem, gen_count, gen_seed, out_or(gen_out), gen_refinement,
                             gen_perturb);
    if (*train) return cmd_train(train_cfg, out_or(train_out), train_resume);
    if (*eval) return cmd_eval(eval_cfg, out_or(eval_out), emit_grids);
    if (*gs) return cmd_gridsearch(gs_cfg, out_or(gs_out));
    if (*bench) return cmd_bench(bench_cfg, out_or(bench_out));
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
