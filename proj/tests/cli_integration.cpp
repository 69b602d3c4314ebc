// Drives the installed CLI binary end to end: determinism of generated
// artifacts, exit codes, config validation, and grid round-trips.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef PIPINN_CLI_PATH
#error "PIPINN_CLI_PATH must point at the pipinn binary"
#endif

namespace fs = std::filesystem;

namespace {

const std::string kCli = PIPINN_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path work_dir() {
  static const fs::path p = [] {
    const fs::path dir = fs::temp_directory_path() / "pipinn_cli_it";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  }();
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("gen is byte-identical for a repeated seed and validates its arguments") {
  const fs::path dir = work_dir();
  REQUIRE(run("gen poisson 6 --seed 7 --out " + (dir / "g1").string()) == 0);
  REQUIRE(run("gen poisson 6 --seed 7 --out " + (dir / "g2").string()) == 0);
  REQUIRE(slurp(dir / "g1/manifest.txt") == slurp(dir / "g2/manifest.txt"));
  for (int i = 0; i < 6; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "inst_%05d.f64", i);
    REQUIRE(slurp(dir / "g1" / name) == slurp(dir / "g2" / name));
  }
  REQUIRE(run("gen poisson 6 --seed 8 --out " + (dir / "g3").string()) == 0);
  REQUIRE(slurp(dir / "g1/manifest.txt") != slurp(dir / "g3/manifest.txt"));

  // count = 0 is a usage error
  REQUIRE(run("gen poisson 0 --out " + (dir / "bad").string()) == 2);
  REQUIRE(run("gen nosuch 6 --out " + (dir / "bad").string()) == 2);
}

TEST_CASE("family generation passes the self-convergence gate") {
  const fs::path dir = work_dir();
  REQUIRE(run("gen burgers_family 2 --seed 7 --refinement 4 --out " + (dir / "fam").string()) == 0);
  REQUIRE(fs::exists(dir / "fam/inst_00001.f64"));
}

TEST_CASE("train/eval/gridsearch round trip deterministically") {
  const fs::path dir = work_dir();
  REQUIRE(run("gen poisson 8 --seed 11 --out " + (dir / "ds").string()) == 0);
  write_file(dir / "exp.cfg",
             "problem = poisson\n"
             "dataset = " + (dir / "ds").string() + "\n"
             "method = hydra_pi2\n"
             "K = 3\n"
             "seed = 5\n"
             "hidden_layers = 2\n"
             "nodes = 8\n"
             "steps = 40\n");

  REQUIRE(run("train --config " + (dir / "exp.cfg").string() + " --out " + (dir / "r1").string()) == 0);
  REQUIRE(run("train --config " + (dir / "exp.cfg").string() + " --out " + (dir / "r2").string()) == 0);
  REQUIRE(slurp(dir / "r1/model.pim") == slurp(dir / "r2/model.pim"));
  REQUIRE(slurp(dir / "r1/trace.csv") == slurp(dir / "r2/trace.csv"));
  REQUIRE(fs::exists(dir / "r1/config.txt"));

  REQUIRE(run("eval --config " + (dir / "exp.cfg").string() + " --out " + (dir / "r1").string() +
              " --emit-grids") == 0);
  REQUIRE(run("eval --config " + (dir / "exp.cfg").string() + " --out " + (dir / "r2").string() +
              " --emit-grids") == 0);
  REQUIRE(slurp(dir / "r1/results.csv") == slurp(dir / "r2/results.csv"));
  REQUIRE(slurp(dir / "r1/pred_inst_00004.f64") == slurp(dir / "r2/pred_inst_00004.f64"));

  // one row per instance
  const std::string results = slurp(dir / "r1/results.csv");
  REQUIRE(std::count(results.begin(), results.end(), '\n') == 1 + 8);

  REQUIRE(run("gridsearch --config " + (dir / "exp.cfg").string() + " --out " +
              (dir / "r1").string()) == 0);
  REQUIRE(fs::exists(dir / "r1/gridsearch.txt"));
}

TEST_CASE("resume from a model reproduces an identical continued trace") {
  const fs::path dir = work_dir();
  REQUIRE(run("train --config " + (dir / "exp.cfg").string() + " --out " + (dir / "c1").string() +
              " --resume " + (dir / "r1/model.pim").string()) == 0);
  REQUIRE(run("train --config " + (dir / "exp.cfg").string() + " --out " + (dir / "c2").string() +
              " --resume " + (dir / "r1/model.pim").string()) == 0);
  REQUIRE(slurp(dir / "c1/trace.csv") == slurp(dir / "c2/trace.csv"));
  REQUIRE(slurp(dir / "c1/model.pim") == slurp(dir / "c2/model.pim"));
}

TEST_CASE("config validation names the offending field") {
  const fs::path dir = work_dir();
  write_file(dir / "bad_method.cfg",
             "problem = poisson\n"
             "dataset = " + (dir / "ds").string() + "\n"
             "method = wizardry\n");
  REQUIRE(run("train --config " + (dir / "bad_method.cfg").string() + " --out " +
              (dir / "bad").string()) == 2);

  write_file(dir / "bad_key.cfg",
             "problem = poisson\n"
             "dataset = " + (dir / "ds").string() + "\n"
             "stepz = 100\n");
  REQUIRE(run("train --config " + (dir / "bad_key.cfg").string() + " --out " +
              (dir / "bad").string()) == 2);

  write_file(dir / "bad_k.cfg",
             "problem = poisson\n"
             "dataset = " + (dir / "ds").string() + "\n"
             "K = 99\n");
  REQUIRE(run("train --config " + (dir / "bad_k.cfg").string() + " --out " +
              (dir / "bad").string()) == 2);

  REQUIRE(run("train --config /nonexistent.cfg --out " + (dir / "bad").string()) == 4);
}

TEST_CASE("single_pinn and mlp methods run through the CLI") {
  const fs::path dir = work_dir();
  write_file(dir / "mlp.cfg",
             "problem = poisson\n"
             "dataset = " + (dir / "ds").string() + "\n"
             "method = mlp\n"
             "K = 3\n"
             "seed = 5\n"
             "hidden_layers = 2\n"
             "nodes = 8\n"
             "steps = 40\n");
  REQUIRE(run("train --config " + (dir / "mlp.cfg").string() + " --out " + (dir / "m1").string()) == 0);
  REQUIRE(run("eval --config " + (dir / "mlp.cfg").string() + " --out " + (dir / "m1").string()) == 0);

  write_file(dir / "sp.cfg",
             "problem = poisson\n"
             "dataset = " + (dir / "ds").string() + "\n"
             "method = single_pinn\n"
             "K = 3\n"
             "seed = 5\n"
             "hidden_layers = 2\n"
             "nodes = 8\n"
             "steps = 30\n"
             "instance = 4\n");
  REQUIRE(run("train --config " + (dir / "sp.cfg").string() + " --out " + (dir / "sp1").string()) == 0);

  REQUIRE(run("bench --config " + (dir / "exp.cfg").string() + " --out " + (dir / "r1").string()) == 0);
  REQUIRE(fs::exists(dir / "r1/bench.txt"));
}
