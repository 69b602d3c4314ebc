#pragma once

// On-disk formats (see docs/formats.md):
//  - datasets: manifest.txt (structured text; thetas as hex floats so the
//    round trip is bit exact) plus one raw little-endian float64 grid file
//    per instance, row-major;
//  - models: one self-describing binary file, version tagged;
//  - CSV emitters for results, timings, and training traces.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pipinn/errors.hpp"
#include "pipinn/grid.hpp"
#include "pipinn/problems.hpp"
#include "pipinn/training.hpp"

namespace pipinn {

namespace detail {

inline void require_little_endian() {
  const std::uint16_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  if (b != 1) throw IoError("file formats are little-endian; big-endian hosts are unsupported");
}

inline std::string hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hex_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw IoError("malformed float '" + s + "'");
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Raw grid files
// ---------------------------------------------------------------------------

inline void write_grid_file(const std::string& path, const Grid& g) {
  detail::require_little_endian();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(g.v.data()),
            static_cast<std::streamsize>(g.v.size() * sizeof(double)));
  if (!out) throw IoError("short write to '" + path + "'");
}

inline Grid read_grid_file(const std::string& path, int n0, int n1) {
  detail::require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  Grid g;
  g.n0 = n0;
  g.n1 = n1;
  g.v.resize(static_cast<std::size_t>(n0) * n1);
  in.read(reinterpret_cast<char*>(g.v.data()),
          static_cast<std::streamsize>(g.v.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(g.v.size() * sizeof(double)))
    throw IoError("grid file '" + path + "' is truncated");
  return g;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

inline std::string instance_grid_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "inst_%05zu.f64", index);
  return buf;
}

inline void save_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / "manifest.txt");
  if (!out) throw IoError("cannot write manifest in '" + dir + "'");
  out << "format = pipinn-dataset-v1\n";
  out << "problem = " << ds.problem.name << "\n";
  out << "seed = " << ds.seed << "\n";
  out << "count = " << ds.instances.size() << "\n";
  out << "n0 = " << ds.problem.n0 << "\n";
  out << "n1 = " << ds.problem.n1 << "\n";
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const PdeInstance& inst = ds.instances[i];
    out << "instance " << i;
    for (double t : inst.theta) out << ' ' << detail::hex_double(t);
    out << (inst.reference ? " " + instance_grid_name(i) : std::string(" -")) << "\n";
    if (inst.reference) write_grid_file((fs::path(dir) / instance_grid_name(i)).string(), *inst.reference);
  }
  if (!out) throw IoError("short manifest write in '" + dir + "'");
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.txt");
  if (!in) throw IoError("cannot open manifest in '" + dir + "'");

  Dataset ds;
  std::size_t count = 0;
  int n0 = 0, n1 = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "instance") {
      std::size_t idx;
      ls >> idx;
      std::vector<std::string> tokens;
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (tokens.empty()) throw IoError("manifest instance line lacks a grid reference");
      PdeInstance inst;
      for (std::size_t t = 0; t + 1 < tokens.size(); ++t)
        inst.theta.push_back(detail::parse_hex_double(tokens[t]));
      if (tokens.back() != "-")
        inst.reference = read_grid_file((fs::path(dir) / tokens.back()).string(), n0, n1);
      if (idx != ds.instances.size()) throw IoError("manifest instance indices out of order");
      ds.instances.push_back(std::move(inst));
      continue;
    }
    std::string eq, value;
    ls >> eq >> value;
    if (eq != "=") throw IoError("malformed manifest line: " + line);
    if (key == "format") {
      if (value != "pipinn-dataset-v1") throw IoError("unsupported dataset format " + value);
    } else if (key == "problem") {
      ds.problem = problem_by_name(value);
    } else if (key == "seed") {
      ds.seed = std::stoull(value);
    } else if (key == "count") {
      count = std::stoul(value);
    } else if (key == "n0") {
      n0 = std::stoi(value);
    } else if (key == "n1") {
      n1 = std::stoi(value);
    } else {
      throw IoError("unknown manifest key '" + key + "'");
    }
  }
  if (ds.instances.size() != count) throw IoError("manifest count mismatch");
  if (n0 != ds.problem.n0 || n1 != ds.problem.n1)
    throw IoError("manifest grid shape disagrees with the problem definition");
  return ds;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline std::uint64_t get_u64(std::ifstream& in) {
  std::uint64_t v;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
inline double get_f64(std::ifstream& in) {
  double v;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace detail

inline constexpr char kModelMagic[8] = {'P', 'I', 'P', 'I', 'N', 'N', 'v', '1'};

inline void save_model(const std::string& path, const TrainedModel& model) {
  detail::require_little_endian();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  out.write(kModelMagic, 8);
  detail::put_u32(out, static_cast<std::uint32_t>(model.kind));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.variant));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.activation));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.input_dim));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.hidden_layers));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.nodes));
  detail::put_f64(out, model.config.freq_factor);
  detail::put_u64(out, model.config.init_seed);
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.input_bounds.size()));
  for (const auto& [lo, hi] : model.config.input_bounds) {
    detail::put_f64(out, lo);
    detail::put_f64(out, hi);
  }
  detail::put_u32(out, static_cast<std::uint32_t>(model.problem.size()));
  out.write(model.problem.data(), static_cast<std::streamsize>(model.problem.size()));
  detail::put_u32(out, model.has_lw ? 1u : 0u);
  detail::put_f64(out, model.lw.rho_pde);
  detail::put_f64(out, model.lw.rho_pi);
  detail::put_u32(out, static_cast<std::uint32_t>(model.params.heads.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config.embedding_width()));
  for (std::size_t l = 0; l < model.params.w.size(); ++l) {
    const Matrix& w = model.params.w[l];
    out.write(reinterpret_cast<const char*>(w.a.data()),
              static_cast<std::streamsize>(w.a.size() * sizeof(double)));
    const Vector& b = model.params.b[l];
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size() * sizeof(double)));
  }
  for (const Vector& h : model.params.heads)
    out.write(reinterpret_cast<const char*>(h.data()),
              static_cast<std::streamsize>(h.size() * sizeof(double)));
  if (!out) throw IoError("short write to model file '" + path + "'");
}

inline TrainedModel load_model(const std::string& path) {
  detail::require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, kModelMagic, 8) != 0)
    throw IoError("'" + path + "' is not a model file (bad magic)");
  TrainedModel model;
  model.kind = static_cast<ModelKind>(detail::get_u32(in));
  model.config.variant = static_cast<Variant>(detail::get_u32(in));
  model.config.activation = static_cast<Activation>(detail::get_u32(in));
  model.config.input_dim = static_cast<int>(detail::get_u32(in));
  model.config.hidden_layers = static_cast<int>(detail::get_u32(in));
  model.config.nodes = static_cast<int>(detail::get_u32(in));
  model.config.freq_factor = detail::get_f64(in);
  model.config.init_seed = detail::get_u64(in);
  const std::uint32_t nb = detail::get_u32(in);
  for (std::uint32_t i = 0; i < nb; ++i) {
    const double lo = detail::get_f64(in);
    const double hi = detail::get_f64(in);
    model.config.input_bounds.emplace_back(lo, hi);
  }
  const std::uint32_t name_len = detail::get_u32(in);
  model.problem.resize(name_len);
  in.read(model.problem.data(), name_len);
  model.has_lw = detail::get_u32(in) != 0;
  model.lw.rho_pde = detail::get_f64(in);
  model.lw.rho_pi = detail::get_f64(in);
  const std::uint32_t head_count = detail::get_u32(in);
  const std::uint32_t width = detail::get_u32(in);
  model.config.validate();
  if (width != static_cast<std::uint32_t>(model.config.embedding_width()))
    throw IoError("model file embedding width disagrees with its config");
  model.params.w.clear();
  model.params.b.clear();
  for (int l = 0; l < model.config.hidden_layers; ++l) {
    const int fan_in = l == 0 ? model.config.input_dim : model.config.nodes;
    Matrix w(static_cast<std::size_t>(model.config.nodes), static_cast<std::size_t>(fan_in));
    in.read(reinterpret_cast<char*>(w.a.data()),
            static_cast<std::streamsize>(w.a.size() * sizeof(double)));
    model.params.w.push_back(std::move(w));
    Vector b(static_cast<std::size_t>(model.config.nodes));
    in.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(b.size() * sizeof(double)));
    model.params.b.push_back(std::move(b));
  }
  for (std::uint32_t h = 0; h < head_count; ++h) {
    Vector head(width);
    in.read(reinterpret_cast<char*>(head.data()),
            static_cast<std::streamsize>(head.size() * sizeof(double)));
    model.params.heads.push_back(std::move(head));
  }
  if (!in) throw IoError("model file '" + path + "' is truncated");
  return model;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw IoError("cannot write '" + path + "'");
    out_ << header << "\n";
  }

  template <typename... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, put(fields)), ...);
    out_ << "\n";
  }

  void flush() { out_.flush(); }

 private:
  void put(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out_ << buf;
  }
  void put(int v) { out_ << v; }
  void put(long v) { out_ << v; }
  void put(std::size_t v) { out_ << v; }
  void put(const std::string& s) { out_ << s; }
  void put(const char* s) { out_ << s; }

  std::ofstream out_;
};

}  // namespace pipinn
