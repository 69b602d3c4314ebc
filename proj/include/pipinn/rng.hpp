#pragma once

#include <cstdint>
#include <random>

namespace pipinn {

// splitmix64; used to derive independent per-instance streams from a root seed.
inline std::uint64_t split_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled uniform mapping so streams are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1)
  double canonical() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * canonical(); }

  // uniform in (lo, hi]: mirrors U(0,1] sampling used for strictly-positive parameters
  double uniform_open_lo(double lo, double hi) { return hi - (hi - lo) * canonical(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // n is tiny relative to 2^64; modulo bias is negligible and deterministic
    return gen_() % n;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace pipinn
