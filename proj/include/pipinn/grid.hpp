#pragma once

// Solution grids: row-major n0 x n1 with the slow index first (t or y rows,
// x fastest). 1D problems use n0 = 1.

#include <cmath>
#include <cstddef>
#include <vector>

#include "pipinn/errors.hpp"

namespace pipinn {

struct Grid {
  int n0 = 0, n1 = 0;
  std::vector<double> v;

  std::size_t size() const { return v.size(); }
  double& at(int i0, int i1) { return v[static_cast<std::size_t>(i0) * n1 + i1]; }
  double at(int i0, int i1) const { return v[static_cast<std::size_t>(i0) * n1 + i1]; }
};

// ||pred - ref||_2 / ||ref||_2 over all grid points.
inline double rel_l2(const Grid& pred, const Grid& ref) {
  if (pred.n0 != ref.n0 || pred.n1 != ref.n1 || pred.v.size() != ref.v.size())
    throw DimensionMismatch("rel_l2: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.v.size(); ++i) {
    const double d = pred.v[i] - ref.v[i];
    num += d * d;
    den += ref.v[i] * ref.v[i];
  }
  if (den == 0.0) throw ZeroReference("rel_l2: reference grid is identically zero");
  return std::sqrt(num / den);
}

}  // namespace pipinn
