#pragma once

// A Jet bundles a feature value with the input derivatives a differential
// operator consumes: selected first derivatives plus diagonal second
// derivatives (u_xx, u_yy). Which entries exist is declared by a JetSpec.

#include <cstddef>
#include <string>
#include <vector>

#include "pipinn/errors.hpp"

namespace pipinn {

struct JetSpec {
  int input_dim = 0;
  std::vector<int> first_dirs;   // input indices
  std::vector<int> second_dirs;  // input indices; (i,i) diagonal pairs only

  void validate() const {
    for (int d : first_dirs)
      if (d < 0 || d >= input_dim) throw DimensionMismatch("JetSpec: first dir out of range");
    for (int d : second_dirs)
      if (d < 0 || d >= input_dim) throw DimensionMismatch("JetSpec: second dir out of range");
    if (first_dirs.size() > 2 || second_dirs.size() > 2)
      throw DimensionMismatch("JetSpec: at most two directions of each order are supported");
  }
};

struct Jet {
  double value = 0.0;
  std::vector<double> first;   // aligned with JetSpec::first_dirs
  std::vector<double> second;  // aligned with JetSpec::second_dirs
};

}  // namespace pipinn
