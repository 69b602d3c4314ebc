#pragma once

// Method-of-lines reference solver for the forced periodic Burgers problem:
// 4th-order central differences in x on a refined periodic grid, classical
// RK4 in time with a CFL-safe step, downsampled to the target grid. The
// public entry point solves at two refinements and only accepts the result
// once doubling changes it by at most self_tol in relative L2.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pipinn/errors.hpp"
#include "pipinn/grid.hpp"

namespace pipinn {

struct FamilyGridSpec {
  int nx_out = 51;   // includes the wrapped duplicate at x = 1
  int nt_out = 26;   // includes t = 0
  double t_end = 0.5;
};

namespace detail {

// 4th-order periodic stencils
inline void burgers_rhs(const std::vector<double>& u, double t, double gamma, double dx,
                        const std::function<double(double, double)>& h, double x0, double dx_h,
                        std::vector<double>& out) {
  const int n = static_cast<int>(u.size());
  const double c1 = 1.0 / (12.0 * dx);
  const double c2 = 1.0 / (12.0 * dx * dx);
  for (int j = 0; j < n; ++j) {
    const int jm2 = (j - 2 + n) % n, jm1 = (j - 1 + n) % n;
    const int jp1 = (j + 1) % n, jp2 = (j + 2) % n;
    const double ux = (u[jm2] - 8.0 * u[jm1] + 8.0 * u[jp1] - u[jp2]) * c1;
    const double uxx = (-u[jm2] + 16.0 * u[jm1] - 30.0 * u[j] + 16.0 * u[jp1] - u[jp2]) * c2;
    out[j] = -u[j] * ux + gamma * uxx + h(x0 + j * dx_h, t);
  }
}

}  // namespace detail

inline Grid solve_family_once(const std::function<double(double, double)>& h,
                              const std::function<double(double)>& u0, double gamma,
                              const FamilyGridSpec& spec, int refinement) {
  if (refinement < 1) throw DimensionMismatch("solve_family_once: refinement must be >= 1");
  const int cells_out = spec.nx_out - 1;
  const int n = cells_out * refinement;
  const double dx = 1.0 / n;

  std::vector<double> u(static_cast<std::size_t>(n));
  double umax = 0.0, hmax = 0.0;
  for (int j = 0; j < n; ++j) {
    u[j] = u0(j * dx);
    umax = std::max(umax, std::fabs(u[j]));
  }
  const double dt_probe = spec.t_end / 64.0;
  for (int k = 0; k <= 64; ++k)
    for (int j = 0; j < n; ++j) hmax = std::max(hmax, std::fabs(h(j * dx, k * dt_probe)));
  const double u_bound = 1.5 * (umax + spec.t_end * hmax) + 1.0;

  // RK4 stability margins for the 4th-order stencils
  const double dt_diff = 0.3 * dx * dx / std::max(gamma, 1e-12);
  const double dt_adv = 0.5 * dx / u_bound;
  const double dt_max = std::min(dt_diff, dt_adv);

  const double dt_out = spec.t_end / (spec.nt_out - 1);
  const int sub = std::max(1, static_cast<int>(std::ceil(dt_out / dt_max)));
  const double dt = dt_out / sub;

  Grid out;
  out.n0 = spec.nt_out;
  out.n1 = spec.nx_out;
  out.v.assign(static_cast<std::size_t>(spec.nt_out) * spec.nx_out, 0.0);
  auto store = [&](int row) {
    for (int i = 0; i < cells_out; ++i) out.v[static_cast<std::size_t>(row) * spec.nx_out + i] = u[static_cast<std::size_t>(i) * refinement];
    out.v[static_cast<std::size_t>(row) * spec.nx_out + cells_out] = u[0];  // periodic wrap
  };
  store(0);

  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  double t = 0.0;
  for (int row = 1; row < spec.nt_out; ++row) {
    for (int s = 0; s < sub; ++s) {
      detail::burgers_rhs(u, t, gamma, dx, h, 0.0, dx, k1);
      for (int j = 0; j < n; ++j) tmp[j] = u[j] + 0.5 * dt * k1[j];
      detail::burgers_rhs(tmp, t + 0.5 * dt, gamma, dx, h, 0.0, dx, k2);
      for (int j = 0; j < n; ++j) tmp[j] = u[j] + 0.5 * dt * k2[j];
      detail::burgers_rhs(tmp, t + 0.5 * dt, gamma, dx, h, 0.0, dx, k3);
      for (int j = 0; j < n; ++j) tmp[j] = u[j] + dt * k3[j];
      detail::burgers_rhs(tmp, t + dt, gamma, dx, h, 0.0, dx, k4);
      for (int j = 0; j < n; ++j)
        u[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
      t += dt;
    }
    double cur = 0.0;
    for (double v : u) {
      if (!std::isfinite(v)) throw NonFinite("solve_family_once: state became non-finite");
      cur = std::max(cur, std::fabs(v));
    }
    if (cur > u_bound)
      throw CflViolation("solve_family_once: state exceeded the CFL bound " +
                         std::to_string(u_bound));
    store(row);
  }
  return out;
}

struct NotConverged : Error {
  explicit NotConverged(const std::string& what) : Error(what) {}
};

// Escalating self-convergence gate: doubling the refinement must change the
// downsampled solution by <= self_tol in relative L2; the finer solve wins.
inline Grid reference_solve_family(const std::function<double(double, double)>& h,
                                   const std::function<double(double)>& u0, double gamma,
                                   const FamilyGridSpec& spec, int refinement = 4,
                                   double self_tol = 1e-4, int max_refinement = 32) {
  Grid coarse = solve_family_once(h, u0, gamma, spec, refinement);
  for (int r = refinement * 2; r <= max_refinement; r *= 2) {
    Grid fine = solve_family_once(h, u0, gamma, spec, r);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < fine.v.size(); ++i) {
      const double d = coarse.v[i] - fine.v[i];
      num += d * d;
      den += fine.v[i] * fine.v[i];
    }
    const double change = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    if (change <= self_tol) return fine;
    coarse = std::move(fine);
  }
  throw NotConverged("reference_solve_family: self-convergence not reached by refinement " +
                     std::to_string(max_refinement));
}

}  // namespace pipinn
