#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include "netstab/dynamics.hpp"
#include "netstab/errors.hpp"
#include "netstab/fundamental_diagram.hpp"
#include "netstab/network.hpp"

namespace netstab {

struct EquilibriumPair {
  Vector xstar;
  Vector vstar;
  Vector flows;  // F_i = f_i(d, x_i*)

  // Hypotheses of the stability theorem, reported rather than enforced.
  bool below_threshold = true;   // 0 < x_i* < mu_i (x_i* = 0 allowed only when F_i = 0)
  bool below_vmax = true;        // v_i* < v_i^max
  bool below_empty_supply = true;  // v_i* < inf_d g_i(d, 0)
  bool supply_slack_ok = true;   // v_i* + sum_j p(j, i) F_j < g_i(d, x*) on every sampled d
  double min_supply_slack = std::numeric_limits<double>::infinity();
  double max_flow_spread = 0.0;  // max over cells and d-samples of |f_i(d, x_i*) - F_i|

  bool hypotheses_ok() const noexcept {
    return below_threshold && below_vmax && below_empty_supply && supply_slack_ok;
  }
};

struct UepOptions {
  double density_tolerance = 1e-10;
  double invariance_tolerance = 1e-8;
  std::size_t d_samples = 64;
  std::size_t uniqueness_grid = 512;
};

/// F = v* + P'F, solved by forward substitution along `order`.
inline Vector equilibrium_flows(const NetworkSpec& spec, std::span<const double> vstar,
                                std::span<const std::size_t> order) {
  Vector F(spec.n, 0.0);
  for (std::size_t i : order) {
    double in = vstar[i];
    for (std::size_t j = 0; j < spec.n; ++j)
      if (spec.P(j, i) != 0.0) in += spec.P(j, i) * F[j];
    F[i] = in;
  }
  return F;
}

/// Root of f(d, x) = target on the increasing branch [0, delta] by bisection.
inline double invert_subcritical(const DemandFunction& fd, std::span<const double> d, double target,
                                 double tol = 1e-10) {
  double lo = 0.0, hi = fd.delta;
  if (target <= eval_demand(fd, d, lo)) return lo;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (eval_demand(fd, d, mid) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline EquilibriumPair solve_uep(const NetworkSpec& spec, const Diagrams& dg, std::span<const double> vstar,
                                 const UepOptions& opt = {}) {
  check_compatible(spec, dg);
  require_inflow(spec, vstar);
  const std::size_t n = spec.n;
  const TopologicalOrder order = topological_sort(spec.P);

  EquilibriumPair eq;
  eq.vstar.assign(vstar.begin(), vstar.end());
  eq.flows = equilibrium_flows(spec, vstar, order.perm);
  eq.xstar.assign(n, 0.0);

  const Disturbance dc = dg.D.center();
  for (std::size_t i = 0; i < n; ++i) {
    const DemandFunction& fd = dg.cells[i].demand;
    const double cap = subcritical_capacity(fd, dg.D, opt.d_samples);
    if (eq.flows[i] > cap) throw InfeasibleInflow(i, eq.flows[i], cap);
    eq.xstar[i] = invert_subcritical(fd, dc, eq.flows[i], opt.density_tolerance);

    // the increasing branch crosses the level F_i exactly once
    std::size_t crossings = 0;
    double prev = eval_demand(fd, dc, 0.0) - eq.flows[i];
    for (std::size_t k = 1; k <= opt.uniqueness_grid; ++k) {
      const double cur = eval_demand(fd, dc, fd.delta * double(k) / double(opt.uniqueness_grid)) - eq.flows[i];
      if ((prev < 0.0 && cur >= 0.0) || (prev > 0.0 && cur <= 0.0)) ++crossings;
      prev = cur;
    }
    if (crossings > 1) throw NumericalError("demand branch is not monotone below the critical density", i);
  }

  std::vector<Disturbance> ds = dg.D.low_discrepancy(opt.d_samples);
  for (const Disturbance& d : ds) {
    for (std::size_t i = 0; i < n; ++i) {
      const double spread = std::abs(dg.demand(i, d, eq.xstar[i]) - eq.flows[i]);
      eq.max_flow_spread = std::max(eq.max_flow_spread, spread);
      if (spread > opt.invariance_tolerance) throw NonUniformEquilibrium(i, spread);
    }
    for (std::size_t i = 0; i < n; ++i) {
      double in = vstar[i];
      for (std::size_t j = 0; j < n; ++j) in += spec.P(j, i) * eq.flows[j];
      const double slack = dg.supply(i, d, eq.xstar[i]) - in;
      eq.min_supply_slack = std::min(eq.min_supply_slack, slack);
      if (!(slack > 0.0)) eq.supply_slack_ok = false;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (eq.xstar[i] >= spec.mu[i] || (eq.xstar[i] <= 0.0 && eq.flows[i] > 0.0)) eq.below_threshold = false;
    if (!(vstar[i] < spec.vmax[i])) eq.below_vmax = false;
    if (!(vstar[i] < dg.cells[i].supply.min_at_empty(dg.D))) eq.below_empty_supply = false;
  }
  return eq;
}

/// |step(x, v, d) - x| per cell.
inline Vector equilibrium_residual(const NetworkSpec& spec, const Diagrams& dg, std::span<const double> x,
                                   std::span<const double> v, std::span<const double> d) {
  const StepResult r = step(spec, dg, x, v, d);
  Vector res(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) res[i] = std::abs(r.x[i] - x[i]);
  return res;
}

struct ComponentFit {
  double value = 0.0;
  double residual = 0.0;  // max-norm residual at `value`
};

/// Chooses one disturbance component in [lo, hi] so that x is as close to a fixed
/// point as possible: a grid scan followed by golden-section refinement.
inline ComponentFit fit_disturbance_component(const NetworkSpec& spec, const Diagrams& dg, std::span<const double> x,
                                              std::span<const double> v, Disturbance d, std::size_t component,
                                              double lo, double hi, std::size_t grid = 801) {
  if (component >= d.size() || !(lo <= hi)) throw DomainError("invalid disturbance component range");
  auto objective = [&](double t) {
    d[component] = t;
    const Vector r = equilibrium_residual(spec, dg, x, v, d);
    return *std::max_element(r.begin(), r.end());
  };
  double best = lo, best_val = objective(lo);
  for (std::size_t k = 1; k < grid; ++k) {
    const double t = lo + (hi - lo) * double(k) / double(grid - 1);
    const double val = objective(t);
    if (val < best_val) best = t, best_val = val;
  }
  const double h = (hi - lo) / double(grid - 1);
  double a = std::max(lo, best - h), b = std::min(hi, best + h);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a), e = a + phi * (b - a);
  double fc = objective(c), fe = objective(e);
  for (int it = 0; it < 100 && b - a > 1e-13; ++it) {
    if (fc < fe) b = e, e = c, fe = fc, c = b - phi * (b - a), fc = objective(c);
    else a = c, c = e, fc = fe, e = a + phi * (b - a), fe = objective(e);
  }
  const double refined = 0.5 * (a + b);
  const double refined_val = objective(refined);
  if (refined_val < best_val) best = refined, best_val = refined_val;
  return {best, best_val};
}

}  // namespace netstab
