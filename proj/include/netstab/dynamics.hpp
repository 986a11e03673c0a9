#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>

#include "netstab/errors.hpp"
#include "netstab/fundamental_diagram.hpp"
#include "netstab/matrix.hpp"
#include "netstab/network.hpp"

namespace netstab {

/// Demands below this value on a non-empty cell are treated as "nothing to throttle".
inline constexpr double kDemandFloor = 1e-12;

/// Throttling decision of a flow oracle for one step.
struct Throttle {
  Vector s;         // fraction of the attempted outflow that leaves each cell, in [0, 1]
  Vector accepted;  // accepted external inflow per cell, in [0, v_i]
};

/// Everything that moved during one step.
struct FlowBreakdown {
  Vector attempted;  // f_i(d, x_i)
  Vector supply;     // g_i(d, x)
  Vector s;
  Vector w;          // accepted / v (1 when v = 0)
  Vector accepted;   // w_i v_i
  Vector outflow;    // s_i f_i
  Vector inflow;     // accepted_i + sum_j sent(j, i)
  Vector exit;       // Q_i s_i f_i
  Matrix sent;       // sent(i, j) = p(i, j) s_i f_i
};

struct StepResult {
  Vector x;
  FlowBreakdown flows;
};

/// A flow oracle maps (x, v, attempted demands, supplies) to a throttle that must
/// satisfy the inflow bound F_in <= g and give s = w = 1 when nothing is congested.
template <class O>
concept FlowOracle = requires(const O& o, const NetworkSpec& spec, std::span<const double> x,
                              std::span<const double> v, std::span<const double> f, std::span<const double> g) {
  { o(spec, x, v, f, g) } -> std::convertible_to<Throttle>;
};

/// Priority merge: external inflow is served first (w_i v_i = min(v_i, g_i)); the
/// remaining supply of a cell goes to its feeders in priority order, each taking
/// its full attempted share p(i, j) f_i while supply lasts. A diverging cell is
/// throttled by its most restrictive successor. On the 8-cell freeway-to-freeway
/// layout this is exactly the on-ramp/mainline rule with mainline priority at the merge.
struct PriorityMerge {
  Throttle operator()(const NetworkSpec& spec, std::span<const double> x, std::span<const double> v,
                      std::span<const double> f, std::span<const double> g) const {
    const std::size_t n = spec.n;
    Throttle t{Vector(n, 1.0), Vector(n, 0.0)};
    Matrix allowed(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      t.accepted[j] = std::min(v[j], g[j]);
      double remaining = std::max(0.0, g[j] - v[j]);
      for (std::size_t i : feeders_by_priority(spec, j)) {
        const double want = spec.P(i, j) * f[i];
        allowed(i, j) = std::min(want, remaining);
        remaining = std::max(0.0, remaining - want);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] == 0.0 || f[i] < kDemandFloor) continue;
      double s = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (spec.has_edge(i, j)) s = std::min(s, allowed(i, j) / (spec.P(i, j) * f[i]));
      t.s[i] = std::clamp(s, 0.0, 1.0);
    }
    return t;
  }
};

static_assert(FlowOracle<PriorityMerge>);

inline void require_state(const NetworkSpec& spec, std::span<const double> x) {
  if (x.size() != spec.n) throw StructuralError("state has wrong length");
  for (std::size_t i = 0; i < spec.n; ++i)
    if (!(x[i] >= 0.0 && x[i] <= spec.a[i]))
      throw DomainError("cell " + std::to_string(i + 1) + ": density " + std::to_string(x[i]) +
                        " outside [0, a]");
}

inline void require_inflow(const NetworkSpec& spec, std::span<const double> v) {
  if (v.size() != spec.n) throw StructuralError("inflow vector has wrong length");
  for (std::size_t i = 0; i < spec.n; ++i)
    if (!(v[i] >= 0.0)) throw DomainError("cell " + std::to_string(i + 1) + ": negative external inflow");
}

/// Throttle factors s_i for the state (x, v, d) under the given oracle.
template <FlowOracle Oracle = PriorityMerge>
Vector compute_s(const NetworkSpec& spec, const Diagrams& dg, std::span<const double> x,
                 std::span<const double> v, std::span<const double> d, const Oracle& oracle = {}) {
  require_state(spec, x);
  require_inflow(spec, v);
  dg.D.require(d);
  const Vector f = dg.demands(d, x);
  const Vector g = dg.supplies(d, x);
  return Throttle(oracle(spec, x, v, f, g)).s;
}

/// One step of the conservation law
///   x_i+ = x_i - s_i f_i + w_i v_i + sum_j p(j, i) s_j f_j.
template <FlowOracle Oracle = PriorityMerge>
StepResult step(const NetworkSpec& spec, const Diagrams& dg, std::span<const double> x,
                std::span<const double> v, std::span<const double> d, const Oracle& oracle = {}) {
  require_state(spec, x);
  require_inflow(spec, v);
  dg.D.require(d);
  const std::size_t n = spec.n;

  StepResult out;
  FlowBreakdown& fl = out.flows;
  fl.attempted = dg.demands(d, x);
  fl.supply = dg.supplies(d, x);
  Throttle t = oracle(spec, x, v, fl.attempted, fl.supply);
  if (t.s.size() != n || t.accepted.size() != n) throw StructuralError("flow oracle returned wrong sizes");

  fl.s = std::move(t.s);
  fl.accepted = std::move(t.accepted);
  fl.w.assign(n, 1.0);
  fl.outflow.assign(n, 0.0);
  fl.exit.assign(n, 0.0);
  fl.inflow = fl.accepted;
  fl.sent = Matrix(n, n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    if (!(fl.s[i] >= 0.0 && fl.s[i] <= 1.0)) throw NumericalError("throttle factor outside [0, 1]", i);
    if (!(fl.accepted[i] >= 0.0 && fl.accepted[i] <= v[i])) throw NumericalError("accepted inflow outside [0, v]", i);
    if (v[i] > 0.0) fl.w[i] = fl.accepted[i] / v[i];
    fl.outflow[i] = fl.s[i] * fl.attempted[i];
    fl.exit[i] = spec.Qexit[i] * fl.outflow[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (spec.P(i, j) == 0.0) continue;
      fl.sent(i, j) = spec.P(i, j) * fl.outflow[i];
      fl.inflow[j] += fl.sent(i, j);
    }

  out.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double next = x[i] - fl.outflow[i] + fl.inflow[i];
    if (!std::isfinite(next)) throw NumericalError("non-finite density", i);
    if (fl.inflow[i] > fl.supply[i] + 1e-9 * std::max(1.0, fl.supply[i]))
      throw NumericalError("inflow exceeds supply", i);
    if (next < -1e-9 || next > spec.a[i] + 1e-9) throw NumericalError("density left [0, a]", i);
    // absorb last-ulp excursions so the next step's domain check holds
    out.x[i] = std::clamp(next, 0.0, spec.a[i]);
  }
  return out;
}

/// True iff every cell can take its full attempted inflow:
/// v_i + sum_j p(j, i) f_j(d, x_j) <= g_i(d, x).
inline bool is_uncongested(const NetworkSpec& spec, const Diagrams& dg, std::span<const double> x,
                           std::span<const double> v, std::span<const double> d) {
  require_state(spec, x);
  require_inflow(spec, v);
  dg.D.require(d);
  const Vector f = dg.demands(d, x);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double demand = v[i];
    for (std::size_t j = 0; j < spec.n; ++j) demand += spec.P(j, i) * f[j];
    if (demand > dg.supply(i, d, x[i])) return false;
  }
  return true;
}

/// Continuous lower bound on the priority-merge throttle, with a_i in place of
/// f_i in the denominator and the external inflow charged first:
///   min over successors j of min(1, max(0, g_j - v_j - higher-priority demand) / (p(i, j) a_i)),
/// and 1 for cells that only exit.
inline Vector throttle_lower_bound(const NetworkSpec& spec, const Diagrams& dg, std::span<const double> x,
                                   std::span<const double> v, std::span<const double> d) {
  const std::size_t n = spec.n;
  const Vector f = dg.demands(d, x);
  Vector lb(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    double ahead = v[j];
    const double g = dg.supply(j, d, x[j]);
    for (std::size_t i : feeders_by_priority(spec, j)) {
      const double frac = std::max(0.0, g - ahead) / (spec.P(i, j) * spec.a[i]);
      lb[i] = std::min(lb[i], std::min(1.0, frac));
      ahead += spec.P(i, j) * f[i];
    }
  }
  return lb;
}

/// Net change of stored mass minus (accepted inflow - exit flow); zero up to rounding.
inline double mass_balance_residual(std::span<const double> x, const StepResult& r) {
  double before = 0.0, after = 0.0, in = 0.0, out = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    before += x[i];
    after += r.x[i];
    in += r.flows.accepted[i];
    out += r.flows.exit[i];
  }
  return std::abs((after - before) - (in - out));
}

}  // namespace netstab
