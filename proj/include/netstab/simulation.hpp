#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <span>
#include <utility>
#include <vector>

#include "netstab/controller.hpp"
#include "netstab/dynamics.hpp"
#include "netstab/errors.hpp"
#include "netstab/fundamental_diagram.hpp"
#include "netstab/network.hpp"
#include "netstab/random.hpp"
#include "netstab/stability.hpp"

namespace netstab {

enum class DisturbanceMode { Constant, UniformRandom };

struct ScenarioConfig {
  Vector x0;
  std::size_t horizon = 500;
  DisturbanceMode disturbance = DisturbanceMode::UniformRandom;
  Disturbance d;               // used when Constant
  std::uint64_t seed = 1;      // used when UniformRandom
  Vector v;                    // open-loop inflow, used when controller is empty
  std::optional<ControllerConfig> controller;
  Vector reference;            // x* for deviations; defaults to the controller's x*
  double step_seconds = 15.0;  // metadata only
  bool keep_flows = true;

  const Vector& ref() const { return reference.empty() && controller ? controller->xstar : reference; }

  void validate(const NetworkSpec& spec, const Diagrams& dg) const {
    require_state(spec, x0);
    if (horizon < 1) throw DomainError("horizon must be at least one step");
    if (disturbance == DisturbanceMode::Constant) dg.D.require(d);
    if (controller) {
      controller->validate();
      if (controller->size() != spec.n) throw StructuralError("controller size differs from network");
    } else {
      require_inflow(spec, v);
    }
    if (ref().size() != spec.n) throw StructuralError("scenario needs a reference state");
  }
};

struct TrajectoryRecord {
  std::vector<Vector> states;       // horizon + 1
  std::vector<Vector> inflows;      // horizon
  std::vector<Disturbance> disturbances;
  std::vector<FlowBreakdown> flows;  // empty unless keep_flows
  Vector deviation;                 // |x(t) - x*|, horizon + 1
  std::vector<LyapunovValue> lyapunov;
  Vector mass_residual;             // per step

  std::size_t horizon() const noexcept { return inflows.size(); }
  double max_mass_residual() const {
    double m = 0.0;
    for (double r : mass_residual) m = std::max(m, r);
    return m;
  }
};

inline TrajectoryRecord run_scenario(const NetworkSpec& spec, const Diagrams& dg, const ScenarioConfig& sc) {
  sc.validate(spec, dg);
  const Vector& xref = sc.ref();
  CounterRng rng(sc.seed, 0);
  TrajectoryRecord rec;
  rec.states.reserve(sc.horizon + 1);
  Vector x = sc.x0;
  auto record_state = [&](const Vector& s) {
    rec.states.push_back(s);
    rec.deviation.push_back(distance(s, xref));
    rec.lyapunov.push_back(lyapunov_eval(s, xref));
  };
  record_state(x);
  for (std::size_t t = 0; t < sc.horizon; ++t) {
    const Disturbance d = sc.disturbance == DisturbanceMode::Constant ? sc.d : dg.D.sample(rng);
    const Vector v = sc.controller ? control_law(*sc.controller, x) : sc.v;
    StepResult r = step(spec, dg, x, v, d);
    rec.mass_residual.push_back(mass_balance_residual(x, r));
    rec.inflows.push_back(v);
    rec.disturbances.push_back(d);
    if (sc.keep_flows) rec.flows.push_back(std::move(r.flows));
    x = std::move(r.x);
    record_state(x);
  }
  return rec;
}

struct DecayFit {
  bool converged_immediately = false;
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double M = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();  // RMS of the log-fit
  std::size_t points = 0;
};

/// Least squares ln|x(t) - x*| = ln M - sigma t over t >= burn_in, using only
/// deviations above 1e-12 (a trajectory that lands on x* exactly has nothing to fit).
inline DecayFit estimate_decay(std::span<const double> deviation, std::size_t burn_in = 0) {
  DecayFit fit;
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t t = burn_in; t < deviation.size(); ++t) {
    if (!(deviation[t] > 1e-12)) continue;
    const double y = std::log(deviation[t]), tt = double(t);
    pts.emplace_back(tt, y);
    st += tt, sy += y, stt += tt * tt, sty += tt * y;
  }
  fit.points = pts.size();
  if (pts.size() < 2) {
    fit.converged_immediately = true;
    return fit;
  }
  const double N = double(pts.size());
  const double den = N * stt - st * st;
  const double slope = (N * sty - st * sy) / den;
  const double icpt = (sy - slope * st) / N;
  fit.sigma = -slope;
  fit.M = std::exp(icpt);
  double ss = 0.0;
  for (const auto& [tt, y] : pts) ss += (y - icpt - slope * tt) * (y - icpt - slope * tt);
  fit.residual = std::sqrt(ss / N);
  return fit;
}

inline DecayFit estimate_decay(const TrajectoryRecord& rec, std::size_t burn_in = 0) {
  return estimate_decay(rec.deviation, burn_in);
}

struct GridlockReport {
  TrajectoryRecord record;
  std::vector<std::size_t> cycle;
  double max_cycle_deviation = 0.0;  // max over t and cycle cells of |x - a|
  bool stationary() const noexcept { return max_cycle_deviation == 0.0; }
};

/// Jams every cell of a directed cycle and drives the network with random inflows in
/// [0, vmax] and random disturbances; the jammed cycle never moves.
inline GridlockReport gridlock_demo(const NetworkSpec& spec, const Diagrams& dg, std::size_t horizon,
                                    std::uint64_t seed, std::optional<Vector> x0 = std::nullopt) {
  check_compatible(spec, dg);
  const auto cycle = find_cycle(spec.P);
  if (!cycle) throw MisuseError("network is acyclic: use analyze/simulate instead of gridlock-demo");
  GridlockReport rep;
  rep.cycle = *cycle;
  Vector x = x0 ? *x0 : Vector(spec.n, 0.0);
  if (!x0)
    for (std::size_t i : rep.cycle) x[i] = spec.a[i];
  require_state(spec, x);

  CounterRng rng(seed, 3);
  TrajectoryRecord& rec = rep.record;
  auto record_state = [&](const Vector& s) {
    rec.states.push_back(s);
    rec.deviation.push_back(distance(s, spec.a));
    rec.lyapunov.push_back(lyapunov_eval(s, spec.a));
    for (std::size_t i : rep.cycle)
      rep.max_cycle_deviation = std::max(rep.max_cycle_deviation, std::abs(s[i] - spec.a[i]));
  };
  record_state(x);
  for (std::size_t t = 0; t < horizon; ++t) {
    Vector v(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) v[i] = rng.uniform(0.0, spec.vmax[i]);
    const Disturbance d = dg.D.sample(rng);
    StepResult r = step(spec, dg, x, v, d);
    rec.mass_residual.push_back(mass_balance_residual(x, r));
    rec.inflows.push_back(v);
    rec.disturbances.push_back(d);
    x = std::move(r.x);
    record_state(x);
  }
  return rep;
}

struct TrapRun {
  std::optional<std::size_t> entered_at;  // first t with x(t) in Omega
  bool left_after_entry = false;
  std::size_t steps = 0;
  double max_mass_residual = 0.0;
};

/// Closed loop from x0 with uniform random d: runs until the state enters Omega (or
/// max_steps), then `stay` more steps watching for an exit.
inline TrapRun run_until_trapped(const NetworkSpec& spec, const Diagrams& dg, const ControllerConfig& cfg,
                                 const InvariantRegion& omega, Vector x, std::uint64_t seed, std::size_t max_steps,
                                 std::size_t stay) {
  CounterRng rng(seed, 5);
  TrapRun run;
  std::size_t left = 0;
  for (std::size_t t = 0;; ++t) {
    const bool inside = omega.contains(x);
    if (inside && !run.entered_at) run.entered_at = t;
    if (run.entered_at && !inside) run.left_after_entry = true;
    if (run.entered_at ? left++ >= stay : t >= max_steps) break;
    const Disturbance d = dg.D.sample(rng);
    StepResult r = step(spec, dg, x, control_law(cfg, x), d);
    run.max_mass_residual = std::max(run.max_mass_residual, mass_balance_residual(x, r));
    x = std::move(r.x);
    ++run.steps;
  }
  return run;
}

/// Columns t, x_1..x_n, v_1..v_n, deviation, V_1..V_2n; v is blank on the terminal row.
inline void export_csv(const TrajectoryRecord& rec, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot open " + path + " for writing");
  const std::size_t n = rec.states.empty() ? 0 : rec.states.front().size();
  std::fputs("t", f);
  for (std::size_t i = 1; i <= n; ++i) std::fprintf(f, ",x_%zu", i);
  for (std::size_t i = 1; i <= n; ++i) std::fprintf(f, ",v_%zu", i);
  std::fputs(",deviation", f);
  for (std::size_t i = 1; i <= 2 * n; ++i) std::fprintf(f, ",V_%zu", i);
  std::fputc('\n', f);
  for (std::size_t t = 0; t < rec.states.size(); ++t) {
    std::fprintf(f, "%zu", t);
    for (double x : rec.states[t]) std::fprintf(f, ",%.15g", x);
    for (std::size_t i = 0; i < n; ++i) {
      if (t < rec.inflows.size()) std::fprintf(f, ",%.15g", rec.inflows[t][i]);
      else std::fputc(',', f);
    }
    std::fprintf(f, ",%.15g", rec.deviation[t]);
    for (double V : rec.lyapunov[t].V) std::fprintf(f, ",%.15g", V);
    std::fputc('\n', f);
  }
  const bool bad = std::ferror(f) != 0;
  if (std::fclose(f) != 0 || bad) throw Error("write failed for " + path);
}

}  // namespace netstab
