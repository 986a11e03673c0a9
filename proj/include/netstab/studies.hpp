#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "netstab/equilibrium.hpp"
#include "netstab/freeway.hpp"
#include "netstab/simulation.hpp"

namespace netstab::studies {

/// Constant disturbance for the open-loop jam run: d1 = 1, d2 = 0, d3 = 1 and the
/// wave speed d4 chosen in D so that the reported congested point is as close to a
/// fixed point as the model allows.
struct JamDisturbance {
  Disturbance d;
  double residual = 0.0;  // max-norm one-step residual at the congested point
};

inline JamDisturbance jam_disturbance(const NetworkSpec& spec, const Diagrams& dg) {
  const Disturbance base{1.0, 0.0, 1.0, dg.D.center()[3]};
  const ComponentFit fit = fit_disturbance_component(spec, dg, freeway::congested_point(), freeway::vstar(), base, 3,
                                                     dg.D.lower[3], dg.D.upper[3]);
  Disturbance d = base;
  d[3] = fit.value;
  return {d, fit.residual};
}

struct OpenLoopStudy {
  JamDisturbance disturbance;
  TrajectoryRecord record;
  std::optional<std::size_t> settled_at;  // first t with max_i |x_i(t+1) - x_i(t)| < settle_tol
  Vector settled_state;
  double settled_deviation = 0.0;
  double terminal_deviation = 0.0;
  double deficit_cell4 = 0.0;  // capacity flow minus attempted outflow at the settled state
  double deficit_cell8 = 0.0;
};

inline OpenLoopStudy open_loop_jam_study(const NetworkSpec& spec, const Diagrams& dg, const Vector& xstar,
                                         std::size_t horizon = 500, double settle_tol = 1e-6) {
  OpenLoopStudy s;
  s.disturbance = jam_disturbance(spec, dg);
  ScenarioConfig sc;
  sc.x0 = spec.a;
  sc.horizon = horizon;
  sc.disturbance = DisturbanceMode::Constant;
  sc.d = s.disturbance.d;
  sc.v = freeway::vstar();
  sc.reference = xstar;
  s.record = run_scenario(spec, dg, sc);

  for (std::size_t t = 0; t < horizon; ++t) {
    double move = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i)
      move = std::max(move, std::abs(s.record.states[t + 1][i] - s.record.states[t][i]));
    if (move < settle_tol) {
      s.settled_at = t;
      break;
    }
  }
  const std::size_t ts = s.settled_at.value_or(horizon);
  s.settled_state = s.record.states[ts];
  s.settled_deviation = s.record.deviation[ts];
  s.terminal_deviation = s.record.deviation.back();
  auto deficit = [&](std::size_t i) {
    const DemandFunction& fd = dg.cells[i].demand;
    return eval_demand(fd, sc.d, fd.delta) - eval_demand(fd, sc.d, s.settled_state[i]);
  };
  s.deficit_cell4 = deficit(3);
  s.deficit_cell8 = deficit(7);
  return s;
}

struct DecayRun {
  Vector x0;
  TrajectoryRecord record;
  std::optional<std::size_t> below_one_at;  // first t with |x(t) - x*| < 1
  DecayFit fit;
};

/// Closed loop under the experimental regulator from each decay initial condition,
/// with a fresh uniform random disturbance sequence per run.
inline std::vector<DecayRun> closed_loop_decay_study(const NetworkSpec& spec, const Diagrams& dg,
                                                     const ControllerConfig& cfg, std::uint64_t seed,
                                                     std::size_t horizon = 500) {
  std::vector<DecayRun> runs;
  std::uint64_t k = 0;
  for (const Vector& x0 : freeway::decay_initial_conditions()) {
    ScenarioConfig sc;
    sc.x0 = x0;
    sc.horizon = horizon;
    sc.disturbance = DisturbanceMode::UniformRandom;
    sc.seed = seed + k++;
    sc.controller = cfg;
    DecayRun run{x0, run_scenario(spec, dg, sc), std::nullopt, {}};
    for (std::size_t t = 0; t < run.record.deviation.size(); ++t)
      if (run.record.deviation[t] < 1.0) {
        run.below_one_at = t;
        break;
      }
    run.fit = estimate_decay(run.record);
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace netstab::studies
