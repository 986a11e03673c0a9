#pragma once

#include <array>
#include <cstddef>

#include "netstab/controller.hpp"
#include "netstab/fundamental_diagram.hpp"
#include "netstab/network.hpp"

/// The 8-cell freeway-to-freeway instance: mainline 1-2-3-4, a second freeway
/// 5-6 merging into 7-8, half of cell 4's outflow leaving at an off-ramp.
namespace netstab::freeway {

inline constexpr std::size_t kCells = 8;
inline constexpr double kJam = 170.0;

inline NetworkSpec network() {
  NetworkSpec s;
  s.n = kCells;
  s.a.assign(kCells, kJam);
  s.P = Matrix(kCells, kCells, 0.0);
  s.P(0, 1) = 1.0;
  s.P(1, 2) = 1.0;
  s.P(2, 3) = 1.0;
  s.P(3, 6) = 0.5;
  s.P(4, 5) = 1.0;
  s.P(5, 6) = 1.0;
  s.P(6, 7) = 1.0;
  s.Qexit = {0, 0, 0, 0.5, 0, 0, 0, 1};
  s.mu.assign(kCells, 55.0 + basis::kEps);
  s.mu[4] = s.mu[5] = 27.5 + basis::kEps;
  s.vmax.assign(kCells, 0.3);
  s.vmax[0] = s.vmax[4] = 25.0;
  return s;
}

inline bool is_onramp(std::size_t i) { return i == 4 || i == 5; }

inline Diagrams diagrams() {
  Diagrams dg;
  dg.D = {{0.0, 0.0, 0.0, 0.22}, {1.0, 1.0, 1.0, 0.30}};
  for (std::size_t i = 0; i < kCells; ++i) {
    CellDiagram c;
    c.demand.capacity = c.supply.capacity = kJam;
    if (is_onramp(i)) {
      c.demand.family = DemandFamily::MixedOnRamp;
      c.demand.L = 0.009;
      c.demand.G = 0.9;
    }
    dg.cells.push_back(c);
  }
  return dg;
}

inline Vector vstar() { return {25, 0, 0, 0, 12.5, 0, 0, 0}; }
inline Vector xstar() { return {55, 55, 55, 55, 27.5, 27.5, 55, 55}; }

/// Experimental regulator: K = 0.016 everywhere, tau = 1/2, floor 0.5 on the two entries.
inline ControllerConfig experiment_controller() {
  ControllerConfig c;
  c.xstar = xstar();
  c.vstar = vstar();
  c.b = {0.5, 0, 0, 0, 0.5, 0, 0, 0};
  c.K = uniform_gain(kCells, 0.016);
  c.tau = 0.5;
  return c;
}

/// Initial conditions of the closed-loop deviation study.
inline std::array<Vector, 4> decay_initial_conditions() {
  return {{Vector(kCells, kJam),
           {150, 140, 60, 120, 120, 100, 160, 130},
           {100, 120, 10, 20, 110, 80, 5, 90},
           {50, 50, 50, 50, 27, 27, 80, 60}}};
}

/// Reported congested equilibrium of the open loop started at jam.
inline Vector congested_point() { return {111.8, 111.8, 111.8, 111.8, 27.5, 27.5, 92.82, 92.82}; }

}  // namespace netstab::freeway
