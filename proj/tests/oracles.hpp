#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// code under test except for plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "netstab/freeway.hpp"
#include "netstab/matrix.hpp"
#include "netstab/network.hpp"
#include "netstab/random.hpp"

namespace oracle {

using netstab::Matrix;
using netstab::Vector;

/// Freeway demand written out from the basis shapes, no shared code path with eval_demand.
inline double freeway_demand(std::size_t cell, const Vector& d, double x) {
  const double d1 = d[0], d2 = d[1], d3 = d[2];
  const bool ramp = cell == 4 || cell == 5;
  if (x <= 55.0 + 2e-5) {
    const double p1 = 5.0 / 11.0 * x;
    double p2, p3;
    if (!ramp) {
      p2 = -13.5 / 3025.0 * x * x + 0.7 * x;
      p3 = 14.0 / 3025.0 * x * x + 0.2 * x;
    } else if (x <= 27.5) {
      p2 = -49.0 / 3025.0 * x * x + 0.9 * x;
      p3 = 7.0 / 756.25 * x * x + 0.2 * x;
    } else {
      p2 = -38.0 / 3025.0 * x * x + 82.0 / 55.0 * x - 19.0;
      p3 = 21.0 / 6050.0 * x * x + 71.5 / 1210.0 * x + 8.25;
    }
    return d1 * p1 + d2 * (1 - d1) * p2 + (1 - d2) * (1 - d1) * p3;
  }
  const double p6 = -3.0 / 23.0 * x + 740.0 / 23.0;
  const double p7 = 83.0 / 52900.0 * x * x - 4471.0 / 10580.0 * x + 46019.0 / 1058.0;
  return d3 * p6 + (1 - d3) * p7;
}

inline double freeway_supply(const Vector& d, double x) { return d[3] * std::min(115.0, 170.0 - x); }

/// The freeway step with the throttles written per cell: cells feeding a single
/// successor are cut by that successor's spare supply, cell 4 shares cell 7 with
/// cell 6 which goes first, cell 8 only exits.
inline Vector freeway_step(const Vector& x, const Vector& v, const Vector& d) {
  Vector f(8), g(8), s(8, 1.0);
  for (std::size_t i = 0; i < 8; ++i) f[i] = freeway_demand(i, d, x[i]), g[i] = freeway_supply(d, x[i]);
  auto cut = [](double room, double want) { return want <= 0 ? 1.0 : std::min(1.0, std::max(0.0, room) / want); };
  for (std::size_t i : {0u, 1u, 2u, 4u}) s[i] = cut(g[i + 1] - v[i + 1], f[i]);
  s[5] = cut(g[6] - v[6], f[5]);
  s[6] = cut(g[7] - v[7], f[6]);
  s[3] = cut(g[6] - v[6] - f[5], 0.5 * f[3]);
  Vector in(8);
  for (std::size_t i = 0; i < 8; ++i) in[i] = std::min(v[i], g[i]);
  in[1] += s[0] * f[0];
  in[2] += s[1] * f[1];
  in[3] += s[2] * f[2];
  in[5] += s[4] * f[4];
  in[6] += 0.5 * s[3] * f[3] + s[5] * f[5];
  in[7] += s[6] * f[6];
  Vector out(8);
  for (std::size_t i = 0; i < 8; ++i) out[i] = x[i] - s[i] * f[i] + in[i];
  return out;
}

/// Random acyclic network: edges only from lower to higher index in a hidden
/// order, rows summing to at most one, then relabelled by a random permutation.
inline netstab::NetworkSpec random_acyclic(std::uint64_t seed, std::size_t n) {
  netstab::CounterRng rng(seed, 99);
  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(label[i - 1], label[rng.next_u64() % i]);
  netstab::NetworkSpec s;
  s.n = n;
  s.a.assign(n, 170.0);
  s.mu.assign(n, 55.0);
  s.vmax.assign(n, 1.0);
  s.P = Matrix(n, n, 0.0);
  s.Qexit.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Vector w(n, 0.0);
    double total = rng.uniform(0.05, 1.0);  // exit share
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.4) w[j] = rng.uniform(), total += w[j];
    for (std::size_t j = i + 1; j < n; ++j) s.P(label[i], label[j]) = w[j] / total;
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += s.P(label[i], j);
    s.Qexit[label[i]] = 1.0 - row;
  }
  return s;
}

/// Random sector constants with 0 < L <= G <= 1, L < 1.
inline void random_sectors(std::uint64_t seed, std::size_t n, Vector& L, Vector& G) {
  netstab::CounterRng rng(seed, 98);
  L.resize(n);
  G.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    L[i] = rng.uniform(0.005, 0.95);
    G[i] = rng.uniform(L[i], 1.0);
  }
}

}  // namespace oracle
