#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netstab/errors.hpp"
#include "netstab/matrix.hpp"
#include "netstab/network.hpp"
#include "netstab/random.hpp"

namespace netstab {

/// Absolute slack granted to sampled inequality checks (floating-point rounding only).
inline constexpr double kCheckTolerance = 1e-9;

/// A disturbance value d, one entry per component of the uncertainty box.
using Disturbance = Vector;

/// Compact box D = [lower_1, upper_1] x ... x [lower_l, upper_l].
struct UncertaintySet {
  Vector lower;
  Vector upper;

  std::size_t dim() const noexcept { return lower.size(); }

  bool contains(std::span<const double> d, double tol = 1e-12) const {
    if (d.size() != dim()) return false;
    for (std::size_t k = 0; k < dim(); ++k)
      if (!(d[k] >= lower[k] - tol && d[k] <= upper[k] + tol)) return false;
    return true;
  }

  void require(std::span<const double> d) const {
    if (d.size() != dim())
      throw StructuralError("disturbance has " + std::to_string(d.size()) + " components, expected " +
                            std::to_string(dim()));
    if (!contains(d)) throw DomainError("disturbance outside the uncertainty set");
  }

  Disturbance center() const {
    Disturbance c(dim());
    for (std::size_t k = 0; k < dim(); ++k) c[k] = 0.5 * (lower[k] + upper[k]);
    return c;
  }

  /// All 2^l vertices of the box, in binary counting order.
  std::vector<Disturbance> corners() const {
    std::vector<Disturbance> out;
    const std::size_t count = std::size_t{1} << dim();
    out.reserve(count);
    for (std::size_t mask = 0; mask < count; ++mask) {
      Disturbance d(dim());
      for (std::size_t k = 0; k < dim(); ++k) d[k] = (mask >> k) & 1U ? upper[k] : lower[k];
      out.push_back(std::move(d));
    }
    return out;
  }

  Disturbance sample(CounterRng& rng) const {
    Disturbance d(dim());
    for (std::size_t k = 0; k < dim(); ++k) d[k] = rng.uniform(lower[k], upper[k]);
    return d;
  }

  /// `count` points: the box vertices first (when dim <= 6), then Halton points.
  std::vector<Disturbance> low_discrepancy(std::size_t count) const {
    std::vector<Disturbance> out;
    if (dim() <= 6) out = corners();
    if (out.size() > count) out.resize(count);
    for (std::uint64_t idx = 0; out.size() < count; ++idx) {
      const auto u = halton_point(idx, dim());
      Disturbance d(dim());
      for (std::size_t k = 0; k < dim(); ++k) d[k] = lower[k] + u[k] * (upper[k] - lower[k]);
      out.push_back(std::move(d));
    }
    return out;
  }
};

/// Basis shapes of the mixed freeway demand families. Units: veh, veh/step.
namespace basis {
inline constexpr double kEps = 1e-5;
/// Breakpoint between the increasing and the capacity-drop branch.
inline constexpr double kCritical = 55.0 + 2.0 * kEps;

inline double linear(double z) { return 5.0 / 11.0 * z; }
inline double concave(double z) { return -(13.5 / 3025.0) * z * z + 0.7 * z; }
inline double convex(double z) { return (14.0 / 3025.0) * z * z + 0.2 * z; }
inline double onramp_concave(double z) {
  return z <= 27.5 ? (-49.0 / 3025.0) * z * z + 0.9 * z : (-38.0 / 3025.0) * z * z + 82.0 / 55.0 * z - 19.0;
}
inline double onramp_convex(double z) {
  return z <= 27.5 ? (7.0 / 756.25) * z * z + 0.2 * z
                   : (21.0 / 6050.0) * z * z + (71.5 / 1210.0) * z + 8.25;
}
inline double drop_linear(double z) { return -3.0 / 23.0 * z + 740.0 / 23.0; }
inline double drop_quadratic(double z) {
  return (83.0 / 52900.0) * z * z - (4471.0 / 10580.0) * z + 46019.0 / 1058.0;
}
}  // namespace basis

/// One polynomial branch: coeffs[k] multiplies x^k. The first piece covers
/// [lo, hi]; later pieces cover (lo, hi].
struct PolynomialPiece {
  double lo = 0.0;
  double hi = 0.0;
  Vector coeffs;

  double operator()(double x) const {
    double y = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) y = y * x + coeffs[k];
    return y;
  }
};

enum class DemandFamily {
  MixedMainline,  // "sec5-main": concave/convex mix below critical, drop mix above
  MixedOnRamp,    // "sec5-onramp": on-ramp variant of the subcritical mix
  Piecewise       // user table, independent of d
};

/// Uncertain demand f(d, .) on [0, capacity] with its declared (H1) constants.
struct DemandFunction {
  DemandFamily family = DemandFamily::MixedMainline;
  double capacity = 170.0;      // a_i
  double delta = basis::kCritical;        // critical density
  double delta_tilde = basis::kCritical;  // end of the lower-sector interval
  double L = 0.2;
  double G = 0.71;
  double fmin = 10.0;
  std::vector<PolynomialPiece> pieces;  // Piecewise only
  /// Components of d used as mixing weights (0-based) by the mixed families.
  std::size_t w1 = 0, w2 = 1, w3 = 2;
};

inline double eval_demand(const DemandFunction& fd, std::span<const double> d, double x) {
  if (!(x >= 0.0 && x <= fd.capacity))
    throw DomainError("density " + std::to_string(x) + " outside [0, " + std::to_string(fd.capacity) + "]");
  if (fd.family == DemandFamily::Piecewise) {
    for (std::size_t k = 0; k < fd.pieces.size(); ++k) {
      const auto& p = fd.pieces[k];
      const bool inside = k == 0 ? (x >= p.lo && x <= p.hi) : (x > p.lo && x <= p.hi);
      if (inside) return p(x);
    }
    throw DomainError("density " + std::to_string(x) + " not covered by the piecewise table");
  }
  const std::size_t need = std::max({fd.w1, fd.w2, fd.w3}) + 1;
  if (d.size() < need) throw StructuralError("disturbance too short for the demand family");
  const double d1 = d[fd.w1], d2 = d[fd.w2], d3 = d[fd.w3];
  constexpr double tol = 1e-12;
  for (double w : {d1, d2, d3})
    if (!(w >= -tol && w <= 1.0 + tol)) throw DomainError("demand mixing weight outside [0, 1]");
  if (x <= basis::kCritical) {
    const bool ramp = fd.family == DemandFamily::MixedOnRamp;
    const double upper = ramp ? basis::onramp_concave(x) : basis::concave(x);
    const double lower = ramp ? basis::onramp_convex(x) : basis::convex(x);
    return d1 * basis::linear(x) + d2 * (1.0 - d1) * upper + (1.0 - d2) * (1.0 - d1) * lower;
  }
  return d3 * basis::drop_linear(x) + (1.0 - d3) * basis::drop_quadratic(x);
}

/// g(d, x) = c * min(qcap, capacity - x), with the wave speed c either a
/// component of d or a constant.
struct SupplyFunction {
  double qcap = 115.0;
  double capacity = 170.0;
  std::optional<std::size_t> wave_component = 3;
  double wave_speed = 0.25;  // used when wave_component is empty

  double speed(std::span<const double> d) const {
    if (!wave_component) return wave_speed;
    if (*wave_component >= d.size()) throw StructuralError("disturbance too short for the supply function");
    return d[*wave_component];
  }

  /// inf over D of g(d, 0).
  double min_at_empty(const UncertaintySet& D) const {
    const double c = wave_component ? D.lower[*wave_component] : wave_speed;
    return c * std::min(qcap, capacity);
  }
};

inline double eval_supply(const SupplyFunction& sf, std::span<const double> d, double x) {
  if (!(x >= 0.0 && x <= sf.capacity))
    throw DomainError("density " + std::to_string(x) + " outside [0, " + std::to_string(sf.capacity) + "]");
  const double c = sf.speed(d);
  if (!(c >= 0.0)) throw DomainError("negative wave speed");
  return c * std::min(sf.qcap, sf.capacity - x);
}

struct CellDiagram {
  DemandFunction demand;
  SupplyFunction supply;
};

/// Per-cell fundamental diagrams together with the uncertainty set they share.
struct Diagrams {
  UncertaintySet D;
  std::vector<CellDiagram> cells;

  std::size_t size() const noexcept { return cells.size(); }
  double demand(std::size_t i, std::span<const double> d, double x) const { return eval_demand(cells[i].demand, d, x); }
  double supply(std::size_t i, std::span<const double> d, double x) const { return eval_supply(cells[i].supply, d, x); }

  Vector demands(std::span<const double> d, std::span<const double> x) const {
    Vector f(size());
    for (std::size_t i = 0; i < size(); ++i) f[i] = demand(i, d, x[i]);
    return f;
  }
  Vector supplies(std::span<const double> d, std::span<const double> x) const {
    Vector g(size());
    for (std::size_t i = 0; i < size(); ++i) g[i] = supply(i, d, x[i]);
    return g;
  }
  Vector L() const { return collect(&DemandFunction::L); }
  Vector G() const { return collect(&DemandFunction::G); }

 private:
  Vector collect(double DemandFunction::*field) const {
    Vector out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = cells[i].demand.*field;
    return out;
  }
};

/// Diagram capacities must agree with the network's storage capacities.
inline void check_compatible(const NetworkSpec& spec, const Diagrams& dg) {
  if (dg.size() != spec.n)
    throw StructuralError("diagram file describes " + std::to_string(dg.size()) + " cells, network has " +
                          std::to_string(spec.n));
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (dg.cells[i].demand.capacity != spec.a[i] || dg.cells[i].supply.capacity != spec.a[i])
      throw StructuralError("cell " + std::to_string(i + 1) + ": diagram capacity differs from a_i");
  }
  if (dg.D.lower.size() != dg.D.upper.size()) throw StructuralError("uncertainty bounds differ in length");
}

/// Largest flow the increasing branch can deliver for every d: min_d f(d, delta).
inline double subcritical_capacity(const DemandFunction& fd, const UncertaintySet& D, std::size_t d_samples = 64) {
  double cap = std::numeric_limits<double>::infinity();
  for (const auto& d : D.low_discrepancy(d_samples)) cap = std::min(cap, eval_demand(fd, d, fd.delta));
  return cap;
}

struct H1Report {
  bool monotone_ok = true;      // increasing on [0, delta]
  bool sector_ok = true;        // L on [0, delta_tilde], G on [0, delta]
  bool fmin_ok = true;          // f >= fmin on [delta, a]
  bool strict_bound_ok = true;  // 0 < f(d, z) < z on (0, a]
  bool constants_ok = true;     // declared 0 < L <= G <= 1, L < 1, 0 < delta_tilde <= delta <= a, fmin > 0
  double L_hat = std::numeric_limits<double>::infinity();
  double G_hat = 0.0;
  double fmin_hat = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;

  bool ok() const noexcept { return monotone_ok && sector_ok && fmin_ok && strict_bound_ok && constants_ok; }
};

/// Sampling-based audit of the demand assumptions. The sector bounds are
/// checked on adjacent grid pairs: once f is increasing, every two-point secant
/// is a weighted mean of adjacent secants, so the adjacent extremes bound them all.
inline H1Report verify_h1(const DemandFunction& fd, const UncertaintySet& D, std::size_t grid = 512,
                          std::size_t d_samples = 64) {
  if (grid < 100) throw DomainError("H1 audit needs at least 100 density points");
  H1Report rep;
  rep.constants_ok = fd.L > 0.0 && fd.L < 1.0 && fd.G > 0.0 && fd.G <= 1.0 && fd.L <= fd.G && fd.delta_tilde > 0.0 &&
                     fd.delta_tilde <= fd.delta && fd.delta <= fd.capacity && fd.fmin > 0.0;
  constexpr double tol = kCheckTolerance;
  auto axis = [grid](double lo, double hi) {
    Vector z(grid);
    for (std::size_t k = 0; k < grid; ++k) z[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid - 1);
    z.back() = hi;
    return z;
  };
  const Vector full = axis(0.0, fd.capacity);
  const Vector sub = axis(0.0, fd.delta);
  const Vector low = axis(0.0, fd.delta_tilde);
  const Vector over = axis(fd.delta, fd.capacity);

  for (const auto& d : D.low_discrepancy(d_samples)) {
    for (std::size_t k = 1; k < grid; ++k) {
      const double f = eval_demand(fd, d, full[k]);
      if (!(f > 0.0 && f < full[k])) rep.strict_bound_ok = false;
    }
    double prev = eval_demand(fd, d, sub[0]);
    for (std::size_t k = 1; k < grid; ++k) {
      const double cur = eval_demand(fd, d, sub[k]);
      if (!(cur > prev)) rep.monotone_ok = false;
      const double slope = std::abs(cur - prev) / (sub[k] - sub[k - 1]);
      rep.G_hat = std::max(rep.G_hat, slope);
      if (slope > fd.G + tol) rep.sector_ok = false;
      prev = cur;
    }
    prev = eval_demand(fd, d, low[0]);
    for (std::size_t k = 1; k < grid; ++k) {
      const double cur = eval_demand(fd, d, low[k]);
      const double slope = std::abs(cur - prev) / (low[k] - low[k - 1]);
      rep.L_hat = std::min(rep.L_hat, slope);
      if (slope < fd.L - tol) rep.sector_ok = false;
      prev = cur;
    }
    for (double z : over) {
      const double f = eval_demand(fd, d, z);
      rep.fmin_hat = std::min(rep.fmin_hat, f);
      if (f < fd.fmin - tol) rep.fmin_ok = false;
    }
    rep.evaluations += 4 * grid - 2;
  }
  return rep;
}

struct H4Report {
  bool pass = true;
  double min_slack = std::numeric_limits<double>::infinity();
  std::size_t worst_cell = 0;
  Vector worst_x;
  Disturbance worst_d;
  std::size_t samples = 0;
};

struct H4Options {
  std::size_t interior_samples = 256;
  std::size_t d_samples = 64;
  double tolerance = kCheckTolerance;
};

/// Samples (d, x) with 0 <= x <= mu and checks
/// vmax_i + sum_j p(j, i) f_j(d, x_j) <= g_i(d, x) for every cell.
/// The vertices of [0, mu] are always included (for n <= 12).
inline H4Report verify_h4(const NetworkSpec& spec, const Diagrams& dg, const H4Options& opt = {}) {
  check_compatible(spec, dg);
  const std::size_t n = spec.n;
  std::vector<Vector> xs;
  if (n <= 12) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      Vector x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = (mask >> i) & 1U ? spec.mu[i] : 0.0;
      xs.push_back(std::move(x));
    }
  } else {
    xs.push_back(Vector(n, 0.0));
    xs.push_back(spec.mu);
  }
  for (std::uint64_t k = 0; k < opt.interior_samples; ++k) {
    auto u = halton_point(k, n);
    for (std::size_t i = 0; i < n; ++i) u[i] *= spec.mu[i];
    xs.push_back(std::move(u));
  }

  H4Report rep;
  for (const auto& d : dg.D.low_discrepancy(opt.d_samples)) {
    for (const auto& x : xs) {
      const Vector f = dg.demands(d, x);
      for (std::size_t i = 0; i < n; ++i) {
        double demand = spec.vmax[i];
        for (std::size_t j = 0; j < n; ++j) demand += spec.P(j, i) * f[j];
        const double slack = dg.supply(i, d, x[i]) - demand;
        if (slack < rep.min_slack) {
          rep.min_slack = slack;
          rep.worst_cell = i;
          rep.worst_x = x;
          rep.worst_d = d;
        }
      }
      ++rep.samples;
    }
  }
  rep.pass = rep.min_slack >= -opt.tolerance;
  return rep;
}

}  // namespace netstab
