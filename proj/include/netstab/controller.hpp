#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "netstab/errors.hpp"
#include "netstab/matrix.hpp"

namespace netstab {

/// Inflow regulator v = v* - diag(v* - b)(1 - h(1 - tau^-1 K h(x - x*))).
struct ControllerConfig {
  Vector xstar;
  Vector vstar;
  Vector b;
  Matrix K;
  double tau = 0.5;

  std::size_t size() const noexcept { return xstar.size(); }

  /// Cells whose inflow is actually regulated (b_i < v_i*).
  std::vector<std::size_t> R() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b[i] < vstar[i]) out.push_back(i);
    return out;
  }

  void validate() const {
    const std::size_t n = xstar.size();
    if (vstar.size() != n || b.size() != n || K.rows() != n || K.cols() != n)
      throw StructuralError("controller dimensions disagree");
    if (!(tau > 0.0 && tau < 1.0)) throw DomainError("tau must lie in (0, 1)");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(b[i] >= 0.0 && b[i] <= vstar[i]))
        throw DomainError("cell " + std::to_string(i + 1) + ": need 0 <= b <= v*");
      for (std::size_t j = 0; j < n; ++j)
        if (!(K(i, j) >= 0.0)) throw DomainError("gain matrix must be nonnegative");
    }
  }
};

inline Vector h_map(std::span<const double> z) {
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::max(0.0, z[i]);
  return out;
}

/// Written as v_i = b_i + (v_i* - b_i) H_i with H_i = max(0, 1 - tau^-1 sum_j K_ij h_j),
/// so that H_i = 0 gives b_i and H_i = 1 gives v_i* bit for bit.
inline Vector control_law(const ControllerConfig& cfg, std::span<const double> x) {
  const std::size_t n = cfg.size();
  if (x.size() != n) throw StructuralError("state has wrong length");
  Vector excess(n);
  for (std::size_t j = 0; j < n; ++j) excess[j] = std::max(0.0, x[j] - cfg.xstar[j]);
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) {
    double load = 0.0;
    for (std::size_t j = 0; j < n; ++j) load += cfg.K(i, j) * excess[j];
    const double H = std::max(0.0, 1.0 - load / cfg.tau);
    if (H == 0.0) v[i] = cfg.b[i];
    else if (H == 1.0) v[i] = cfg.vstar[i];
    else v[i] = std::clamp(cfg.b[i] + (cfg.vstar[i] - cfg.b[i]) * H, cfg.b[i], cfg.vstar[i]);
  }
  return v;
}

inline Matrix uniform_gain(std::size_t n, double value) { return Matrix(n, n, value); }

/// K_ij = sigma^j with 1-based column index j.
inline Matrix geometric_gain(std::size_t n, double sigma) {
  if (!(sigma > 0.0 && sigma <= 1.0)) throw DomainError("sigma must lie in (0, 1]");
  Matrix K(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) K(i, j) = std::pow(sigma, double(j + 1));
  return K;
}

/// r'b <= C min_i r_i x_i*, with a relative allowance for the rounding in b = lambda v*.
inline bool floor_condition_holds(std::span<const double> r, std::span<const double> b, double C,
                                  std::span<const double> xstar) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.size(); ++i) m = std::min(m, r[i] * xstar[i]);
  const double rhs = C * m;
  double lhs = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) lhs += r[i] * b[i];
  return lhs <= rhs * (1.0 + 1e-12);
}

struct Synthesis {
  ControllerConfig config;
  double lambda = 0.0;
  bool trivially_stable = false;  // v* = 0: nothing to regulate
  bool floor_condition = false;
};

/// b = lambda v* with lambda = min(1/2, C min_i(r_i x_i*) / r'v*), and the smallest
/// uniform gain with K_ij (beta_j - x_j*) >= 1, i.e. K_ij = 1 / min_k(beta_k - x_k*).
inline Synthesis synthesize(std::span<const double> xstar, std::span<const double> vstar, std::span<const double> r,
                            double C, std::span<const double> beta, double tau = 0.5) {
  const std::size_t n = xstar.size();
  Synthesis out;
  out.config.xstar.assign(xstar.begin(), xstar.end());
  out.config.vstar.assign(vstar.begin(), vstar.end());
  out.config.tau = tau;

  const double rv = dot(r, vstar);
  if (rv == 0.0) {
    out.config.b.assign(n, 0.0);
    out.config.K = Matrix(n, n, 0.0);
    out.trivially_stable = true;
    out.floor_condition = true;
    out.config.validate();
    return out;
  }
  if (!(C > 0.0)) throw InfeasibleError("controller synthesis needs C > 0");
  double min_rx = std::numeric_limits<double>::infinity();
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    min_rx = std::min(min_rx, r[i] * xstar[i]);
    min_gap = std::min(min_gap, beta[i] - xstar[i]);
  }
  if (!(min_gap > 0.0)) throw InfeasibleError("invariant region must strictly contain x*");
  out.lambda = std::min(0.5, C * min_rx / rv);
  out.config.b.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.config.b[i] = out.lambda * vstar[i];
  out.config.K = uniform_gain(n, 1.0 / min_gap);
  out.config.validate();
  out.floor_condition = floor_condition_holds(r, out.config.b, C, xstar);
  if (!out.floor_condition) throw std::logic_error("synthesized inflow floor violates r'b <= C min r_i x_i*");
  return out;
}

}  // namespace netstab
