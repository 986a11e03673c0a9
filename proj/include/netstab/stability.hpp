#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include "netstab/dynamics.hpp"
#include "netstab/errors.hpp"
#include "netstab/fundamental_diagram.hpp"
#include "netstab/matrix.hpp"
#include "netstab/network.hpp"
#include "netstab/random.hpp"

namespace netstab {

/// Agreement required between the structural and the iterative spectral radius.
inline constexpr double kRhoAgreement = 1e-9;

/// r_i = 2^(n-1-rank(i)); gives r_i > sum_j r_j p(i, j) whenever rows sum to at most 1.
inline Vector weights_r(const Matrix& P) {
  const std::size_t n = P.rows();
  const std::vector<std::size_t> rank = topological_sort(P).rank();
  Vector r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = std::ldexp(1.0, int(n - 1 - rank[i]));
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += r[j] * P(i, j);
    if (!(r[i] > s)) throw std::logic_error("weights_r: strict decrease fails at cell " + std::to_string(i + 1));
  }
  return r;
}

inline void require_sector_constants(std::span<const double> L, std::span<const double> G) {
  for (std::size_t i = 0; i < L.size(); ++i)
    if (!(L[i] > 0.0 && L[i] < 1.0 && G[i] > 0.0 && G[i] <= 1.0 && L[i] <= G[i]))
      throw DomainError("cell " + std::to_string(i + 1) + ": need 0 < L < 1, 0 < G <= 1, L <= G");
}

/// xi_i = (2 / L_i) sum over predecessors j of G_j xi_j, with xi = 1 on cells that have
/// no predecessor; then sum_j p(j, i) G_j xi_j < L_i xi_i.
inline Vector weights_xi(const Matrix& P, std::span<const double> L, std::span<const double> G) {
  const std::size_t n = P.rows();
  require_sector_constants(L, G);
  const TopologicalOrder order = topological_sort(P);
  Vector xi(n, 0.0);
  for (std::size_t i : order.perm) {
    double s = 0.0;
    bool source = true;
    for (std::size_t j = 0; j < n; ++j)
      if (P(j, i) > kEdgeThreshold) s += G[j] * xi[j], source = false;
    xi[i] = source ? 1.0 : 2.0 / L[i] * s;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += P(j, i) * G[j] * xi[j];
    if (!(s < L[i] * xi[i])) throw std::logic_error("weights_xi: strict inequality fails at cell " + std::to_string(i + 1));
  }
  return xi;
}

/// I + P' diag(G) - diag(L).
inline Matrix sector_matrix(const Matrix& P, std::span<const double> L, std::span<const double> G) {
  const std::size_t n = P.rows();
  Matrix A(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) A(i, j) = P(j, i) * G[j];
    A(i, i) += 1.0 - L[i];
  }
  return A;
}

/// Spectral radius of a square matrix from the Gelfand limit ||M^k||^(1/k), with
/// k = 2^s reached by repeated squaring of |M| and renormalization at each level.
/// Converges for defective matrices where a vector power method crawls.
inline double spectral_radius_by_powers(const Matrix& M, int max_squarings = 60) {
  const std::size_t n = M.rows();
  Matrix B(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) B(i, j) = std::abs(M(i, j));
  double c = B.max_abs();
  if (c == 0.0) return 0.0;
  auto rescale = [&](double by) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) B(i, j) /= by;
  };
  rescale(c);
  double log_norm = std::log(c);  // |M|^(2^s) = exp(log_norm) * B
  double scale = 1.0;             // 2^s
  double estimate = c;
  for (int s = 1; s <= max_squarings; ++s) {
    B = B * B;
    c = B.max_abs();
    if (c == 0.0) return 0.0;
    rescale(c);
    log_norm = 2.0 * log_norm + std::log(c);
    scale *= 2.0;
    const double next = std::exp(log_norm / scale);
    if (s > 20 && std::abs(next - estimate) <= 1e-15 * next) return next;
    estimate = next;
  }
  return estimate;
}

struct GammaResult {
  Matrix Gamma;
  double rho = 0.0;        // max_i |1 - L_i| from the triangular structure
  double rho_power = 0.0;  // iterative estimate
};

/// Comparison matrix [[A, 0], [diag(v* - b) tau^-1 K, A]] with A = sector_matrix(P, L, G).
inline GammaResult build_gamma(const Matrix& P, std::span<const double> L, std::span<const double> G,
                               std::span<const double> vstar, std::span<const double> b, const Matrix& K,
                               double tau) {
  const std::size_t n = P.rows();
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  require_sector_constants(L, G);
  const Matrix A = sector_matrix(P, L, G);
  GammaResult out{Matrix(2 * n, 2 * n, 0.0), 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      out.Gamma(i, j) = A(i, j);
      out.Gamma(n + i, n + j) = A(i, j);
      out.Gamma(n + i, j) = (vstar[i] - b[i]) / tau * K(i, j);
    }

  const TopologicalOrder order = topological_sort(P);
  std::vector<std::size_t> perm2(2 * n);
  for (std::size_t k = 0; k < n; ++k) perm2[k] = order.perm[k], perm2[n + k] = n + order.perm[k];
  const Matrix T = out.Gamma.permuted(perm2);
  for (std::size_t i = 0; i < 2 * n; ++i)
    for (std::size_t j = i + 1; j < 2 * n; ++j)
      if (std::abs(T(i, j)) > kEdgeThreshold) throw StructuralError("comparison matrix is not triangular in topological order");
  for (std::size_t i = 0; i < 2 * n; ++i) out.rho = std::max(out.rho, std::abs(T(i, i)));

  out.rho_power = spectral_radius_by_powers(out.Gamma);
  if (std::abs(out.rho - out.rho_power) > kRhoAgreement)
    throw StructuralError("spectral radius mismatch: structural " + std::to_string(out.rho) + " vs iterative " +
                          std::to_string(out.rho_power));
  return out;
}

struct InvariantRegion {
  double epsstar = 0.0;
  Vector beta;  // Omega = [0, beta_1] x ... x [0, beta_n]

  bool contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < beta.size(); ++i)
      if (x[i] > beta[i]) return false;
    return true;
  }
};

/// Largest eps with x* + eps xi <= mu; beta = x* + eps* xi.
inline InvariantRegion invariant_region(std::span<const double> xstar, std::span<const double> xi,
                                        std::span<const double> mu) {
  const std::size_t n = xstar.size();
  InvariantRegion out;
  out.epsstar = std::numeric_limits<double>::infinity();
  std::size_t tight = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(xstar[i] < mu[i])) throw InfeasibleError("cell " + std::to_string(i + 1) + ": x* is not below mu");
    if (!(xi[i] > 0.0)) throw DomainError("xi must be positive");
    const double e = (mu[i] - xstar[i]) / xi[i];
    if (e < out.epsstar) out.epsstar = e, tight = i;
  }
  out.beta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.beta[i] = std::min(xstar[i] + out.epsstar * xi[i], mu[i]);
    if (!(out.beta[i] > xstar[i]))
      throw InfeasibleError("cell " + std::to_string(i + 1) + ": invariant region collapses to x* in floating point");
  }
  out.beta[tight] = mu[tight];
  return out;
}

struct Prop24Options {
  std::size_t samples = 100000;
  double vtilde_margin = 0.0;  // eps~ in V = [0, min(vmax, inf g(., 0)) - eps~]
  double min_norm = 1e-3;      // ignore |x| below this radius
  int refine_rounds = 200;
};

struct Prop24Constants {
  double Q = 0.0;
  double Theta = 0.0;
  double gamma = 0.0;
  double C = 0.0;
  std::size_t gamma_samples = 0;
  Disturbance gamma_d;  // attained minimizer
  Vector gamma_x;
  Vector gamma_v;
  bool h3_ok = false;   // gamma estimate > 0
};

inline double constant_Q(const Matrix& P, std::span<const double> r) {
  double q = 1.0;
  for (std::size_t i = 0; i < P.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < P.cols(); ++j) s += r[j] * P(i, j);
    q = std::min(q, 1.0 - s / r[i]);
  }
  return q;
}

inline double constant_Theta(const NetworkSpec& spec, const Diagrams& dg) {
  double t = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.n; ++i) {
    const DemandFunction& fd = dg.cells[i].demand;
    t = std::min({t, fd.L, fd.fmin / spec.a[i], fd.L * fd.delta_tilde / spec.a[i]});
  }
  return t;
}

/// sum r_i s~_i x_i / sum r_i x_i.
inline double gamma_ratio(const NetworkSpec& spec, const Diagrams& dg, std::span<const double> r,
                          std::span<const double> d, std::span<const double> x, std::span<const double> v) {
  const Vector s = throttle_lower_bound(spec, dg, x, v, d);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < spec.n; ++i) num += r[i] * s[i] * x[i], den += r[i] * x[i];
  return num / den;
}

/// Q, Theta and a sampled estimate of gamma = inf of gamma_ratio over D x S x V with
/// x bounded away from 0. Sample set: all (x, d) vertex pairs for small networks with v
/// at its upper bound, then Halton points; the best sample is polished by a shrinking
/// coordinate search. C = Q Theta min(1, gamma).
inline Prop24Constants prop24_constants(const NetworkSpec& spec, const Diagrams& dg, std::span<const double> r,
                                        const Prop24Options& opt = {}) {
  const std::size_t n = spec.n, l = dg.D.dim();
  Prop24Constants out;
  out.Q = constant_Q(spec.P, r);
  out.Theta = constant_Theta(spec, dg);

  Vector vtop(n);
  for (std::size_t i = 0; i < n; ++i)
    vtop[i] = std::max(0.0, std::min(spec.vmax[i], dg.cells[i].supply.min_at_empty(dg.D)) - opt.vtilde_margin);

  // z = (d, x, v) packed into one box
  const std::size_t dim = l + 2 * n;
  Vector lo(dim), hi(dim);
  for (std::size_t k = 0; k < l; ++k) lo[k] = dg.D.lower[k], hi[k] = dg.D.upper[k];
  for (std::size_t i = 0; i < n; ++i) lo[l + i] = 0.0, hi[l + i] = spec.a[i];
  for (std::size_t i = 0; i < n; ++i) lo[l + n + i] = 0.0, hi[l + n + i] = vtop[i];

  out.gamma = std::numeric_limits<double>::infinity();
  Vector best;
  auto eval = [&](const Vector& z) {
    std::span<const double> d(z.data(), l), x(z.data() + l, n), v(z.data() + l + n, n);
    if (norm2(x) < opt.min_norm) return std::numeric_limits<double>::infinity();
    return gamma_ratio(spec, dg, r, d, x, v);
  };
  auto consider = [&](const Vector& z) {
    ++out.gamma_samples;
    const double g = eval(z);
    if (g < out.gamma) out.gamma = g, best = z;
  };

  if (n <= 12) {
    const std::vector<Disturbance> dc = dg.D.corners();
    Vector z(dim);
    for (std::size_t i = 0; i < n; ++i) z[l + n + i] = vtop[i];
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
      for (std::size_t i = 0; i < n; ++i) z[l + i] = (mask >> i & 1) ? spec.a[i] : 0.0;
      for (const Disturbance& d : dc) {
        std::copy(d.begin(), d.end(), z.begin());
        consider(z);
      }
    }
  }
  for (std::size_t k = 0; k < opt.samples; ++k) {
    const Vector u = halton_point(k + 1, dim);
    Vector z(dim);
    for (std::size_t c = 0; c < dim; ++c) z[c] = lo[c] + (hi[c] - lo[c]) * u[c];
    consider(z);
  }

  if (!best.empty()) {
    double h = 0.25;
    for (int round = 0; round < opt.refine_rounds && h > 1e-6; ++round) {
      bool improved = false;
      for (std::size_t c = 0; c < dim; ++c)
        for (double sgn : {-1.0, 1.0}) {
          Vector z = best;
          z[c] = std::clamp(z[c] + sgn * h * (hi[c] - lo[c]), lo[c], hi[c]);
          const double g = eval(z);
          ++out.gamma_samples;
          if (g < out.gamma) out.gamma = g, best = std::move(z), improved = true;
        }
      if (!improved) h *= 0.5;
    }
    out.gamma_d.assign(best.begin(), best.begin() + long(l));
    out.gamma_x.assign(best.begin() + long(l), best.begin() + long(l + n));
    out.gamma_v.assign(best.begin() + long(l + n), best.end());
  }

  out.h3_ok = out.gamma > 0.0;
  out.C = out.h3_ok ? out.Q * out.Theta * std::min(1.0, out.gamma) : 0.0;
  return out;
}

/// Number of steps after which every closed-loop trajectory is inside Omega:
///   floor((ln(C min_i r_i beta_i - r'b) - ln(C r'a)) / ln(1 - C)) + 1.
inline std::uint64_t trapping_bound(double C, std::span<const double> r, std::span<const double> beta,
                                    std::span<const double> b, std::span<const double> a) {
  if (!(C > 0.0 && C < 1.0)) throw DomainError("C must lie in (0, 1)");
  double min_rbeta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.size(); ++i) min_rbeta = std::min(min_rbeta, r[i] * beta[i]);
  const double arg = C * min_rbeta - dot(r, b);
  if (!(arg > 0.0)) throw InfeasibleError("r'b >= C min(r_i beta_i): trapping bound undefined");
  const double ratio = (std::log(arg) - std::log(C * dot(r, a))) / std::log1p(-C);
  const double m = std::floor(ratio) + 1.0;
  if (m >= 1.8e19) return std::numeric_limits<std::uint64_t>::max();
  return m <= 0.0 ? 0 : static_cast<std::uint64_t>(m);
}

struct LyapunovValue {
  Vector V;  // (max(0, x - x*), max(0, x* - x))

  double max() const { return V.empty() ? 0.0 : *std::max_element(V.begin(), V.end()); }
};

inline LyapunovValue lyapunov_eval(std::span<const double> x, std::span<const double> xstar) {
  const std::size_t n = x.size();
  LyapunovValue out{Vector(2 * n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.V[i] = std::max(0.0, x[i] - xstar[i]);
    out.V[n + i] = std::max(0.0, xstar[i] - x[i]);
  }
  return out;
}

}  // namespace netstab
