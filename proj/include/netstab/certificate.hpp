#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "netstab/controller.hpp"
#include "netstab/dynamics.hpp"
#include "netstab/equilibrium.hpp"
#include "netstab/fundamental_diagram.hpp"
#include "netstab/network.hpp"
#include "netstab/random.hpp"
#include "netstab/stability.hpp"

namespace netstab {

struct StabilityCertificate {
  Vector r;
  Vector xi;
  double epsstar = 0.0;
  Vector beta;
  double Qconst = 0.0;
  double Theta = 0.0;
  double gamma = 0.0;
  std::size_t gamma_samples = 0;
  Disturbance gamma_d;
  Vector gamma_x;
  Vector gamma_v;
  double C = 0.0;

  // filled once a controller is attached
  std::optional<Matrix> Gamma;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double rho_power = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::uint64_t> m;
  bool floor_condition = false;  // r'b <= C min r_i x_i*

  std::vector<H1Report> h1;
  H4Report h4;
  bool uep_hypotheses = false;
  bool h3 = false;

  bool h1_ok() const {
    return std::all_of(h1.begin(), h1.end(), [](const H1Report& h) { return h.ok(); });
  }
  bool rho_ok() const { return rho < 1.0; }
  bool C_ok() const { return C > 0.0 && C < 1.0; }
  bool ok() const {
    return h1_ok() && h4.pass && uep_hypotheses && h3 && C_ok() && Gamma.has_value() && rho_ok() &&
           floor_condition && m.has_value();
  }
};

struct CertificateOptions {
  Prop24Options prop24;
  H4Options h4;
  std::size_t h1_grid = 512;
  std::size_t h1_d_samples = 64;
};

/// Everything that does not depend on the controller.
inline StabilityCertificate certify(const NetworkSpec& spec, const Diagrams& dg, const EquilibriumPair& eq,
                                    const CertificateOptions& opt = {}) {
  check_compatible(spec, dg);
  StabilityCertificate cert;
  for (const CellDiagram& c : dg.cells) cert.h1.push_back(verify_h1(c.demand, dg.D, opt.h1_grid, opt.h1_d_samples));
  cert.h4 = verify_h4(spec, dg, opt.h4);
  cert.uep_hypotheses = eq.hypotheses_ok();

  cert.r = weights_r(spec.P);
  cert.xi = weights_xi(spec.P, dg.L(), dg.G());
  const InvariantRegion omega = invariant_region(eq.xstar, cert.xi, spec.mu);
  cert.epsstar = omega.epsstar;
  cert.beta = omega.beta;

  const Prop24Constants k = prop24_constants(spec, dg, cert.r, opt.prop24);
  cert.Qconst = k.Q;
  cert.Theta = k.Theta;
  cert.gamma = k.gamma;
  cert.gamma_samples = k.gamma_samples;
  cert.gamma_d = k.gamma_d;
  cert.gamma_x = k.gamma_x;
  cert.gamma_v = k.gamma_v;
  cert.C = k.C;
  cert.h3 = k.h3_ok;
  return cert;
}

/// Adds the comparison matrix, its spectral radius, the floor condition and the trapping bound.
inline void attach_controller(StabilityCertificate& cert, const NetworkSpec& spec, const Diagrams& dg,
                              const ControllerConfig& cfg) {
  cfg.validate();
  GammaResult g = build_gamma(spec.P, dg.L(), dg.G(), cfg.vstar, cfg.b, cfg.K, cfg.tau);
  cert.Gamma = std::move(g.Gamma);
  cert.rho = g.rho;
  cert.rho_power = g.rho_power;
  cert.floor_condition = cert.C > 0.0 && floor_condition_holds(cert.r, cfg.b, cert.C, cfg.xstar);
  cert.m.reset();
  if (cert.C_ok()) {
    try {
      cert.m = trapping_bound(cert.C, cert.r, cert.beta, cfg.b, spec.a);
    } catch (const InfeasibleError&) {
    }
  }
}

inline InvariantRegion region_of(const StabilityCertificate& cert) { return {cert.epsstar, cert.beta}; }

struct ContractionReport {
  double max_violation = -std::numeric_limits<double>::infinity();  // max entry of V(x+) - Gamma V(x)
  Vector worst_x;
  Disturbance worst_d;
  std::size_t samples = 0;
  bool pass = false;
};

/// Samples x uniformly in [0, upper] and d uniformly in D and tests V(x+) <= Gamma V(x).
inline ContractionReport contraction_check(const NetworkSpec& spec, const Diagrams& dg, const ControllerConfig& cfg,
                                           const Matrix& Gamma, std::span<const double> upper, std::size_t samples,
                                           std::uint64_t seed, double tolerance = 1e-9) {
  const std::size_t n = spec.n;
  CounterRng rng(seed, 7);
  ContractionReport rep;
  Vector x(n);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(0.0, std::min(upper[i], spec.a[i]));
    const Disturbance d = dg.D.sample(rng);
    const Vector v = control_law(cfg, x);
    const Vector xp = step(spec, dg, x, v, d).x;
    const LyapunovValue V = lyapunov_eval(x, cfg.xstar), Vp = lyapunov_eval(xp, cfg.xstar);
    const Vector bound = Gamma * std::span<const double>(V.V);
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const double gap = Vp.V[k] - bound[k];
      if (gap > rep.max_violation) rep.max_violation = gap, rep.worst_x = x, rep.worst_d = d;
    }
    ++rep.samples;
  }
  rep.pass = rep.max_violation <= tolerance;
  return rep;
}

/// Empirical M = max |x+ - x*| / |x - x*| over random (x, d) in S x D under the closed loop.
inline double lipschitz_estimate(const NetworkSpec& spec, const Diagrams& dg, const ControllerConfig& cfg,
                                 std::size_t samples, std::uint64_t seed) {
  CounterRng rng(seed, 11);
  double M = 0.0;
  Vector x(spec.n);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < spec.n; ++i) x[i] = rng.uniform(0.0, spec.a[i]);
    const Disturbance d = dg.D.sample(rng);
    const double den = distance(x, cfg.xstar);
    if (den < 1e-9) continue;
    const Vector xp = step(spec, dg, x, control_law(cfg, x), d).x;
    M = std::max(M, distance(xp, cfg.xstar) / den);
  }
  return M;
}

}  // namespace netstab
