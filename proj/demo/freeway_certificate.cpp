// Builds the certificate for the 8-cell freeway, synthesizes the regulator and
// runs it from a jammed start.
#include <cstdio>

#include "netstab/certificate.hpp"
#include "netstab/freeway.hpp"
#include "netstab/simulation.hpp"

int main() {
  using namespace netstab;
  const NetworkSpec spec = freeway::network();
  const Diagrams dg = freeway::diagrams();
  const EquilibriumPair eq = solve_uep(spec, dg, freeway::vstar());

  StabilityCertificate cert = certify(spec, dg, eq);
  const Synthesis syn = synthesize(eq.xstar, eq.vstar, cert.r, cert.C, cert.beta);
  attach_controller(cert, spec, dg, syn.config);

  std::printf("Q = %.4g  Theta = %.4g  gamma ~ %.4g  C = %.4g\n", cert.Qconst, cert.Theta, cert.gamma, cert.C);
  std::printf("eps* = %.4g  rho(Gamma) = %.6f  m = %llu\n", cert.epsstar, cert.rho,
              static_cast<unsigned long long>(cert.m.value_or(0)));
  std::printf("lambda = %.4g  K = %.4g\n", syn.lambda, syn.config.K(0, 0));

  ScenarioConfig sc;
  sc.x0 = spec.a;
  sc.horizon = 400;
  sc.controller = freeway::experiment_controller();
  const TrajectoryRecord rec = run_scenario(spec, dg, sc);
  for (std::size_t t = 0; t <= sc.horizon; t += 50) std::printf("t = %3zu  |x - x*| = %.6g\n", t, rec.deviation[t]);
}
