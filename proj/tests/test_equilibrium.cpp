#include <gtest/gtest.h>

#include "netstab/equilibrium.hpp"
#include "netstab/freeway.hpp"

using namespace netstab;

namespace {
const NetworkSpec kSpec = freeway::network();
const Diagrams kDg = freeway::diagrams();
}  // namespace

TEST(Uep, FreewayEquilibrium) {
  const EquilibriumPair eq = solve_uep(kSpec, kDg, freeway::vstar());
  const Vector F{25, 25, 25, 25, 12.5, 12.5, 25, 25};
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(eq.xstar[i], freeway::xstar()[i], 1e-6);
    EXPECT_NEAR(eq.flows[i], F[i], 1e-8);
  }
  EXPECT_LT(eq.max_flow_spread, 1e-8);
  EXPECT_TRUE(eq.below_threshold);
  EXPECT_TRUE(eq.supply_slack_ok);
  EXPECT_NEAR(eq.min_supply_slack, 0.22 * 115.0 - 25.0, 1e-9);
  // v1* equals v1^max, so the strict inflow hypothesis is reported as failing
  EXPECT_FALSE(eq.below_vmax);
  EXPECT_FALSE(eq.hypotheses_ok());
}

TEST(Uep, ZeroInflowGivesEmptyNetwork) {
  const EquilibriumPair eq = solve_uep(kSpec, kDg, Vector(8, 0.0));
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(eq.flows[i], 0.0);
    EXPECT_EQ(eq.xstar[i], 0.0);
  }
}

TEST(Uep, InflowAboveCapacityIsInfeasibleAtTheEntry) {
  Vector v = freeway::vstar();
  v[0] = 26.0;
  try {
    solve_uep(kSpec, kDg, v);
    FAIL() << "expected InfeasibleInflow";
  } catch (const InfeasibleInflow& e) {
    EXPECT_EQ(e.cell(), 0u);
  }
}

TEST(Uep, DisturbanceDependentEquilibriumIsRejected) {
  const Vector v{10, 0, 0, 0, 5, 0, 0, 0};  // flows below the shared point of the shapes
  EXPECT_THROW(solve_uep(kSpec, kDg, v), NonUniformEquilibrium);
}

TEST(Uep, ForwardSubstitutionIgnoresWhichValidOrderIsUsed) {
  const Vector v = freeway::vstar();
  const Vector a = equilibrium_flows(kSpec, v, std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  const Vector b = equilibrium_flows(kSpec, v, std::vector<std::size_t>{4, 0, 5, 1, 2, 3, 6, 7});
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Uep, BisectionRootMatchesTheTargetFlow) {
  const Disturbance d = kDg.D.center();
  for (double target : {1.0, 7.5, 12.5, 20.0, 25.0}) {
    const double x = invert_subcritical(kDg.cells[0].demand, d, target);
    EXPECT_NEAR(kDg.demand(0, d, x), target, 1e-8);
  }
}

TEST(Residual, VanishesAtTheEquilibrium) {
  for (const auto& d : kDg.D.low_discrepancy(64)) {
    const Vector r = equilibrium_residual(kSpec, kDg, freeway::xstar(), freeway::vstar(), d);
    for (double ri : r) EXPECT_LT(ri, 1e-9);
  }
  const Vector r0 = equilibrium_residual(kSpec, kDg, Vector(8, 0.0), Vector(8, 0.0), kDg.D.center());
  for (double ri : r0) EXPECT_EQ(ri, 0.0);
}

TEST(Residual, CongestedPointIsNearlyFixedForAFittedWaveSpeed) {
  const ComponentFit fit = fit_disturbance_component(kSpec, kDg, freeway::congested_point(), freeway::vstar(),
                                                     Disturbance{1, 0, 1, 0.26}, 3, 0.22, 0.30);
  EXPECT_LT(fit.residual, 0.05);
  EXPECT_NEAR(fit.value, 0.26, 0.002);
}
