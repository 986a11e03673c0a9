#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "netstab/freeway.hpp"
#include "netstab/simulation.hpp"
#include "netstab/studies.hpp"

using namespace netstab;

namespace {
const NetworkSpec kSpec = freeway::network();
const Diagrams kDg = freeway::diagrams();

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig closed_loop_from(const Vector& x0, std::uint64_t seed, std::size_t horizon = 500) {
  ScenarioConfig sc;
  sc.x0 = x0;
  sc.horizon = horizon;
  sc.seed = seed;
  sc.controller = freeway::experiment_controller();
  return sc;
}

Matrix cycle3() {
  Matrix P(3, 3, 0.0);
  P(0, 1) = P(1, 2) = P(2, 0) = 1.0;
  return P;
}

NetworkSpec cycle_spec() {
  NetworkSpec s;
  s.n = 3;
  s.a.assign(3, 170.0);
  s.mu.assign(3, 55.0);
  s.vmax.assign(3, 25.0);
  s.P = cycle3();
  s.Qexit.assign(3, 0.0);
  return s;
}

Diagrams cycle_diagrams() {
  Diagrams dg = kDg;
  dg.cells.resize(3);
  return dg;
}
}  // namespace

TEST(Scenario, ClosedLoopFromEquilibriumStaysPut) {
  const TrajectoryRecord rec = run_scenario(kSpec, kDg, closed_loop_from(freeway::xstar(), 1, 100));
  for (const Vector& x : rec.states)
    for (std::size_t i = 0; i < 8; ++i) ASSERT_NEAR(x[i], freeway::xstar()[i], 1e-9);
}

TEST(Scenario, IncidentClearsWithinHorizon) {
  const TrajectoryRecord rec = run_scenario(kSpec, kDg, closed_loop_from({50, 50, 50, 50, 27, 27, 80, 60}, 9));
  EXPECT_LT(rec.deviation.back(), 1.0);
  EXPECT_LT(rec.max_mass_residual(), 1e-9);
}

TEST(Scenario, ReplayIsExact) {
  const ScenarioConfig sc = closed_loop_from(kSpec.a, 5, 200);
  const TrajectoryRecord rec = run_scenario(kSpec, kDg, sc);
  for (std::size_t t = 0; t < rec.horizon(); ++t) {
    ASSERT_EQ(step(kSpec, kDg, rec.states[t], rec.inflows[t], rec.disturbances[t]).x, rec.states[t + 1]);
    ASSERT_EQ(control_law(*sc.controller, rec.states[t]), rec.inflows[t]);
  }
}

TEST(Scenario, InvalidConfigurationsRejected) {
  ScenarioConfig sc = closed_loop_from(kSpec.a, 1);
  sc.horizon = 0;
  EXPECT_THROW(run_scenario(kSpec, kDg, sc), DomainError);
  sc = closed_loop_from(kSpec.a, 1);
  sc.disturbance = DisturbanceMode::Constant;
  sc.d = {1, 0, 1, 0.5};
  EXPECT_THROW(run_scenario(kSpec, kDg, sc), DomainError);
}

TEST(ScenarioProperty, ClosedLoopInflowsStayBetweenFloorAndNominal) {
  const ControllerConfig c = freeway::experiment_controller();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CounterRng rng(seed, 8);
    Vector x0(8);
    for (double& x : x0) x = rng.uniform(0, 170);
    const TrajectoryRecord rec = run_scenario(kSpec, kDg, closed_loop_from(x0, seed, 300));
    for (const Vector& v : rec.inflows)
      for (std::size_t i = 0; i < 8; ++i) {
        ASSERT_GE(v[i], c.b[i]);
        ASSERT_LE(v[i], c.vstar[i]);
      }
    ASSERT_LT(rec.max_mass_residual(), 1e-9);
  }
}

TEST(Decay, GeometricSequenceRecoversRate) {
  Vector dev(40);
  for (std::size_t t = 0; t < dev.size(); ++t) dev[t] = std::ldexp(3.0, -int(t));
  const DecayFit f = estimate_decay(dev);
  EXPECT_NEAR(f.sigma, std::log(2.0), 1e-6);
  EXPECT_NEAR(f.M, 3.0, 1e-6);
  EXPECT_LT(f.residual, 1e-9);
}

TEST(Decay, AlreadyConverged) {
  const DecayFit f = estimate_decay(Vector(10, 0.0));
  EXPECT_TRUE(f.converged_immediately);
}

TEST(Decay, OpenLoopPlateauDoesNotDecay) {
  const studies::OpenLoopStudy s = studies::open_loop_jam_study(kSpec, kDg, freeway::xstar());
  const DecayFit f = estimate_decay(Vector(s.record.deviation.begin() + 120, s.record.deviation.begin() + 200));
  EXPECT_LE(f.sigma, 1e-6);
}

TEST(Gridlock, JammedCycleNeverMoves) {
  const GridlockReport rep = gridlock_demo(cycle_spec(), cycle_diagrams(), 1000, 11);
  EXPECT_TRUE(rep.stationary());
  EXPECT_EQ(rep.cycle, (std::vector<std::size_t>{0, 1, 2}));
  for (const Vector& x : rep.record.states) EXPECT_EQ(x, Vector(3, 170.0));
}

TEST(Gridlock, EmptyCycleFills) {
  const GridlockReport rep = gridlock_demo(cycle_spec(), cycle_diagrams(), 50, 11, Vector(3, 0.0));
  EXPECT_GT(rep.record.states.back()[0], 0.0);
  EXPECT_FALSE(rep.record.states.back() == rep.record.states.front());
}

TEST(Gridlock, FreewayWithBackEdge) {
  NetworkSpec s = kSpec;
  s.P(6, 7) = 0.5;
  s.P(6, 2) = 0.5;
  const GridlockReport rep = gridlock_demo(s, kDg, 1000, 13);
  EXPECT_EQ(rep.cycle, (std::vector<std::size_t>{2, 3, 6}));
  EXPECT_TRUE(rep.stationary());
}

TEST(Gridlock, AcyclicNetworkIsMisuse) { EXPECT_THROW(gridlock_demo(kSpec, kDg, 10, 1), MisuseError); }

TEST(Csv, LayoutAndDeterminism) {
  const auto dir = std::filesystem::temp_directory_path() / "netstab_csv_test";
  std::filesystem::create_directories(dir);
  const TrajectoryRecord one = run_scenario(kSpec, kDg, closed_loop_from(kSpec.a, 3, 1));
  export_csv(one, (dir / "one.csv").string());
  const std::string text = slurp((dir / "one.csv").string());
  std::istringstream lines(text);
  std::string header, row0, row1, extra;
  std::getline(lines, header);
  std::getline(lines, row0);
  std::getline(lines, row1);
  EXPECT_FALSE(std::getline(lines, extra));
  EXPECT_EQ(header.rfind("t,x_1,", 0), 0u);
  EXPECT_NE(header.find(",v_8,deviation,V_1,"), std::string::npos);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 1 + 8 + 8 + 1 + 16 - 1);
  EXPECT_NE(row1.find(",,,,,,,,"), std::string::npos);  // no inflow on the terminal row

  const TrajectoryRecord a = run_scenario(kSpec, kDg, closed_loop_from(kSpec.a, 21, 300));
  const TrajectoryRecord b = run_scenario(kSpec, kDg, closed_loop_from(kSpec.a, 21, 300));
  export_csv(a, (dir / "a.csv").string());
  export_csv(b, (dir / "b.csv").string());
  EXPECT_EQ(slurp((dir / "a.csv").string()), slurp((dir / "b.csv").string()));
  EXPECT_THROW(export_csv(a, (dir / "missing" / "x.csv").string()), Error);
}
