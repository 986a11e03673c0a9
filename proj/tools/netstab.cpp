// netstab: command-line front end for the certificate pipeline and scenario runner.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "netstab/certificate.hpp"
#include "netstab/controller.hpp"
#include "netstab/equilibrium.hpp"
#include "netstab/freeway.hpp"
#include "netstab/io.hpp"
#include "netstab/simulation.hpp"
#include "netstab/studies.hpp"

namespace {

using namespace netstab;
using nlohmann::json;

constexpr int kPass = 0;
constexpr int kCheckFailed = 1;
constexpr int kInputError = 2;

struct Options {
  std::string network;
  std::string diagrams;
  std::string controller;
  std::string scenario;
  std::string vstar;
  std::string out;
  std::uint64_t seed = 1;
  std::size_t horizon = 1000;
  std::size_t gamma_samples = 100000;
};

NetworkSpec load_network(const Options& o) {
  if (o.network.empty()) return freeway::network();
  return io::network_from_json(io::read_json(o.network));
}

Diagrams load_diagrams(const Options& o, const NetworkSpec& spec) {
  if (o.diagrams.empty()) {
    if (!o.network.empty()) throw io::InputError("--diagrams is required with --network");
    return freeway::diagrams();
  }
  return io::diagrams_from_json(io::read_json(o.diagrams), spec);
}

std::optional<ControllerConfig> load_controller(const Options& o, const NetworkSpec& spec) {
  if (o.controller.empty()) return std::nullopt;
  return io::controller_from_json(io::read_json(o.controller), spec.n);
}

Vector parse_list(const std::string& text, std::size_t n) {
  Vector v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw io::InputError("--vstar: '" + item + "' is not a number");
    }
  }
  if (v.size() != n) throw io::InputError("--vstar: expected " + std::to_string(n) + " values");
  return v;
}

Vector resolve_vstar(const Options& o, const NetworkSpec& spec, const std::optional<ControllerConfig>& ctl) {
  if (!o.vstar.empty()) return parse_list(o.vstar, spec.n);
  if (ctl) return ctl->vstar;
  if (o.network.empty()) return freeway::vstar();
  throw io::InputError("give --vstar or --controller");
}

void emit(const json& j, const Options& o, const std::string& name) {
  if (o.out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::filesystem::create_directories(o.out);
  io::write_json(j, (std::filesystem::path(o.out) / name).string());
}

CertificateOptions certificate_options(const Options& o) {
  CertificateOptions c;
  c.prop24.samples = o.gamma_samples;
  return c;
}

int cmd_validate(const Options& o) {
  const NetworkSpec spec = load_network(o);
  const ValidationReport rep = validate_spec(spec);
  json j{{"cells", spec.n}, {"valid", rep.ok()}};
  json issues = json::array();
  for (const Violation& v : rep.violations) issues.push_back({{"cell", v.index + 1}, {"message", v.message}});
  j["violations"] = issues;
  bool ok = rep.ok();
  if (const auto cycle = find_cycle(spec.P)) {
    json c = json::array();
    for (std::size_t i : *cycle) c.push_back(i + 1);
    j["cycle"] = c;
    ok = false;
  }
  if (!o.diagrams.empty() || o.network.empty()) {
    const Diagrams dg = load_diagrams(o, spec);
    json h1 = json::array();
    for (const CellDiagram& c : dg.cells) {
      const H1Report r = verify_h1(c.demand, dg.D);
      h1.push_back(r.ok());
      ok = ok && r.ok();
    }
    const H4Report h4 = verify_h4(spec, dg);
    j["H1"] = h1;
    j["H4"] = {{"pass", h4.pass}, {"min_slack", h4.min_slack}, {"worst_cell", h4.worst_cell + 1}};
    ok = ok && h4.pass;
  }
  j["ok"] = ok;
  emit(j, o, "validation.json");
  return ok ? kPass : kCheckFailed;
}

int cmd_solve_uep(const Options& o) {
  const NetworkSpec spec = load_network(o);
  const Diagrams dg = load_diagrams(o, spec);
  const auto ctl = load_controller(o, spec);
  const EquilibriumPair eq = solve_uep(spec, dg, resolve_vstar(o, spec, ctl));
  emit(io::to_json(eq), o, "equilibrium.json");
  return eq.hypotheses_ok() ? kPass : kCheckFailed;
}

struct Pipeline {
  NetworkSpec spec;
  Diagrams dg;
  EquilibriumPair eq;
  StabilityCertificate cert;
  ControllerConfig controller;
};

Pipeline run_pipeline(const Options& o) {
  Pipeline p{load_network(o), {}, {}, {}, {}};
  p.dg = load_diagrams(o, p.spec);
  const auto ctl = load_controller(o, p.spec);
  p.eq = solve_uep(p.spec, p.dg, resolve_vstar(o, p.spec, ctl));
  p.cert = certify(p.spec, p.dg, p.eq, certificate_options(o));
  p.controller = ctl ? *ctl : synthesize(p.eq.xstar, p.eq.vstar, p.cert.r, p.cert.C, p.cert.beta).config;
  attach_controller(p.cert, p.spec, p.dg, p.controller);
  return p;
}

int cmd_analyze(const Options& o) {
  const Pipeline p = run_pipeline(o);
  json j = io::to_json(p.cert);
  j["equilibrium"] = io::to_json(p.eq);
  emit(j, o, "certificate.json");
  return p.cert.ok() ? kPass : kCheckFailed;
}

int cmd_synthesize(const Options& o) {
  const Pipeline p = run_pipeline(o);
  emit(io::to_json(p.controller), o, "controller.json");
  return p.cert.floor_condition ? kPass : kCheckFailed;
}

int cmd_simulate(const Options& o) {
  if (o.scenario.empty()) throw io::InputError("--scenario is required");
  const NetworkSpec spec = load_network(o);
  const Diagrams dg = load_diagrams(o, spec);
  const auto ctl = load_controller(o, spec);
  ScenarioConfig sc = io::scenario_from_json(io::read_json(o.scenario), spec, dg, ctl ? &*ctl : nullptr);
  const TrajectoryRecord rec = run_scenario(spec, dg, sc);
  const DecayFit fit = estimate_decay(rec);
  json j{{"steps", rec.horizon()},
         {"initial_deviation", rec.deviation.front()},
         {"final_deviation", rec.deviation.back()},
         {"final_state", rec.states.back()},
         {"max_mass_residual", rec.max_mass_residual()},
         {"decay", {{"sigma", fit.sigma}, {"M", fit.M}, {"points", fit.points}}}};
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    export_csv(rec, (std::filesystem::path(o.out) / "trajectory.csv").string());
  }
  emit(j, o, "summary.json");
  return kPass;
}

int cmd_gridlock(const Options& o) {
  const NetworkSpec spec = load_network(o);
  const Diagrams dg = load_diagrams(o, spec);
  const GridlockReport rep = gridlock_demo(spec, dg, o.horizon, o.seed);
  json cycle = json::array();
  for (std::size_t i : rep.cycle) cycle.push_back(i + 1);
  json j{{"cycle", cycle}, {"steps", o.horizon}, {"max_cycle_deviation", rep.max_cycle_deviation},
         {"stationary", rep.stationary()}};
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    export_csv(rep.record, (std::filesystem::path(o.out) / "gridlock.csv").string());
  }
  emit(j, o, "gridlock.json");
  return rep.stationary() ? kPass : kCheckFailed;
}

int cmd_reproduce(const Options& o) {
  if (!o.network.empty() || !o.diagrams.empty())
    throw io::InputError("reproduce-paper runs the built-in freeway instance only");
  const std::string out = o.out.empty() ? "reproduction" : o.out;
  std::filesystem::create_directories(out);
  const auto path = [&](const char* f) { return (std::filesystem::path(out) / f).string(); };

  const NetworkSpec spec = freeway::network();
  const Diagrams dg = freeway::diagrams();
  const EquilibriumPair eq = solve_uep(spec, dg, freeway::vstar());

  const studies::OpenLoopStudy open = studies::open_loop_jam_study(spec, dg, eq.xstar);
  export_csv(open.record, path("open_loop_jam.csv"));

  const ControllerConfig ctl = freeway::experiment_controller();
  ScenarioConfig constant;
  constant.horizon = 500;
  constant.disturbance = DisturbanceMode::Constant;
  constant.d = open.disturbance.d;
  constant.controller = ctl;
  json constant_runs = json::array();
  const Vector low{20, 25, 20, 25, 20, 25, 20, 25}, incident{50, 50, 50, 50, 27, 27, 80, 60};
  const char* names[] = {"closed_loop_constant_low.csv", "closed_loop_constant_incident.csv",
                         "closed_loop_constant_jam.csv"};
  const Vector starts[] = {low, incident, spec.a};
  for (int k = 0; k < 3; ++k) {
    constant.x0 = starts[k];
    const TrajectoryRecord rec = run_scenario(spec, dg, constant);
    export_csv(rec, path(names[k]));
    constant_runs.push_back({{"file", names[k]}, {"final_deviation", rec.deviation.back()}});
  }

  const auto runs = studies::closed_loop_decay_study(spec, dg, ctl, o.seed);
  json random_runs = json::array();
  bool closed_ok = true;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const std::string file = "closed_loop_random_" + std::to_string(k + 1) + ".csv";
    export_csv(runs[k].record, path(file.c_str()));
    const bool ok = runs[k].below_one_at.has_value() && runs[k].fit.sigma > 0.0;
    closed_ok = closed_ok && ok;
    random_runs.push_back({{"file", file},
                           {"x0", runs[k].x0},
                           {"below_one_at", runs[k].below_one_at ? json(*runs[k].below_one_at) : json(nullptr)},
                           {"sigma", runs[k].fit.sigma},
                           {"final_deviation", runs[k].record.deviation.back()}});
  }

  const bool open_ok = std::abs(open.settled_deviation - 125.5) <= 2.0 && std::abs(open.deficit_cell4 - 7.4) <= 0.3 &&
                       std::abs(open.deficit_cell8 - 4.9) <= 0.3;
  json summary{
      {"equilibrium", io::to_json(eq)},
      {"open_loop",
       {{"d", open.disturbance.d},
        {"d_fit_residual", open.disturbance.residual},
        {"settled_at", open.settled_at ? json(*open.settled_at) : json(nullptr)},
        {"settled_state", open.settled_state},
        {"settled_deviation", open.settled_deviation},
        {"terminal_deviation", open.terminal_deviation},
        {"deficit_cell4", open.deficit_cell4},
        {"deficit_cell8", open.deficit_cell8},
        {"ok", open_ok}}},
      {"closed_loop_constant_d", constant_runs},
      {"closed_loop_random_d", random_runs},
      {"seed", o.seed}};
  io::write_json(summary, path("summary.json"));
  std::cout << summary.dump(2) << '\n';
  return open_ok && closed_ok ? kPass : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certificates and simulation for uncertain acyclic traffic networks"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--network", o.network, "network JSON (default: built-in 8-cell freeway)");
    sub->add_option("--diagrams", o.diagrams, "fundamental-diagram JSON");
    sub->add_option("--controller", o.controller, "controller JSON");
    sub->add_option("--scenario", o.scenario, "scenario JSON");
    sub->add_option("--vstar", o.vstar, "equilibrium inflows, comma separated");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--gamma-samples", o.gamma_samples, "sample count for the gamma estimate");
    sub->add_option("--horizon", o.horizon, "steps for gridlock-demo");
  };
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Entry entries[] = {
      {"validate", "check network structure and diagram hypotheses", cmd_validate},
      {"solve-uep", "compute the uncongested equilibrium", cmd_solve_uep},
      {"analyze", "build the stability certificate", cmd_analyze},
      {"synthesize", "derive b, K and tau from the certificate", cmd_synthesize},
      {"simulate", "run a scenario and export its trajectory", cmd_simulate},
      {"gridlock-demo", "show that a jammed cycle never clears", cmd_gridlock},
      {"reproduce-paper", "regenerate the freeway study data", cmd_reproduce},
  };
  int (*chosen)(const Options&) = nullptr;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    common(sub);
    sub->callback([&chosen, run = e.run] { chosen = run; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kInputError;
  }
  try {
    return chosen(o);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
  } catch (const netstab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kCheckFailed;
  }
  return kInputError;
}
