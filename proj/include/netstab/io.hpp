#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "netstab/certificate.hpp"
#include "netstab/controller.hpp"
#include "netstab/equilibrium.hpp"
#include "netstab/errors.hpp"
#include "netstab/fundamental_diagram.hpp"
#include "netstab/network.hpp"
#include "netstab/simulation.hpp"

/// JSON readers and writers. Cell and disturbance indices are 1-based in files.
namespace netstab::io {

using nlohmann::json;

/// Malformed or inconsistent input file.
class InputError : public Error {
 public:
  using Error::Error;
};

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path);
}

namespace detail {

inline void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, _] : j.items())
    if (!ok.count(k)) throw InputError(where + ": unknown field '" + k + "'");
}

inline const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw InputError(where + ": expected a number");
  return j.get<double>();
}

inline Vector numbers(const json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) throw InputError(where + ": expected " + std::to_string(n) + " numbers");
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = number(j[i], where);
  return v;
}

/// Accepts nested rows or one flat row-major array.
inline Matrix square(const json& j, std::size_t n, const std::string& where) {
  Matrix M(n, n);
  if (j.is_array() && j.size() == n * n && (n == 0 || !j[0].is_array())) {
    for (std::size_t k = 0; k < n * n; ++k) M(k / n, k % n) = number(j[k], where);
    return M;
  }
  if (!j.is_array() || j.size() != n) throw InputError(where + ": expected an " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  for (std::size_t i = 0; i < n; ++i) {
    const Vector row = numbers(j[i], n, where);
    for (std::size_t k = 0; k < n; ++k) M(i, k) = row[k];
  }
  return M;
}

inline std::size_t index1(const json& j, std::size_t bound, const std::string& where) {
  if (!j.is_number_integer()) throw InputError(where + ": expected a 1-based index");
  const long long k = j.get<long long>();
  if (k < 1 || std::size_t(k) > bound) throw InputError(where + ": index " + std::to_string(k) + " out of range");
  return std::size_t(k - 1);
}

inline json rows(const Matrix& M) {
  json out = json::array();
  for (std::size_t i = 0; i < M.rows(); ++i) out.push_back(Vector(M.row(i).begin(), M.row(i).end()));
  return out;
}

}  // namespace detail

/// {"n", "a", "P", "Qexit", "mu", "vmax", optional "priority": {"<cell>": [feeders...]}}
inline NetworkSpec network_from_json(const json& j) {
  const std::string w = "network";
  detail::only_keys(j, {"n", "a", "P", "Qexit", "mu", "vmax", "priority"}, w);
  const json& jn = detail::field(j, "n", w);
  if (!jn.is_number_integer() || jn.get<long long>() < 1) throw InputError(w + ": n must be a positive integer");
  NetworkSpec s;
  s.n = jn.get<std::size_t>();
  s.a = detail::numbers(detail::field(j, "a", w), s.n, w + ".a");
  s.P = detail::square(detail::field(j, "P", w), s.n, w + ".P");
  s.Qexit = detail::numbers(detail::field(j, "Qexit", w), s.n, w + ".Qexit");
  s.mu = detail::numbers(detail::field(j, "mu", w), s.n, w + ".mu");
  s.vmax = detail::numbers(detail::field(j, "vmax", w), s.n, w + ".vmax");
  if (j.contains("priority")) {
    const json& jp = j.at("priority");
    if (!jp.is_object()) throw InputError(w + ".priority: expected an object keyed by cell");
    s.priority.assign(s.n, {});
    for (const auto& [key, list] : jp.items()) {
      std::size_t cell = 0;
      try {
        cell = detail::index1(json(std::stoll(key)), s.n, w + ".priority");
      } catch (const std::invalid_argument&) {
        throw InputError(w + ".priority: key '" + key + "' is not a cell index");
      }
      if (!list.is_array()) throw InputError(w + ".priority: expected a list of feeders");
      for (const json& f : list) s.priority[cell].push_back(detail::index1(f, s.n, w + ".priority"));
    }
  }
  check_dimensions(s);
  return s;
}

inline json to_json(const NetworkSpec& s) {
  json j{{"n", s.n}, {"a", s.a}, {"P", detail::rows(s.P)}, {"Qexit", s.Qexit}, {"mu", s.mu}, {"vmax", s.vmax}};
  if (!s.priority.empty()) {
    json p = json::object();
    for (std::size_t i = 0; i < s.priority.size(); ++i) {
      if (s.priority[i].empty()) continue;
      json list = json::array();
      for (std::size_t f : s.priority[i]) list.push_back(f + 1);
      p[std::to_string(i + 1)] = list;
    }
    j["priority"] = p;
  }
  return j;
}

inline DemandFamily family_from_string(const std::string& s, const std::string& where) {
  if (s == "sec5-main") return DemandFamily::MixedMainline;
  if (s == "sec5-onramp") return DemandFamily::MixedOnRamp;
  if (s == "piecewise") return DemandFamily::Piecewise;
  throw InputError(where + ": unknown family '" + s + "'");
}

inline const char* family_name(DemandFamily f) {
  switch (f) {
    case DemandFamily::MixedMainline: return "sec5-main";
    case DemandFamily::MixedOnRamp: return "sec5-onramp";
    case DemandFamily::Piecewise: return "piecewise";
  }
  return "?";
}

/// {"D": {"lower", "upper"}, "cells": [{"family", "L", "G", "delta", "delta_tilde", "fmin",
///   optional "weights" (three 1-based d components), "pieces" (piecewise only),
///   "supply": {"qcap", "wave_component" (1-based) | "wave_speed"}}]}
/// Capacities come from the network.
inline Diagrams diagrams_from_json(const json& j, const NetworkSpec& spec) {
  const std::string w = "diagrams";
  detail::only_keys(j, {"D", "cells"}, w);
  Diagrams dg;
  const json& jd = detail::field(j, "D", w);
  detail::only_keys(jd, {"lower", "upper"}, w + ".D");
  const json& lo = detail::field(jd, "lower", w + ".D");
  if (!lo.is_array()) throw InputError(w + ".D.lower: expected an array");
  dg.D.lower = detail::numbers(lo, lo.size(), w + ".D.lower");
  dg.D.upper = detail::numbers(detail::field(jd, "upper", w + ".D"), lo.size(), w + ".D.upper");
  for (std::size_t k = 0; k < dg.D.dim(); ++k)
    if (!(dg.D.lower[k] <= dg.D.upper[k])) throw InputError(w + ".D: lower bound above upper bound");
  const std::size_t l = dg.D.dim();

  const json& jc = detail::field(j, "cells", w);
  if (!jc.is_array() || jc.size() != spec.n)
    throw InputError(w + ".cells: expected " + std::to_string(spec.n) + " entries");
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::string wc = w + ".cells[" + std::to_string(i + 1) + "]";
    const json& c = jc[i];
    detail::only_keys(c, {"family", "L", "G", "delta", "delta_tilde", "fmin", "weights", "pieces", "supply"}, wc);
    CellDiagram cd;
    DemandFunction& f = cd.demand;
    const json& fam = detail::field(c, "family", wc);
    if (!fam.is_string()) throw InputError(wc + ".family: expected a string");
    f.family = family_from_string(fam.get<std::string>(), wc);
    f.capacity = spec.a[i];
    f.L = detail::number(detail::field(c, "L", wc), wc + ".L");
    f.G = detail::number(detail::field(c, "G", wc), wc + ".G");
    f.delta = detail::number(detail::field(c, "delta", wc), wc + ".delta");
    f.delta_tilde = detail::number(detail::field(c, "delta_tilde", wc), wc + ".delta_tilde");
    f.fmin = detail::number(detail::field(c, "fmin", wc), wc + ".fmin");
    if (c.contains("weights")) {
      const json& jw = c.at("weights");
      if (!jw.is_array() || jw.size() != 3) throw InputError(wc + ".weights: expected three indices");
      f.w1 = detail::index1(jw[0], l, wc + ".weights");
      f.w2 = detail::index1(jw[1], l, wc + ".weights");
      f.w3 = detail::index1(jw[2], l, wc + ".weights");
    } else if (f.family != DemandFamily::Piecewise && l < 3) {
      throw InputError(wc + ": mixed families need at least three disturbance components");
    }
    if (f.family == DemandFamily::Piecewise) {
      const json& jp = detail::field(c, "pieces", wc);
      if (!jp.is_array() || jp.empty()) throw InputError(wc + ".pieces: expected a non-empty array");
      double prev = 0.0;
      for (const json& p : jp) {
        detail::only_keys(p, {"lo", "hi", "coeffs"}, wc + ".pieces");
        PolynomialPiece piece;
        piece.lo = detail::number(detail::field(p, "lo", wc), wc + ".pieces.lo");
        piece.hi = detail::number(detail::field(p, "hi", wc), wc + ".pieces.hi");
        const json& co = detail::field(p, "coeffs", wc);
        if (!co.is_array() || co.empty()) throw InputError(wc + ".pieces.coeffs: expected numbers");
        piece.coeffs = detail::numbers(co, co.size(), wc + ".pieces.coeffs");
        if (piece.lo != prev || !(piece.hi > piece.lo)) throw InputError(wc + ".pieces: breakpoints must tile [0, a]");
        prev = piece.hi;
        f.pieces.push_back(std::move(piece));
      }
      if (prev != spec.a[i]) throw InputError(wc + ".pieces: last breakpoint must equal a_i");
    } else if (c.contains("pieces")) {
      throw InputError(wc + ": 'pieces' only applies to the piecewise family");
    }

    const json& js = detail::field(c, "supply", wc);
    detail::only_keys(js, {"qcap", "wave_component", "wave_speed"}, wc + ".supply");
    SupplyFunction& s = cd.supply;
    s.capacity = spec.a[i];
    s.qcap = detail::number(detail::field(js, "qcap", wc + ".supply"), wc + ".supply.qcap");
    if (js.contains("wave_component") == js.contains("wave_speed"))
      throw InputError(wc + ".supply: give exactly one of wave_component, wave_speed");
    if (js.contains("wave_component")) {
      s.wave_component = detail::index1(js.at("wave_component"), l, wc + ".supply.wave_component");
    } else {
      s.wave_component.reset();
      s.wave_speed = detail::number(js.at("wave_speed"), wc + ".supply.wave_speed");
    }
    dg.cells.push_back(std::move(cd));
  }
  check_compatible(spec, dg);
  return dg;
}

inline json to_json(const Diagrams& dg) {
  json cells = json::array();
  for (const CellDiagram& cd : dg.cells) {
    const DemandFunction& f = cd.demand;
    json c{{"family", family_name(f.family)}, {"L", f.L}, {"G", f.G}, {"delta", f.delta},
           {"delta_tilde", f.delta_tilde}, {"fmin", f.fmin}};
    if (f.family == DemandFamily::Piecewise) {
      json ps = json::array();
      for (const auto& p : f.pieces) ps.push_back({{"lo", p.lo}, {"hi", p.hi}, {"coeffs", p.coeffs}});
      c["pieces"] = ps;
    } else {
      c["weights"] = {f.w1 + 1, f.w2 + 1, f.w3 + 1};
    }
    json s{{"qcap", cd.supply.qcap}};
    if (cd.supply.wave_component) s["wave_component"] = *cd.supply.wave_component + 1;
    else s["wave_speed"] = cd.supply.wave_speed;
    c["supply"] = s;
    cells.push_back(c);
  }
  return {{"D", {{"lower", dg.D.lower}, {"upper", dg.D.upper}}}, {"cells", cells}};
}

/// {"xstar", "vstar", "b", "K", "tau"}
inline ControllerConfig controller_from_json(const json& j, std::size_t n) {
  const std::string w = "controller";
  detail::only_keys(j, {"xstar", "vstar", "b", "K", "tau"}, w);
  ControllerConfig c;
  c.xstar = detail::numbers(detail::field(j, "xstar", w), n, w + ".xstar");
  c.vstar = detail::numbers(detail::field(j, "vstar", w), n, w + ".vstar");
  c.b = detail::numbers(detail::field(j, "b", w), n, w + ".b");
  c.K = detail::square(detail::field(j, "K", w), n, w + ".K");
  c.tau = detail::number(detail::field(j, "tau", w), w + ".tau");
  try {
    c.validate();
  } catch (const Error& e) {
    throw InputError(w + ": " + e.what());
  }
  return c;
}

inline json to_json(const ControllerConfig& c) {
  return {{"xstar", c.xstar}, {"vstar", c.vstar}, {"b", c.b}, {"K", detail::rows(c.K)}, {"tau", c.tau}};
}

/// {"x0": [...] | "jam", "horizon", "disturbance": {"mode": "constant", "d"} | {"mode": "uniform", "seed"},
///  "control": {"mode": "open-loop", "v"} | {"mode": "closed-loop"}, optional "reference", "step_seconds"}
/// A closed-loop scenario takes its regulator from `controller`.
inline ScenarioConfig scenario_from_json(const json& j, const NetworkSpec& spec, const Diagrams& dg,
                                         const ControllerConfig* controller) {
  const std::string w = "scenario";
  detail::only_keys(j, {"x0", "horizon", "disturbance", "control", "reference", "step_seconds"}, w);
  ScenarioConfig sc;
  const json& x0 = detail::field(j, "x0", w);
  if (x0.is_string() && x0.get<std::string>() == "jam") sc.x0 = spec.a;
  else sc.x0 = detail::numbers(x0, spec.n, w + ".x0");
  const json& h = detail::field(j, "horizon", w);
  if (!h.is_number_integer() || h.get<long long>() < 1) throw InputError(w + ".horizon: expected a positive integer");
  sc.horizon = h.get<std::size_t>();

  const json& jd = detail::field(j, "disturbance", w);
  const std::string mode = detail::field(jd, "mode", w + ".disturbance").get<std::string>();
  if (mode == "constant") {
    detail::only_keys(jd, {"mode", "d"}, w + ".disturbance");
    sc.disturbance = DisturbanceMode::Constant;
    sc.d = detail::numbers(detail::field(jd, "d", w + ".disturbance"), dg.D.dim(), w + ".disturbance.d");
  } else if (mode == "uniform") {
    detail::only_keys(jd, {"mode", "seed"}, w + ".disturbance");
    sc.disturbance = DisturbanceMode::UniformRandom;
    if (jd.contains("seed")) sc.seed = jd.at("seed").get<std::uint64_t>();
  } else {
    throw InputError(w + ".disturbance.mode: expected 'constant' or 'uniform'");
  }

  const json& jc = detail::field(j, "control", w);
  const std::string cmode = detail::field(jc, "mode", w + ".control").get<std::string>();
  if (cmode == "open-loop") {
    detail::only_keys(jc, {"mode", "v"}, w + ".control");
    sc.v = detail::numbers(detail::field(jc, "v", w + ".control"), spec.n, w + ".control.v");
  } else if (cmode == "closed-loop") {
    detail::only_keys(jc, {"mode"}, w + ".control");
    if (!controller) throw InputError(w + ": closed-loop scenario needs a controller");
    sc.controller = *controller;
  } else {
    throw InputError(w + ".control.mode: expected 'open-loop' or 'closed-loop'");
  }
  if (j.contains("reference")) sc.reference = detail::numbers(j.at("reference"), spec.n, w + ".reference");
  if (j.contains("step_seconds")) sc.step_seconds = detail::number(j.at("step_seconds"), w + ".step_seconds");
  if (sc.ref().size() != spec.n) throw InputError(w + ": open-loop scenario needs a 'reference' state");
  try {
    sc.validate(spec, dg);
  } catch (const Error& e) {
    throw InputError(w + ": " + e.what());
  }
  return sc;
}

inline json to_json(const EquilibriumPair& eq) {
  return {{"xstar", eq.xstar},
          {"vstar", eq.vstar},
          {"flows", eq.flows},
          {"max_flow_spread", eq.max_flow_spread},
          {"min_supply_slack", eq.min_supply_slack},
          {"hypotheses",
           {{"below_threshold", eq.below_threshold},
            {"below_vmax", eq.below_vmax},
            {"below_empty_supply", eq.below_empty_supply},
            {"supply_slack", eq.supply_slack_ok}}}};
}

inline json to_json(const StabilityCertificate& c) {
  json h1 = json::array();
  for (const H1Report& h : c.h1)
    h1.push_back({{"ok", h.ok()}, {"L_hat", h.L_hat}, {"G_hat", h.G_hat}, {"fmin_hat", h.fmin_hat}});
  json j{{"r", c.r},
         {"xi", c.xi},
         {"epsstar", c.epsstar},
         {"beta", c.beta},
         {"Q", c.Qconst},
         {"Theta", c.Theta},
         {"gamma", {{"estimate", c.gamma}, {"samples", c.gamma_samples}, {"method", "sampled infimum (not a proof)"},
                    {"argmin", {{"d", c.gamma_d}, {"x", c.gamma_x}, {"v", c.gamma_v}}}}},
         {"C", c.C},
         {"checks",
          {{"H1", h1},
           {"H4", {{"pass", c.h4.pass}, {"min_slack", c.h4.min_slack}, {"worst_cell", c.h4.worst_cell + 1},
                   {"worst_x", c.h4.worst_x}, {"worst_d", c.h4.worst_d}, {"samples", c.h4.samples}}},
           {"H3_gamma_positive", c.h3},
           {"equilibrium_hypotheses", c.uep_hypotheses},
           {"C_in_unit_interval", c.C_ok()},
           {"floor_condition", c.floor_condition},
           {"rho_below_one", c.Gamma.has_value() && c.rho_ok()}}},
         {"certified", c.ok()}};
  if (c.Gamma) {
    j["Gamma"] = detail::rows(*c.Gamma);
    j["rho"] = c.rho;
    j["rho_power"] = c.rho_power;
  }
  j["m"] = c.m ? json(*c.m) : json(nullptr);
  return j;
}

}  // namespace netstab::io
