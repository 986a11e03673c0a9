#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "netstab/errors.hpp"
#include "netstab/matrix.hpp"

namespace netstab {

/// Turning rates at or below this value are treated as absent edges.
inline constexpr double kEdgeThreshold = 1e-15;
/// Absolute tolerance on the row-sum conservation constraint.
inline constexpr double kRowSumTolerance = 1e-12;

/// Static network structure. All indices are 0-based in code; files and
/// messages use 1-based cell numbers.
struct NetworkSpec {
  std::size_t n = 0;
  Vector a;       // storage capacity per cell (veh)
  Matrix P;       // turning rates p(i, j): fraction of cell-i outflow sent to j
  Vector Qexit;   // exit rates
  Vector mu;      // uncongested thresholds (veh)
  Vector vmax;    // admissible external inflow bound (veh/step)
  /// Optional merge priorities: priority[j] lists the feeders of cell j, highest
  /// priority first. Empty means "higher cell index first" at every merge.
  std::vector<std::vector<std::size_t>> priority;

  bool has_edge(std::size_t i, std::size_t j) const { return P(i, j) > kEdgeThreshold; }
};

struct Violation {
  enum class Kind {
    SelfLoop,
    RowSum,
    TurningRateRange,
    ExitRateRange,
    Capacity,
    Threshold,
    InflowBound,
    Priority
  };
  Kind kind;
  std::size_t index;  // cell (0-based)
  double residual;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  const Violation* find(Violation::Kind kind, std::size_t index) const {
    for (const auto& v : violations)
      if (v.kind == kind && v.index == index) return &v;
    return nullptr;
  }
};

/// Throws StructuralError when sequence lengths or matrix shape disagree with n.
inline void check_dimensions(const NetworkSpec& spec) {
  const auto n = spec.n;
  if (n == 0) throw StructuralError("network must have at least one cell");
  auto need = [n](std::size_t got, const char* name) {
    if (got != n)
      throw StructuralError(std::string(name) + " has length " + std::to_string(got) +
                            ", expected " + std::to_string(n));
  };
  need(spec.a.size(), "a");
  need(spec.Qexit.size(), "Qexit");
  need(spec.mu.size(), "mu");
  need(spec.vmax.size(), "vmax");
  if (spec.P.rows() != n || spec.P.cols() != n)
    throw StructuralError("P must be " + std::to_string(n) + "x" + std::to_string(n));
  if (!spec.priority.empty()) need(spec.priority.size(), "priority");
}

/// Lists every violated constraint. Dimension problems throw instead.
inline ValidationReport validate_spec(const NetworkSpec& spec) {
  check_dimensions(spec);
  ValidationReport report;
  auto add = [&](Violation::Kind k, std::size_t i, double r, std::string msg) {
    report.violations.push_back({k, i, r, "cell " + std::to_string(i + 1) + ": " + std::move(msg)});
  };
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (spec.P(i, i) != 0.0) add(Violation::Kind::SelfLoop, i, spec.P(i, i), "p_ii must be 0");
    double row = spec.Qexit[i];
    for (std::size_t j = 0; j < spec.n; ++j) {
      const double p = spec.P(i, j);
      if (!(p >= 0.0 && p <= 1.0))
        add(Violation::Kind::TurningRateRange, i, p,
            "p(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") outside [0,1]");
      row += p;
    }
    if (!(std::abs(row - 1.0) <= kRowSumTolerance))
      add(Violation::Kind::RowSum, i, std::abs(row - 1.0),
          "sum of turning rates plus exit rate is " + std::to_string(row));
    if (!(spec.Qexit[i] >= 0.0 && spec.Qexit[i] <= 1.0))
      add(Violation::Kind::ExitRateRange, i, spec.Qexit[i], "exit rate outside [0,1]");
    if (!(spec.a[i] > 0.0)) add(Violation::Kind::Capacity, i, spec.a[i], "capacity must be positive");
    if (!(spec.mu[i] > 0.0 && spec.mu[i] < spec.a[i]))
      add(Violation::Kind::Threshold, i, spec.mu[i], "threshold mu must lie in (0, a)");
    if (!(spec.vmax[i] > 0.0)) add(Violation::Kind::InflowBound, i, spec.vmax[i], "vmax must be positive");
  }
  if (!spec.priority.empty()) {
    for (std::size_t j = 0; j < spec.n; ++j) {
      std::vector<std::size_t> listed = spec.priority[j];
      std::sort(listed.begin(), listed.end());
      std::vector<std::size_t> feeders;
      for (std::size_t i = 0; i < spec.n; ++i)
        if (spec.has_edge(i, j)) feeders.push_back(i);
      if (!listed.empty() && listed != feeders)
        add(Violation::Kind::Priority, j, 0.0, "priority list must name exactly the feeders of the cell");
    }
  }
  return report;
}

/// Feeders of cell j (cells i with p(i, j) > 0), highest merge priority first.
inline std::vector<std::size_t> feeders_by_priority(const NetworkSpec& spec, std::size_t j) {
  if (!spec.priority.empty() && !spec.priority[j].empty()) return spec.priority[j];
  std::vector<std::size_t> f;
  for (std::size_t i = spec.n; i-- > 0;)
    if (spec.has_edge(i, j)) f.push_back(i);
  return f;
}

/// perm[k] is the original index of the cell at topological rank k.
struct TopologicalOrder {
  std::vector<std::size_t> perm;

  std::vector<std::size_t> rank() const {
    std::vector<std::size_t> r(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) r[perm[k]] = k;
    return r;
  }
};

/// A directed cycle i_1 -> i_2 -> ... -> i_e -> i_1 of the turning-rate graph,
/// rotated to start at its smallest index; empty when the graph is acyclic.
inline std::optional<std::vector<std::size_t>> find_cycle(const Matrix& P) {
  const std::size_t n = P.rows();
  enum Color : unsigned char { White, Grey, Black };
  std::vector<Color> color(n, White);
  std::vector<std::size_t> parent(n, n);
  std::vector<std::size_t> found;

  std::function<bool(std::size_t)> visit = [&](std::size_t u) -> bool {
    color[u] = Grey;
    for (std::size_t v = 0; v < n; ++v) {
      if (!(P(u, v) > kEdgeThreshold)) continue;
      if (color[v] == Grey) {
        found.push_back(v);
        for (std::size_t w = u; w != v; w = parent[w]) found.push_back(w);
        std::reverse(found.begin() + 1, found.end());
        return true;
      }
      if (color[v] == White) {
        parent[v] = u;
        if (visit(v)) return true;
      }
    }
    color[u] = Black;
    return false;
  };

  for (std::size_t s = 0; s < n; ++s) {
    if (color[s] == White && visit(s)) {
      auto it = std::min_element(found.begin(), found.end());
      std::rotate(found.begin(), it, found.end());
      return found;
    }
  }
  return std::nullopt;
}

/// Kahn ordering with lowest-index tie-breaking. Throws AcyclicityError with a
/// witness cycle when the graph is cyclic.
inline TopologicalOrder topological_sort(const Matrix& P) {
  if (!P.square()) throw StructuralError("turning matrix must be square");
  const std::size_t n = P.rows();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (P(i, j) > kEdgeThreshold) ++indegree[j];

  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);

  TopologicalOrder order;
  order.perm.reserve(n);
  while (!ready.empty()) {
    const std::size_t u = ready.top();
    ready.pop();
    order.perm.push_back(u);
    for (std::size_t v = 0; v < n; ++v)
      if (P(u, v) > kEdgeThreshold && --indegree[v] == 0) ready.push(v);
  }
  if (order.perm.size() != n) throw AcyclicityError(find_cycle(P).value_or(std::vector<std::size_t>{}));
  return order;
}

inline bool is_strictly_upper_triangular(const Matrix& M) {
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j <= i && j < M.cols(); ++j)
      if (std::abs(M(i, j)) > kEdgeThreshold) return false;
  return true;
}

}  // namespace netstab
