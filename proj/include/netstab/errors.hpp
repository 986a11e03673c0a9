#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace netstab {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs with inconsistent dimensions (wrong sequence length, non-square matrix).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A value outside its admissible set (density outside [0, a], d outside D, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinite value produced while evaluating flows.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t cell)
      : Error(what + " (cell " + std::to_string(cell + 1) + ")"), cell_(cell) {}
  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t cell_;
};

/// The turning-rate graph contains a cycle. Carries one witness cycle (0-based).
class AcyclicityError : public Error {
 public:
  explicit AcyclicityError(std::vector<std::size_t> cycle)
      : Error(describe(cycle)), cycle_(std::move(cycle)) {}
  const std::vector<std::size_t>& cycle() const noexcept { return cycle_; }

 private:
  static std::string describe(const std::vector<std::size_t>& cycle) {
    std::string s = "turning-rate graph contains the cycle (";
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      if (k) s += ",";
      s += std::to_string(cycle[k] + 1);
    }
    return s + ")";
  }
  std::vector<std::size_t> cycle_;
};

/// Equilibrium flow above the largest subcritical demand of a cell.
class InfeasibleInflow : public Error {
 public:
  InfeasibleInflow(std::size_t cell, double flow, double capacity)
      : Error("equilibrium flow " + std::to_string(flow) + " exceeds the subcritical capacity " +
              std::to_string(capacity) + " of cell " + std::to_string(cell + 1)),
        cell_(cell) {}
  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t cell_;
};

/// The demand at the candidate equilibrium changes with the disturbance.
class NonUniformEquilibrium : public Error {
 public:
  NonUniformEquilibrium(std::size_t cell, double spread)
      : Error("demand at the equilibrium of cell " + std::to_string(cell + 1) +
              " varies with d by " + std::to_string(spread)),
        cell_(cell) {}
  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t cell_;
};

/// A constructed constant or region does not exist for the given data.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// An API used outside its intended setting (e.g. gridlock demo on an acyclic network).
class MisuseError : public Error {
 public:
  using Error::Error;
};

}  // namespace netstab
