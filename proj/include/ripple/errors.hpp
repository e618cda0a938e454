#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ripple {

/// Malformed plant or graph data (bad weights, missing references, topology faults).
class InvalidModel : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Scenario content that cannot be applied (unknown labels, bad events, schema errors).
class InvalidScenario : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A plant failed to produce an output for a given control vector.
class SolverFailure : public std::runtime_error {
public:
  SolverFailure(const std::string& what, std::vector<double> control = {})
      : std::runtime_error(what), control_(std::move(control)) {}

  const std::vector<double>& control() const noexcept { return control_; }

private:
  std::vector<double> control_;
};

class PowerFlowInfeasible : public SolverFailure {
public:
  using SolverFailure::SolverFailure;
};

class SingularJacobian : public SolverFailure {
public:
  using SolverFailure::SolverFailure;
};

class HydraulicInfeasible : public SolverFailure {
public:
  using SolverFailure::SolverFailure;
};

/// Physically inadmissible state, e.g. reverse flow through a fixed-speed pump.
class InvalidOperatingPoint : public SolverFailure {
public:
  using SolverFailure::SolverFailure;
};

} // namespace ripple
