#pragma once

#include <stdexcept>
#include <string>

namespace tieflow {

/// Malformed or inconsistent case file. The message names the offending entity.
class CaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal network cannot be solved for shift factors (disconnected or singular).
class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A regional dispatch has no feasible point.
class InfeasibleDispatch : public std::runtime_error {
 public:
  InfeasibleDispatch(std::string area, std::string certificate)
      : std::runtime_error("dispatch infeasible in area '" + area + "': " + certificate),
        area_(std::move(area)),
        certificate_(std::move(certificate)) {}

  const std::string& area() const noexcept { return area_; }
  const std::string& certificate() const noexcept { return certificate_; }

 private:
  std::string area_;
  std::string certificate_;
};

/// The QP solver ran out of iterations (distinct from infeasibility).
class SolverLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sample-average estimate excluded too many samples to be trusted.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A finite-difference check was requested at a degenerate dispatch.
class DegenerateDispatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tieflow
