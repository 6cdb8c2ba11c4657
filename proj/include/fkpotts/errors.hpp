#pragma once

#include <stdexcept>
#include <string>

namespace fkp {

enum class ErrorCode {
  UnsupportedSpinSpace,
  ConvergenceFailure,
  DomainError,
  OutsideCriticalWindow,
  OutsideCriticalLine,
  SolverFailure,
  InvalidArity,
  BudgetExceeded,
  InvalidState,
  NotConnected,
  PlacementFailure,
  ConfigError,
  ConditionUnsatisfied,
  DivergentRegime,
  NumericalFailure,
  PlanFailure,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, double residual = 0.0)
      : std::runtime_error(std::string(error_name(code)) + ": " + what),
        code_(code),
        residual_(residual) {}

  ErrorCode code() const { return code_; }
  // Last residual for ConvergenceFailure; zero otherwise.
  double residual() const { return residual_; }

 private:
  ErrorCode code_;
  double residual_;
};

}  // namespace fkp
