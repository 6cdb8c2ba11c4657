#include "fkpotts/params.hpp"

#include <algorithm>
#include <cmath>

#include "fkpotts/errors.hpp"

namespace fkp {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedSpinSpace: return "UnsupportedSpinSpace";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::OutsideCriticalWindow: return "OutsideCriticalWindow";
    case ErrorCode::OutsideCriticalLine: return "OutsideCriticalLine";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::InvalidArity: return "InvalidArity";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::NotConnected: return "NotConnected";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ConditionUnsatisfied: return "ConditionUnsatisfied";
    case ErrorCode::DivergentRegime: return "DivergentRegime";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::PlanFailure: return "PlanFailure";
  }
  return "Unknown";
}

bool ModelParams::potts_integer() const {
  return std::floor(q) == q && q >= 2.0 && q < 1e6;
}

int ModelParams::q_int() const {
  if (!potts_integer()) {
    throw Error(ErrorCode::UnsupportedSpinSpace, "spin-space operation requires integer q");
  }
  return static_cast<int>(q);
}

ModelParams make_params(int d, double q, double beta, double B) {
  if (d < 3) throw Error(ErrorCode::DomainError, "d must be >= 3");
  if (!(q > 2.0) || !std::isfinite(q)) throw Error(ErrorCode::DomainError, "q must be > 2");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::DomainError, "beta must be >= 0");
  if (!(B >= 0.0) || !std::isfinite(B)) throw Error(ErrorCode::DomainError, "B must be >= 0");
  ModelParams p;
  p.d = d;
  p.q = q;
  p.beta = beta;
  p.B = B;
  p.w = std::expm1(beta);
  p.w_ghost = std::expm1(B);
  p.p_edge = -std::expm1(-beta);
  p.p_ghost = -std::expm1(-B);
  return p;
}

ColorLaw ColorLaw::uniform(int q) { return from_reduced(1.0 / q, q); }

ColorLaw ColorLaw::delta_one(int q) { return from_reduced(1.0, q); }

ColorLaw ColorLaw::from_reduced(double a, int q) {
  ColorLaw law;
  const double b = (1.0 - a) / (q - 1);
  law.probs.assign(q, b);
  law.probs[0] = a;
  law.reduced = std::make_pair(a, b);
  return law;
}

ColorLaw ColorLaw::from_weights(std::vector<double> weights) {
  double z = 0.0;
  for (double x : weights) z += x;
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw Error(ErrorCode::NumericalFailure, "degenerate normaliser");
  }
  for (double& x : weights) x /= z;
  ColorLaw law;
  law.probs = std::move(weights);
  const bool symmetric = std::all_of(law.probs.begin() + 1, law.probs.end(),
                                     [&](double x) { return x == law.probs[1]; });
  if (law.probs.size() >= 2 && symmetric) law.reduced = std::make_pair(law.probs[0], law.probs[1]);
  return law;
}

void ColorLaw::validate(double tol) const {
  if (probs.size() < 2) throw Error(ErrorCode::DomainError, "colour law needs q >= 2 entries");
  double s = 0.0;
  for (double x : probs) {
    if (!(x >= 0.0)) throw Error(ErrorCode::DomainError, "negative colour probability");
    s += x;
  }
  if (std::abs(s - 1.0) > tol) throw Error(ErrorCode::DomainError, "colour law does not sum to 1");
  if (reduced) {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double want = i == 0 ? reduced->first : reduced->second;
      if (probs[i] != want) throw Error(ErrorCode::DomainError, "reduced form mismatch");
    }
  }
}

double sup_distance(const ColorLaw& a, const ColorLaw& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.probs.size(); ++i) m = std::max(m, std::abs(a.probs[i] - b.probs[i]));
  return m;
}

}  // namespace fkp
