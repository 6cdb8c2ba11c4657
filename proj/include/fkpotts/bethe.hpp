#pragma once

#include <functional>
#include <optional>

#include "fkpotts/params.hpp"

namespace fkp {

enum class Regime { Uniqueness, Disordered, Ordered, Critical };

const char* regime_name(Regime r);

struct FixedPoints {
  ColorLaw free;
  ColorLaw wired;
  long iterations_free = 0;
  long iterations_wired = 0;
};

struct PhasePoint {
  ModelParams params;
  ColorLaw nu_free;
  ColorLaw nu_wired;
  double psi_free_val = 0.0;
  double psi_wired_val = 0.0;
  Regime regime = Regime::Uniqueness;
  std::optional<double> w_c;
  std::optional<double> beta_crit;
  double b_plus = 0.0;
  // Classification at beta -/+ 1e-4, filled only for Critical points.
  std::optional<Regime> below;
  std::optional<Regime> above;
};

struct RcmBp {
  double gamma = 0.0;
  double b_free = 0.0;
  double b_wired = 0.0;
  double psi_free = 0.0;
  double psi_wired = 0.0;
  double s_free = 0.0;
  double s_wired = 0.0;
};

struct IsingReduction {
  double beta_star = 0.0;
  double k_coef = 0.0;
  double h_coef = 0.0;
  double beta_uni = 0.0;
  double x_val = 0.5;
  double x_star_val = 0.5;
  double m_val = 0.0;
};

struct IsingMagnetization {
  double x = 0.5;
  double x_star = 0.5;
  double m = 0.0;
};

struct CriticalPoint {
  double w_c = 0.0;
  double beta_crit = 0.0;
};

// Monotone scalar fixed-point iteration x <- f(x) from x0 with an Aitken fallback
// that never steps across the target fixed point. Stops when |f(x) - x| <= tol.
struct ScalarFixedPoint {
  double x = 0.0;
  double residual = 0.0;
  long iterations = 0;
};
ScalarFixedPoint iterate_monotone(const std::function<double(double)>& f, double x0, double tol,
                                  long max_iter);

ColorLaw bp_step(const ModelParams& p, const ColorLaw& nu);
// BP map in the reduced coordinate a = nu(1).
double bp_reduced(const ModelParams& p, double a);
FixedPoints bp_fixed_points(const ModelParams& p, double tol = 1e-13, long max_iter = 1000000);
// Full-vector iteration of bp_step; slower cross-check path.
FixedPoints bp_fixed_points_full(const ModelParams& p, double tol = 1e-13, long max_iter = 1000000);

double bethe_functional(const ModelParams& p, const ColorLaw& nu);
ColorLaw root_marginal(const ModelParams& p, const ColorLaw& nu);

// l_{q,d}(x) = (x^{2/d} - 1) / (1 - x^{2/d}/(q-1)).
double ell(int d, double q, double x);
double w_critical_unchecked(int d, double q, double B);
CriticalPoint critical_line(int d, double q, double B, bool allow_zero_field = false);
double b_plus(int d, double q);
bool on_critical_line(const ModelParams& p, double tol = 1e-8);

PhasePoint classify_regime(const ModelParams& p, double tol = 1e-8, double tol_crit = 1e-9);

// BP-hat_k(s, ..., s) for the random-cluster pre-messages.
double bp_hat(const ModelParams& p, int k, double s);
RcmBp rcm_bp_fixed_points(const ModelParams& p, double tol = 1e-13, long max_iter = 1000000);

double beta_uniqueness(int d);
IsingMagnetization ising_magnetization(int d, double beta, double tol = 1e-14);
IsingReduction ising_reduction(const ModelParams& p);

}  // namespace fkp
