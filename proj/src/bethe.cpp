#include "fkpotts/bethe.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fkpotts/errors.hpp"

namespace fkp {

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Uniqueness: return "uniqueness";
    case Regime::Disordered: return "disordered";
    case Regime::Ordered: return "ordered";
    case Regime::Critical: return "critical";
  }
  return "unknown";
}

ScalarFixedPoint iterate_monotone(const std::function<double(double)>& f, double x0, double tol,
                                  long max_iter) {
  double x = x0;
  double fx = f(x);
  double hist[3] = {x, x, x};
  int filled = 0;
  for (long it = 1; it <= max_iter; ++it) {
    const double r = fx - x;
    if (std::abs(r) <= tol) return {x, std::abs(r), it - 1};
    hist[0] = hist[1];
    hist[1] = hist[2];
    hist[2] = fx;
    filled = std::min(filled + 1, 3);
    x = fx;
    fx = f(x);
    if (filled == 3 && it % 16 == 0) {
      // Aitken extrapolation from the last three iterates, accepted only if it keeps
      // the sign of the residual (the iteration is monotone, so the fixed point is
      // not crossed) and stays within a modest step.
      const double d1 = hist[2] - hist[1];
      const double d2 = hist[2] - 2.0 * hist[1] + hist[0];
      if (d2 != 0.0) {
        const double cand = hist[2] - d1 * d1 / d2;
        const double sign = fx - x;
        if (std::isfinite(cand) && (cand - x) * sign > 0.0 &&
            std::abs(cand - x) < 0.05 * (1.0 + std::abs(x))) {
          const double fc = f(cand);
          if ((fc - cand) * sign >= 0.0) {
            x = cand;
            fx = fc;
            filled = 0;
          }
        }
      }
    }
  }
  throw Error(ErrorCode::ConvergenceFailure, "fixed-point iteration did not converge",
              std::abs(fx - x));
}

ColorLaw bp_step(const ModelParams& p, const ColorLaw& nu) {
  const int q = p.q_int();
  if (nu.q() != q) throw Error(ErrorCode::DomainError, "colour law has wrong length");
  const double eb = std::exp(p.beta);
  double total = 0.0;
  for (double x : nu.probs) total += x;
  std::vector<double> out(q);
  for (int i = 0; i < q; ++i) {
    const double s = total + (eb - 1.0) * nu.probs[i];
    out[i] = std::pow(s, p.d - 1) * (i == 0 ? std::exp(p.B) : 1.0);
  }
  return ColorLaw::from_weights(std::move(out));
}

double bp_reduced(const ModelParams& p, double a) {
  const double eb = std::exp(p.beta);
  const double b = (1.0 - a) / (p.q - 1.0);
  const double s1 = eb * a + (p.q - 1.0) * b;
  const double s2 = a + (eb + p.q - 2.0) * b;
  // Ratio form avoids overflow for large d.
  const double r = std::exp(p.B) * std::pow(s1 / s2, p.d - 1);
  return r / (r + (p.q - 1.0));
}

FixedPoints bp_fixed_points(const ModelParams& p, double tol, long max_iter) {
  const int q = p.q_int();
  auto f = [&](double a) { return bp_reduced(p, a); };
  const auto lo = iterate_monotone(f, 1.0 / q, tol, max_iter);
  const auto hi = iterate_monotone(f, 1.0, tol, max_iter);
  FixedPoints fp{ColorLaw::from_reduced(lo.x, q), ColorLaw::from_reduced(hi.x, q), lo.iterations,
                 hi.iterations};
  return fp;
}

FixedPoints bp_fixed_points_full(const ModelParams& p, double tol, long max_iter) {
  const int q = p.q_int();
  auto run = [&](ColorLaw nu, long& iters) {
    for (long it = 0; it < max_iter; ++it) {
      ColorLaw next = bp_step(p, nu);
      const double r = sup_distance(next, nu);
      nu = std::move(next);
      if (r <= tol) {
        iters = it + 1;
        return nu;
      }
    }
    throw Error(ErrorCode::ConvergenceFailure, "full BP iteration did not converge");
  };
  FixedPoints fp;
  fp.free = run(ColorLaw::uniform(q), fp.iterations_free);
  fp.wired = run(ColorLaw::delta_one(q), fp.iterations_wired);
  return fp;
}

double bethe_functional(const ModelParams& p, const ColorLaw& nu) {
  const int q = p.q_int();
  if (nu.q() != q) throw Error(ErrorCode::DomainError, "colour law has wrong length");
  for (double x : nu.probs) {
    if (!(x > 0.0)) throw Error(ErrorCode::DomainError, "Bethe functional needs positive entries");
  }
  const double eb = std::exp(p.beta);
  double total = 0.0;
  double sq = 0.0;
  for (double x : nu.probs) {
    total += x;
    sq += x * x;
  }
  // Work with log-sums so large d does not overflow.
  std::vector<double> logs(q);
  double mx = -INFINITY;
  for (int i = 0; i < q; ++i) {
    const double s = total + (eb - 1.0) * nu.probs[i];
    logs[i] = (i == 0 ? p.B : 0.0) + p.d * std::log(s);
    mx = std::max(mx, logs[i]);
  }
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - mx);
  const double vertex = mx + std::log(acc);
  const double edge = total * total + (eb - 1.0) * sq;
  return vertex - 0.5 * p.d * std::log(edge);
}

ColorLaw root_marginal(const ModelParams& p, const ColorLaw& nu) {
  const int q = p.q_int();
  if (nu.q() != q) throw Error(ErrorCode::DomainError, "colour law has wrong length");
  const double eb = std::exp(p.beta);
  double total = 0.0;
  for (double x : nu.probs) total += x;
  std::vector<double> logs(q);
  double mx = -INFINITY;
  for (int i = 0; i < q; ++i) {
    logs[i] = (i == 0 ? p.B : 0.0) + p.d * std::log(total + (eb - 1.0) * nu.probs[i]);
    mx = std::max(mx, logs[i]);
  }
  std::vector<double> out(q);
  for (int i = 0; i < q; ++i) out[i] = std::exp(logs[i] - mx);
  return ColorLaw::from_weights(std::move(out));
}

double ell(int d, double q, double x) {
  const double y = std::pow(x, 2.0 / d);
  return (y - 1.0) / (1.0 - y / (q - 1.0));
}

double w_critical_unchecked(int d, double q, double B) {
  return ell(d, q, (q - 1.0) * std::exp(-B));
}

double b_plus(int d, double q) {
  if (d < 3 || !(q > 2.0)) throw Error(ErrorCode::DomainError, "b_plus needs d >= 3 and q > 2");
  const double target = std::pow(static_cast<double>(d) / (d - 2), 2);
  auto g = [&](double B) {
    const double w = w_critical_unchecked(d, q, B);
    return (1.0 + w) * (1.0 + w / (q - 1.0)) - target;
  };
  double lo = 1e-12;
  double hi = 50.0;
  if (!(g(lo) > 0.0) || !(g(hi) < 0.0)) {
    throw Error(ErrorCode::SolverFailure, "B_+ bracket not found in [1e-12, 50]");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm > 0.0) lo = mid; else hi = mid;
  }
  const double root = 0.5 * (lo + hi);
  if (std::abs(g(root)) > 1e-10) throw Error(ErrorCode::SolverFailure, "B_+ identity residual too large");
  return root;
}

CriticalPoint critical_line(int d, double q, double B, bool allow_zero_field) {
  if (B < 0.0 || (B == 0.0 && !allow_zero_field)) {
    throw Error(ErrorCode::DomainError, "critical line requires B > 0");
  }
  if (B >= b_plus(d, q)) throw Error(ErrorCode::OutsideCriticalWindow, "B >= B_+");
  CriticalPoint c;
  c.w_c = w_critical_unchecked(d, q, B);
  c.beta_crit = std::log1p(c.w_c);
  return c;
}

bool on_critical_line(const ModelParams& p, double tol) {
  if (!(p.B > 0.0)) return false;
  if (p.B >= b_plus(p.d, p.q)) return false;
  const auto c = critical_line(p.d, p.q, p.B);
  return std::abs(c.beta_crit - p.beta) <= tol * (1.0 + p.beta);
}

namespace {

Regime classify_values(const ColorLaw& f, const ColorLaw& w, double psi_f, double psi_w, double tol,
                       double tol_crit) {
  if (sup_distance(f, w) <= tol) return Regime::Uniqueness;
  const double diff = psi_f - psi_w;
  if (std::abs(diff) <= tol_crit) return Regime::Critical;
  return diff > 0.0 ? Regime::Disordered : Regime::Ordered;
}

}  // namespace

PhasePoint classify_regime(const ModelParams& p, double tol, double tol_crit) {
  PhasePoint out;
  out.params = p;
  const auto fp = bp_fixed_points(p);
  out.nu_free = fp.free;
  out.nu_wired = fp.wired;
  out.psi_free_val = bethe_functional(p, fp.free);
  out.psi_wired_val = bethe_functional(p, fp.wired);
  out.regime = classify_values(fp.free, fp.wired, out.psi_free_val, out.psi_wired_val, tol, tol_crit);
  out.b_plus = b_plus(p.d, p.q);
  if (p.B > 0.0 && p.B < out.b_plus) {
    const auto c = critical_line(p.d, p.q, p.B);
    out.w_c = c.w_c;
    out.beta_crit = c.beta_crit;
  }
  if (out.regime == Regime::Critical) {
    for (int side : {-1, 1}) {
      const auto q = make_params(p.d, p.q, std::max(0.0, p.beta + side * 1e-4), p.B);
      const auto g = bp_fixed_points(q);
      const Regime r = classify_values(g.free, g.wired, bethe_functional(q, g.free),
                                       bethe_functional(q, g.wired), tol, tol_crit);
      (side < 0 ? out.below : out.above) = r;
    }
  }
  return out;
}

double bp_hat(const ModelParams& p, int k, double s) {
  const double eb = std::exp(p.beta);
  const double gamma = (eb - 1.0) / (eb + p.q - 1.0);
  const double up = 1.0 + (p.q - 1.0) * gamma * s;
  const double down = 1.0 - gamma * s;
  // Divide through by e^B * up^k to stay finite for large k.
  const double r = std::exp(-p.B) * std::pow(down / up, k);
  return (1.0 - r) / (1.0 + (p.q - 1.0) * r);
}

RcmBp rcm_bp_fixed_points(const ModelParams& p, double tol, long max_iter) {
  auto f = [&](double s) { return bp_hat(p, p.d - 1, s); };
  const auto lo = iterate_monotone(f, 0.0, tol, max_iter);
  const auto hi = iterate_monotone(f, 1.0, tol, max_iter);
  RcmBp out;
  const double eb = std::exp(p.beta);
  out.gamma = (eb - 1.0) / (eb + p.q - 1.0);
  out.b_free = lo.x;
  out.b_wired = hi.x;
  out.psi_free = bp_hat(p, p.d, lo.x);
  out.psi_wired = bp_hat(p, p.d, hi.x);
  out.s_free = (p.q - 1.0) / p.q * out.psi_free + 1.0 / p.q;
  out.s_wired = (p.q - 1.0) / p.q * out.psi_wired + 1.0 / p.q;
  return out;
}

double beta_uniqueness(int d) { return std::atanh(1.0 / (d - 1)); }

IsingMagnetization ising_magnetization(int d, double beta, double tol) {
  if (!(beta > 0.0)) throw Error(ErrorCode::DomainError, "ising_magnetization needs beta > 0");
  IsingMagnetization out;
  if (beta <= beta_uniqueness(d)) return out;
  const double e2 = std::exp(2.0 * beta);
  // Work in u = t/(1+t) in (1/2, 1]; the bracket ratio is (e2*t + 1)/(t + e2).
  auto ratio = [&](double u) { return (e2 * u + (1.0 - u)) / (u + e2 * (1.0 - u)); };
  auto g = [&](double u) {
    const double h = std::pow(ratio(u), d - 1);
    return h / (1.0 + h);
  };
  // From u = 1 the iteration decreases monotonically to the largest fixed point.
  const auto it = iterate_monotone(g, 1.0, tol, 10000000);
  double hi = it.x;
  for (int k = 0; k < 1000 && g(hi) - hi > 0.0 && hi < 1.0; ++k) hi = std::min(1.0, hi + 1e-15);
  double step = 1e-12;
  double lo = hi - step;
  while (!(g(lo) - lo > 0.0)) {
    step *= 2.0;
    lo = hi - step;
    if (lo <= 0.5) throw Error(ErrorCode::SolverFailure, "lost bracket for the magnetisation root");
  }
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (g(mid) - mid > 0.0) lo = mid; else hi = mid;
  }
  const double u = 0.5 * (lo + hi);
  const double hs = std::pow(ratio(u), d);
  out.x = u;
  out.x_star = hs / (1.0 + hs);
  out.m = 2.0 * out.x_star - 1.0;
  return out;
}

IsingReduction ising_reduction(const ModelParams& p) {
  if (!(p.w > 0.0)) throw Error(ErrorCode::DomainError, "ising_reduction needs w > 0");
  IsingReduction r;
  const double a = 1.0 + p.w;
  const double b = 1.0 + p.w / (p.q - 1.0);
  r.beta_star = 0.25 * std::log(a * b);
  r.k_coef = 0.25 * std::log(a / b);
  r.h_coef = 0.5 * (p.B - std::log(p.q - 1.0));
  r.beta_uni = beta_uniqueness(p.d);
  const auto m = ising_magnetization(p.d, r.beta_star);
  r.x_val = m.x;
  r.x_star_val = m.x_star;
  r.m_val = m.m;
  return r;
}

}  // namespace fkp
