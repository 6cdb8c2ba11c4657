#include "fkpotts/asymptotics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fkpotts/bethe.hpp"
#include "fkpotts/errors.hpp"

namespace fkp {

const char* phase_name(Phase p) { return p == Phase::Free ? "free" : "wired"; }

namespace {

double log_p_minus_log_x(const ModelParams& p, double x) {
  const double eb = std::exp(p.beta);
  return p.B + (p.d - 1) * std::log((eb * x + p.q - 1.0) / (eb + x + p.q - 2.0)) - std::log(x);
}

void require_critical(const ModelParams& p) {
  if (!on_critical_line(p)) throw Error(ErrorCode::OutsideCriticalLine, "parameters are not on the critical line");
}

std::vector<double> descending(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

// sum_j (lf_j^k - lw_j^k) over the nontrivial spectra, dropping eigenvalues the two
// phases share (to 1e-12) so that round-off in equal terms does not leak in.
double delta_diff(const std::vector<double>& ef, const std::vector<double>& ew, int k) {
  double s = 0.0;
  for (std::size_t i = 1; i < ef.size(); ++i) {
    if (std::abs(ef[i] - ew[i]) <= 1e-12 * std::max(1.0, std::abs(ef[i]))) continue;
    s += std::pow(ef[i], k) - std::pow(ew[i], k);
  }
  return s;
}

std::vector<double> solve_u(const Matrix& B, const std::vector<double>& alpha) {
  const int q = static_cast<int>(alpha.size());
  std::vector<double> u(q, 1.0);
  auto bu = [&](const std::vector<double>& v, int i) {
    double s = 0.0;
    for (int j = 0; j < q; ++j) s += B[i][j] * v[j];
    return s;
  };
  // Symmetric Sinkhorn to get close, then Newton for full precision.
  for (int it = 0; it < 200; ++it) {
    std::vector<double> nu(q);
    for (int i = 0; i < q; ++i) nu[i] = std::sqrt(u[i] * alpha[i] / bu(u, i));
    u = nu;
  }
  for (int it = 0; it < 50; ++it) {
    Eigen::MatrixXd J(q, q);
    Eigen::VectorXd F(q);
    double res = 0.0;
    for (int i = 0; i < q; ++i) {
      const double b = bu(u, i);
      F(i) = u[i] * b - alpha[i];
      res = std::max(res, std::abs(F(i)) / alpha[i]);
      for (int j = 0; j < q; ++j) J(i, j) = u[i] * B[i][j] + (i == j ? b : 0.0);
    }
    if (res < 1e-16) break;
    const Eigen::VectorXd step = J.partialPivLu().solve(F);
    for (int i = 0; i < q; ++i) u[i] -= step(i);
  }
  for (double x : u) {
    if (!(x > 0.0) || !std::isfinite(x)) throw Error(ErrorCode::NumericalFailure, "u-scaling did not converge");
  }
  return u;
}

// Gradient in the free coordinates alpha_1..alpha_{q-1} with alpha_drop eliminated.
std::vector<double> free_gradient(const ModelParams& p, const std::vector<double>& alpha, int drop) {
  const auto ev = upsilon1(p, alpha);
  std::vector<double> g;
  for (int i = 0; i < static_cast<int>(alpha.size()); ++i) {
    if (i != drop) g.push_back(ev.gradient[i] - ev.gradient[drop]);
  }
  return g;
}

Matrix hessian_with_drop(const ModelParams& p, const std::vector<double>& alpha, double h, int drop) {
  const int q = static_cast<int>(alpha.size());
  std::vector<int> coords;
  for (int i = 0; i < q; ++i) {
    if (i != drop) coords.push_back(i);
  }
  const int m = q - 1;
  Matrix H(m, std::vector<double>(m, 0.0));
  for (int c = 0; c < m; ++c) {
    auto a_plus = alpha;
    auto a_minus = alpha;
    a_plus[coords[c]] += h;
    a_plus[drop] -= h;
    a_minus[coords[c]] -= h;
    a_minus[drop] += h;
    const auto gp = free_gradient(p, a_plus, drop);
    const auto gm = free_gradient(p, a_minus, drop);
    for (int r = 0; r < m; ++r) H[r][c] = (gp[r] - gm[r]) / (2.0 * h);
  }
  for (int r = 0; r < m; ++r) {
    for (int c = r + 1; c < m; ++c) {
      const double s = 0.5 * (H[r][c] + H[c][r]);
      H[r][c] = H[c][r] = s;
    }
  }
  return H;
}

struct PhasePrefactor {
  double upsilon = 0.0;
  double log_base = 0.0;  // log(prod nu_check * prod (1 + lambda_i))
  double det = 0.0;       // det(-H)
};

PhasePrefactor phase_prefactor(const ModelParams& p, Phase ph, double h, int drop) {
  const auto fp = bp_fixed_points(p);
  const ColorLaw nu = ph == Phase::Free ? fp.free : fp.wired;
  const auto alpha = root_marginal(p, nu).probs;
  const auto qm = q_matrix_eigs(p, ph);
  PhasePrefactor out;
  out.upsilon = upsilon1(p, alpha).value;
  for (double a : alpha) out.log_base += std::log(a);
  for (std::size_t i = 1; i < qm.eigen_closed.size(); ++i) out.log_base += std::log1p(qm.eigen_closed[i]);
  const Matrix H = hessian_with_drop(p, alpha, h, drop);
  const int m = static_cast<int>(H.size());
  Eigen::MatrixXd negH(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) negH(r, c) = -H[r][c];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(negH);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorCode::NumericalFailure, "Hessian of Upsilon_1 is not negative definite");
  }
  out.det = es.eigenvalues().prod();
  return out;
}

}  // namespace

Matrix interaction_matrix(const ModelParams& p) {
  const int q = p.q_int();
  Matrix B(q, std::vector<double>(q));
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      B[i][j] = std::exp(p.beta * (i == j) + p.B / p.d * ((i == 0) + (j == 0)));
    }
  }
  return B;
}

std::vector<double> p_roots(const ModelParams& p) {
  const double eb = std::exp(p.beta);
  // Every root lies in [p(0), p(inf)).
  const double lo = std::exp(p.B + (p.d - 1) * std::log((p.q - 1.0) / (eb + p.q - 2.0))) * (1.0 - 1e-12);
  const double hi = std::exp(p.B + (p.d - 1) * p.beta) * (1.0 + 1e-12);
  const int grid = 4000;
  std::vector<double> roots;
  const double llo = std::log(lo), lhi = std::log(hi);
  double xa = lo;
  double fa = log_p_minus_log_x(p, xa);
  for (int i = 1; i <= grid; ++i) {
    const double xb = std::exp(llo + (lhi - llo) * i / grid);
    const double fb = log_p_minus_log_x(p, xb);
    if (fa == 0.0) {
      roots.push_back(xa);
    } else if ((fa > 0.0) != (fb > 0.0) && fb != 0.0) {
      double a = xa, b = xb, sa = fa;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        const double fm = log_p_minus_log_x(p, mid);
        if ((fm > 0.0) == (sa > 0.0)) {
          a = mid;
          sa = fm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    xa = xb;
    fa = fb;
  }
  if (roots.empty()) throw Error(ErrorCode::SolverFailure, "no root of x = p(x) was bracketed");
  return roots;
}

double lambda2_closed(const ModelParams& p, double x) {
  const double eb = std::exp(p.beta);
  return eb * x / (eb * x + p.q - 1.0) - x / (eb + x + p.q - 2.0);
}

double lambda3_closed(const ModelParams& p, double x) {
  const double eb = std::exp(p.beta);
  return (eb - 1.0) / (eb + x + p.q - 2.0);
}

QMatrixData q_matrix_eigs(const ModelParams& p, Phase which) {
  const int q = p.q_int();
  QMatrixData out;
  out.phase = which;
  const auto roots = p_roots(p);
  out.x_root = which == Phase::Free ? roots.front() : roots.back();
  out.B = interaction_matrix(p);
  const auto fp = bp_fixed_points(p);
  const ColorLaw& nu = which == Phase::Free ? fp.free : fp.wired;
  // Messages of the edge-factorised model: the field share B/d moves into B_ij.
  std::vector<double> w(q);
  for (int i = 0; i < q; ++i) w[i] = nu[i] * (i == 0 ? std::exp(-p.B / p.d) : 1.0);
  const ColorLaw nu_edge = ColorLaw::from_weights(w);
  out.nu_edge = nu_edge.probs;
  std::vector<double> into(q, 0.0);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) into[i] += out.nu_edge[j] * out.B[i][j];
  out.Q.assign(q, std::vector<double>(q));
  Eigen::MatrixXd M(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      out.Q[i][j] = out.B[i][j] * std::sqrt(out.nu_edge[i] * out.nu_edge[j]) / std::sqrt(into[i] * into[j]);
      M(i, j) = out.Q[i][j];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "eigensolver failed");
  std::vector<double> num(es.eigenvalues().data(), es.eigenvalues().data() + q);
  out.eigen_numeric = descending(num);
  out.eigen_closed.assign(q, lambda3_closed(p, out.x_root));
  out.eigen_closed[0] = 1.0;
  out.eigen_closed[1] = lambda2_closed(p, out.x_root);
  out.eigen_closed = descending(out.eigen_closed);
  for (int i = 0; i < q; ++i) {
    out.max_eigen_gap = std::max(out.max_eigen_gap, std::abs(out.eigen_closed[i] - out.eigen_numeric[i]));
  }
  return out;
}

double theta_k(int d, int k) { return std::pow(d - 1.0, k) / (2.0 * k); }

double delta_k(const std::vector<double>& eigen, int k) {
  const auto e = descending(eigen);
  double s = 0.0;
  for (std::size_t i = 1; i < e.size(); ++i) s += std::pow(e[i], k);
  return s;
}

SscData ssc_products(const ModelParams& p, int K_tail) {
  if (K_tail < 3) throw Error(ErrorCode::DomainError, "K_tail must be >= 3");
  SscData s;
  s.K_tail = K_tail;
  s.q_free = q_matrix_eigs(p, Phase::Free);
  s.q_wired = q_matrix_eigs(p, Phase::Wired);
  const double lam_f = s.q_free.eigen_closed[1];
  const double lam_w = s.q_wired.eigen_closed[1];
  const double rf = (p.d - 1) * lam_f;
  const double rw = (p.d - 1) * lam_w;
  if (!(rf < 1.0) || !(rw < 1.0)) {
    throw Error(ErrorCode::DivergentRegime, "(d-1) lambda_2 >= 1, the cycle products diverge");
  }
  for (int k = 3; k <= K_tail; ++k) {
    s.theta[k] = theta_k(p.d, k);
    s.delta_free[k] = delta_k(s.q_free.eigen_closed, k);
    s.delta_wired[k] = delta_k(s.q_wired.eigen_closed, k);
  }
  // theta_k delta_k = sum_j ((d-1) lambda_j)^k / 2k, summed in that form to avoid overflow.
  auto log_prod = [&](const std::vector<double>& e) {
    double acc = 0.0;
    for (int k = 3; k <= K_tail; ++k)
      for (std::size_t j = 1; j < e.size(); ++j) acc += std::pow((p.d - 1) * e[j], k) / (2.0 * k);
    return -acc;
  };
  s.log_prod_free = log_prod(s.q_free.eigen_closed);
  s.log_prod_wired = log_prod(s.q_wired.eigen_closed);
  auto tail = [&](double r) { return (p.q - 1.0) * std::pow(r, K_tail + 1) / (2.0 * (K_tail + 1) * (1.0 - r)); };
  s.tail_bound_free = tail(rf);
  s.tail_bound_wired = tail(rw);
  double diff = 0.0;
  const auto& ef = s.q_free.eigen_closed;
  const auto& ew = s.q_wired.eigen_closed;
  for (int k = 3; k <= K_tail; ++k) {
    for (std::size_t i = 1; i < ef.size(); ++i) {
      if (std::abs(ef[i] - ew[i]) <= 1e-12 * std::max(1.0, std::abs(ef[i]))) continue;
      diff += (std::pow((p.d - 1) * ef[i], k) - std::pow((p.d - 1) * ew[i], k)) / (2.0 * k);
    }
  }
  s.log_cycle_mean_diff = diff;
  s.tail_bound_diff = s.tail_bound_free + s.tail_bound_wired;
  if (on_critical_line(p)) {
    const auto g = gamma_prefactor(p);
    s.upsilon1_free = g.upsilon1_free;
    s.upsilon1_wired = g.upsilon1_wired;
    s.gamma = g.gamma;
  }
  return s;
}

Upsilon1Eval upsilon1(const ModelParams& p, const std::vector<double>& alpha) {
  const int q = p.q_int();
  if (static_cast<int>(alpha.size()) != q) throw Error(ErrorCode::DomainError, "alpha has wrong length");
  for (double a : alpha) {
    if (!(a > 0.0)) throw Error(ErrorCode::DomainError, "Upsilon_1 needs positive alpha");
  }
  const Matrix B = interaction_matrix(p);
  Upsilon1Eval out;
  out.u = solve_u(B, alpha);
  out.x_star.assign(q, std::vector<double>(q));
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) out.x_star[i][j] = B[i][j] * out.u[i] * out.u[j];
  double v = 0.0;
  out.gradient.resize(q);
  for (int i = 0; i < q; ++i) {
    v += (p.d - 1) * alpha[i] * std::log(alpha[i]) - p.d * alpha[i] * std::log(out.u[i]);
    out.gradient[i] = (p.d - 1) * (std::log(alpha[i]) + 1.0) - p.d * (std::log(out.u[i]) + 0.5);
  }
  out.value = v;
  return out;
}

double upsilon1_at(const ModelParams& p, const std::vector<double>& alpha, const Matrix& x) {
  const Matrix B = interaction_matrix(p);
  const int q = static_cast<int>(alpha.size());
  double v = 0.0;
  for (int i = 0; i < q; ++i) v += (p.d - 1) * alpha[i] * std::log(alpha[i]);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      if (x[i][j] > 0.0) v += 0.5 * p.d * x[i][j] * (std::log(B[i][j]) - std::log(x[i][j]));
    }
  }
  return v;
}

double upsilon2_at(const ModelParams& p, const Matrix& gamma, const std::vector<double>& y) {
  const Matrix B = interaction_matrix(p);
  const int q = static_cast<int>(gamma.size());
  double v = 0.0;
  for (int i = 0; i < q; ++i)
    for (int k = 0; k < q; ++k)
      if (gamma[i][k] > 0.0) v += (p.d - 1) * gamma[i][k] * std::log(gamma[i][k]);
  // y is indexed [((i*q + k)*q + j)*q + l].
  for (int i = 0; i < q; ++i)
    for (int k = 0; k < q; ++k)
      for (int j = 0; j < q; ++j)
        for (int l = 0; l < q; ++l) {
          const double t = y[((i * q + k) * q + j) * q + l];
          if (t > 0.0) v += 0.5 * p.d * t * (std::log(B[i][j] * B[k][l]) - std::log(t));
        }
  return v;
}

Matrix upsilon1_hessian(const ModelParams& p, const std::vector<double>& alpha, double h) {
  return hessian_with_drop(p, alpha, h, static_cast<int>(alpha.size()) - 1);
}

GammaResult gamma_prefactor(const ModelParams& p, double h) {
  require_critical(p);
  const int q = p.q_int();
  GammaResult g;
  const auto f = phase_prefactor(p, Phase::Free, h, q - 1);
  const auto w = phase_prefactor(p, Phase::Wired, h, q - 1);
  g.upsilon1_free = f.upsilon;
  g.upsilon1_wired = w.upsilon;
  if (std::abs(f.upsilon - w.upsilon) > 1e-8) {
    throw Error(ErrorCode::OutsideCriticalLine, "Upsilon_1 differs between the phases");
  }
  g.det_free = f.det;
  g.det_wired = w.det;
  g.prefactor_free = std::exp(-0.5 * f.log_base - 0.5 * std::log(f.det));
  g.prefactor_wired = std::exp(-0.5 * w.log_base - 0.5 * std::log(w.det));
  g.gamma = g.prefactor_free / g.prefactor_wired;
  g.gamma_det_literal = std::exp(-0.5 * (f.log_base - w.log_base)) * (f.det / w.det);
  const auto f2 = phase_prefactor(p, Phase::Free, 0.5 * h, q - 1);
  const auto w2 = phase_prefactor(p, Phase::Wired, 0.5 * h, q - 1);
  g.gamma_half_step = std::exp(-0.5 * (f2.log_base - w2.log_base)) * std::sqrt(w2.det / f2.det);
  const auto f3 = phase_prefactor(p, Phase::Free, h, 0);
  const auto w3 = phase_prefactor(p, Phase::Wired, h, 0);
  g.gamma_permuted = std::exp(-0.5 * (f3.log_base - w3.log_base)) * std::sqrt(w3.det / f3.det);
  return g;
}

double cavity_delta(const ModelParams& p, Phase which, int d_star) {
  require_critical(p);
  if (d_star < p.d - 1 || d_star > p.d + 1) throw Error(ErrorCode::DomainError, "d_star must be d-1, d or d+1");
  const auto fp = bp_fixed_points(p);
  const ColorLaw& nu = which == Phase::Free ? fp.free : fp.wired;
  const double eb1 = std::expm1(p.beta);
  double sq = 0.0;
  for (double x : nu.probs) sq += x * x;
  const double edge = 1.0 + eb1 * sq;
  double num = 0.0;
  for (int i = 0; i < nu.q(); ++i) {
    num += std::exp((i == 0 ? p.B : 0.0) + d_star * std::log1p(eb1 * nu[i]));
  }
  return num / std::pow(edge, 0.5 * d_star);
}

CavityQuantities cavity_quantities(const ModelParams& p) {
  require_critical(p);
  const auto fp = bp_fixed_points(p);
  const double eb1 = std::expm1(p.beta);
  auto edge = [&](const ColorLaw& nu) {
    double sq = 0.0;
    for (double x : nu.probs) sq += x * x;
    return 1.0 + eb1 * sq;
  };
  const double ef = std::sqrt(edge(fp.free));
  const double ew = std::sqrt(edge(fp.wired));
  CavityQuantities c;
  c.P = (1.0 + eb1 * fp.free[0]) * ew;
  c.Q = (1.0 + eb1 * fp.free[1]) * ew;
  c.R = (1.0 + eb1 * fp.wired[0]) * ef;
  c.S = (1.0 + eb1 * fp.wired[1]) * ef;
  c.C1 = std::exp(p.B);
  c.C2 = p.q - 1.0;
  const int d = p.d;
  c.T = c.C1 * std::pow(c.P, d) + c.C2 * std::pow(c.Q, d);
  const double Sd = std::pow(c.S, d), Qd = std::pow(c.Q, d), Pd = std::pow(c.P, d), Rd = std::pow(c.R, d);
  c.chain_holds = 0.0 < Sd && Sd < Qd && Qd < c.T / (c.C1 + c.C2) && c.T / (c.C1 + c.C2) < Pd && Pd < Rd &&
                  Rd < c.T / c.C1;
  return c;
}

double predicted_ratio(const ModelParams& p, const SscData& ssc, const CycleStats& cycles, const CavityPlan* plan) {
  if (!ssc.gamma) throw Error(ErrorCode::InvalidState, "SSC data carries no Gamma (non-critical parameters)");
  if (plan && cycles.K < plan->K) throw Error(ErrorCode::DomainError, "cycle statistics do not reach plan.K");
  const auto& ef = ssc.q_free.eigen_closed;
  const auto& ew = ssc.q_wired.eigen_closed;
  double lr = std::log(*ssc.gamma) - ssc.log_cycle_mean_diff;
  for (const auto& [k, xk] : cycles.counts) {
    double count = static_cast<double>(xk);
    if (plan && k == plan->K) count += static_cast<double>(plan->x);
    if (count == 0.0) continue;
    const double dw = delta_k(ew, k);
    lr += count * std::log1p(delta_diff(ef, ew, k) / (1.0 + dw));
  }
  if (plan && plan->p > 0) {
    lr += plan->p * std::log(cavity_delta(p, Phase::Free, plan->d_star) / cavity_delta(p, Phase::Wired, plan->d_star));
  }
  return std::exp(lr);
}

CavityPlan tune_mixture(const ModelParams& p, double alpha, int n_slack, int K_cap) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::DomainError, "alpha must lie in (0,1)");
  if (n_slack < 1) throw Error(ErrorCode::DomainError, "n_slack must be >= 1");
  require_critical(p);
  const SscData ssc = ssc_products(p);
  CavityPlan plan;
  plan.target_gamma = alpha / (1.0 - alpha);
  plan.slack = 1.0 / n_slack;
  plan.delta_dm1_free = cavity_delta(p, Phase::Free, p.d - 1);
  plan.delta_dm1_wired = cavity_delta(p, Phase::Wired, p.d - 1);
  plan.delta_dp1_free = cavity_delta(p, Phase::Free, p.d + 1);
  plan.delta_dp1_wired = cavity_delta(p, Phase::Wired, p.d + 1);

  const auto& ef = ssc.q_free.eigen_closed;
  const auto& ew = ssc.q_wired.eigen_closed;
  bool decided = false;
  for (std::size_t i = 1; i < ef.size(); ++i) {
    if (std::abs(ef[i] - ew[i]) <= 1e-12 * std::max(1.0, std::abs(ef[i]))) continue;
    plan.star = ef[i] > ew[i] ? Phase::Free : Phase::Wired;
    decided = true;
    break;
  }
  if (!decided) throw Error(ErrorCode::PlanFailure, "free and wired spectra coincide; no cycle lever");
  const bool up = plan.star == Phase::Free;  // K-cycles raise the ratio

  const double log_gamma = std::log(plan.target_gamma);
  const double log_hi = log_gamma + std::log1p(plan.slack);
  const double log_base = std::log(*ssc.gamma) - ssc.log_cycle_mean_diff;
  plan.base_ratio = std::exp(log_base);

  double log_c = 0.0;
  bool found = false;
  for (int K = 3; K <= K_cap; ++K) {
    const double lc = std::log1p(delta_diff(ef, ew, K) / (1.0 + delta_k(ew, K)));
    if ((up && lc > 0.0 && lc < std::log1p(plan.slack)) || (!up && lc < 0.0 && -lc < std::log1p(plan.slack))) {
      plan.K = K;
      log_c = lc;
      found = true;
      break;
    }
  }
  if (!found) throw Error(ErrorCode::PlanFailure, "no admissible cycle length K below the cap");
  plan.cycle_factor = std::exp(log_c);

  plan.d_star = up ? p.d + 1 : p.d - 1;
  const double log_rho = up ? std::log(plan.delta_dp1_free / plan.delta_dp1_wired)
                            : std::log(plan.delta_dm1_free / plan.delta_dm1_wired);
  if ((up && !(log_rho < 0.0)) || (!up && !(log_rho > 0.0))) {
    throw Error(ErrorCode::PlanFailure, "cavity ratio does not move the ratio in the required direction");
  }
  auto in_bracket = [&](double lr) { return lr >= log_gamma && lr < log_hi; };
  double lr = log_base;
  if (!in_bracket(lr)) {
    if (up && lr >= log_hi) {
      // Need log_base + p log_rho < log_hi.
      plan.p = 2 * static_cast<int>(std::ceil((log_hi - lr) / log_rho / 2.0));
      while (lr + plan.p * log_rho >= log_hi) plan.p += 2;
      while (plan.p >= 2 && lr + (plan.p - 2) * log_rho < log_hi) plan.p -= 2;
    } else if (!up && lr < log_gamma) {
      plan.p = 2 * static_cast<int>(std::ceil((log_gamma - lr) / log_rho / 2.0));
      while (lr + plan.p * log_rho < log_gamma) plan.p += 2;
      while (plan.p >= 2 && lr + (plan.p - 2) * log_rho >= log_gamma) plan.p -= 2;
    }
    lr += plan.p * log_rho;
    plan.after_p_ratio = std::exp(lr);
    if (!in_bracket(lr)) {
      if (up) {
        plan.x = static_cast<long>(std::ceil((log_gamma - lr) / log_c));
        while (plan.x > 0 && lr + (plan.x - 1) * log_c >= log_gamma) --plan.x;
        while (lr + plan.x * log_c < log_gamma) ++plan.x;
      } else {
        plan.x = static_cast<long>(std::floor((lr - log_gamma) / -log_c));
        while (lr + plan.x * log_c < log_gamma && plan.x > 0) --plan.x;
        while (lr + (plan.x + 1) * log_c >= log_gamma) ++plan.x;
      }
    }
  } else {
    plan.after_p_ratio = plan.base_ratio;
  }
  CycleStats girth_graph;
  girth_graph.K = plan.K;
  for (int k = 3; k <= plan.K; ++k) girth_graph.counts[k] = 0;
  plan.predicted_ratio = predicted_ratio(p, ssc, girth_graph, &plan);
  plan.in_bracket = plan.predicted_ratio >= plan.target_gamma &&
                    plan.predicted_ratio < (1.0 + plan.slack) * plan.target_gamma;
  if (!plan.in_bracket) throw Error(ErrorCode::PlanFailure, "plan misses the target bracket");
  return plan;
}

}  // namespace fkp
