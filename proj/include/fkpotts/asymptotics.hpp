#pragma once

#include <map>
#include <optional>
#include <vector>

#include "fkpotts/graph.hpp"
#include "fkpotts/params.hpp"

namespace fkp {

enum class Phase { Free, Wired };

const char* phase_name(Phase p);

using Matrix = std::vector<std::vector<double>>;

struct QMatrixData {
  Phase phase = Phase::Free;
  double x_root = 0.0;            // root of x = p(x): smallest (free) or largest (wired)
  Matrix B;                       // interaction matrix with the field split over the endpoints
  Matrix Q;
  std::vector<double> nu_edge;    // edge-split messages used in Q
  std::vector<double> eigen_closed;   // 1, lambda_2, lambda_3 x (q-2), descending
  std::vector<double> eigen_numeric;  // symmetric eigensolver, descending
  double max_eigen_gap = 0.0;         // sup |closed - numeric|
};

// Roots of x = e^B ((e^beta x + q - 1)/(e^beta + x + q - 2))^{d-1}, ascending.
std::vector<double> p_roots(const ModelParams& p);
QMatrixData q_matrix_eigs(const ModelParams& p, Phase which);

// lambda_2 and lambda_3 closed forms at the root x.
double lambda2_closed(const ModelParams& p, double x);
double lambda3_closed(const ModelParams& p, double x);

struct SscData {
  int K_tail = 0;
  QMatrixData q_free;
  QMatrixData q_wired;
  std::map<int, double> theta;
  std::map<int, double> delta_free;
  std::map<int, double> delta_wired;
  // log prod_{k=3}^{K_tail} e^{-theta_k delta_k} and a bound on the omitted tail.
  double log_prod_free = 0.0;
  double log_prod_wired = 0.0;
  double tail_bound_free = 0.0;
  double tail_bound_wired = 0.0;
  // sum_{k=3}^{K_tail} theta_k (delta_k^f - delta_k^w) and its tail bound.
  double log_cycle_mean_diff = 0.0;
  double tail_bound_diff = 0.0;
  // Filled by gamma_prefactor when the parameters are critical.
  std::optional<double> upsilon1_free;
  std::optional<double> upsilon1_wired;
  std::optional<double> gamma;
};

double theta_k(int d, int k);
// delta_k from an eigenvalue list (the leading eigenvalue 1 is skipped).
double delta_k(const std::vector<double>& eigen, int k);

SscData ssc_products(const ModelParams& p, int K_tail = 200);

// Upsilon_1(alpha) at its inner maximiser x*(alpha); u solves u_i (B u)_i = alpha_i.
struct Upsilon1Eval {
  double value = 0.0;
  std::vector<double> u;
  Matrix x_star;
  std::vector<double> gradient;  // d/d alpha_i, unconstrained coordinates
};
Upsilon1Eval upsilon1(const ModelParams& p, const std::vector<double>& alpha);
double upsilon1_at(const ModelParams& p, const std::vector<double>& alpha, const Matrix& x);
double upsilon2_at(const ModelParams& p, const Matrix& gamma, const std::vector<double>& y);
Matrix interaction_matrix(const ModelParams& p);

// Hessian of Upsilon_1 in the free coordinates alpha_1..alpha_{q-1} by central
// differences of the analytic gradient.
Matrix upsilon1_hessian(const ModelParams& p, const std::vector<double>& alpha, double h = 1e-5);

struct GammaResult {
  double upsilon1_free = 0.0;
  double upsilon1_wired = 0.0;
  double gamma = 0.0;
  double gamma_det_literal = 0.0;   // prefactors with det(-H)^{+1}
  double gamma_half_step = 0.0;     // gamma recomputed with h/2
  double prefactor_free = 0.0;
  double prefactor_wired = 0.0;
  double det_free = 0.0;
  double det_wired = 0.0;
  double gamma_permuted = 0.0;      // gamma with the dropped coordinate changed
};

GammaResult gamma_prefactor(const ModelParams& p, double h = 1e-5);

struct CavityQuantities {
  double P = 0.0, Q = 0.0, R = 0.0, S = 0.0, T = 0.0, C1 = 0.0, C2 = 0.0;
  bool chain_holds = false;  // 0 < S^d < Q^d < T/(C1+C2) < P^d < R^d < T/C1
};

double cavity_delta(const ModelParams& p, Phase which, int d_star);
CavityQuantities cavity_quantities(const ModelParams& p);

struct CavityPlan {
  int d_star = 0;
  int p = 0;
  int K = 3;
  long x = 0;
  double target_gamma = 1.0;
  double predicted_ratio = 0.0;
  double base_ratio = 0.0;       // Gamma * prod e^{-theta (delta_f - delta_w)}
  double after_p_ratio = 0.0;
  double cycle_factor = 1.0;     // (1 + delta_K^f) / (1 + delta_K^w)
  double slack = 0.0;            // 1 / n_slack
  Phase star = Phase::Free;
  double delta_dm1_free = 0.0, delta_dm1_wired = 0.0;
  double delta_dp1_free = 0.0, delta_dp1_wired = 0.0;
  bool in_bracket = false;
};

// Gamma * prod_k ((1+delta_k^f)/(1+delta_k^w))^{X_k} e^{-theta_k (delta_k^f - delta_k^w)}, times
// (Delta_f / Delta_w)^p when a plan is given; the plan's x extra K-cycles are added to X_K.
double predicted_ratio(const ModelParams& p, const SscData& ssc, const CycleStats& cycles,
                       const CavityPlan* plan = nullptr);

CavityPlan tune_mixture(const ModelParams& p, double alpha, int n_slack, int K_cap = 1000);

}  // namespace fkp
