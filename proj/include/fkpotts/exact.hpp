#pragma once

#include <map>
#include <optional>
#include <vector>

#include "fkpotts/graph.hpp"
#include "fkpotts/params.hpp"

namespace fkp {

struct ExactSummary {
  std::optional<double> z_potts;
  std::optional<double> log_z_potts;
  std::optional<double> z_rc;
  std::optional<double> z_rank2;
  std::optional<double> z_rank2_window;
  std::optional<double> z_free_partial;
  std::optional<double> z_wired_partial;
  std::map<Edge, double> pair_agree;  // (u, v) with u < v
  std::map<Edge, double> connect;
};

// Sum over all q^n colourings of the unaugmented graph. window_eps > 0 also fills the
// partial sums over profiles within window_eps of the free / wired root marginals.
ExactSummary exact_potts(const MultiGraph& g, const ModelParams& p, std::optional<double> window_eps = std::nullopt,
                         bool pairs = true);

// Bitmask enumeration over the edges of G*, ghost-inclusive component count.
ExactSummary exact_rc(const MultiGraph& g_star, const ModelParams& p, bool pairs = true);

// Counts of bond configurations of G* by (open original edges, open ghost edges,
// components including the ghost's). Evaluates Z^RC for any (q, w, w_ghost).
struct RcPolynomial {
  int edges = 0;
  int ghost_edges = 0;
  int max_components = 0;
  std::vector<double> counts;  // [(ke * (ghost_edges + 1) + kg) * (max_components + 1) + c]

  double evaluate(double q, double w, double w_ghost) const;
};
RcPolynomial rc_polynomial(const MultiGraph& g_star);

struct Rank2Sums {
  double z_rank2 = 0.0;
  double z_rank2_window = 0.0;
};
// eps <= 0 (or absent) leaves the window sum at zero.
Rank2Sums rank2(const MultiGraph& g, const ModelParams& p, std::optional<double> eps = std::nullopt);

enum class BoundaryKind { Free, Wired, Partition };

struct TreeBoundary {
  BoundaryKind kind = BoundaryKind::Free;
  // For Partition: block id per leaf in BFS order; block 0 is C_* (joined to the ghost).
  std::vector<int> blocks;

  static TreeBoundary free() { return {BoundaryKind::Free, {}}; }
  static TreeBoundary wired() { return {BoundaryKind::Wired, {}}; }
  static TreeBoundary partition(std::vector<int> b) { return {BoundaryKind::Partition, std::move(b)}; }
};

struct TreeMeasure {
  int depth = 0;
  TreeBoundary boundary;
  ColorLaw root_marginal;
  double psi_r = 0.0;  // P[root <-> ghost]
};

// Depth-r d-regular tree; the field acts on internal vertices only.
TreeMeasure tree_exact(int d, int r, const ModelParams& p, const TreeBoundary& boundary);
int tree_leaf_count(int d, int r);

// All partitions of the leaves with a distinguished (possibly empty) ghost block, for
// leaf counts up to 6.
std::vector<std::vector<int>> leaf_partitions(int leaves);

struct DominationReport {
  double lhs = 0.0;  // xi / (1 - xi)
  double rhs = 0.0;  // (p1 - p2) / q with p = w / (1 + w)
  double max_violation = 0.0;
  int events = 0;
  bool passed = false;
};

// Exact check that FK(q, w1) dominates FK(q, w2) sprinkled with Bernoulli(xi) on the
// increasing events: each edge open, each pair connected, largest cluster >= t.
DominationReport sprinkle_domination_check(const MultiGraph& g, double q, double w1, double w2, double xi);

}  // namespace fkp
