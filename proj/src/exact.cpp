#include "fkpotts/exact.hpp"

#include <algorithm>
#include <cmath>

#include "fkpotts/bethe.hpp"
#include "fkpotts/errors.hpp"
#include "fkpotts/union_find.hpp"

namespace fkp {

namespace {

// Neumaier compensated sum.
struct KahanSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) c += (sum - t) + x;
    else c += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

// Union-find without path compression so unions can be undone in LIFO order.
class RollbackUnionFind {
 public:
  explicit RollbackUnionFind(int n) : parent_(n), size_(n, 1), count_(n) {
    for (int i = 0; i < n; ++i) parent_[i] = i;
  }
  int find(int x) const {
    while (parent_[x] != x) x = parent_[x];
    return x;
  }
  // Returns true if a merge happened; pair with undo() only in that case.
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    history_.push_back(b);
    --count_;
    return true;
  }
  void undo() {
    const int b = history_.back();
    history_.pop_back();
    const int a = parent_[b];
    size_[a] -= size_[b];
    parent_[b] = b;
    ++count_;
  }
  int components() const { return count_; }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
  std::vector<int> history_;
  int count_;
};

// Depth-first enumeration over all 2^m bond subsets with incremental unions.
template <class Leaf>
void enumerate_bonds(const std::vector<Edge>& edges, RollbackUnionFind& uf, std::vector<char>& open, int i,
                     Leaf& leaf) {
  if (i == static_cast<int>(edges.size())) {
    leaf(uf, open);
    return;
  }
  open[i] = 0;
  enumerate_bonds(edges, uf, open, i + 1, leaf);
  open[i] = 1;
  const bool merged = uf.unite(edges[i].first, edges[i].second);
  enumerate_bonds(edges, uf, open, i + 1, leaf);
  if (merged) uf.undo();
  open[i] = 0;
}

std::pair<std::vector<double>, std::vector<double>> free_wired_marginals(const ModelParams& p) {
  const auto fp = bp_fixed_points(p);
  return {root_marginal(p, fp.free).probs, root_marginal(p, fp.wired).probs};
}

}  // namespace

ExactSummary exact_potts(const MultiGraph& g_in, const ModelParams& p, std::optional<double> window_eps, bool pairs) {
  const int q = p.q_int();
  const MultiGraph g = strip_ghost(g_in);
  const int n = g.n;
  if (n * std::log(static_cast<double>(q)) > std::log(1e8) + 1e-9) {
    throw Error(ErrorCode::BudgetExceeded, "q^n exceeds the 1e8 enumeration budget");
  }
  std::vector<std::vector<int>> adj(n);
  for (const auto& [u, v] : g.edges) {
    // Loops are always monochromatic and stay inside the starting count.
    if (u == v) continue;
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  const int m = g.num_edges();
  // Weight table exp(beta*mono + B*ones - shift), shift is the largest exponent.
  const double shift = p.beta * m + p.B * n;
  std::vector<double> table((m + 1) * (n + 1));
  for (int a = 0; a <= m; ++a) {
    for (int o = 0; o <= n; ++o) table[a * (n + 1) + o] = std::exp(p.beta * a + p.B * o - shift);
  }
  std::vector<double> nu_f, nu_w;
  const bool windows = window_eps && *window_eps > 0.0;
  if (windows) std::tie(nu_f, nu_w) = free_wired_marginals(p);

  const bool do_pairs = pairs && n <= 10;
  std::vector<int> c(n, 0);
  std::vector<int> counts(q, 0);
  counts[0] = n;
  int mono = m;
  int ones = n;
  KahanSum z, zf, zw;
  std::vector<double> agree(n * n, 0.0);
  auto in_window = [&](const std::vector<double>& target) {
    for (int i = 0; i < q; ++i) {
      if (!(std::abs(static_cast<double>(counts[i]) / n - target[i]) < *window_eps)) return false;
    }
    return true;
  };
  while (true) {
    const double wgt = table[mono * (n + 1) + ones];
    z.add(wgt);
    if (windows) {
      if (in_window(nu_f)) zf.add(wgt);
      if (in_window(nu_w)) zw.add(wgt);
    }
    if (do_pairs) {
      for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
          if (c[u] == c[v]) agree[u * n + v] += wgt;
    }
    int v = 0;
    for (; v < n; ++v) {
      const int old = c[v];
      const int nw = old + 1 == q ? 0 : old + 1;
      for (int u : adj[v]) mono += (nw == c[u]) - (old == c[u]);
      ones += (nw == 0) - (old == 0);
      --counts[old];
      ++counts[nw];
      c[v] = nw;
      if (nw != 0) break;
    }
    if (v == n) break;
  }
  ExactSummary s;
  const double zv = z.value();
  s.log_z_potts = shift + std::log(zv);
  s.z_potts = std::exp(*s.log_z_potts);
  if (windows) {
    s.z_free_partial = std::exp(shift) * zf.value();
    s.z_wired_partial = std::exp(shift) * zw.value();
  }
  if (do_pairs) {
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) s.pair_agree[{u, v}] = agree[u * n + v] / zv;
  }
  return s;
}

double RcPolynomial::evaluate(double q, double w, double w_ghost) const {
  KahanSum z;
  for (int ke = 0; ke <= edges; ++ke) {
    for (int kg = 0; kg <= ghost_edges; ++kg) {
      const double base = std::pow(w, ke) * std::pow(w_ghost, kg);
      for (int c = 1; c <= max_components; ++c) {
        const double cnt = counts[(ke * (ghost_edges + 1) + kg) * (max_components + 1) + c];
        if (cnt != 0.0) z.add(cnt * base * std::pow(q, c - 1));
      }
    }
  }
  return z.value();
}

RcPolynomial rc_polynomial(const MultiGraph& g_star) {
  if (!g_star.ghost) throw Error(ErrorCode::InvalidState, "rc_polynomial expects an augmented graph");
  if (g_star.num_edges() > 26) throw Error(ErrorCode::BudgetExceeded, "|E*| exceeds 26");
  RcPolynomial poly;
  poly.edges = g_star.base_edges;
  poly.ghost_edges = g_star.num_edges() - g_star.base_edges;
  poly.max_components = g_star.num_vertices();
  poly.counts.assign((poly.edges + 1) * (poly.ghost_edges + 1) * (poly.max_components + 1), 0.0);
  RollbackUnionFind uf(g_star.num_vertices());
  std::vector<char> open(g_star.num_edges(), 0);
  auto leaf = [&](const RollbackUnionFind& u, const std::vector<char>& o) {
    int ke = 0, kg = 0;
    for (int e = 0; e < g_star.base_edges; ++e) ke += o[e];
    for (int e = g_star.base_edges; e < g_star.num_edges(); ++e) kg += o[e];
    poly.counts[(ke * (poly.ghost_edges + 1) + kg) * (poly.max_components + 1) + u.components()] += 1.0;
  };
  enumerate_bonds(g_star.edges, uf, open, 0, leaf);
  return poly;
}

ExactSummary exact_rc(const MultiGraph& g_star, const ModelParams& p, bool pairs) {
  if (!g_star.ghost) throw Error(ErrorCode::InvalidState, "exact_rc expects an augmented graph");
  if (g_star.num_edges() > 26) throw Error(ErrorCode::BudgetExceeded, "|E*| exceeds 26");
  ExactSummary s;
  if (!pairs) {
    s.z_rc = rc_polynomial(g_star).evaluate(p.q, p.w, p.w_ghost);
    return s;
  }
  const int n = g_star.n;
  const int nv = g_star.num_vertices();
  const int m = g_star.num_edges();
  std::vector<double> wpow(m + 1), gpow(m + 1), qpow(nv + 1);
  for (int k = 0; k <= m; ++k) {
    wpow[k] = std::pow(p.w, k);
    gpow[k] = std::pow(p.w_ghost, k);
  }
  for (int c = 0; c <= nv; ++c) qpow[c] = std::pow(p.q, c - 1);
  KahanSum z;
  std::vector<double> conn(n * n, 0.0);
  RollbackUnionFind uf(nv);
  std::vector<char> open(m, 0);
  std::vector<int> root(n);
  auto leaf = [&](const RollbackUnionFind& u, const std::vector<char>& o) {
    int ke = 0, kg = 0;
    for (int e = 0; e < g_star.base_edges; ++e) ke += o[e];
    for (int e = g_star.base_edges; e < m; ++e) kg += o[e];
    const double wgt = wpow[ke] * gpow[kg] * qpow[u.components()];
    if (wgt == 0.0) return;
    z.add(wgt);
    for (int v = 0; v < n; ++v) root[v] = u.find(v);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (root[a] == root[b]) conn[a * n + b] += wgt;
  };
  enumerate_bonds(g_star.edges, uf, open, 0, leaf);
  const double zv = z.value();
  s.z_rc = zv;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) s.connect[{a, b}] = conn[a * n + b] / zv;
  return s;
}

Rank2Sums rank2(const MultiGraph& g_in, const ModelParams& p, std::optional<double> eps) {
  const MultiGraph g = strip_ghost(g_in);
  const int n = g.n;
  if (n > 26) throw Error(ErrorCode::BudgetExceeded, "rank-2 enumeration needs n <= 26");
  const double lw_in = std::log1p(p.w);
  const double lw_out = std::log1p(p.w / (p.q - 1.0));
  const double lq = std::log(p.q - 1.0);
  bool window = eps && *eps > 0.0;
  double s_free = 0.0, s_wired = 0.0;
  if (window) {
    const auto rc = rcm_bp_fixed_points(p);
    s_free = rc.s_free;
    s_wired = rc.s_wired;
  }
  std::vector<double> logs;
  std::vector<char> keep;
  logs.reserve(std::size_t{1} << n);
  double mx = -INFINITY;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    int in_s = 0, in_out = 0;
    for (const auto& [u, v] : g.edges) {
      const bool a = (mask >> u) & 1;
      const bool b = (mask >> v) & 1;
      if (a && b) ++in_s;
      else if (!a && !b) ++in_out;
    }
    const int k = __builtin_popcountll(mask);
    const double l = p.B * k + lw_in * in_s + lq * (n - k) + lw_out * in_out;
    logs.push_back(l);
    mx = std::max(mx, l);
    if (window) {
      const double frac = static_cast<double>(k) / n;
      const bool excluded = (frac > s_free - *eps && frac < s_free + *eps) ||
                            (frac > s_wired - *eps && frac < s_wired + *eps);
      keep.push_back(!excluded);
    }
  }
  KahanSum all, win;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const double t = std::exp(logs[i] - mx);
    all.add(t);
    if (window && keep[i]) win.add(t);
  }
  Rank2Sums out;
  out.z_rank2 = std::exp(mx) * all.value();
  out.z_rank2_window = window ? std::exp(mx) * win.value() : 0.0;
  return out;
}

int tree_leaf_count(int d, int r) {
  if (r < 1) throw Error(ErrorCode::DomainError, "tree depth must be >= 1");
  long long c = d;
  for (int i = 1; i < r; ++i) c *= (d - 1);
  if (c > (1LL << 40)) throw Error(ErrorCode::BudgetExceeded, "tree too large");
  return static_cast<int>(std::min<long long>(c, 1LL << 30));
}

namespace {

// Per-subtree weights by (colour of the subtree root, joined to the ghost inside the subtree).
struct SubtreeWeights {
  std::vector<double> c0;
  std::vector<double> c1;
};

void normalize(SubtreeWeights& s) {
  double t = 0.0;
  for (double x : s.c0) t += x;
  for (double x : s.c1) t += x;
  for (double& x : s.c0) x /= t;
  for (double& x : s.c1) x /= t;
}

SubtreeWeights internal_vertex(int q, double w, double w_ghost, const SubtreeWeights& child, int children) {
  SubtreeWeights v{std::vector<double>(q, 1.0), std::vector<double>(q, 0.0)};
  v.c1[0] = w_ghost;
  double a0 = 0.0;
  for (int t = 0; t < q; ++t) a0 += child.c0[t] + child.c1[t];
  for (int k = 0; k < children; ++k) {
    for (int s = 0; s < q; ++s) {
      const double n0 = v.c0[s] * (a0 + w * child.c0[s]);
      const double n1 = v.c1[s] * (a0 + w * (child.c0[s] + child.c1[s])) + v.c0[s] * w * child.c1[s];
      v.c0[s] = n0;
      v.c1[s] = n1;
    }
    normalize(v);
  }
  return v;
}

TreeMeasure finish(int r, const TreeBoundary& b, double psi, int q) {
  TreeMeasure t;
  t.depth = r;
  t.boundary = b;
  t.psi_r = psi;
  t.root_marginal = ColorLaw::from_reduced(psi + (1.0 - psi) / q, q);
  return t;
}

TreeMeasure tree_by_partition(int d, int r, const ModelParams& p, const TreeBoundary& boundary) {
  const int q_int = p.q_int();
  const int leaves = tree_leaf_count(d, r);
  if (leaves > 6) throw Error(ErrorCode::BudgetExceeded, "explicit partitions are limited to 6 leaves");
  if (static_cast<int>(boundary.blocks.size()) != leaves) {
    throw Error(ErrorCode::DomainError, "partition must list one block per leaf");
  }
  // BFS layout: root 0, internal vertices, then the leaves; ghost last.
  std::vector<Edge> edges;
  int next = 1;
  int internal = 0;
  std::vector<int> frontier{0};
  for (int depth = 0; depth < r; ++depth) {
    std::vector<int> nf;
    for (int v : frontier) {
      const int kids = depth == 0 ? d : d - 1;
      for (int k = 0; k < kids; ++k) {
        edges.emplace_back(v, next);
        nf.push_back(next++);
      }
    }
    internal += static_cast<int>(frontier.size());
    frontier = nf;
  }
  const int nv = next;
  const int ghost = nv;
  const int tree_edges = static_cast<int>(edges.size());
  for (int v = 0; v < internal; ++v) edges.emplace_back(v, ghost);
  if (edges.size() > 26) throw Error(ErrorCode::BudgetExceeded, "tree enumeration exceeds 26 edges");
  const int first_leaf = nv - leaves;

  RollbackUnionFind uf(nv + 1);
  int anchor[8];
  std::fill(std::begin(anchor), std::end(anchor), -1);
  for (int i = 0; i < leaves; ++i) {
    const int blk = boundary.blocks[i];
    if (blk < 0 || blk > 7) throw Error(ErrorCode::DomainError, "partition block id out of range");
    if (blk == 0) {
      uf.unite(first_leaf + i, ghost);
    } else if (anchor[blk] < 0) {
      anchor[blk] = first_leaf + i;
    } else {
      uf.unite(first_leaf + i, anchor[blk]);
    }
  }
  KahanSum z, zc;
  std::vector<char> open(edges.size(), 0);
  auto leaf = [&](const RollbackUnionFind& u, const std::vector<char>& o) {
    int ke = 0, kg = 0;
    for (int e = 0; e < tree_edges; ++e) ke += o[e];
    for (std::size_t e = tree_edges; e < o.size(); ++e) kg += o[e];
    const double wgt = std::pow(p.w, ke) * std::pow(p.w_ghost, kg) * std::pow(p.q, u.components());
    z.add(wgt);
    if (u.find(0) == u.find(ghost)) zc.add(wgt);
  };
  enumerate_bonds(edges, uf, open, 0, leaf);
  return finish(r, boundary, zc.value() / z.value(), q_int);
}

}  // namespace

TreeMeasure tree_exact(int d, int r, const ModelParams& p, const TreeBoundary& boundary) {
  if (d < 2) throw Error(ErrorCode::DomainError, "tree degree must be >= 2");
  if (r < 1) throw Error(ErrorCode::DomainError, "tree depth must be >= 1");
  if (r > 200) throw Error(ErrorCode::BudgetExceeded, "tree depth above 200");
  if (boundary.kind == BoundaryKind::Partition) return tree_by_partition(d, r, p, boundary);
  const int q = p.q_int();
  SubtreeWeights leaf{std::vector<double>(q, 0.0), std::vector<double>(q, 0.0)};
  if (boundary.kind == BoundaryKind::Free) {
    std::fill(leaf.c0.begin(), leaf.c0.end(), 1.0);
  } else {
    leaf.c1[0] = 1.0;
  }
  normalize(leaf);
  SubtreeWeights sub = leaf;
  for (int depth = r - 1; depth >= 1; --depth) sub = internal_vertex(q, p.w, p.w_ghost, sub, d - 1);
  const SubtreeWeights root = internal_vertex(q, p.w, p.w_ghost, sub, d);
  double z = 0.0, zc = 0.0;
  std::vector<double> marg(q);
  for (int s = 0; s < q; ++s) {
    marg[s] = root.c0[s] + root.c1[s];
    z += marg[s];
    zc += root.c1[s];
  }
  TreeMeasure t;
  t.depth = r;
  t.boundary = boundary;
  t.psi_r = zc / z;
  t.root_marginal = ColorLaw::from_weights(marg);
  return t;
}

std::vector<std::vector<int>> leaf_partitions(int leaves) {
  if (leaves < 1 || leaves > 6) throw Error(ErrorCode::BudgetExceeded, "leaf partitions need 1..6 leaves");
  // Restricted growth strings over {ghost, leaf_1..leaf_L}; the ghost's block is block 0.
  std::vector<std::vector<int>> out;
  std::vector<int> a(leaves + 1, 0);
  std::vector<int> mx(leaves + 1, 0);
  while (true) {
    out.emplace_back(a.begin() + 1, a.end());
    int i = leaves;
    while (i > 0 && a[i] == mx[i - 1] + 1) --i;
    if (i == 0) break;
    ++a[i];
    mx[i] = std::max(mx[i - 1], a[i]);
    for (int j = i + 1; j <= leaves; ++j) {
      a[j] = 0;
      mx[j] = mx[i];
    }
  }
  return out;
}

DominationReport sprinkle_domination_check(const MultiGraph& g_in, double q, double w1, double w2, double xi) {
  const MultiGraph g = strip_ghost(g_in);
  const int m = g.num_edges();
  if (m > 16) throw Error(ErrorCode::BudgetExceeded, "domination check needs |E| <= 16");
  DominationReport rep;
  const double p1 = w1 / (1.0 + w1);
  const double p2 = w2 / (1.0 + w2);
  rep.lhs = xi / (1.0 - xi);
  rep.rhs = (p1 - p2) / q;
  if (!(xi >= 0.0 && xi < 1.0) || !(rep.lhs < rep.rhs)) {
    throw Error(ErrorCode::ConditionUnsatisfied, "sprinkling condition xi/(1-xi) < (p1-p2)/q fails");
  }
  const int n = g.n;
  const std::size_t states = std::size_t{1} << m;
  std::vector<int> comps(states);
  std::vector<std::vector<int>> labels(states, std::vector<int>(n));
  std::vector<int> largest(states);
  for (std::size_t mask = 0; mask < states; ++mask) {
    UnionFind uf(n);
    for (int e = 0; e < m; ++e) {
      if ((mask >> e) & 1) uf.unite(g.edges[e].first, g.edges[e].second);
    }
    comps[mask] = uf.components();
    int big = 0;
    for (int v = 0; v < n; ++v) {
      labels[mask][v] = uf.find(v);
      big = std::max(big, uf.size_of(v));
    }
    largest[mask] = big;
  }
  auto fk = [&](double w) {
    std::vector<double> pi(states);
    double z = 0.0;
    for (std::size_t mask = 0; mask < states; ++mask) {
      pi[mask] = std::pow(w, __builtin_popcountll(mask)) * std::pow(q, comps[mask]);
      z += pi[mask];
    }
    for (double& x : pi) x /= z;
    return pi;
  };
  const auto pi1 = fk(w1);
  auto pi2 = fk(w2);
  for (int e = 0; e < m; ++e) {
    const std::size_t bit = std::size_t{1} << e;
    for (std::size_t mask = 0; mask < states; ++mask) {
      if (mask & bit) continue;
      const double a = pi2[mask];
      pi2[mask] = a * (1.0 - xi);
      pi2[mask | bit] += a * xi;
    }
  }
  auto check = [&](auto&& f) {
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t mask = 0; mask < states; ++mask) {
      if (f(mask)) {
        e1 += pi1[mask];
        e2 += pi2[mask];
      }
    }
    rep.max_violation = std::max(rep.max_violation, e2 - e1);
    ++rep.events;
  };
  for (int e = 0; e < m; ++e) check([&](std::size_t mask) { return (mask >> e) & 1; });
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) check([&](std::size_t mask) { return labels[mask][u] == labels[mask][v]; });
  for (int t = 1; t <= n; ++t) check([&](std::size_t mask) { return largest[mask] >= t; });
  rep.passed = rep.max_violation <= 1e-12;
  return rep;
}

}  // namespace fkp
