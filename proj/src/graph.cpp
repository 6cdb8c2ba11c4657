#include "fkpotts/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include "fkpotts/errors.hpp"
#include "fkpotts/rng.hpp"
#include "fkpotts/union_find.hpp"

namespace fkp {

MultiGraph MultiGraph::from_edges(int n, std::vector<Edge> edges) {
  MultiGraph g;
  g.n = n;
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) throw Error(ErrorCode::DomainError, "edge endpoint out of range");
  }
  g.edges = std::move(edges);
  g.base_edges = g.num_edges();
  return g;
}

bool operator==(const MultiGraph& a, const MultiGraph& b) {
  return a.n == b.n && a.ghost == b.ghost && a.base_edges == b.base_edges && a.edges == b.edges;
}

std::vector<int> MultiGraph::degrees() const {
  std::vector<int> deg(num_vertices(), 0);
  for (const auto& [u, v] : edges) {
    ++deg[u];
    ++deg[v];
  }
  return deg;
}

bool MultiGraph::simple() const {
  std::set<Edge> seen;
  for (auto [u, v] : edges) {
    if (u == v) return false;
    if (u > v) std::swap(u, v);
    if (!seen.insert({u, v}).second) return false;
  }
  return true;
}

bool MultiGraph::connected() const {
  const int nv = num_vertices();
  if (nv <= 1) return true;
  UnionFind uf(nv);
  for (const auto& [u, v] : edges) uf.unite(u, v);
  return uf.components() == 1;
}

std::vector<std::vector<int>> MultiGraph::adjacency() const {
  std::vector<std::vector<int>> adj(num_vertices());
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  return adj;
}

MultiGraph sample_pairing_model(int n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw Error(ErrorCode::InvalidArity, "pairing model needs n >= 1 and d >= 1");
  const long long halves = static_cast<long long>(n) * d;
  if (halves % 2 != 0) throw Error(ErrorCode::InvalidArity, "n*d must be even");
  std::vector<int> perm(halves);
  std::iota(perm.begin(), perm.end(), 0);
  SeqRng rng(CounterRng(seed).sub(0x7061697269ULL));
  // Fisher-Yates; consecutive entries of the shuffled list are matched.
  for (long long i = halves - 1; i > 0; --i) {
    const auto j = static_cast<long long>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[i], perm[j]);
  }
  MultiGraph g;
  g.n = n;
  g.edges.reserve(halves / 2);
  g.half_edge_pairing.assign(halves, -1);
  for (long long i = 0; i < halves; i += 2) {
    const int a = perm[i];
    const int b = perm[i + 1];
    g.half_edge_pairing[a] = b;
    g.half_edge_pairing[b] = a;
    g.edges.emplace_back(a / d, b / d);
  }
  g.base_edges = g.num_edges();
  return g;
}

MultiGraph sample_pairing_model(int n, int d, std::uint64_t seed, const PairingOptions& opts,
                                int* attempts_used) {
  const int K = std::min(opts.girth_min - 1, 12);
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    const std::uint64_t s = attempt == 0 ? seed : combine(seed, static_cast<std::uint64_t>(attempt));
    MultiGraph g = sample_pairing_model(n, d, s);
    bool ok = !opts.simple_only || g.simple();
    if (ok && opts.girth_min > 1) {
      if (opts.girth_min > 13) throw Error(ErrorCode::BudgetExceeded, "girth_min above 13");
      if (K >= 3) {
        const auto cs = cycle_counts(g, K);
        ok = !cs.girth.has_value();
      } else {
        const auto cs = cycle_counts(g, 3);
        ok = !cs.girth.has_value() || *cs.girth >= opts.girth_min;
      }
    }
    if (ok) {
      if (attempts_used) *attempts_used = attempt + 1;
      return g;
    }
  }
  throw Error(ErrorCode::BudgetExceeded, "rejection sampling exhausted its attempt budget");
}

CycleStats cycle_counts(const MultiGraph& g, int K) {
  if (K > 12) throw Error(ErrorCode::BudgetExceeded, "cycle enumeration budget is K <= 12");
  if (K < 3) throw Error(ErrorCode::DomainError, "cycle_counts needs K >= 3");
  const int nv = g.num_vertices();
  CycleStats out;
  out.K = K;
  for (int k = 3; k <= K; ++k) out.counts[k] = 0;

  // Collapse parallel edges into multiplicities; loops and multi-edges set the girth.
  std::vector<std::map<int, int>> mult(nv);
  bool has_loop = false;
  bool has_multi = false;
  for (const auto& [u, v] : g.edges) {
    if (u == v) {
      has_loop = true;
      continue;
    }
    if (++mult[u][v] > 1) has_multi = true;
    ++mult[v][u];
  }
  std::vector<std::vector<std::pair<int, int>>> adj(nv);
  for (int u = 0; u < nv; ++u) {
    for (const auto& [v, m] : mult[u]) adj[u].emplace_back(v, m);
  }

  // Each cycle is rooted at its smallest vertex and walked in both directions,
  // so every cycle is found exactly twice.
  std::vector<std::int64_t> twice(K + 1, 0);
  std::vector<char> on_path(nv, 0);
  struct Frame {
    int v;
    std::size_t next;
    std::int64_t weight;
  };
  std::vector<Frame> stack;
  for (int s = 0; s < nv; ++s) {
    on_path[s] = 1;
    stack.push_back({s, 0, 1});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next == adj[f.v].size()) {
        on_path[f.v] = 0;
        stack.pop_back();
        if (stack.empty()) on_path[s] = 0;
        continue;
      }
      const auto [u, m] = adj[f.v][f.next++];
      const int len = static_cast<int>(stack.size());  // edges so far + 1 if we close
      if (u == s) {
        if (len >= 3) twice[len] += f.weight * m;
        continue;
      }
      if (u < s || on_path[u] || len >= K) continue;
      on_path[u] = 1;
      stack.push_back({u, 0, f.weight * m});
    }
  }
  for (int k = 3; k <= K; ++k) out.counts[k] = twice[k] / 2;

  if (has_loop) {
    out.girth = 1;
  } else if (has_multi) {
    out.girth = 2;
  } else {
    for (int k = 3; k <= K; ++k) {
      if (out.counts[k] > 0) {
        out.girth = k;
        break;
      }
    }
  }
  return out;
}

MultiGraph augment(const MultiGraph& g) {
  if (g.ghost) throw Error(ErrorCode::InvalidState, "graph is already augmented");
  MultiGraph out = g;
  out.ghost = true;
  out.base_edges = g.num_edges();
  out.edges.reserve(g.edges.size() + g.n);
  for (int v = 0; v < g.n; ++v) out.edges.emplace_back(v, g.n);
  return out;
}

MultiGraph strip_ghost(const MultiGraph& g) {
  if (!g.ghost) return g;
  MultiGraph out;
  out.n = g.n;
  out.edges.assign(g.edges.begin(), g.edges.begin() + g.base_edges);
  out.base_edges = g.base_edges;
  out.half_edge_pairing = g.half_edge_pairing;
  return out;
}

double second_eigenvalue(const MultiGraph& g, double tol, long max_iter) {
  if (g.ghost) throw Error(ErrorCode::InvalidState, "second_eigenvalue expects an unaugmented graph");
  const int n = g.n;
  if (n < 2) throw Error(ErrorCode::DomainError, "second_eigenvalue needs at least two vertices");
  if (!g.connected()) throw Error(ErrorCode::NotConnected, "graph is disconnected");
  const auto deg = g.degrees();
  const double shift = *std::max_element(deg.begin(), deg.end());

  // y = (A + shift I) x
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (int i = 0; i < n; ++i) y[i] = shift * x[i];
    for (const auto& [u, v] : g.edges) {
      y[u] += x[v];
      y[v] += x[u];
    }
  };
  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    s = std::sqrt(s);
    for (double& v : x) v /= s;
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };

  // Perron vector: positive start, shifted operator is nonnegative and primitive enough.
  std::vector<double> v1(n), y(n);
  for (int i = 0; i < n; ++i) v1[i] = 1.0 + 0.01 * (i % 7);
  normalize(v1);
  bool regular = std::all_of(deg.begin(), deg.end(), [&](int x) { return x == deg[0]; });
  if (regular) {
    std::fill(v1.begin(), v1.end(), 1.0 / std::sqrt(static_cast<double>(n)));
  } else {
    for (long it = 0; it < max_iter; ++it) {
      apply(v1, y);
      const double lam = dot(v1, y);
      double res = 0.0;
      for (int i = 0; i < n; ++i) res = std::max(res, std::abs(y[i] - lam * v1[i]));
      v1 = y;
      normalize(v1);
      if (res <= tol * 1e-2) break;
    }
  }

  // Deflated power iteration from a deterministic pseudo-random start.
  std::vector<double> x(n);
  CounterRng rng(0x5ec0dULL);
  for (int i = 0; i < n; ++i) x[i] = rng.uniform(i) - 0.5;
  auto deflate = [&](std::vector<double>& z) {
    const double c = dot(z, v1);
    for (int i = 0; i < n; ++i) z[i] -= c * v1[i];
  };
  deflate(x);
  normalize(x);
  double lam = 0.0;
  double prev = INFINITY;
  for (long it = 0; it < max_iter; ++it) {
    apply(x, y);
    deflate(y);
    lam = dot(x, y);
    double res = 0.0;
    for (int i = 0; i < n; ++i) res += (y[i] - lam * x[i]) * (y[i] - lam * x[i]);
    res = std::sqrt(res);
    if (res <= tol) break;
    // Clustered spectra stall the vector; the Rayleigh quotient converges regardless.
    if (it > 1000 && std::abs(lam - prev) <= tol * 1e-3) break;
    prev = lam;
    x = y;
    normalize(x);
  }
  return lam - shift;
}

ModifiedGraphs modify_graph(const MultiGraph& g, int p, int d_star, std::uint64_t seed,
                            int min_separation, int max_attempts) {
  if (g.ghost) throw Error(ErrorCode::InvalidState, "modify_graph expects an unaugmented graph");
  if (p < 0 || p % 2 != 0) throw Error(ErrorCode::DomainError, "p must be a nonnegative even integer");
  ModifiedGraphs out;
  if (p == 0) {
    out.g_hat = g;
    out.g_tilde = g;
    return out;
  }
  const auto deg = g.degrees();
  const int d = deg.empty() ? 0 : deg[0];
  if (!g.simple() || std::any_of(deg.begin(), deg.end(), [&](int x) { return x != d; })) {
    throw Error(ErrorCode::DomainError, "modify_graph expects a simple regular graph");
  }
  if (d_star != d - 1 && d_star != d + 1) throw Error(ErrorCode::DomainError, "d_star must be d-1 or d+1");
  const long long mm = static_cast<long long>(p) * d_star;
  const int m = static_cast<int>(mm / 2);
  const auto adj = g.adjacency();

  SeqRng rng(CounterRng(seed).sub(0x6d6f64ULL));
  std::vector<int> chosen;  // edge indices
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(chosen.size()) < m; ++attempt) {
    chosen.clear();
    std::vector<char> blocked(g.n, 0);
    std::set<Edge> used;
    int tries = 0;
    while (static_cast<int>(chosen.size()) < m && tries < 50 * g.n) {
      ++tries;
      const int v = static_cast<int>(rng.below(g.n));
      const int u = adj[v][rng.below(adj[v].size())];
      if (blocked[v] || blocked[u]) continue;
      const Edge key{std::min(u, v), std::max(u, v)};
      if (used.count(key)) continue;
      used.insert(key);
      // Locate the edge index and block every vertex within distance < min_separation.
      for (int e = 0; e < g.num_edges(); ++e) {
        const auto& [a, b] = g.edges[e];
        if ((a == v && b == u) || (a == u && b == v)) {
          chosen.push_back(e);
          break;
        }
      }
      std::vector<int> dist(g.n, -1);
      std::queue<int> bfs;
      dist[u] = dist[v] = 0;
      bfs.push(u);
      bfs.push(v);
      while (!bfs.empty()) {
        const int x = bfs.front();
        bfs.pop();
        blocked[x] = 1;
        if (dist[x] + 1 >= min_separation) continue;
        for (int y : adj[x]) {
          if (dist[y] < 0) {
            dist[y] = dist[x] + 1;
            bfs.push(y);
          }
        }
      }
    }
  }
  if (static_cast<int>(chosen.size()) < m) {
    throw Error(ErrorCode::PlacementFailure, "could not place the modified edges with the required separation");
  }

  std::vector<char> removed(g.num_edges(), 0);
  std::vector<int> first, second;
  for (int e : chosen) {
    removed[e] = 1;
    out.removed.push_back(g.edges[e]);
    first.push_back(g.edges[e].first);
    second.push_back(g.edges[e].second);
  }
  std::vector<Edge> kept;
  for (int e = 0; e < g.num_edges(); ++e) {
    if (!removed[e]) kept.push_back(g.edges[e]);
  }
  out.g_hat = MultiGraph::from_edges(g.n, kept);

  std::vector<Edge> tilde = kept;
  for (int k = 0; k < p; ++k) out.new_vertices.push_back(g.n + k);
  // Interleave the endpoints so both ends of one deleted edge go to different w_k.
  int j = 0;
  for (int i = 0; i < m; ++i) {
    for (int end : {first[i], second[i]}) {
      tilde.emplace_back(end, g.n + (j % p));
      ++j;
    }
  }
  out.g_tilde = MultiGraph::from_edges(g.n + p, tilde);
  return out;
}

void write_edge_list(std::ostream& os, const MultiGraph& g) {
  os << g.n << ' ' << g.num_edges();
  if (g.ghost) os << " augmented=1";
  os << '\n';
  for (const auto& [u, v] : g.edges) os << u << ' ' << v << '\n';
}

MultiGraph read_edge_list(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error(ErrorCode::ConfigError, "empty edge list");
  std::istringstream hs(header);
  long long n = -1, m = -1;
  hs >> n >> m;
  if (!hs || n < 0 || m < 0) throw Error(ErrorCode::ConfigError, "bad edge-list header");
  bool aug = false;
  std::string tok;
  while (hs >> tok) {
    if (tok == "augmented=1") aug = true;
    else if (tok != "augmented=0") throw Error(ErrorCode::ConfigError, "unknown header token " + tok);
  }
  const int nv = static_cast<int>(n) + (aug ? 1 : 0);
  std::vector<Edge> edges;
  edges.reserve(m);
  for (long long i = 0; i < m; ++i) {
    long long u, v;
    if (!(is >> u >> v)) throw Error(ErrorCode::ConfigError, "edge list truncated");
    if (u < 0 || v < 0 || u >= nv || v >= nv) throw Error(ErrorCode::ConfigError, "edge endpoint out of range");
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }
  MultiGraph g;
  g.n = static_cast<int>(n);
  g.edges = std::move(edges);
  g.ghost = aug;
  g.base_edges = g.num_edges() - (aug ? g.n : 0);
  if (aug) {
    if (g.base_edges < 0) throw Error(ErrorCode::ConfigError, "augmented list lacks ghost edges");
    for (int v = 0; v < g.n; ++v) {
      if (g.edges[g.base_edges + v] != Edge{v, g.n}) {
        throw Error(ErrorCode::ConfigError, "ghost edges must close the augmented list in vertex order");
      }
    }
  }
  return g;
}

MultiGraph load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open graph file " + path);
  return read_edge_list(in);
}

MultiGraph complete_graph(int n) {
  std::vector<Edge> e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) e.emplace_back(u, v);
  return MultiGraph::from_edges(n, e);
}

MultiGraph cycle_graph(int n) {
  std::vector<Edge> e;
  for (int u = 0; u < n; ++u) e.emplace_back(u, (u + 1) % n);
  return MultiGraph::from_edges(n, e);
}

MultiGraph path_graph(int n) {
  std::vector<Edge> e;
  for (int u = 0; u + 1 < n; ++u) e.emplace_back(u, u + 1);
  return MultiGraph::from_edges(n, e);
}

MultiGraph petersen_graph() {
  std::vector<Edge> e;
  for (int i = 0; i < 5; ++i) {
    e.emplace_back(i, (i + 1) % 5);
    e.emplace_back(i, i + 5);
    e.emplace_back(5 + i, 5 + (i + 2) % 5);
  }
  return MultiGraph::from_edges(10, e);
}

}  // namespace fkp
