#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "fkpotts/errors.hpp"
#include "fkpotts/graph.hpp"
#include "fkpotts/rng.hpp"

using namespace fkp;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an fkp::Error");
  return ErrorCode::DomainError;
}

// Brute force: for every k-subset, count Hamiltonian cycles of the induced simple graph.
std::int64_t brute_cycles(const MultiGraph& g, int k) {
  std::vector<std::vector<bool>> adj(g.n, std::vector<bool>(g.n, false));
  for (auto [u, v] : g.edges) {
    if (u != v) adj[u][v] = adj[v][u] = true;
  }
  std::int64_t total = 0;
  for (unsigned mask = 0; mask < (1u << g.n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    std::vector<int> vs;
    for (int v = 0; v < g.n; ++v)
      if (mask >> v & 1u) vs.push_back(v);
    std::vector<int> rest(vs.begin() + 1, vs.end());
    std::int64_t ham = 0;
    do {
      bool ok = adj[vs[0]][rest.front()] && adj[rest.back()][vs[0]];
      for (std::size_t i = 0; ok && i + 1 < rest.size(); ++i) ok = adj[rest[i]][rest[i + 1]];
      ham += ok;
    } while (std::next_permutation(rest.begin(), rest.end()));
    total += ham / 2;
  }
  return total;
}

MultiGraph random_simple_graph(int n, double p, SeqRng& rng) {
  std::vector<Edge> e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < p) e.push_back({u, v});
  return MultiGraph::from_edges(n, e);
}

double dense_second_eigenvalue(const MultiGraph& g) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(g.n, g.n);
  for (auto [u, v] : g.edges) {
    A(u, v) += 1.0;
    if (u != v) A(v, u) += 1.0;
    else A(u, u) += 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  return es.eigenvalues()(g.n - 2);
}

}  // namespace

TEST_CASE("named graphs") {
  const auto pg = petersen_graph();
  CHECK(pg.n == 10);
  CHECK(pg.num_edges() == 15);
  CHECK(pg.simple());
  const auto c = cycle_counts(pg, 8);
  CHECK(c.counts.at(3) == 0);
  CHECK(c.counts.at(4) == 0);
  CHECK(c.counts.at(5) == 12);
  CHECK(c.counts.at(6) == 10);
  CHECK(c.counts.at(8) == 15);
  CHECK(c.girth == 5);
  const auto k4 = cycle_counts(complete_graph(4), 4);
  CHECK(k4.counts.at(3) == 4);
  CHECK(k4.counts.at(4) == 3);
  CHECK(second_eigenvalue(pg) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(second_eigenvalue(complete_graph(5)) == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("property: cycle counts match brute force") {
  SeqRng rng(CounterRng(11).sub(1));
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(5));
    const auto g = random_simple_graph(n, 0.3 + 0.5 * rng.uniform(), rng);
    const auto c = cycle_counts(g, std::min(n, 8));
    for (int k = 3; k <= std::min(n, 8); ++k) CHECK(c.counts.at(k) == brute_cycles(g, k));
  }
}

TEST_CASE("cycle counts on multigraphs collapse parallel edges and report short girth") {
  auto g = MultiGraph::from_edges(3, {{0, 1}, {0, 1}, {1, 2}, {2, 0}});
  const auto c = cycle_counts(g, 3);
  CHECK(c.counts.at(3) == 2);  // each parallel copy closes its own triangle
  CHECK(c.girth == 2);
  const auto loop = cycle_counts(MultiGraph::from_edges(3, {{0, 0}, {0, 1}, {1, 2}, {2, 0}}), 3);
  CHECK(loop.girth == 1);
  CHECK(code_of([&] { cycle_counts(g, 13); }) == ErrorCode::BudgetExceeded);
}

TEST_CASE("pairing model is regular, deterministic and seed dependent") {
  const auto a = sample_pairing_model(200, 3, 9);
  const auto b = sample_pairing_model(200, 3, 9);
  const auto c = sample_pairing_model(200, 3, 10);
  CHECK(a == b);
  CHECK(!(a == c));
  CHECK(a.num_edges() == 300);
  for (int x : a.degrees()) CHECK(x == 3);
  CHECK(code_of([] { sample_pairing_model(5, 3, 1); }) == ErrorCode::InvalidArity);
}

TEST_CASE("property: pairing-model loop count has mean (d-1)/2") {
  const int seeds = 3000;
  double mean = 0.0, sq = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const auto g = sample_pairing_model(60, 3, combine(77, s));
    int loops = 0;
    for (auto [u, v] : g.edges) loops += u == v;
    mean += loops;
    sq += static_cast<double>(loops) * loops;
  }
  mean /= seeds;
  const double se = std::sqrt((sq / seeds - mean * mean) / seeds);
  // Finite-n mean is (d-1)/2 * n d / (n d - 1) to leading order.
  CHECK(std::abs(mean - 1.0) <= 4.0 * se + 0.02);
}

TEST_CASE("girth-conditioned sampling") {
  PairingOptions opts;
  opts.girth_min = 5;
  int attempts = 0;
  const auto g = sample_pairing_model(200, 3, 4, opts, &attempts);
  CHECK(g.simple());
  const auto c = cycle_counts(g, 4);
  CHECK(c.counts.at(3) == 0);
  CHECK(c.counts.at(4) == 0);
  CHECK(attempts >= 1);
  PairingOptions tight;
  tight.girth_min = 12;
  tight.max_attempts = 3;
  CHECK(code_of([&] { sample_pairing_model(20, 3, 1, tight); }) == ErrorCode::BudgetExceeded);
}

TEST_CASE("property: second eigenvalue matches a dense eigensolver") {
  for (int s = 0; s < 8; ++s) {
    PairingOptions opts;
    opts.simple_only = true;
    const auto g = sample_pairing_model(40, 3 + s % 2, combine(5, s), opts);
    if (!g.connected()) continue;
    CHECK(second_eigenvalue(g, 1e-12) == doctest::Approx(dense_second_eigenvalue(g)).epsilon(1e-6));
  }
  auto two = MultiGraph::from_edges(4, {{0, 1}, {2, 3}});
  CHECK(code_of([&] { second_eigenvalue(two); }) == ErrorCode::NotConnected);
}

TEST_CASE("ghost augmentation round trip") {
  const auto g = cycle_graph(5);
  const auto gs = augment(g);
  CHECK(gs.ghost);
  CHECK(gs.num_vertices() == 6);
  CHECK(gs.num_edges() == 10);
  CHECK(gs.is_ghost_edge(5));
  CHECK(!gs.is_ghost_edge(4));
  CHECK(gs.edges[7] == Edge{2, 5});
  CHECK(strip_ghost(gs) == g);
  CHECK(code_of([&] { augment(gs); }) == ErrorCode::InvalidState);
}

TEST_CASE("edge-list IO") {
  const auto g = augment(sample_pairing_model(12, 3, 2));
  std::stringstream ss;
  write_edge_list(ss, g);
  const auto back = read_edge_list(ss);
  CHECK(back == g);
  std::stringstream bad("3 2\n0 1\n");
  CHECK(code_of([&] { read_edge_list(bad); }) == ErrorCode::ConfigError);
  std::stringstream range("3 1\n0 7\n");
  CHECK(code_of([&] { read_edge_list(range); }) == ErrorCode::ConfigError);
}

TEST_CASE("p-modified graphs") {
  PairingOptions opts;
  opts.simple_only = true;
  const auto g = sample_pairing_model(300, 3, 21, opts);
  for (int d_star : {2, 4}) {
    const int p = 4;
    const auto mg = modify_graph(g, p, d_star, 8, 4);
    const int m = p * d_star / 2;
    CHECK(static_cast<int>(mg.removed.size()) == m);
    CHECK(mg.g_hat.num_edges() == g.num_edges() - m);
    CHECK(mg.g_tilde.n == g.n + p);
    const auto deg = mg.g_tilde.degrees();
    for (int v = 0; v < g.n; ++v) CHECK(deg[v] == 3);
    for (int w : mg.new_vertices) CHECK(deg[w] == d_star);
    // Removed edges are pairwise far apart.
    std::set<int> ends;
    for (auto [a, b] : mg.removed) {
      ends.insert(a);
      ends.insert(b);
    }
    CHECK(static_cast<int>(ends.size()) == 2 * m);
  }
  const auto same = modify_graph(g, 0, 4, 1, 4);
  CHECK(same.g_tilde == g);
  CHECK(code_of([&] { modify_graph(g, 2, 5, 1, 4); }) == ErrorCode::DomainError);
  CHECK(code_of([&] { modify_graph(complete_graph(4), 2, 2, 1, 10, 5); }) == ErrorCode::PlacementFailure);
}
