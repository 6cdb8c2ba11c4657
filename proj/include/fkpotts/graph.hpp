#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fkp {

using Edge = std::pair<int, int>;

// Undirected multigraph. When `ghost` is set the graph is G*: vertex n is the ghost,
// edges [0, base_edges) are the original edges and edges [base_edges, base_edges + n)
// join vertex i to the ghost in order.
struct MultiGraph {
  int n = 0;
  std::vector<Edge> edges;
  bool ghost = false;
  int base_edges = 0;
  // Half-edge matching that produced a pairing-model sample, if any.
  std::vector<int> half_edge_pairing;

  int num_vertices() const { return n + (ghost ? 1 : 0); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int ghost_index() const { return n; }
  bool is_ghost_edge(int e) const { return ghost && e >= base_edges; }

  std::vector<int> degrees() const;  // loops count twice
  bool simple() const;               // no loops and no parallel edges
  bool connected() const;
  std::vector<std::vector<int>> adjacency() const;  // neighbour lists, loops listed twice

  static MultiGraph from_edges(int n, std::vector<Edge> edges);
};

bool operator==(const MultiGraph& a, const MultiGraph& b);

struct CycleStats {
  int K = 0;
  std::map<int, std::int64_t> counts;  // k -> X_k for 3 <= k <= K
  // Shortest cycle length if <= K (loops give 1, parallel edges give 2).
  std::optional<int> girth;
};

struct PairingOptions {
  bool simple_only = false;
  int girth_min = 0;  // reject samples with a cycle of length < girth_min
  int max_attempts = 10000;
};

MultiGraph sample_pairing_model(int n, int d, std::uint64_t seed);
// Rejection loop over sample_pairing_model; attempt i uses a seed derived from (seed, i).
MultiGraph sample_pairing_model(int n, int d, std::uint64_t seed, const PairingOptions& opts,
                                int* attempts_used = nullptr);

CycleStats cycle_counts(const MultiGraph& g, int K);

MultiGraph augment(const MultiGraph& g);
MultiGraph strip_ghost(const MultiGraph& g);

double second_eigenvalue(const MultiGraph& g, double tol = 1e-10, long max_iter = 200000);

struct ModifiedGraphs {
  MultiGraph g_hat;
  MultiGraph g_tilde;
  std::vector<Edge> removed;      // (v_i, v_{m+i})
  std::vector<int> new_vertices;  // indices of w_1..w_p in g_tilde
};

ModifiedGraphs modify_graph(const MultiGraph& g, int p, int d_star, std::uint64_t seed,
                            int min_separation, int max_attempts = 1000);

// Edge-list text format: "n m" (plus " augmented=1"), then m lines "u v".
void write_edge_list(std::ostream& os, const MultiGraph& g);
MultiGraph read_edge_list(std::istream& is);
MultiGraph load_edge_list(const std::string& path);

// Small named graphs used by tests and verification.
MultiGraph complete_graph(int n);
MultiGraph cycle_graph(int n);
MultiGraph path_graph(int n);
MultiGraph petersen_graph();

}  // namespace fkp
