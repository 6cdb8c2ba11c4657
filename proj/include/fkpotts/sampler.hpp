#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fkpotts/graph.hpp"
#include "fkpotts/params.hpp"
#include "fkpotts/rng.hpp"

namespace fkp {

// Colours 1..q of the original vertices; the ghost is implicitly colour 1.
struct SpinConfig {
  std::vector<int> colors;
};

struct ClusterInfo {
  std::vector<int> label;     // component representative per vertex of the graph
  std::vector<int> sizes;     // size per representative (original vertices only)
  int giant_size = 0;         // original vertices in the ghost's component, or the largest one
  double giant_fraction = 0.0;
  int max_other = 0;          // largest component other than the giant
  int components = 0;
};

// Open bit per edge of the graph it was drawn on.
struct BondConfig {
  std::vector<std::uint8_t> open;

  // Union-find pass over the graph. With a ghost the giant is the ghost's component;
  // otherwise it is the largest component.
  ClusterInfo clusters(const MultiGraph& g) const;
  int open_count() const;
};

SpinConfig uniform_spins(int n, int q, const CounterRng& rng);
SpinConfig constant_spins(int n, int color = 1);

BondConfig es_bonds_given_spins(const ModelParams& p, const MultiGraph& g_star, const SpinConfig& sigma,
                                const CounterRng& rng);
SpinConfig es_spins_given_bonds(int q, const MultiGraph& g_star, const BondConfig& eta,
                                const CounterRng& rng);
// One Swendsen-Wang sweep; the intermediate bond state is returned through `bonds` if given.
SpinConfig sw_sweep(const ModelParams& p, const MultiGraph& g_star, const SpinConfig& sigma,
                    const CounterRng& rng, BondConfig* bonds = nullptr);

// Heat-bath single-site update over all vertices in order; slow reference kernel.
SpinConfig glauber_sweep(const ModelParams& p, const MultiGraph& g, const SpinConfig& sigma,
                         const CounterRng& rng);

// Zero-field FK-Ising update: colour clusters +-1, reopen monochromatic edges with
// probability w/(1+w). The colouring used is returned through `spins` if given.
BondConfig fk_ising_sweep(double w_ising, const MultiGraph& g, const BondConfig& eta, const CounterRng& rng,
                          std::vector<int>* spins = nullptr);

BondConfig bernoulli_sprinkle(const BondConfig& eta, double xi, const CounterRng& rng);

// Fraction of original vertices v with v not joined to the ghost and |C(v)| >= k, k = 1..kmax.
std::vector<double> cluster_tail(const ClusterInfo& info, const MultiGraph& g, int kmax);

struct WindowTargets {
  std::vector<double> nu_free;   // root marginals
  std::vector<double> nu_wired;
  double psi_free = 0.0;
  double psi_wired = 1.0;
  double eps = 0.05;
};

// Targets from the BP fixed points; eps <= 0 selects half the smaller free/wired gap.
WindowTargets window_targets(const ModelParams& p, double eps);

struct Observation {
  std::vector<double> profile;  // L_sigma
  double giant_fraction = 0.0;
  int max_other = 0;
  double magnetization = 0.0;  // <sigma, 1>/n in the +-1 convention, FK-Ising mode only
  double energy = 0.0;         // monochromatic original edges (Potts) or open edges (FK)
  bool in_v_free = false;
  bool in_v_wired = false;
  bool in_e_free = false;
  bool in_e_wired = false;
};

Observation observe_spins(const SpinConfig& sigma, int q, const WindowTargets& t);
void observe_bonds(const ClusterInfo& info, const WindowTargets& t, Observation& obs);

enum class ChainMode { PottsSw, FkIsing };

struct GraphSource {
  std::optional<std::string> file;
  int n = 0;
  int d = 3;
  std::uint64_t seed = 1;
  int girth_min = 0;
  bool simple_only = false;
};

struct ChainConfig {
  GraphSource graph;
  int d = 3;
  double q = 3.0;
  double beta = 0.0;
  double B = 0.0;
  long sweeps = 1000;
  long burn_in = -1;  // -1 selects 10% of sweeps
  long thin = 1;
  int replicas = 1;
  std::uint64_t seed = 1;
  ChainMode mode = ChainMode::PottsSw;
  double eps_window = -1.0;  // -1 selects the default from the BP targets
  std::string init = "mixed";
  int workers = 1;
};

struct TraceRecord {
  int replica = 0;
  long sweep = 0;
  Observation obs;
};

struct ChainTrace {
  ChainConfig config;  // with defaults materialised
  WindowTargets targets;
  std::vector<TraceRecord> records;  // replica-major, sweep order within a replica
  int graph_n = 0;
  int graph_attempts = 0;
};

// Parses and validates a JSON chain configuration; throws ConfigError.
ChainConfig parse_chain_config(const std::string& json_text);
std::string chain_config_json(const ChainConfig& c);

MultiGraph build_graph(const GraphSource& src, int* attempts = nullptr);

ChainTrace run_chain(const ChainConfig& config);
// Same as run_chain on a caller-supplied unaugmented graph.
ChainTrace run_chain(const ChainConfig& config, const MultiGraph& g);

std::string trace_record_json(const TraceRecord& r);

}  // namespace fkp
