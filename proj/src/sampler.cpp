#include "fkpotts/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "fkpotts/bethe.hpp"
#include "fkpotts/errors.hpp"
#include "fkpotts/union_find.hpp"
#include "json.hpp"

namespace fkp {

using nlohmann::json;

namespace {

constexpr std::uint64_t kBondPhase = 0;
constexpr std::uint64_t kSpinPhase = 1;
constexpr std::uint64_t kInitTag = 0xfeedULL;

void require_ghost(const MultiGraph& g) {
  if (!g.ghost) throw Error(ErrorCode::InvalidState, "operation requires an augmented graph");
}

}  // namespace

ClusterInfo BondConfig::clusters(const MultiGraph& g) const {
  if (open.size() != g.edges.size()) throw Error(ErrorCode::InvalidState, "bond vector does not match graph");
  const int nv = g.num_vertices();
  UnionFind uf(nv);
  for (std::size_t e = 0; e < open.size(); ++e) {
    if (open[e]) uf.unite(g.edges[e].first, g.edges[e].second);
  }
  ClusterInfo info;
  info.label.resize(nv);
  info.sizes.assign(nv, 0);
  for (int v = 0; v < nv; ++v) info.label[v] = uf.find(v);
  for (int v = 0; v < g.n; ++v) ++info.sizes[info.label[v]];
  info.components = uf.components();
  int giant_root = -1;
  if (g.ghost) {
    giant_root = info.label[g.ghost_index()];
  } else {
    int best = -1;
    for (int v = 0; v < g.n; ++v) {
      if (info.label[v] == v && info.sizes[v] > best) {
        best = info.sizes[v];
        giant_root = v;
      }
    }
  }
  info.giant_size = giant_root >= 0 ? info.sizes[giant_root] : 0;
  info.giant_fraction = g.n > 0 ? static_cast<double>(info.giant_size) / g.n : 0.0;
  for (int v = 0; v < g.n; ++v) {
    if (info.label[v] == v && v != giant_root) info.max_other = std::max(info.max_other, info.sizes[v]);
  }
  return info;
}

int BondConfig::open_count() const {
  int c = 0;
  for (auto b : open) c += b;
  return c;
}

SpinConfig uniform_spins(int n, int q, const CounterRng& rng) {
  SpinConfig s;
  s.colors.resize(n);
  for (int v = 0; v < n; ++v) s.colors[v] = 1 + static_cast<int>(rng.below(v, q));
  return s;
}

SpinConfig constant_spins(int n, int color) {
  SpinConfig s;
  s.colors.assign(n, color);
  return s;
}

BondConfig es_bonds_given_spins(const ModelParams& p, const MultiGraph& g_star, const SpinConfig& sigma,
                                const CounterRng& rng) {
  require_ghost(g_star);
  if (static_cast<int>(sigma.colors.size()) != g_star.n) {
    throw Error(ErrorCode::InvalidState, "spin vector does not match graph");
  }
  BondConfig eta;
  eta.open.assign(g_star.edges.size(), 0);
  auto color = [&](int v) { return v == g_star.ghost_index() ? 1 : sigma.colors[v]; };
  // Each edge reads its own counter, so the loop order is irrelevant to the result.
  for (std::size_t e = 0; e < g_star.edges.size(); ++e) {
    const auto [u, v] = g_star.edges[e];
    if (color(u) != color(v)) continue;
    const double pe = g_star.is_ghost_edge(static_cast<int>(e)) ? p.p_ghost : p.p_edge;
    if (pe > 0.0 && rng.uniform(e) < pe) eta.open[e] = 1;
  }
  return eta;
}

SpinConfig es_spins_given_bonds(int q, const MultiGraph& g_star, const BondConfig& eta, const CounterRng& rng) {
  require_ghost(g_star);
  const ClusterInfo info = eta.clusters(g_star);
  const int ghost_root = info.label[g_star.ghost_index()];
  // Colour keyed by the smallest vertex of each component.
  std::vector<int> min_vertex(g_star.num_vertices(), -1);
  for (int v = 0; v < g_star.n; ++v) {
    int& m = min_vertex[info.label[v]];
    if (m < 0) m = v;
  }
  SpinConfig s;
  s.colors.resize(g_star.n);
  for (int v = 0; v < g_star.n; ++v) {
    const int r = info.label[v];
    s.colors[v] = r == ghost_root ? 1 : 1 + static_cast<int>(rng.below(min_vertex[r], q));
  }
  return s;
}

SpinConfig sw_sweep(const ModelParams& p, const MultiGraph& g_star, const SpinConfig& sigma,
                    const CounterRng& rng, BondConfig* bonds) {
  const int q = p.q_int();
  BondConfig eta = es_bonds_given_spins(p, g_star, sigma, rng.sub(kBondPhase));
#ifndef NDEBUG
  for (std::size_t e = 0; e < eta.open.size(); ++e) {
    if (!eta.open[e]) continue;
    const auto [u, v] = g_star.edges[e];
    const int cu = u == g_star.ghost_index() ? 1 : sigma.colors[u];
    const int cv = v == g_star.ghost_index() ? 1 : sigma.colors[v];
    if (cu != cv) throw Error(ErrorCode::InvalidState, "bichromatic open edge");
  }
#endif
  SpinConfig out = es_spins_given_bonds(q, g_star, eta, rng.sub(kSpinPhase));
  if (bonds) *bonds = std::move(eta);
  return out;
}

SpinConfig glauber_sweep(const ModelParams& p, const MultiGraph& g, const SpinConfig& sigma, const CounterRng& rng) {
  const int q = p.q_int();
  const MultiGraph base = strip_ghost(g);
  const auto adj = base.adjacency();
  SpinConfig s = sigma;
  std::vector<double> weight(q);
  for (int v = 0; v < base.n; ++v) {
    std::fill(weight.begin(), weight.end(), 0.0);
    for (int u : adj[v]) {
      if (u != v) weight[s.colors[u] - 1] += p.beta;
    }
    weight[0] += p.B;
    const double mx = *std::max_element(weight.begin(), weight.end());
    double total = 0.0;
    for (double& x : weight) {
      x = std::exp(x - mx);
      total += x;
    }
    double r = rng.uniform(v) * total;
    int c = 0;
    while (c < q - 1 && r >= weight[c]) r -= weight[c++];
    s.colors[v] = c + 1;
  }
  return s;
}

BondConfig fk_ising_sweep(double w_ising, const MultiGraph& g, const BondConfig& eta, const CounterRng& rng,
                          std::vector<int>* spins) {
  if (!(w_ising > 0.0)) throw Error(ErrorCode::DomainError, "FK-Ising weight must be positive");
  if (g.ghost) throw Error(ErrorCode::InvalidState, "FK-Ising sweep expects an unaugmented graph");
  const ClusterInfo info = eta.clusters(g);
  const CounterRng col = rng.sub(kSpinPhase);
  std::vector<int> sign(g.n);
  for (int v = 0; v < g.n; ++v) {
    // The representative is a pure function of the cluster, so this is one draw per cluster.
    sign[v] = (col.bits(static_cast<std::uint64_t>(info.label[v])) >> 63) ? 1 : -1;
  }
  const double pe = w_ising / (1.0 + w_ising);
  const CounterRng bond = rng.sub(kBondPhase);
  BondConfig out;
  out.open.assign(g.edges.size(), 0);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto [u, v] = g.edges[e];
    if (sign[u] == sign[v] && bond.uniform(e) < pe) out.open[e] = 1;
  }
  if (spins) *spins = std::move(sign);
  return out;
}

BondConfig bernoulli_sprinkle(const BondConfig& eta, double xi, const CounterRng& rng) {
  if (!(xi >= 0.0 && xi < 1.0)) throw Error(ErrorCode::DomainError, "sprinkling probability must lie in [0,1)");
  BondConfig out = eta;
  for (std::size_t e = 0; e < out.open.size(); ++e) {
    if (!out.open[e] && rng.uniform(e) < xi) out.open[e] = 1;
  }
  return out;
}

std::vector<double> cluster_tail(const ClusterInfo& info, const MultiGraph& g, int kmax) {
  std::vector<double> tail(kmax + 1, 0.0);
  const int ghost_root = g.ghost ? info.label[g.ghost_index()] : -1;
  for (int v = 0; v < g.n; ++v) {
    const int r = info.label[v];
    if (r == ghost_root) continue;
    const int s = std::min(info.sizes[r], kmax);
    for (int k = 1; k <= s; ++k) tail[k] += 1.0;
  }
  for (double& x : tail) x /= std::max(1, g.n);
  tail[0] = 1.0;
  return tail;
}

WindowTargets window_targets(const ModelParams& p, double eps) {
  WindowTargets t;
  const auto fp = bp_fixed_points(p);
  t.nu_free = root_marginal(p, fp.free).probs;
  t.nu_wired = root_marginal(p, fp.wired).probs;
  const auto rc = rcm_bp_fixed_points(p);
  t.psi_free = rc.psi_free;
  t.psi_wired = rc.psi_wired;
  if (eps > 0.0) {
    t.eps = eps;
  } else {
    double gap_nu = 0.0;
    for (std::size_t i = 0; i < t.nu_free.size(); ++i) gap_nu = std::max(gap_nu, std::abs(t.nu_free[i] - t.nu_wired[i]));
    const double gap = std::min(gap_nu, std::abs(t.psi_wired - t.psi_free));
    t.eps = gap > 0.0 ? 0.5 * gap : 0.05;
  }
  return t;
}

Observation observe_spins(const SpinConfig& sigma, int q, const WindowTargets& t) {
  Observation o;
  o.profile.assign(q, 0.0);
  for (int c : sigma.colors) o.profile[c - 1] += 1.0;
  const double n = std::max<std::size_t>(1, sigma.colors.size());
  for (double& x : o.profile) x /= n;
  auto inside = [&](const std::vector<double>& target) {
    if (target.size() != o.profile.size()) return false;
    for (int i = 0; i < q; ++i) {
      if (!(std::abs(o.profile[i] - target[i]) < t.eps)) return false;
    }
    return true;
  };
  o.in_v_free = inside(t.nu_free);
  o.in_v_wired = inside(t.nu_wired);
  return o;
}

void observe_bonds(const ClusterInfo& info, const WindowTargets& t, Observation& obs) {
  obs.giant_fraction = info.giant_fraction;
  obs.max_other = info.max_other;
  obs.in_e_free = std::abs(info.giant_fraction - t.psi_free) <= t.eps;
  obs.in_e_wired = std::abs(info.giant_fraction - t.psi_wired) <= t.eps;
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  return j[key].get<T>();
}

const char* mode_name(ChainMode m) { return m == ChainMode::PottsSw ? "potts_sw" : "fk_ising"; }

}  // namespace

ChainConfig parse_chain_config(const std::string& json_text) {
  ChainConfig c;
  try {
    const json j = json::parse(json_text);
    static const char* allowed[] = {"schema", "graph", "params", "sweeps", "burn_in", "thin", "replicas",
                                    "seed", "mode", "eps_window", "init", "workers"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::find_if(std::begin(allowed), std::end(allowed), [&](const char* a) { return it.key() == a; }) ==
          std::end(allowed)) {
        throw Error(ErrorCode::ConfigError, "unknown chain config key '" + it.key() + "'");
      }
    }
    if (!j.contains("graph") || !j.contains("params")) {
      throw Error(ErrorCode::ConfigError, "chain config needs 'graph' and 'params'");
    }
    const json& g = j["graph"];
    if (g.contains("file")) {
      c.graph.file = g["file"].get<std::string>();
    } else if (g.contains("pairing")) {
      const json& pr = g["pairing"];
      c.graph.n = pr.at("n").get<int>();
      c.graph.d = pr.at("d").get<int>();
      c.graph.seed = get_or<std::uint64_t>(pr, "seed", 1);
      c.graph.girth_min = get_or<int>(pr, "girth_min", 0);
      c.graph.simple_only = get_or<bool>(pr, "simple_only", false);
    } else {
      throw Error(ErrorCode::ConfigError, "graph needs 'file' or 'pairing'");
    }
    const json& p = j["params"];
    c.d = p.at("d").get<int>();
    c.q = get_or<double>(p, "q", 2.0);
    c.beta = p.at("beta").get<double>();
    c.B = get_or<double>(p, "B", 0.0);
    c.sweeps = get_or<long>(j, "sweeps", c.sweeps);
    c.burn_in = get_or<long>(j, "burn_in", -1);
    c.thin = get_or<long>(j, "thin", 1);
    c.replicas = get_or<int>(j, "replicas", 1);
    c.seed = get_or<std::uint64_t>(j, "seed", 1);
    c.eps_window = get_or<double>(j, "eps_window", -1.0);
    c.init = get_or<std::string>(j, "init", "mixed");
    c.workers = get_or<int>(j, "workers", 1);
    const std::string mode = get_or<std::string>(j, "mode", "potts_sw");
    if (mode == "potts_sw") c.mode = ChainMode::PottsSw;
    else if (mode == "fk_ising") c.mode = ChainMode::FkIsing;
    else throw Error(ErrorCode::ConfigError, "mode must be potts_sw or fk_ising");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  if (c.sweeps <= 0) throw Error(ErrorCode::ConfigError, "sweeps must be positive");
  if (c.burn_in < 0) c.burn_in = c.sweeps / 10;
  if (c.burn_in >= c.sweeps) throw Error(ErrorCode::ConfigError, "burn_in must be below sweeps");
  if (c.thin <= 0) throw Error(ErrorCode::ConfigError, "thin must be positive");
  if (c.replicas <= 0) throw Error(ErrorCode::ConfigError, "replicas must be positive");
  if (c.workers <= 0) throw Error(ErrorCode::ConfigError, "workers must be positive");
  if (c.init != "mixed" && c.init != "ordered" && c.init != "disordered") {
    throw Error(ErrorCode::ConfigError, "init must be mixed, ordered or disordered");
  }
  if (c.mode == ChainMode::PottsSw) {
    try {
      const auto p = make_params(c.d, c.q, c.beta, c.B);
      p.q_int();
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.what());
    }
  } else {
    if (c.q != 2.0 || c.B != 0.0) throw Error(ErrorCode::ConfigError, "fk_ising mode needs q = 2 and B = 0");
    if (!(c.beta > 0.0)) throw Error(ErrorCode::ConfigError, "fk_ising mode needs beta > 0");
  }
  if (!c.graph.file && c.graph.d != c.d) throw Error(ErrorCode::ConfigError, "graph degree differs from params.d");
  return c;
}

std::string chain_config_json(const ChainConfig& c) {
  json g;
  if (c.graph.file) {
    g["file"] = *c.graph.file;
  } else {
    g["pairing"] = {{"n", c.graph.n}, {"d", c.graph.d}, {"seed", c.graph.seed},
                    {"girth_min", c.graph.girth_min}, {"simple_only", c.graph.simple_only}};
  }
  json j = {{"graph", g},
            {"params", {{"d", c.d}, {"q", c.q}, {"beta", c.beta}, {"B", c.B}}},
            {"sweeps", c.sweeps},
            {"burn_in", c.burn_in},
            {"thin", c.thin},
            {"replicas", c.replicas},
            {"seed", c.seed},
            {"mode", mode_name(c.mode)},
            {"eps_window", c.eps_window},
            {"init", c.init},
            {"workers", c.workers}};
  return j.dump();
}

MultiGraph build_graph(const GraphSource& src, int* attempts) {
  if (src.file) {
    if (attempts) *attempts = 0;
    return strip_ghost(load_edge_list(*src.file));
  }
  PairingOptions opts;
  opts.girth_min = src.girth_min;
  opts.simple_only = src.simple_only;
  return sample_pairing_model(src.n, src.d, src.seed, opts, attempts);
}

ChainTrace run_chain(const ChainConfig& config) {
  int attempts = 0;
  const MultiGraph g = build_graph(config.graph, &attempts);
  ChainTrace t = run_chain(config, g);
  t.graph_attempts = attempts;
  return t;
}

namespace {

bool starts_ordered(const ChainConfig& c, int replica) {
  if (c.init == "ordered") return true;
  if (c.init == "disordered") return false;
  return replica % 2 == 0;
}

std::vector<TraceRecord> run_replica(const ChainConfig& c, const MultiGraph& g, const MultiGraph& g_star,
                                     const WindowTargets& targets, int replica) {
  std::vector<TraceRecord> out;
  const CounterRng base = CounterRng(c.seed).sub(static_cast<std::uint64_t>(replica));
  const bool ordered = starts_ordered(c, replica);
  if (c.mode == ChainMode::PottsSw) {
    const ModelParams p = make_params(c.d, c.q, c.beta, c.B);
    const int q = p.q_int();
    SpinConfig sigma = ordered ? constant_spins(g.n, 1) : uniform_spins(g.n, q, base.sub(kInitTag));
    BondConfig eta;
    for (long s = 0; s < c.sweeps; ++s) {
      sigma = sw_sweep(p, g_star, sigma, base.sub(static_cast<std::uint64_t>(s)), &eta);
      if (s < c.burn_in || (s - c.burn_in) % c.thin != 0) continue;
      TraceRecord r;
      r.replica = replica;
      r.sweep = s;
      r.obs = observe_spins(sigma, q, targets);
      observe_bonds(eta.clusters(g_star), targets, r.obs);
      int mono = 0;
      for (int e = 0; e < g.num_edges(); ++e) mono += sigma.colors[g.edges[e].first] == sigma.colors[g.edges[e].second];
      r.obs.energy = mono;
      out.push_back(std::move(r));
    }
  } else {
    const double w = std::expm1(2.0 * c.beta);
    BondConfig eta;
    eta.open.assign(g.edges.size(), ordered ? 1 : 0);
    std::vector<int> spins;
    for (long s = 0; s < c.sweeps; ++s) {
      eta = fk_ising_sweep(w, g, eta, base.sub(static_cast<std::uint64_t>(s)), &spins);
      if (s < c.burn_in || (s - c.burn_in) % c.thin != 0) continue;
      TraceRecord r;
      r.replica = replica;
      r.sweep = s;
      const ClusterInfo info = eta.clusters(g);
      observe_bonds(info, targets, r.obs);
      // Magnetisation of the colouring that produced these bonds.
      long m = 0;
      for (int x : spins) m += x;
      r.obs.magnetization = static_cast<double>(m) / g.n;
      r.obs.energy = eta.open_count();
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

ChainTrace run_chain(const ChainConfig& config, const MultiGraph& g_in) {
  ChainTrace t;
  t.config = config;
  const MultiGraph g = strip_ghost(g_in);
  t.graph_n = g.n;
  const auto deg = g.degrees();
  if (std::any_of(deg.begin(), deg.end(), [&](int x) { return x != config.d; })) {
    throw Error(ErrorCode::ConfigError, "graph is not d-regular for params.d");
  }
  if (config.mode == ChainMode::PottsSw) {
    t.targets = window_targets(make_params(config.d, config.q, config.beta, config.B), config.eps_window);
  } else {
    const auto m = ising_magnetization(config.d, config.beta);
    t.targets.psi_free = 0.0;
    t.targets.psi_wired = m.m;
    t.targets.eps = config.eps_window > 0.0 ? config.eps_window : 0.05;
  }
  const MultiGraph g_star = augment(g);
  std::vector<std::vector<TraceRecord>> per(config.replicas);
  const int workers = std::min(config.workers, config.replicas);
  if (workers <= 1) {
    for (int r = 0; r < config.replicas; ++r) per[r] = run_replica(config, g, g_star, t.targets, r);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int r = w; r < config.replicas; r += workers) per[r] = run_replica(config, g, g_star, t.targets, r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (auto& v : per) {
    for (auto& r : v) t.records.push_back(std::move(r));
  }
  return t;
}

std::string trace_record_json(const TraceRecord& r) {
  json j = {{"replica", r.replica},
            {"sweep", r.sweep},
            {"giant_fraction", r.obs.giant_fraction},
            {"max_other", r.obs.max_other},
            {"energy", r.obs.energy}};
  if (!r.obs.profile.empty()) {
    j["profile"] = r.obs.profile;
    j["in_v_free"] = r.obs.in_v_free;
    j["in_v_wired"] = r.obs.in_v_wired;
  } else {
    j["magnetization"] = r.obs.magnetization;
  }
  j["in_e_free"] = r.obs.in_e_free;
  j["in_e_wired"] = r.obs.in_e_wired;
  return j.dump();
}

}  // namespace fkp
