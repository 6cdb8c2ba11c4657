#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "fkpotts/bethe.hpp"
#include "fkpotts/errors.hpp"
#include "fkpotts/exact.hpp"
#include "fkpotts/sampler.hpp"

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

// Mean and batch-means standard error of a 0/1 series.
std::pair<double, double> batch_mean(const std::vector<double>& x, int batches = 50) {
  const std::size_t per = x.size() / batches;
  std::vector<double> m(batches, 0.0);
  for (int b = 0; b < batches; ++b)
    for (std::size_t i = 0; i < per; ++i) m[b] += x[b * per + i] / per;
  double mean = 0.0, var = 0.0;
  for (double v : m) mean += v / batches;
  for (double v : m) var += (v - mean) * (v - mean) / (batches - 1);
  return {mean, std::sqrt(var / batches)};
}

std::string chain_json(const std::string& extra) {
  return R"({"graph": {"pairing": {"n": 40, "d": 3, "seed": 2}}, "params": {"d": 3, "q": 3, "beta": 1.0, "B": 0.1})" +
         extra + "}";
}

}  // namespace

TEST_CASE("ES conditionals respect the coupling constraints") {
  const auto p = make_params(3, 3.0, 1.2, 0.5);
  const auto g = augment(sample_pairing_model(30, 3, 4));
  const CounterRng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const auto sigma = uniform_spins(30, 3, rng.sub(rep));
    const auto eta = es_bonds_given_spins(p, g, sigma, rng.sub(100 + rep));
    for (int e = 0; e < g.num_edges(); ++e) {
      if (!eta.open[e]) continue;
      const auto [u, v] = g.edges[e];
      const int cu = u == g.n ? 1 : sigma.colors[u];
      const int cv = v == g.n ? 1 : sigma.colors[v];
      CHECK(cu == cv);
    }
    const auto next = es_spins_given_bonds(3, g, eta, rng.sub(200 + rep));
    const auto info = eta.clusters(g);
    for (int e = 0; e < g.num_edges(); ++e) {
      if (!eta.open[e]) continue;
      const auto [u, v] = g.edges[e];
      const int cu = u == g.n ? 1 : next.colors[u];
      const int cv = v == g.n ? 1 : next.colors[v];
      CHECK(cu == cv);
    }
    for (int v = 0; v < g.n; ++v) {
      if (info.label[v] == info.label[g.n]) CHECK(next.colors[v] == 1);
    }
  }
  CHECK(code_of([&] { es_bonds_given_spins(p, strip_ghost(g), constant_spins(30), rng); }) == ErrorCode::InvalidState);
}

TEST_CASE("SW on K2 reproduces the exact agreement probability") {
  const double l2 = std::log(2.0);
  const auto p = make_params(3, 3.0, l2, l2);
  const auto g = augment(complete_graph(2));
  SpinConfig s = constant_spins(2, 2);
  std::vector<double> agree;
  const CounterRng rng(17);
  for (long t = 0; t < 100000; ++t) {
    s = sw_sweep(p, g, s, rng.sub(t));
    agree.push_back(s.colors[0] == s.colors[1]);
  }
  const auto [mean, se] = batch_mean(agree);
  CHECK(std::abs(mean - 6.0 / 11.0) <= 3.0 * se);
}

TEST_CASE("SW and heat-bath agree with enumeration on a triangle with a pendant") {
  const auto p = make_params(3, 3.0, 0.7, 0.3);
  const auto g = MultiGraph::from_edges(4, {{0, 1}, {1, 2}, {2, 0}, {2, 3}});
  const auto exact = exact_potts(g, p);
  const auto gs = augment(g);
  SpinConfig a = constant_spins(4, 1), b = constant_spins(4, 1);
  std::vector<double> sa, sb;
  const CounterRng rng(23);
  for (long t = 0; t < 60000; ++t) {
    a = sw_sweep(p, gs, a, rng.sub(0).sub(t));
    b = glauber_sweep(p, g, b, rng.sub(1).sub(t));
    sa.push_back(a.colors[0] == a.colors[3]);
    sb.push_back(b.colors[0] == b.colors[3]);
  }
  const double target = exact.pair_agree.at({0, 3});
  const auto [ma, ea] = batch_mean(sa);
  const auto [mb, eb] = batch_mean(sb);
  CHECK(std::abs(ma - target) <= 4.0 * ea);
  CHECK(std::abs(mb - target) <= 4.0 * eb);
}

TEST_CASE("FK-Ising sweep on K2 opens the edge with probability w/(2+w)") {
  const double w = std::expm1(2.0 * 0.6);
  const auto g = complete_graph(2);
  BondConfig eta;
  eta.open.assign(1, 0);
  std::vector<double> open;
  const CounterRng rng(29);
  for (long t = 0; t < 60000; ++t) {
    eta = fk_ising_sweep(w, g, eta, rng.sub(t));
    open.push_back(eta.open[0]);
  }
  const auto [m, se] = batch_mean(open);
  CHECK(std::abs(m - w / (2.0 + w)) <= 4.0 * se);
}

TEST_CASE("cluster observables") {
  const auto g = augment(path_graph(4));
  BondConfig eta;
  eta.open = {1, 0, 1, 0, 0, 0, 1};  // 0-1, 2-3, 3-ghost
  const auto info = eta.clusters(g);
  CHECK(info.giant_size == 2);
  CHECK(info.giant_fraction == doctest::Approx(0.5));
  CHECK(info.max_other == 2);
  const auto tail = cluster_tail(info, g, 3);
  CHECK(tail[0] == 1.0);
  CHECK(tail[1] == doctest::Approx(0.5));
  CHECK(tail[2] == doctest::Approx(0.5));
  CHECK(tail[3] == doctest::Approx(0.0));
  const auto sprinkled = bernoulli_sprinkle(eta, 0.0, CounterRng(1));
  CHECK(sprinkled.open == eta.open);
  const auto dense = bernoulli_sprinkle(eta, 0.999999, CounterRng(1));
  CHECK(dense.open_count() == 7);
}

TEST_CASE("window targets default to half the free/wired gap") {
  const double B = 0.5 * b_plus(3, 8.0);
  const auto p = make_params(3, 8.0, critical_line(3, 8.0, B).beta_crit, B);
  const auto t = window_targets(p, -1.0);
  const auto rc = rcm_bp_fixed_points(p);
  CHECK(t.psi_free == doctest::Approx(rc.psi_free));
  CHECK(t.psi_wired == doctest::Approx(rc.psi_wired));
  CHECK(t.eps > 0.0);
  CHECK(t.eps <= 0.5 * (t.psi_wired - t.psi_free) + 1e-12);
  CHECK(window_targets(p, 0.05).eps == 0.05);
}

TEST_CASE("chains are reproducible and independent of the worker count") {
  auto c = parse_chain_config(chain_json(R"(, "sweeps": 60, "replicas": 5, "seed": 9)"));
  const auto one = run_chain(c);
  c.workers = 3;
  const auto three = run_chain(c);
  REQUIRE(one.records.size() == three.records.size());
  CHECK(one.records.size() == 5u * 54u);
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    CHECK(trace_record_json(one.records[i]) == trace_record_json(three.records[i]));
  }
  c.seed = 10;
  const auto other = run_chain(c);
  bool differs = false;
  for (std::size_t i = 0; i < one.records.size(); ++i)
    differs = differs || trace_record_json(one.records[i]) != trace_record_json(other.records[i]);
  CHECK(differs);
}

TEST_CASE("chain config validation") {
  CHECK_NOTHROW(parse_chain_config(chain_json("")));
  const auto c = parse_chain_config(chain_json(R"(, "sweeps": 100)"));
  CHECK(c.burn_in == 10);
  CHECK(c.init == "mixed");
  CHECK(parse_chain_config(chain_config_json(c)).sweeps == 100);
  CHECK(code_of([] { parse_chain_config(chain_json(R"(, "colour": 1)")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_chain_config(chain_json(R"(, "sweeps": 0)")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_chain_config(chain_json(R"(, "mode": "fk_ising")")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_chain_config(chain_json(R"(, "init": "hot")")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_chain_config("{not json"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_chain_config(R"({"params": {"d": 3, "beta": 1}})"); }) == ErrorCode::ConfigError);
}

TEST_CASE("FK-Ising chains start from both phases under mixed init") {
  const auto c = parse_chain_config(
      R"({"graph": {"pairing": {"n": 200, "d": 3, "seed": 5}}, "params": {"d": 3, "q": 2, "beta": 1.0},
          "mode": "fk_ising", "sweeps": 300, "replicas": 4, "seed": 3})");
  const auto t = run_chain(c);
  CHECK(t.targets.psi_wired == doctest::Approx(ising_magnetization(3, 1.0).m));
  double mean_abs = 0.0;
  for (const auto& r : t.records) mean_abs += std::abs(r.obs.magnetization) / t.records.size();
  CHECK(std::abs(mean_abs - t.targets.psi_wired) < 0.05);
}
