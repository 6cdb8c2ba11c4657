#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fkpotts/asymptotics.hpp"
#include "fkpotts/bethe.hpp"
#include "fkpotts/commands.hpp"

using namespace fkp;
using namespace fkp::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fkpotts_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

json small_phase_diagram() {
  return json::parse(R"({"schema": "fkpotts.phase_diagram/1", "d": 3, "q": 3,
      "beta": {"min": 0.5, "max": 2.0, "count": 4}, "B": [0.0, 0.003, 0.05], "critical_points": 5})");
}

json tune_cfg(double alpha) {
  return {{"schema", "fkpotts.tune/1"}, {"d", 3}, {"q", 3}, {"B", 0.5 * b_plus(3, 3.0)}, {"alpha", alpha},
          {"n_slack", 100}};
}

}  // namespace

TEST_CASE("normalisation is idempotent and fills defaults") {
  const auto pd = normalise_phase_diagram(small_phase_diagram());
  CHECK(pd == normalise_phase_diagram(pd));
  const auto t = normalise_tune(tune_cfg(0.4));
  CHECK(t["K_cap"] == 1000);
  CHECK(t == normalise_tune(t));
  const auto co = normalise_coexist(json::parse(R"({"schema": "fkpotts.coexist/1",
      "chain": {"graph": {"pairing": {"n": 30, "d": 3, "seed": 1}}, "params": {"d": 3, "q": 3, "B": 0.003},
                "sweeps": 20, "replicas": 2}})"));
  CHECK(co["chain"]["params"].contains("beta"));
  CHECK(!co["chain"].contains("workers"));
  CHECK(co == normalise_coexist(co));
  const auto v = normalise_verify({{"schema", "fkpotts.verify/1"}});
  CHECK(v["level"] == "fast");
  CHECK(v == normalise_verify(v));
}

TEST_CASE("config errors exit with code 2") {
  std::ostringstream log;
  RunOptions opts;
  opts.out = scratch("config_errors");
  auto bad_schema = small_phase_diagram();
  bad_schema["schema"] = "fkpotts.phase_diagram/9";
  CHECK(cmd_phase_diagram(bad_schema, opts, log) == kConfigError);
  auto unknown = small_phase_diagram();
  unknown["colour"] = 1;
  CHECK(cmd_phase_diagram(unknown, opts, log) == kConfigError);
  auto neg = small_phase_diagram();
  neg["beta"] = json::array({-1.0});
  CHECK(cmd_phase_diagram(neg, opts, log) == kConfigError);
  CHECK(cmd_tune(tune_cfg(1.5), opts, log) == kConfigError);
  const json off_line = json::parse(R"({"schema": "fkpotts.coexist/1",
      "chain": {"graph": {"pairing": {"n": 30, "d": 3, "seed": 1}}, "params": {"d": 3, "q": 3, "B": 0.5}}})");
  CHECK(cmd_coexist(off_line, opts, log) == kConfigError);
  CHECK(cmd_replay(opts.out / "missing.csv", opts, log) == kConfigError);
}

TEST_CASE("phase diagram output shape") {
  const auto arts = phase_diagram_artifacts(small_phase_diagram(), 2);
  REQUIRE(arts.size() == 2u);
  const auto grid = lines(arts[0].content);
  CHECK(grid[0].rfind(kProvenancePrefix, 0) == 0);
  CHECK(grid[1] == "beta,B,regime,psi_free,psi_wired,nu_free_1,nu_wired_1,beta_crit,error");
  CHECK(grid.size() == 2u + 12u);
  for (std::size_t i = 2; i < grid.size(); ++i) {
    if (grid[i].find(",0.050000000000000003,") != std::string::npos)
      CHECK(grid[i].find(",uniqueness,") != std::string::npos);
  }
  const auto curve = lines(arts[1].content);
  CHECK(curve.size() == 2u + 5u + 1u);
  CHECK(curve.back().rfind("b_plus,", 0) == 0);
  CHECK(phase_diagram_artifacts(small_phase_diagram(), 1)[0].content == arts[0].content);
}

TEST_CASE("provenance round trip and byte-identical replay") {
  std::ostringstream log;
  RunOptions opts;
  opts.out = scratch("replay");
  opts.workers = 2;
  REQUIRE(cmd_phase_diagram(small_phase_diagram(), opts, log) == kOk);
  const auto file = opts.out / "phase_diagram.csv";
  const json prov = read_provenance(file);
  CHECK(prov["command"] == "phase-diagram");
  CHECK(prov["config"] == normalise_phase_diagram(small_phase_diagram()));
  CHECK(!prov.contains("workers"));
  RunOptions one = opts;
  one.workers = 1;
  CHECK(cmd_replay(file, one, log) == kOk);
  CHECK(cmd_replay(opts.out / "critical_line.csv", opts, log) == kOk);

  std::string text = slurp(file);
  text.back() = ' ';
  std::ofstream(file, std::ios::binary) << text << "\n";
  CHECK(cmd_replay(file, opts, log) == kVerifyFailure);
}

TEST_CASE("coexist writes a replayable trace and summary") {
  std::ostringstream log;
  RunOptions opts;
  opts.out = scratch("coexist");
  opts.seed = 5;
  const json cfg = json::parse(R"({"schema": "fkpotts.coexist/1", "histogram_bins": 10,
      "chain": {"graph": {"pairing": {"n": 60, "d": 3, "seed": 1}}, "params": {"d": 3, "q": 3, "B": 0.003},
                "sweeps": 30, "replicas": 2, "seed": 1}})");
  REQUIRE(cmd_coexist(cfg, opts, log) == kOk);
  const auto summary = nlohmann::ordered_json::parse(slurp(opts.out / "summary.json"));
  CHECK(summary.begin().key() == "provenance");
  CHECK(summary["provenance"]["config"]["chain"]["seed"] == 5);
  CHECK(summary["giant_histogram"]["counts"].size() == 10u);
  CHECK(cmd_replay(opts.out / "trace.jsonl", opts, log) == kOk);
  CHECK(cmd_replay(opts.out / "summary.json", opts, log) == kOk);
}

TEST_CASE("tune reports plans and plan failures") {
  std::ostringstream log;
  RunOptions opts;
  opts.out = scratch("tune");
  REQUIRE(cmd_tune(tune_cfg(0.3), opts, log) == kOk);
  const json plan = json::parse(slurp(opts.out / "plan.json"));
  CHECK(plan["status"] == "ok");
  CHECK(plan["bracket"]["holds"] == true);
  CHECK(cmd_replay(opts.out / "plan.json", opts, log) == kOk);

  const auto p = make_params(3, 3.0, critical_line(3, 3.0, 0.5 * b_plus(3, 3.0)).beta_crit, 0.5 * b_plus(3, 3.0));
  const auto s = ssc_products(p);
  const double g = *s.gamma * std::exp(-s.log_cycle_mean_diff) / (1.0 + 1.0 / 200.0);
  const json triv = json::parse(tune_artifacts(tune_cfg(g / (1.0 + g)))[0].content);
  CHECK(triv["plan"]["p"] == 0);
  CHECK(triv["plan"]["x"] == 0);

  auto hard = tune_cfg(0.5);
  hard["n_slack"] = 1000000;
  hard["K_cap"] = 10;
  CHECK(cmd_tune(hard, opts, log) == kSolverFailure);
  const json fail = json::parse(slurp(opts.out / "plan.json"));
  CHECK(fail["status"] == "plan_failure");
  CHECK(fail["diagnostics"]["eigen_free"].size() == 3u);
}

TEST_CASE("verify fast passes") {
  std::ostringstream log;
  RunOptions opts;
  opts.out = scratch("verify");
  CHECK(cmd_verify(opts, log) == kOk);
  const json rep = json::parse(slurp(opts.out / "report.json"));
  CHECK(rep["passed"] == true);
  CHECK(rep["checks"].size() >= 13u);
  CHECK(cmd_replay(opts.out / "report.json", opts, log) == kOk);
}
