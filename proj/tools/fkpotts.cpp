#include <iostream>

#include "CLI11.hpp"
#include "fkpotts/commands.hpp"
#include "fkpotts/version.hpp"

int main(int argc, char** argv) {
  namespace cli = fkp::cli;
  CLI::App app{"Potts / random-cluster experiments on random regular graphs"};
  app.set_version_flag("--version", fkp::kVersion);
  app.require_subcommand(1);

  cli::RunOptions opts;
  std::string config_path;
  std::string replay_file;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub, bool needs_config) {
    sub->add_option("--out", opts.out, "output directory")->default_val(".");
    sub->add_option("--workers", opts.workers, "worker threads")->default_val(1)->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override the config seed");
    if (needs_config) sub->add_option("--config", config_path, "JSON config file")->required();
  };
  auto* phase = app.add_subcommand("phase-diagram", "regime labels over a (beta, B) grid (CSV)");
  common(phase, true);
  auto* coexist = app.add_subcommand("coexist", "replicated Swendsen-Wang chains at a critical point (JSONL + summary)");
  common(coexist, true);
  auto* tune = app.add_subcommand("tune", "free/wired mixture tuning plan (JSON)");
  common(tune, true);
  auto* verify = app.add_subcommand("verify", "run the invariant suites (JSON report)");
  common(verify, false);
  verify->add_option("--level", opts.level, "fast or full")->default_val("fast")->check(CLI::IsMember({"fast", "full"}));
  auto* replay = app.add_subcommand("replay", "re-run an emitted file from its provenance header and compare bytes");
  replay->add_option("file", replay_file, "emitted CSV, JSONL or JSON file")->required();
  replay->add_option("--workers", opts.workers, "worker threads")->default_val(1)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfigError;
  }
  for (auto* sub : {phase, coexist, tune, verify}) {
    if (sub->parsed() && sub->count("--seed") > 0) opts.seed = seed;
  }

  auto config = [&]() -> cli::json { return cli::load_config(config_path); };
  try {
    if (phase->parsed()) return cli::cmd_phase_diagram(config(), opts, std::cerr);
    if (coexist->parsed()) return cli::cmd_coexist(config(), opts, std::cerr);
    if (tune->parsed()) return cli::cmd_tune(config(), opts, std::cerr);
    if (verify->parsed()) return cli::cmd_verify(opts, std::cerr);
    if (replay->parsed()) return cli::cmd_replay(replay_file, opts, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kConfigError;
  }
  return cli::kConfigError;
}
