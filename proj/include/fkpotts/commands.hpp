#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace fkp::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kVerifyFailure = 3, kSolverFailure = 4 };

struct RunOptions {
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;  // overrides the config seed
  int workers = 1;                    // never recorded; outputs do not depend on it
  std::string level = "fast";
};

// First line of every CSV / JSONL output; JSON outputs carry the same object under
// the "provenance" key.
inline constexpr const char* kProvenancePrefix = "# fkpotts-provenance ";

json provenance(const std::string& command, const json& config);
std::string provenance_line(const std::string& command, const json& config);
// Reads the provenance object from the head of an emitted file; ConfigError if absent.
json read_provenance(const std::filesystem::path& file);

json load_config(const std::filesystem::path& path);

// Each normalise_* validates a config against its schema version and materialises
// every default; ConfigError on failure.
json normalise_phase_diagram(const json& cfg);
json normalise_coexist(const json& cfg);
json normalise_tune(const json& cfg);
json normalise_verify(const json& cfg);

// Pure producers of file contents, used by the subcommands and tests.
struct Artifact {
  std::string name;
  std::string content;
};
std::vector<Artifact> phase_diagram_artifacts(const json& cfg, int workers);
std::vector<Artifact> coexist_artifacts(const json& cfg, int workers);
// The tune report is produced even on PlanFailure; `failed` is then set.
std::vector<Artifact> tune_artifacts(const json& cfg, bool* failed = nullptr);

struct CheckResult {
  std::string id;
  std::string anchor;
  bool passed = false;
  json detail;
};
std::vector<CheckResult> run_checks(const std::string& level, std::uint64_t seed, int workers);
std::vector<Artifact> verify_artifacts(const json& cfg, int workers, bool* all_passed = nullptr);

// Subcommand entry points; map library errors onto exit codes and write to opts.out.
int cmd_phase_diagram(const json& cfg, const RunOptions& opts, std::ostream& log);
int cmd_coexist(const json& cfg, const RunOptions& opts, std::ostream& log);
int cmd_tune(const json& cfg, const RunOptions& opts, std::ostream& log);
int cmd_verify(const RunOptions& opts, std::ostream& log);
// Re-runs the command recorded in the file's header and compares bytes.
int cmd_replay(const std::filesystem::path& file, const RunOptions& opts, std::ostream& log);

// Regenerates the artifacts of a provenance object.
std::vector<Artifact> regenerate(const json& prov, int workers);

}  // namespace fkp::cli
