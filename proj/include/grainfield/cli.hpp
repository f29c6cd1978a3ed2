#ifndef GRAINFIELD_CLI_HPP_
#define GRAINFIELD_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grainfield/burgers.hpp"
#include "grainfield/experiments.hpp"

namespace grainfield {

inline constexpr const char* kGrainfieldVersion = "1.0.0";

struct CharlierCheckConfig {
  std::string name = "charlier-check";
  std::vector<double> mu_grid{0.5, 3.0, 10.0};
  int max_order = 8;
  // Mehler expansion against the direct bivariate pmf on x, y <= mehler_max.
  double mu1 = 3.0, mu2 = 3.0, mu3 = 1.5;
  int mehler_max = 30;
  int mehler_order = 60;
  // Closed-form coefficient checks for e^{ax} and min(x, 1).
  double exp_a = 0.5;
  double closed_form_mu = 3.0;
  int closed_form_order = 6;
  double limit_intensity = 1e6;
  std::uint64_t seed = 1;

  void validate() const;
};

// Charlier invariants with their deviations; `inject_fault` perturbs one
// projection coefficient (negative control).
Verdict charlier_check(const CharlierCheckConfig& config, bool inject_fault = false);

enum class RunKind { Charlier, Experiment, Boolean, Burgers };

std::string to_string(RunKind kind);
RunKind parse_run_kind(const std::string& text);

struct RunConfig {
  RunKind kind = RunKind::Experiment;
  CharlierCheckConfig charlier;
  ExperimentConfig experiment;
  BurgersConfig burgers;
  // Keys filled from defaults rather than the config text.
  std::vector<std::string> defaulted;

  const std::string& name() const;
  std::uint64_t seed() const;
  void set_seed(std::uint64_t seed);
  void set_replications(int replications);
  void validate() const;
};

// YAML mapping; see README for the schema. Throws ParseError with the line and
// key of the offending entry. Without a `kind` key `default_kind` applies.
RunConfig parse_config(const std::string& text, RunKind default_kind = RunKind::Experiment);
RunConfig load_config(const std::filesystem::path& path, RunKind default_kind = RunKind::Experiment);
// Canonical YAML with every key of the run kind; parse_config inverts it.
std::string serialize_config(const RunConfig& config);
// SHA-256 of the canonical serialization.
std::string config_hash(const RunConfig& config);

std::vector<std::string> preset_names();
std::string preset_text(const std::string& name);
RunConfig preset(const std::string& name);

// GRAINFIELD_OUT when set, else "out".
std::filesystem::path default_out_dir();

struct CommandOptions {
  std::string command;  // charlier-check, simulate, limit-test, boolean, burgers
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  std::optional<std::filesystem::path> out_dir;
  int threads = 1;
  std::filesystem::path cache_fields;
  bool inject_fault = false;
};

struct CommandResult {
  int exit_code = 0;
  std::filesystem::path run_dir;
  nlohmann::json manifest;
  nlohmann::json verdict;
};

// Runs one command into <out-dir>/<config name>/: config.yaml, the CSV and
// JSON outputs, and manifest.json with SHA-256 hashes of every output.
// Exit code 0 iff every gating check passes.
CommandResult run_command(const CommandOptions& options);

// Verifies every manifest under `dir` (the directory itself or its immediate
// subdirectories) and writes summary.json plus plot-data CSVs. Throws
// IntegrityError on a hash mismatch and ConfigError for a run directory
// without a manifest.
nlohmann::json cmd_report(const std::filesystem::path& dir);

}  // namespace grainfield

#endif  // GRAINFIELD_CLI_HPP_
