#pragma once

// Scenario configuration, the preset library and the batch runner behind the
// `stackmf` tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stackmf/dynamics.hpp"
#include "stackmf/errors.hpp"
#include "stackmf/meanfield.hpp"
#include "stackmf/rates.hpp"

namespace stackmf::cli {

struct DelayConfig {
  std::string kind = "degenerate";  ///< degenerate, discrete, uniform, truncated_exponential
  double a = 0.0, b = 0.0;
  double rate = 1.0;
  std::vector<double> atoms, probs;
  friend bool operator==(const DelayConfig&, const DelayConfig&) = default;
};

struct ModelConfig {
  std::size_t n0 = 1, n1 = 1;
  /// Noise and control dimensions; only d = p = n is supported.
  std::size_t d0 = 1, d1 = 1, p0 = 1, p1 = 1;
  double b = 0.4, T = 1.0, h = 0.05;
  std::string family = "linear_quadratic";
  dynamics::CoefficientSet::Params params;
  double L = 5.0;
  std::string leader_initial = "constant";  ///< constant, ou_path, scaled_brownian
  double leader_value = 0.0, leader_sigma = 0.0, leader_theta = 1.0;
  std::string follower_initial = "dirac";  ///< dirac, gaussian, bimodal, uniform
  double follower_center = 0.0, follower_spread = 0.0;
  double q = 6.0;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct PolicyConfig {
  dynamics::LinearFeedback leader, follower;
  std::optional<dynamics::LinearFeedback> deviator;
  double holder_l = 0.0;
  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

/// Experiment kinds: state_gap, cost_gap, w2_gap, empirical_rate, eta,
/// epsilon_nash, holder.
struct ExperimentConfig {
  std::string kind = "state_gap";
  std::vector<std::size_t> Ns{8, 16, 32, 64};
  /// Single N for eta and epsilon_nash.
  std::size_t N = 16;
  std::size_t reps = 100;
  std::size_t K = 1024;
  double tol = 1e-3;
  std::size_t max_iter = 25;
  double damping = 1.0;
  std::size_t partition_level = 0;
  std::string regime = "general";
  bool assert_rate = false;
  double slope_tolerance = 0.25;
  bool upper_bound_only = false;
  /// eta: forward step (-1 = terminal); holder: delays, expected exponent.
  long step = -1;
  std::vector<double> deltas;
  double expected_exponent = 1.0;
  /// epsilon_nash: deviation libraries, L2 caps (infinite when absent) and
  /// the largest epsilon accepted when assertions are on.
  std::vector<dynamics::LinearFeedback> deviation_library, leader_library;
  double kappa = std::numeric_limits<double>::infinity();
  double gamma = std::numeric_limits<double>::infinity();
  double epsilon_tolerance = 0.0;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ModelConfig model;
  DelayConfig delay;
  PolicyConfig policy;
  ExperimentConfig experiment;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Every violation found in a configuration, one message per failing field.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// JSON text could not be parsed; carries the 1-based line and column.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : ValidationError(what), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_, column_;
};

/// All rule violations of `cfg`; empty when valid.
std::vector<std::string> validate(const ScenarioConfig& cfg);

std::string to_json(const ScenarioConfig& cfg);
/// Parses and validates; throws ParseError or ConfigError.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);
void save_config(const ScenarioConfig& cfg, const std::filesystem::path& path);

dynamics::ModelSpec build_model(const ScenarioConfig& cfg);
dynamics::DelayLaw build_delay_law(const ScenarioConfig& cfg);
dynamics::PolicySet build_policies(const ScenarioConfig& cfg);

struct Preset {
  std::string name;
  std::string description;
  ScenarioConfig config;
};

const std::vector<Preset>& presets();
/// Throws ValidationError for unknown names.
const Preset& find_preset(const std::string& name);

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_assertion = 2, exit_invalid = 3 };

struct RunOptions {
  std::size_t threads = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  bool dry_run = false;
};

struct RunResult {
  int exit_code = exit_ok;
  std::string verdict;     ///< pass, fail, unchecked, undefined, invalid, dry-run
  std::string reason;      ///< machine-readable reason for invalid runs
  std::string csv;         ///< contents written to results.csv
  std::string report;      ///< contents written to report.json
  std::filesystem::path output_dir;
};

/// Runs the configured experiment and writes results.csv, report.json and
/// manifest.json into the output directory. A dry run writes nothing and
/// prints the plan to `log`.
RunResult run_experiment(const ScenarioConfig& cfg, const RunOptions& options, std::ostream& log);

/// FNV-1a 64 of the canonical JSON form.
std::uint64_t config_hash(const ScenarioConfig& cfg);

}  // namespace stackmf::cli
