#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pctl/model.hpp"
#include "pctl/solver.hpp"

namespace pctl {

struct TransientConfig {
  /// Window length; 0 means one master period.
  int horizon = 0;
  SolverSettings settings;
};

struct EvaluateConfig {
  int cycles = 3;
  int paths = 200;
  int burn_in_cycles = 3;
  bool use_transient = false;
};

struct SimulateConfig {
  int paths = 1000;
  /// Steps per path; 0 means one master period.
  int length = 0;
  int burn_in_cycles = 3;
};

using ProblemSpec = std::variant<HydropowerSpec, VppSpec, GenericSpec>;

/**
 * A validated run description. All randomness derives from `seed`.
 *
 * The noise process lives inside the problem spec (the demand intercept for
 * hydropower, the market process for the VPP, the noise of a generic
 * problem); noise() and calendar() expose it.
 */
struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir;
  std::vector<int> harmonics;
  ProblemSpec problem;
  SolverSettings solver;
  TransientConfig transient;
  EvaluateConfig evaluate;
  TreeSettings baseline;
  SimulateConfig simulate;

  [[nodiscard]] const PamarModel& noise() const;
  [[nodiscard]] const SeasonCalendar& calendar() const { return noise().calendar; }
  [[nodiscard]] std::string problem_type() const;

  [[nodiscard]] GenericProblem build_problem() const;
  [[nodiscard]] PeriodicBasis basis() const;
  /// Solver settings with the run seed applied.
  [[nodiscard]] SolverSettings solver_settings() const;
  [[nodiscard]] SolverSettings transient_settings() const;
  [[nodiscard]] int transient_horizon() const;
  [[nodiscard]] EvaluationSettings evaluation_settings() const;
  [[nodiscard]] TreeSettings tree_settings() const;

  /// Equality of canonical serializations.
  bool operator==(const RunConfig& other) const;
};

/// Parses and validates a JSON document. Overrides have the form
/// "dotted.path=value" with a JSON value (bare words are taken as strings)
/// and are applied before validation.
///
/// Throws ConfigError: parse errors carry line and column, schema errors the
/// dotted field path, consistency errors an explanation.
[[nodiscard]] RunConfig parse_config(const std::string& text, std::span<const std::string> overrides = {});

/// Reads `file` and parses it. Throws MissingInputError if it cannot be read.
[[nodiscard]] RunConfig load_config(const std::filesystem::path& file, std::span<const std::string> overrides = {});

/// Canonical JSON: every field explicit, per-phase tables expanded, keys
/// sorted. parse_config(serialize_config(c)) == c.
[[nodiscard]] std::string serialize_config(const RunConfig& config);

/// 64-bit FNV-1a of a string, rendered as 16 hex digits.
[[nodiscard]] std::string fnv1a_hex(const std::string& text);

}  // namespace pctl
