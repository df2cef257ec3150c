#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pctl {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNonconvergence = 3,
  kExitDivergence = 4,
  kExitMissingInput = 5,
};

struct CliOptions {
  /// solve-offline, solve-transient, evaluate, baseline or simulate-noise
  std::string command;
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  /// Overrides output_dir from the config.
  std::optional<std::filesystem::path> out;
  std::vector<std::string> overrides;
  std::optional<std::filesystem::path> solution;
  /// Observed state for solve-transient.
  std::optional<std::vector<double>> state;
  std::int64_t time = 0;
  /// Observed noise history for solve-transient: CSV in the simulate-noise
  /// format; rows of path 0 with t < time are the history, t == time is the
  /// current value.
  std::optional<std::filesystem::path> history;
};

/// Runs one command, writes artifacts plus manifest.json into the output
/// directory and returns an ExitCode. Progress and errors go to `log`.
int run(const CliOptions& options, std::ostream& log);

}  // namespace pctl
