#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "pctl/solver.hpp"

namespace pctl {

inline constexpr const char* kSolutionFormat = "pctl-solution";
inline constexpr int kSolutionVersion = 1;

/// Self-describing solution document: calendar, basis, coefficients, control
/// box, initial and terminal ensembles, per-phase state moments, diagnostics.
/// Deterministic text for a given solution.
[[nodiscard]] std::string solution_to_json(const Solution& solution, const std::string& problem_name);

/// Inverse of solution_to_json (scenarios are not stored). Throws
/// ConfigError on malformed or foreign documents.
[[nodiscard]] Solution solution_from_json(const std::string& text);

void write_solution(const std::filesystem::path& file, const Solution& solution, const std::string& problem_name);
/// Throws MissingInputError when the file does not exist.
[[nodiscard]] Solution read_solution(const std::filesystem::path& file);

/// Long format: path_id,t,component,value
void write_noise_csv(std::ostream& out, std::span<const NoisePath> paths);

/// path_id,t,x0..,u0..,loss; the final state of each path is written with
/// empty control and loss columns.
void write_trajectories_csv(std::ostream& out, std::span<const PathTrajectory> paths, std::int64_t start_time);

[[nodiscard]] std::string transient_to_json(const TransientSolution& solution, const TransientRequest& request);
[[nodiscard]] std::string tree_to_json(const TreeResult& result);
[[nodiscard]] std::string evaluation_to_json(const EvaluationReport& report);

/// Writes `text` to `file`, creating parent directories.
void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace pctl
