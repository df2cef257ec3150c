#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pctl/basis.hpp"
#include "pctl/model.hpp"
#include "pctl/pamar.hpp"

namespace pctl {

struct SolverSettings {
  /// Length of the first step in preconditioned coordinates.
  double initial_step = 0.1;
  /// Multiplier applied to the step after a rejected trial point.
  double step_shrink = 0.5;
  double min_step = 1e-14;
  /// Per Picard round.
  int max_iterations = 3000;
  /// rho_c, weight of the chance-constraint quantile excess. Exact only when
  /// it exceeds the marginal loss of one scaled unit of constraint slack.
  double chance_weight = 1000.0;
  /// rho_w, weight of the wrap-around (or terminal) moment gap
  double wrap_weight = 10000.0;
  int picard_rounds = 12;
  /// Relative objective change over `patience` accepted steps.
  double objective_tolerance = 1e-7;
  int patience = 20;
  /// epsilon_w, on the unweighted moment gap in scaled units
  double wrap_tolerance = 1e-2;
  /// Largest per-phase state-mean change between Picard rounds (scaled).
  double picard_tolerance = 1e-2;
  /// Sample-average scenario count M.
  int scenarios = 200;
  int burn_in_cycles = 3;
  /// false: one round from the anchor with no wrap-around term
  /// (a finite-horizon policy).
  bool periodic = true;
  /// Let the rule see the current noise realization.
  bool noise_feedback = true;
  std::optional<Vector> anchor;
  std::uint64_t seed = 1;

  void validate() const;
};

/// First two moments in scaled units (state / state_scale).
struct MomentTarget {
  Vector mean;
  Matrix covariance;
};

[[nodiscard]] MomentTarget scaled_moments(std::span<const Vector> ensemble, const Vector& scale);

/// ||mean - target.mean||^2 + ||cov - target.cov||_F^2 in scaled units.
/// When `grad` is non-null it receives d(gap)/d(ensemble[m]) in raw units.
[[nodiscard]] double moment_gap(std::span<const Vector> ensemble, const Vector& scale, const MomentTarget& target,
                                std::vector<Vector>* grad = nullptr);

/// A sample-average discretization: path m pairs scenario m with initial
/// state m. Stage k runs at absolute time start_time + k.
struct SaaInstance {
  const GenericProblem* problem = nullptr;
  std::vector<NoisePath> scenarios;
  std::vector<Vector> initial_ensemble;
  /// Empty means uniform.
  std::vector<double> weights;
  std::int64_t start_time = 0;
  int horizon = 0;
  std::optional<MomentTarget> terminal_target;
  double terminal_weight = 0.0;
  double chance_weight = 0.0;

  void validate() const;
};

struct PathTrajectory {
  /// horizon + 1 states
  std::vector<Vector> states;
  std::vector<Vector> raw_controls;
  std::vector<Vector> controls;
  std::vector<double> losses;
};

struct Rollout {
  std::vector<PathTrajectory> paths;

  [[nodiscard]] std::vector<Vector> states_at(int k) const;
};

/// u_k = eval_policy(rule, t, x_k, w_k); x_{k+1} = step_dynamics(t + 1, x_k, u_k, w_k).
/// Throws DivergenceError on a non-finite state.
[[nodiscard]] Rollout rollout(const SaaInstance& instance, const DecisionRule& rule);

struct ObjectiveValue {
  double total = 0.0;
  double risk = 0.0;
  double chance_penalty = 0.0;
  double terminal_penalty = 0.0;
  /// Unweighted moment gap against the terminal target (0 without a target).
  double wrap_gap = 0.0;
  std::vector<double> stage_risk;
  /// Empirical violation frequency of x_k, k = 1..horizon.
  std::vector<double> violation_rate;
};

/// sum_k R(loss_k) + rho_c sum_k q_{1-alpha}(excess_k) + rho_w gap.
[[nodiscard]] ObjectiveValue saa_objective(const SaaInstance& instance, const DecisionRule& rule);

/// Same value plus a subgradient with respect to rule.parameters().
/// Saturated control coordinates pass no gradient, except that with
/// `inward_at_bounds` a gradient pointing back into the box is passed so that
/// fully saturated rules can recover.
[[nodiscard]] ObjectiveValue saa_objective_with_gradient(const SaaInstance& instance, const DecisionRule& rule,
                                                         Vector& gradient, bool inward_at_bounds = true);

struct OptimizeResult {
  DecisionRule rule;
  /// Accepted objective values; non-increasing.
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

/// Step-halving projected subgradient descent over the rule coefficients,
/// with Barzilai-Borwein trial steps. Only non-increasing steps are accepted.
[[nodiscard]] OptimizeResult optimize_rule(const SaaInstance& instance, DecisionRule rule,
                                           const SolverSettings& settings);

struct Diagnostics {
  std::vector<double> objective_trace;
  /// Objective at the end of each Picard round.
  std::vector<double> round_objectives;
  double objective = 0.0;
  double risk = 0.0;
  double chance_penalty = 0.0;
  double wrap_penalty = 0.0;
  double wrap_gap = 0.0;
  /// Largest scaled change of a per-phase state mean in the last round.
  double mean_shift = 0.0;
  std::vector<double> violation_rate;
  int iterations = 0;
  int picard_rounds = 0;
  bool converged = false;
  std::string status;
  double noise_variance_growth = 1.0;
};

struct Solution {
  DecisionRule rule;
  std::vector<Vector> initial_ensemble;
  std::vector<Vector> terminal_ensemble;
  /// Per-phase state moments over x_0..x_{T-1}.
  EnsembleStats state_stats;
  Diagnostics diagnostics;
  /// Scenarios of the final round (kept in memory only).
  std::vector<NoisePath> scenarios;
  std::uint64_t seed = 0;
};

/// Offline instance for the given initial ensemble; the terminal target is
/// the ensemble's own moments when settings.periodic is set.
[[nodiscard]] SaaInstance make_offline_instance(const GenericProblem& problem, std::vector<NoisePath> scenarios,
                                                std::vector<Vector> initial_ensemble, const SolverSettings& settings);

/// Scenarios for the offline problem: one master cycle per path after burn-in.
[[nodiscard]] std::vector<NoisePath> offline_scenarios(const GenericProblem& problem, const SolverSettings& settings,
                                                       EnsembleDiagnostics* diagnostics = nullptr);

/// Full-period problem. Picard rounds alternate between optimizing the
/// periodic rule for a fixed initial ensemble and replacing that ensemble by
/// the resulting terminal ensemble.
[[nodiscard]] Solution solve_offline(const GenericProblem& problem, const PeriodicBasis& basis,
                                     const SolverSettings& settings);

/// Re-evaluates a solution's rule on its stored scenarios and initial ensemble.
[[nodiscard]] ObjectiveValue reevaluate(const GenericProblem& problem, const Solution& solution,
                                        const SolverSettings& settings);

/// Real-time information at time `time`.
struct TransientRequest {
  std::int64_t time = 0;
  /// Horizon end; the window covers stages time, ..., end_time - 1.
  std::int64_t end_time = 1;
  Vector state;
  /// Realized noise at `time`.
  Vector current_noise;
  /// Process history as of time + 1 (includes the current value).
  PamarHistory history;
};

/// Request built from a realized path at step k.
[[nodiscard]] TransientRequest transient_request_from_path(const NoisePath& path, int k, Vector state,
                                                           std::int64_t end_time);

struct TransientSolution {
  DecisionRule rule;
  Vector first_control;
  ObjectiveValue objective;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
};

/// Short-window problem started from the observed state, with the terminal
/// moments pulled toward the offline ensemble at phase end_time mod T
/// (weight settings.wrap_weight). Free per-step affine rules, warm-started
/// from the offline rule.
[[nodiscard]] TransientSolution solve_transient(const GenericProblem& problem, const Solution& offline,
                                                const TransientRequest& request, const SolverSettings& settings);

struct TreeSettings {
  int branching = 3;
  int depth = 3;
  /// Grid points per control component.
  int control_grid = 11;
  std::uint64_t seed = 1;
  int burn_in_cycles = 3;
  std::int64_t start_time = 0;
  std::optional<Vector> initial_state;
  std::int64_t max_nodes = 1'000'000;
  double max_evaluations = 5e8;
};

struct TreeResult {
  /// Expected sum of stage losses under the best adaptive grid policy.
  double objective = 0.0;
  /// Best first-stage control per first-level node (one per branch).
  std::vector<Vector> first_stage_controls;
  /// Leaf-to-root scenarios in tree order, equally weighted.
  std::vector<NoisePath> scenarios;
  /// Optimal control sequence along each scenario.
  std::vector<std::vector<Vector>> scenario_controls;
  std::int64_t nodes = 0;
};

/// Scenario tree by recursive sampling and exhaustive backward enumeration
/// over a control grid. State bounds are enforced as hard constraints.
[[nodiscard]] TreeResult solve_tree_baseline(const GenericProblem& problem, const TreeSettings& settings);

struct EvaluationSettings {
  int cycles = 3;
  int paths = 200;
  int burn_in_cycles = 3;
  bool use_transient = false;
  /// Transient window length, 1..T.
  int transient_horizon = 1;
  SolverSettings transient;
  std::uint64_t seed = 2;
};

struct EvaluationReport {
  /// Mean over paths of sum of (-loss) per cycle.
  std::vector<double> welfare_per_cycle;
  /// Mean state at the end of each cycle.
  std::vector<Vector> end_of_cycle_mean;
  /// Scaled norm of the change of end_of_cycle_mean between consecutive
  /// cycles (first entry compares against the initial mean).
  std::vector<double> storage_drift;
  EnsembleStats state_stats;
  /// Per step k = 1..cycles*T.
  std::vector<double> violation_rate;
  double max_violation_rate = 0.0;
  std::vector<PathTrajectory> trajectories;
};

/// Closed loop on fresh noise: offline rule directly, or the transient
/// problem re-solved at every step with its first control applied.
[[nodiscard]] EvaluationReport rolling_evaluate(const GenericProblem& problem, const Solution& offline,
                                                const EvaluationSettings& settings);

}  // namespace pctl
