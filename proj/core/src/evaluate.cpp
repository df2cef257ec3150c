#include <algorithm>
#include <stdexcept>

#include "pctl/error.hpp"
#include "pctl/solver.hpp"

namespace pctl {

EvaluationReport rolling_evaluate(const GenericProblem& problem, const Solution& offline,
                                  const EvaluationSettings& settings) {
  problem.validate();
  if (settings.cycles < 1) throw std::invalid_argument("evaluation needs at least one cycle");
  if (settings.paths < 1) throw std::invalid_argument("evaluation needs at least one path");
  if (offline.initial_ensemble.empty()) throw MissingInputError("offline solution has no initial ensemble");
  const int T = problem.calendar.master_period();
  if (settings.use_transient && (settings.transient_horizon < 1 || settings.transient_horizon > T)) {
    throw std::invalid_argument("transient horizon must lie in 1..T");
  }
  const int L = settings.cycles * T;
  const int nx = problem.state_dim();

  const Ensemble noise = simulate_ensemble(problem.noise, settings.paths, L, settings.burn_in_cycles, settings.seed);
  if (noise.diagnostics.diverged) throw DivergenceError("held-out noise diverges");

  EvaluationReport rep;
  rep.trajectories.resize(settings.paths);
  for (int m = 0; m < settings.paths; ++m) {
    const NoisePath& path = noise.paths[m];
    PathTrajectory& tr = rep.trajectories[m];
    tr.states.push_back(offline.initial_ensemble[m % offline.initial_ensemble.size()]);
    SolverSettings ts = settings.transient;
    ts.seed = derive_seed(settings.transient.seed, static_cast<std::uint64_t>(m));
    for (int k = 0; k < L; ++k) {
      const std::int64_t t = path.start_time + k;
      const Vector& x = tr.states.back();
      const Vector& w = path.values[k];
      Vector u;
      if (settings.use_transient) {
        const TransientRequest req = transient_request_from_path(path, k, x, t + settings.transient_horizon);
        u = solve_transient(problem, offline, req, ts).first_control;
      } else {
        u = eval_policy(offline.rule, t, x, offline.rule.noise_dim() > 0 ? w : Vector());
      }
      tr.losses.push_back(problem.stage_loss(t, x, w, u, nullptr));
      Vector next = step_dynamics(problem.dynamics, t + 1, x, u, w);
      if (!next.allFinite()) throw DivergenceError("closed-loop state diverged");
      tr.raw_controls.push_back(u);
      tr.controls.push_back(std::move(u));
      tr.states.push_back(std::move(next));
    }
  }

  const auto M = static_cast<double>(settings.paths);
  Vector previous = Vector::Zero(nx);
  for (const auto& tr : rep.trajectories) previous += tr.states.front();
  previous /= M;
  for (int c = 0; c < settings.cycles; ++c) {
    double welfare = 0.0;
    Vector end = Vector::Zero(nx);
    for (const auto& tr : rep.trajectories) {
      for (int k = c * T; k < (c + 1) * T; ++k) welfare -= tr.losses[k];
      end += tr.states[(c + 1) * T];
    }
    end /= M;
    rep.welfare_per_cycle.push_back(welfare / M);
    rep.storage_drift.push_back((end - previous).cwiseQuotient(problem.state_scale).norm());
    rep.end_of_cycle_mean.push_back(end);
    previous = end;
  }

  std::vector<std::vector<Vector>> series;
  for (const auto& tr : rep.trajectories) series.emplace_back(tr.states.begin(), tr.states.begin() + L);
  rep.state_stats = moments_by_phase(series, T, 0);

  for (int k = 1; k <= L; ++k) {
    std::vector<Vector> hs;
    hs.reserve(rep.trajectories.size());
    for (const auto& tr : rep.trajectories) hs.push_back(problem.constraint.apply(tr.states[k]));
    rep.violation_rate.push_back(violation_rate(hs, problem.constraint.lower, problem.constraint.upper));
  }
  rep.max_violation_rate = *std::max_element(rep.violation_rate.begin(), rep.violation_rate.end());
  return rep;
}

}  // namespace pctl
