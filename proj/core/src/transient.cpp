#include <stdexcept>

#include "pctl/error.hpp"
#include "pctl/solver.hpp"

namespace pctl {

TransientRequest transient_request_from_path(const NoisePath& path, int k, Vector state, std::int64_t end_time) {
  if (k < 0 || k >= path.length()) throw std::out_of_range("step outside the noise path");
  TransientRequest req;
  req.time = path.start_time + k;
  req.end_time = end_time;
  req.state = std::move(state);
  req.current_noise = path.values[k];
  req.history = path.history_after(k + 1);
  return req;
}

TransientSolution solve_transient(const GenericProblem& problem, const Solution& offline,
                                  const TransientRequest& request, const SolverSettings& settings) {
  settings.validate();
  const int T = problem.calendar.master_period();
  const std::int64_t H64 = request.end_time - request.time;
  if (H64 < 1 || H64 > T) throw std::invalid_argument("transient window must cover 1..T steps");
  const int H = static_cast<int>(H64);
  if (offline.rule.num_atoms() == 0 || !std::holds_alternative<PeriodicBasis>(offline.rule.basis())) {
    throw MissingInputError("transient problem needs an offline periodic solution");
  }
  if (static_cast<int>(offline.state_stats.mean.size()) != T) {
    throw MissingInputError("offline solution lacks per-phase state statistics");
  }
  if (request.state.size() != problem.state_dim() || !request.state.allFinite()) {
    throw std::invalid_argument("observed state must be finite and match the state dimension");
  }
  if (request.current_noise.size() != problem.noise_dim()) throw std::invalid_argument("observed noise has wrong size");

  // Conditional scenarios: the current noise is known, the rest is drawn from
  // the process given the observed history.
  const std::uint64_t base = derive_seed(settings.seed, static_cast<std::uint64_t>(request.time));
  std::vector<NoisePath> scenarios(settings.scenarios);
  for (int m = 0; m < settings.scenarios; ++m) {
    NoisePath& s = scenarios[m];
    s.start_time = request.time;
    s.seed = derive_seed(base, static_cast<std::uint64_t>(m));
    s.values.push_back(request.current_noise);
    s.innovations.push_back(request.history.innovations.empty() ? Vector(Vector::Zero(problem.noise_dim()))
                                                                : request.history.innovations.front());
    if (H > 1) {
      NoisePath rest = simulate_path(problem.noise, H - 1, request.history, s.seed, request.time + 1);
      s.values.insert(s.values.end(), rest.values.begin(), rest.values.end());
      s.innovations.insert(s.innovations.end(), rest.innovations.begin(), rest.innovations.end());
    }
  }

  const int phase = problem.calendar.phase(request.end_time);
  const Vector& s = problem.state_scale;
  MomentTarget target{offline.state_stats.mean[phase].cwiseQuotient(s),
                      s.cwiseInverse().asDiagonal() * offline.state_stats.covariance[phase] *
                          s.cwiseInverse().asDiagonal()};

  SaaInstance inst;
  inst.problem = &problem;
  inst.scenarios = std::move(scenarios);
  inst.initial_ensemble.assign(settings.scenarios, request.state);
  inst.start_time = request.time;
  inst.horizon = H;
  inst.terminal_target = std::move(target);
  inst.terminal_weight = settings.wrap_weight;
  inst.chance_weight = settings.chance_weight;

  const DecisionRule& off = offline.rule;
  DecisionRule rule(WindowBasis(request.time, H), off.state_dim(), off.noise_dim(), off.control_dim(), off.box());
  for (int k = 0; k < H; ++k) {
    auto [intercept, gain] = off.effective(request.time + k);
    rule.intercept(k) = intercept;
    rule.gain(k) = gain;
  }

  OptimizeResult res = optimize_rule(inst, std::move(rule), settings);
  TransientSolution out{std::move(res.rule), {}, {}, std::move(res.trace), res.iterations, res.converged};
  out.objective = saa_objective(inst, out.rule);
  const Vector w = out.rule.noise_dim() > 0 ? request.current_noise : Vector();
  out.first_control = eval_policy(out.rule, request.time, request.state, w);
  return out;
}

}  // namespace pctl
