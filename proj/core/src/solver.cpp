#include "pctl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pctl/error.hpp"

namespace pctl {

namespace {

constexpr double kTiny = 1e-300;

// Affine change of coordinates phi <-> theta for the rule coefficients. Each
// atom's gain is expressed per unit of normalized input (z - center) / scale,
// which makes the step length comparable across coefficients.
class Preconditioner {
 public:
  Preconditioner(const SaaInstance& inst, const DecisionRule& rule)
      : nu_(rule.control_dim()), nz_(rule.input_dim()), atoms_(rule.num_atoms()) {
    const GenericProblem& p = *inst.problem;
    const int nx = rule.state_dim();
    center_ = Vector::Zero(nz_);
    scale_ = Vector::Ones(nz_);
    for (const auto& x : inst.initial_ensemble) center_.head(nx) += x;
    center_.head(nx) /= static_cast<double>(inst.initial_ensemble.size());
    scale_.head(nx) = p.state_scale;
    const int nw = rule.noise_dim();
    if (nw > 0) {
      Vector sum = Vector::Zero(nw);
      Vector sq = Vector::Zero(nw);
      double n = 0.0;
      for (const auto& s : inst.scenarios) {
        for (int k = 0; k < inst.horizon; ++k) {
          sum += s.values[k];
          sq += s.values[k].cwiseAbs2();
          n += 1.0;
        }
      }
      const Vector mean = sum / n;
      center_.tail(nw) = mean;
      for (int j = 0; j < nw; ++j) {
        const double var = std::max(0.0, sq(j) / n - mean(j) * mean(j));
        const double sd = std::sqrt(var);
        scale_(nx + j) = sd > 1e-9 * (1.0 + std::abs(mean(j))) ? sd : 1.0;
      }
    }
  }

  [[nodiscard]] Vector to_theta(const Vector& phi) const {
    Vector theta = phi;
    for (int m = 0; m < atoms_; ++m) {
      auto k = theta.segment(offset(m), nu_);
      Eigen::Map<Matrix> G(theta.data() + offset(m) + nu_, nu_, nz_);
      G = G * scale_.cwiseInverse().asDiagonal();
      k -= G * center_;
    }
    return theta;
  }

  [[nodiscard]] Vector to_phi(const Vector& theta) const {
    Vector phi = theta;
    for (int m = 0; m < atoms_; ++m) {
      auto k = phi.segment(offset(m), nu_);
      Eigen::Map<Matrix> G(phi.data() + offset(m) + nu_, nu_, nz_);
      k += G * center_;
      G = G * scale_.asDiagonal();
    }
    return phi;
  }

  [[nodiscard]] Vector gradient_to_phi(const Vector& g_theta) const {
    Vector g = g_theta;
    for (int m = 0; m < atoms_; ++m) {
      const Vector gk = g.segment(offset(m), nu_);
      Eigen::Map<Matrix> G(g.data() + offset(m) + nu_, nu_, nz_);
      G = (G - gk * center_.transpose()) * scale_.cwiseInverse().asDiagonal();
    }
    return g;
  }

 private:
  [[nodiscard]] int offset(int m) const { return m * nu_ * (1 + nz_); }

  int nu_;
  int nz_;
  int atoms_;
  Vector center_;
  Vector scale_;
};

Vector box_midpoint(const ControlBox& box) {
  Vector mid = Vector::Zero(box.lower.size());
  for (Eigen::Index j = 0; j < mid.size(); ++j) {
    const bool lo = std::isfinite(box.lower(j));
    const bool hi = std::isfinite(box.upper(j));
    if (lo && hi) {
      mid(j) = 0.5 * (box.lower(j) + box.upper(j));
    } else if (lo) {
      mid(j) = std::max(box.lower(j), 0.0);
    } else if (hi) {
      mid(j) = std::min(box.upper(j), 0.0);
    }
  }
  return mid;
}

}  // namespace

void SolverSettings::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(initial_step > 0.0 && std::isfinite(initial_step), "initial_step must be positive");
  require(step_shrink > 0.0 && step_shrink < 1.0, "step_shrink must lie in (0, 1)");
  require(min_step > 0.0, "min_step must be positive");
  require(max_iterations > 0, "max_iterations must be positive");
  require(chance_weight >= 0.0 && wrap_weight >= 0.0, "penalty weights must be non-negative");
  require(picard_rounds > 0, "picard_rounds must be positive");
  require(objective_tolerance > 0.0 && wrap_tolerance > 0.0 && picard_tolerance > 0.0, "tolerances must be positive");
  require(patience > 0, "patience must be positive");
  require(scenarios > 0, "scenario count must be positive");
  require(burn_in_cycles >= 0, "burn_in_cycles must be non-negative");
}

OptimizeResult optimize_rule(const SaaInstance& instance, DecisionRule rule, const SolverSettings& settings) {
  settings.validate();
  instance.validate();
  const Preconditioner pre(instance, rule);

  auto value_at = [&](const Vector& phi) -> std::optional<double> {
    rule.set_parameters(pre.to_theta(phi));
    try {
      return saa_objective(instance, rule).total;
    } catch (const DivergenceError&) {
      return std::nullopt;
    }
  };
  auto gradient_at = [&](const Vector& phi, bool inward) {
    rule.set_parameters(pre.to_theta(phi));
    Vector g_theta;
    (void)saa_objective_with_gradient(instance, rule, g_theta, inward);
    return pre.gradient_to_phi(g_theta);
  };

  Vector phi = pre.to_phi(rule.parameters());
  const auto J0 = value_at(phi);
  if (!J0) throw DivergenceError("objective diverges at the initial rule");

  OptimizeResult out{rule, {*J0}, 0, false};
  double J = *J0;
  Vector g = gradient_at(phi, true);
  double step = g.norm() > 0.0 ? settings.initial_step / g.norm() : settings.initial_step;

  // Backtracking along -g; returns the accepted point or nothing.
  auto search = [&](const Vector& dir, double& h) -> std::optional<std::pair<Vector, double>> {
    const double dn = dir.norm();
    while (h * dn >= settings.min_step * (1.0 + phi.norm())) {
      Vector trial = phi - h * dir;
      const auto Jt = value_at(trial);
      if (Jt && *Jt <= J) return std::make_pair(std::move(trial), *Jt);
      h *= settings.step_shrink;
    }
    return std::nullopt;
  };

  while (out.iterations < settings.max_iterations) {
    if (g.squaredNorm() == 0.0) {
      out.converged = true;
      break;
    }
    double h = step;
    auto found = search(g, h);
    bool inward = true;
    if (!found) {
      // The inward pass-through is a heuristic; fall back to the plain
      // projected subgradient before giving up.
      g = gradient_at(phi, false);
      inward = false;
      if (g.squaredNorm() == 0.0) {
        out.converged = true;
        break;
      }
      h = settings.initial_step / g.norm();
      found = search(g, h);
    }
    if (!found) {
      // No decrease along the subgradient at any resolvable step.
      out.converged = true;
      break;
    }
    ++out.iterations;
    auto& [next, Jn] = *found;
    const Vector g_next = gradient_at(next, true);
    const Vector s = next - phi;
    const Vector y = g_next - (inward ? g : gradient_at(phi, true));
    const double sy = s.dot(y);
    const double bb = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * h;
    step = std::min(bb, 10.0 * h);

    phi = std::move(next);
    J = Jn;
    g = g_next;
    out.trace.push_back(J);

    const auto n = out.trace.size();
    if (n > static_cast<std::size_t>(settings.patience)) {
      const double before = out.trace[n - 1 - settings.patience];
      if (before - J <= settings.objective_tolerance * std::max(std::abs(J), kTiny)) {
        out.converged = true;
        break;
      }
    }
  }
  rule.set_parameters(pre.to_theta(phi));
  out.rule = std::move(rule);
  return out;
}

std::vector<NoisePath> offline_scenarios(const GenericProblem& problem, const SolverSettings& settings,
                                         EnsembleDiagnostics* diagnostics) {
  Ensemble e = simulate_ensemble(problem.noise, settings.scenarios, problem.calendar.master_period(),
                                 settings.burn_in_cycles, derive_seed(settings.seed, 0x5ce7a210));
  if (diagnostics != nullptr) *diagnostics = e.diagnostics;
  return std::move(e.paths);
}

SaaInstance make_offline_instance(const GenericProblem& problem, std::vector<NoisePath> scenarios,
                                  std::vector<Vector> initial_ensemble, const SolverSettings& settings) {
  SaaInstance inst;
  inst.problem = &problem;
  inst.horizon = problem.calendar.master_period();
  inst.start_time = 0;
  inst.chance_weight = settings.chance_weight;
  if (settings.periodic) {
    inst.terminal_target = scaled_moments(initial_ensemble, problem.state_scale);
    inst.terminal_weight = settings.wrap_weight;
  }
  inst.scenarios = std::move(scenarios);
  inst.initial_ensemble = std::move(initial_ensemble);
  inst.validate();
  return inst;
}

Solution solve_offline(const GenericProblem& problem, const PeriodicBasis& basis, const SolverSettings& settings) {
  problem.validate();
  settings.validate();
  if (!(basis.calendar() == problem.calendar)) throw std::invalid_argument("basis calendar differs from problem");
  const int T = problem.calendar.master_period();
  const int nx = problem.state_dim();

  EnsembleDiagnostics nd;
  std::vector<NoisePath> scenarios = offline_scenarios(problem, settings, &nd);
  if (nd.diverged) throw DivergenceError("noise model variance grows without bound over the burn-in");

  const Vector anchor = settings.anchor.value_or(problem.anchor);
  if (anchor.size() != nx || !anchor.allFinite()) throw std::invalid_argument("anchor must be a finite state");
  std::vector<Vector> x0(scenarios.size(), anchor);

  DecisionRule rule(basis, nx, settings.noise_feedback ? problem.noise_dim() : 0, problem.control_dim(),
                    problem.control_box);
  for (int m = 0; m < rule.num_atoms(); ++m) {
    if (basis.atoms()[m].kind == TimeAtom::Kind::Constant) rule.intercept(m) = box_midpoint(problem.control_box);
  }

  Solution sol{rule, {}, {}, {}, {}, {}, settings.seed};
  Diagnostics& d = sol.diagnostics;
  d.noise_variance_growth = nd.max_variance_growth;
  std::vector<Vector> previous_means;
  bool inner_ok = true;

  for (int round = 0; round < settings.picard_rounds; ++round) {
    const SaaInstance inst = make_offline_instance(problem, scenarios, x0, settings);
    OptimizeResult res = optimize_rule(inst, std::move(rule), settings);
    rule = std::move(res.rule);
    d.objective_trace.insert(d.objective_trace.end(), res.trace.begin(), res.trace.end());
    d.iterations += res.iterations;
    d.picard_rounds = round + 1;
    inner_ok = res.converged;

    const Rollout ro = rollout(inst, rule);
    const ObjectiveValue obj = saa_objective(inst, rule);
    d.objective = obj.total;
    d.round_objectives.push_back(obj.total);
    d.risk = obj.risk;
    d.chance_penalty = obj.chance_penalty;
    d.wrap_penalty = obj.terminal_penalty;
    d.violation_rate = obj.violation_rate;
    std::vector<Vector> xT = ro.states_at(T);
    d.wrap_gap = moment_gap(xT, problem.state_scale, scaled_moments(x0, problem.state_scale));

    std::vector<std::vector<Vector>> series;
    series.reserve(ro.paths.size());
    for (const auto& p : ro.paths) series.emplace_back(p.states.begin(), p.states.begin() + T);
    sol.state_stats = moments_by_phase(series, T, 0);
    sol.initial_ensemble = x0;
    sol.terminal_ensemble = xT;

    if (!settings.periodic) {
      d.converged = inner_ok;
      d.status = inner_ok ? "converged" : "iteration_limit";
      break;
    }
    // Settled once no phase mean moves by more than the tolerance in scaled
    // units between consecutive rounds.
    double shift = std::numeric_limits<double>::infinity();
    if (!previous_means.empty()) {
      shift = 0.0;
      for (int t = 0; t < T; ++t) {
        const Vector dm = (sol.state_stats.mean[t] - previous_means[t]).cwiseQuotient(problem.state_scale);
        shift = std::max(shift, dm.cwiseAbs().maxCoeff());
      }
    }
    d.mean_shift = shift;
    previous_means = sol.state_stats.mean;
    if (d.wrap_gap < settings.wrap_tolerance && shift <= settings.picard_tolerance) {
      d.converged = inner_ok;
      d.status = inner_ok ? "converged" : "iteration_limit";
      break;
    }
    x0 = std::move(xT);
    d.status = "picard_limit";
  }
  sol.rule = std::move(rule);
  sol.scenarios = std::move(scenarios);
  return sol;
}

ObjectiveValue reevaluate(const GenericProblem& problem, const Solution& solution, const SolverSettings& settings) {
  const SaaInstance inst = make_offline_instance(problem, solution.scenarios, solution.initial_ensemble, settings);
  return saa_objective(inst, solution.rule);
}

}  // namespace pctl
