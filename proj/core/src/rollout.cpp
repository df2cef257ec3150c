#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pctl/error.hpp"
#include "pctl/solver.hpp"

namespace pctl {

namespace {

Vector input_noise(const DecisionRule& rule, const Vector& w) { return rule.noise_dim() > 0 ? w : Vector(); }

struct ChanceTerm {
  double penalty = 0.0;
  std::size_t index = 0;
  Vector direction;  // d(excess)/dx at the selected sample, empty when inactive
};

// (1 - alpha)-quantile of the worst scaled bound excess over the ensemble.
ChanceTerm chance_term(const ChanceConstraint& c, std::span<const Vector> states) {
  std::vector<double> excess(states.size(), 0.0);
  std::vector<int> row(states.size(), -1);
  std::vector<double> sign(states.size(), 0.0);
  for (std::size_t m = 0; m < states.size(); ++m) {
    const Vector h = c.apply(states[m]);
    for (Eigen::Index j = 0; j < h.size(); ++j) {
      const double above = (h(j) - c.upper(j)) / c.scale(j);
      const double below = (c.lower(j) - h(j)) / c.scale(j);
      if (above > excess[m]) {
        excess[m] = above;
        row[m] = static_cast<int>(j);
        sign[m] = 1.0;
      }
      if (below > excess[m]) {
        excess[m] = below;
        row[m] = static_cast<int>(j);
        sign[m] = -1.0;
      }
    }
  }
  ChanceTerm out;
  out.index = empirical_quantile_index(excess, 1.0 - c.alpha);
  out.penalty = excess[out.index];
  if (out.penalty > 0.0) {
    const int j = row[out.index];
    out.direction = sign[out.index] * c.H.row(j).transpose() / c.scale(j);
  }
  return out;
}

ObjectiveValue evaluate(const SaaInstance& inst, const DecisionRule& rule, Vector* gradient, bool inward) {
  const GenericProblem& p = *inst.problem;
  const Rollout ro = rollout(inst, rule);
  const auto M = ro.paths.size();
  const int H = inst.horizon;
  const int nx = p.state_dim();
  const int nu = p.control_dim();

  ObjectiveValue out;
  out.stage_risk.resize(H);
  out.violation_rate.resize(H);

  // d(objective)/d(loss_k^m)
  std::vector<std::vector<double>> loss_weight(H);
  std::vector<double> losses(M);
  for (int k = 0; k < H; ++k) {
    for (std::size_t m = 0; m < M; ++m) losses[m] = ro.paths[m].losses[k];
    RiskValue rv = aggregate_with_sensitivity(p.risk, losses, inst.weights);
    out.stage_risk[k] = rv.value;
    out.risk += rv.value;
    loss_weight[k] = std::move(rv.sensitivity);
  }

  // d(objective)/d(x_k^m) from the penalty terms, k = 1..H
  std::vector<std::vector<Vector>> state_weight;
  if (gradient != nullptr) state_weight.assign(H + 1, std::vector<Vector>(M, Vector::Zero(nx)));

  for (int k = 1; k <= H; ++k) {
    const std::vector<Vector> xs = ro.states_at(k);
    std::vector<Vector> hs(M);
    for (std::size_t m = 0; m < M; ++m) hs[m] = p.constraint.apply(xs[m]);
    out.violation_rate[k - 1] = violation_rate(hs, p.constraint.lower, p.constraint.upper);
    if (inst.chance_weight > 0.0) {
      const ChanceTerm ct = chance_term(p.constraint, xs);
      out.chance_penalty += inst.chance_weight * ct.penalty;
      if (gradient != nullptr && ct.direction.size() > 0) {
        state_weight[k][ct.index] += inst.chance_weight * ct.direction;
      }
    }
  }

  if (inst.terminal_target) {
    const std::vector<Vector> xT = ro.states_at(H);
    std::vector<Vector> g;
    out.wrap_gap = moment_gap(xT, p.state_scale, *inst.terminal_target, gradient != nullptr ? &g : nullptr);
    out.terminal_penalty = inst.terminal_weight * out.wrap_gap;
    if (gradient != nullptr && inst.terminal_weight > 0.0) {
      for (std::size_t m = 0; m < M; ++m) state_weight[H][m] += inst.terminal_weight * g[m];
    }
  }
  out.total = out.risk + out.chance_penalty + out.terminal_penalty;
  if (!std::isfinite(out.total)) throw DivergenceError("objective is not finite");
  if (gradient == nullptr) return out;

  // Reverse sweep per path.
  const int nz = rule.input_dim();
  const int block = nu * (1 + nz);
  Vector& g = *gradient;
  g = Vector::Zero(rule.num_parameters());
  const Matrix At = p.dynamics.A.transpose();
  const Matrix Bt = p.dynamics.B.transpose();
  StageGradient sg;
  for (std::size_t m = 0; m < M; ++m) {
    const PathTrajectory& tr = ro.paths[m];
    const NoisePath& sc = inst.scenarios[m];
    Vector lambda = state_weight[H][m];
    for (int k = H - 1; k >= 0; --k) {
      const std::int64_t t = inst.start_time + k;
      const Vector& x = tr.states[k];
      const Vector& w = sc.values[k];
      const double lw = loss_weight[k][m];
      Vector du = Bt * lambda;
      Vector dx = At * lambda;
      if (lw != 0.0) {
        (void)p.stage_loss(t, x, w, tr.controls[k], &sg);
        du += lw * sg.du;
        dx += lw * sg.dx;
      }
      // Projected pass-through at saturated coordinates.
      const Vector& r = tr.raw_controls[k];
      for (int i = 0; i < nu; ++i) {
        const bool low = r(i) <= rule.box().lower(i);
        const bool high = r(i) >= rule.box().upper(i);
        if (!low && !high) continue;
        if (!inward || (low && high) || (low && du(i) > 0.0) || (high && du(i) < 0.0)) du(i) = 0.0;
      }
      if (du.squaredNorm() > 0.0) {
        Vector z(nz);
        z << x, input_noise(rule, w);
        const Vector a = rule.atoms(t);
        for (int j = 0; j < rule.num_atoms(); ++j) {
          if (a(j) == 0.0) continue;
          const Vector dr = a(j) * du;
          g.segment(j * block, nu) += dr;
          Eigen::Map<Matrix>(g.data() + j * block + nu, nu, nz) += dr * z.transpose();
          dx += rule.gain(j).leftCols(nx).transpose() * dr;
        }
      }
      if (k >= 1) dx += state_weight[k][m];
      lambda = std::move(dx);
    }
  }
  if (!g.allFinite()) throw DivergenceError("objective gradient is not finite");
  return out;
}

}  // namespace

MomentTarget scaled_moments(std::span<const Vector> ensemble, const Vector& scale) {
  if (ensemble.empty()) throw std::invalid_argument("empty ensemble");
  const auto n = scale.size();
  const auto M = static_cast<double>(ensemble.size());
  MomentTarget out{Vector::Zero(n), Matrix::Zero(n, n)};
  for (const auto& x : ensemble) out.mean += x.cwiseQuotient(scale);
  out.mean /= M;
  if (ensemble.size() > 1) {
    for (const auto& x : ensemble) {
      const Vector d = x.cwiseQuotient(scale) - out.mean;
      out.covariance.noalias() += d * d.transpose();
    }
    out.covariance /= (M - 1.0);
  }
  return out;
}

double moment_gap(std::span<const Vector> ensemble, const Vector& scale, const MomentTarget& target,
                  std::vector<Vector>* grad) {
  const MomentTarget cur = scaled_moments(ensemble, scale);
  const Vector dmean = cur.mean - target.mean;
  const Matrix dcov = cur.covariance - target.covariance;
  const double gap = dmean.squaredNorm() + dcov.squaredNorm();
  if (grad != nullptr) {
    const auto M = static_cast<double>(ensemble.size());
    grad->resize(ensemble.size());
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
      Vector gy = 2.0 * dmean / M;
      if (ensemble.size() > 1) gy += (4.0 / (M - 1.0)) * dcov * (ensemble[m].cwiseQuotient(scale) - cur.mean);
      (*grad)[m] = gy.cwiseQuotient(scale);
    }
  }
  return gap;
}

void SaaInstance::validate() const {
  if (problem == nullptr) throw std::invalid_argument("instance has no problem");
  if (horizon < 1) throw std::invalid_argument("horizon must be positive");
  if (scenarios.empty()) throw std::invalid_argument("instance needs at least one scenario");
  if (initial_ensemble.size() != scenarios.size()) {
    throw std::invalid_argument("initial ensemble and scenario counts differ");
  }
  for (const auto& s : scenarios) {
    if (s.length() < horizon) throw std::invalid_argument("scenario shorter than the horizon");
  }
  for (const auto& x : initial_ensemble) {
    if (x.size() != problem->state_dim() || !x.allFinite()) throw std::invalid_argument("bad initial state");
  }
  if (!weights.empty() && weights.size() != scenarios.size()) throw std::invalid_argument("one weight per scenario");
  if (terminal_weight < 0.0 || chance_weight < 0.0) throw std::invalid_argument("penalty weights must be >= 0");
}

std::vector<Vector> Rollout::states_at(int k) const {
  std::vector<Vector> xs;
  xs.reserve(paths.size());
  for (const auto& p : paths) xs.push_back(p.states.at(k));
  return xs;
}

Rollout rollout(const SaaInstance& inst, const DecisionRule& rule) {
  inst.validate();
  const GenericProblem& p = *inst.problem;
  if (rule.state_dim() != p.state_dim() || rule.control_dim() != p.control_dim() ||
      (rule.noise_dim() != 0 && rule.noise_dim() != p.noise_dim())) {
    throw std::invalid_argument("rule does not fit the problem dimensions");
  }
  Rollout out;
  out.paths.resize(inst.scenarios.size());
  for (std::size_t m = 0; m < inst.scenarios.size(); ++m) {
    PathTrajectory& tr = out.paths[m];
    tr.states.reserve(inst.horizon + 1);
    tr.states.push_back(inst.initial_ensemble[m]);
    for (int k = 0; k < inst.horizon; ++k) {
      const std::int64_t t = inst.start_time + k;
      const Vector& x = tr.states.back();
      const Vector& w = inst.scenarios[m].values[k];
      Vector r = rule.raw_control(t, x, input_noise(rule, w));
      Vector u = rule.box().clamp(r);
      tr.losses.push_back(p.stage_loss(t, x, w, u, nullptr));
      Vector next = step_dynamics(p.dynamics, t + 1, x, u, w);
      if (!next.allFinite() || !std::isfinite(tr.losses.back())) {
        std::ostringstream msg;
        msg << "rollout diverged on path " << m << " at time " << t + 1;
        throw DivergenceError(msg.str());
      }
      tr.raw_controls.push_back(std::move(r));
      tr.controls.push_back(std::move(u));
      tr.states.push_back(std::move(next));
    }
  }
  return out;
}

ObjectiveValue saa_objective(const SaaInstance& instance, const DecisionRule& rule) {
  return evaluate(instance, rule, nullptr, false);
}

ObjectiveValue saa_objective_with_gradient(const SaaInstance& instance, const DecisionRule& rule, Vector& gradient,
                                           bool inward_at_bounds) {
  return evaluate(instance, rule, &gradient, inward_at_bounds);
}

}  // namespace pctl
