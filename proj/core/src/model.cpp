#include "pctl/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector midpoint_or_zero(const Vector& lower, const Vector& upper) {
  Vector mid = Vector::Zero(lower.size());
  for (Eigen::Index j = 0; j < lower.size(); ++j) {
    if (std::isfinite(lower(j)) && std::isfinite(upper(j))) {
      mid(j) = 0.5 * (lower(j) + upper(j));
    } else if (std::isfinite(lower(j))) {
      mid(j) = lower(j);
    } else if (std::isfinite(upper(j))) {
      mid(j) = upper(j);
    }
  }
  return mid;
}

Vector width_or_one(const Vector& lower, const Vector& upper) {
  Vector w = Vector::Ones(lower.size());
  for (Eigen::Index j = 0; j < lower.size(); ++j) {
    const double d = upper(j) - lower(j);
    if (std::isfinite(d) && d > 0.0) w(j) = d;
  }
  return w;
}

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

void LinearStateModel::validate() const {
  const auto n = A.rows();
  require(n > 0 && A.cols() == n, "A must be square and non-empty");
  require(B.rows() == n && B.cols() > 0, "B must have one row per state");
  require(G.rows() == n, "G must have one row per state");
  require(!inflow.empty(), "inflow table must cover at least one phase");
  for (const auto& f : inflow) require(f.size() == n && f.allFinite(), "inflow has wrong size or is non-finite");
  require(A.allFinite() && B.allFinite() && G.allFinite(), "dynamics matrices must be finite");
}

Vector step_dynamics(const LinearStateModel& m, std::int64_t t, const Vector& x_prev, const Vector& u_prev,
                     const Vector& w_prev) {
  if (x_prev.size() != m.state_dim() || u_prev.size() != m.control_dim()) {
    throw std::invalid_argument("step_dynamics dimension mismatch");
  }
  if (!x_prev.allFinite() || !u_prev.allFinite() || !w_prev.allFinite()) {
    throw std::invalid_argument("step_dynamics inputs must be finite");
  }
  Vector x = m.A * x_prev + m.B * u_prev + m.inflow[positive_mod(t, m.period())];
  if (w_prev.size() > 0) {
    if (w_prev.size() != m.noise_dim()) throw std::invalid_argument("noise dimension mismatch");
    x.noalias() += m.G * w_prev;
  }
  return x;
}

double stage_revenue(const DemandModel& dm, std::int64_t t, double intercept, double energy) {
  if (energy < 0.0) throw std::invalid_argument("delivered energy must be non-negative");
  const double d = dm.slope.at(positive_mod(t, static_cast<std::int64_t>(dm.slope.size())));
  return intercept * energy - 0.5 * d * energy * energy;
}

double total_power(const Vector& efficiency, const Vector& u) {
  if (efficiency.size() != u.size()) throw std::invalid_argument("efficiency and control sizes differ");
  return std::max(0.0, efficiency.dot(u));
}

void GenericProblem::validate() const {
  dynamics.validate();
  noise.validate();
  require(stage_loss != nullptr, "problem needs a stage loss");
  require(dynamics.period() == calendar.master_period(), "inflow table must have one entry per phase");
  require(noise.calendar == calendar, "noise calendar differs from problem calendar");
  require(dynamics.noise_dim() == noise.dim, "G must have one column per noise component");
  require(control_box.lower.size() == control_dim() && control_box.upper.size() == control_dim(),
          "control box dimension mismatch");
  require(constraint.H.cols() == state_dim(), "constraint map must act on the state");
  const auto rows = constraint.H.rows();
  require(constraint.lower.size() == rows && constraint.upper.size() == rows && constraint.scale.size() == rows,
          "constraint bounds must match the constraint map");
  require(constraint.alpha > 0.0 && constraint.alpha < 0.5, "violation level must lie in (0, 0.5)");
  require((constraint.scale.array() > 0.0).all(), "constraint scale must be positive");
  require(state_scale.size() == state_dim() && (state_scale.array() > 0.0).all(), "state scale must be positive");
  require(anchor.size() == state_dim() && anchor.allFinite(), "anchor must be a finite state");
  if (risk.kind == RiskAggregator::Kind::CVaR) {
    require(risk.beta > 0.0 && risk.beta <= 1.0, "CVaR beta must lie in (0, 1]");
  }
}

GenericProblem scale_losses(GenericProblem problem, double factor) {
  problem.stage_loss = [inner = problem.stage_loss, factor](std::int64_t t, const Vector& x, const Vector& w,
                                                            const Vector& u, StageGradient* grad) {
    const double v = inner(t, x, w, u, grad);
    if (grad != nullptr) {
      grad->dx *= factor;
      grad->du *= factor;
    }
    return factor * v;
  };
  return problem;
}

GenericProblem build_hydropower(const HydropowerSpec& spec) {
  const auto n = spec.A.rows();
  const auto k = spec.B.cols();
  require(spec.efficiency.size() == k, "one efficiency per turbine");
  require((spec.efficiency.array() >= 0.0).all(), "efficiencies must be non-negative");
  require(spec.control_lower.size() == k && spec.control_upper.size() == k, "turbine bounds need one entry per turbine");
  require((spec.control_lower.array() >= 0.0).all(), "turbine controls must be non-negative");
  require(spec.storage_lower.size() == n && spec.storage_upper.size() == n, "storage bounds need one entry per reservoir");
  require(spec.demand.intercept.dim == 1, "demand intercept process must be scalar");
  const int T = spec.demand.intercept.period();
  require(static_cast<int>(spec.demand.slope.size()) == T, "demand slope needs one entry per phase");
  for (double d : spec.demand.slope) require(d >= 0.0 && std::isfinite(d), "demand slope must be non-negative");

  GenericProblem p{
      .name = "hydropower",
      .calendar = spec.demand.intercept.calendar,
      .dynamics = {spec.A, spec.B, Matrix::Zero(n, 1), spec.inflow},
      .noise = spec.demand.intercept,
      .stage_loss = {},
      .risk = spec.risk,
      .constraint = {Matrix::Identity(n, n), spec.storage_lower, spec.storage_upper, spec.alpha,
                     width_or_one(spec.storage_lower, spec.storage_upper)},
      .control_box = {spec.control_lower, spec.control_upper},
      .state_scale = width_or_one(spec.storage_lower, spec.storage_upper),
      .anchor = spec.initial_storage.value_or(midpoint_or_zero(spec.storage_lower, spec.storage_upper)),
  };
  p.stage_loss = [demand = spec.demand, a = spec.efficiency, n](std::int64_t t, const Vector&, const Vector& w,
                                                                const Vector& u, StageGradient* grad) {
    const double raw = a.dot(u);
    const double e = std::max(0.0, raw);
    const double c = w(0);
    const double loss = -stage_revenue(demand, t, c, e);
    if (grad != nullptr) {
      const double d = demand.slope[positive_mod(t, static_cast<std::int64_t>(demand.slope.size()))];
      grad->dx = Vector::Zero(n);
      grad->du = raw > 0.0 ? Vector(-(c - d * e) * a) : Vector(Vector::Zero(a.size()));
    }
    return loss;
  };
  p.validate();
  return p;
}

GenericProblem build_vpp(const VppSpec& spec) {
  require(spec.battery_efficiency > 0.0 && spec.battery_efficiency <= 1.0, "battery efficiency must lie in (0, 1]");
  require(spec.battery_capacity > 0.0, "battery capacity must be positive");
  require(spec.battery_max_charge >= 0.0 && spec.battery_max_discharge >= 0.0, "battery power limits must be non-negative");
  require(spec.conventional_min <= spec.conventional_max, "conventional limits are inverted");
  require(spec.curtailment_max >= 0.0, "curtailment limit must be non-negative");
  require(spec.line_limit > 0.0, "line limit must be positive");
  require(spec.market.dim == 2, "VPP market process must have two components (availability, price)");
  const int T = spec.market.period();
  require(static_cast<int>(spec.local_demand.size()) == T, "local demand needs one entry per phase");
  require(static_cast<int>(spec.day_ahead_price.size()) == T, "day-ahead price needs one entry per phase");

  constexpr int nx = 4;
  constexpr int nu = 4;
  Matrix A = Matrix::Zero(nx, nx);
  A(0, 0) = spec.battery_efficiency;
  Matrix B(nx, nu);
  // draw, conventional, curtailment, day-ahead
  B << -1, 0, 0, 0,  //
      0, 0, -1, 0,   //
      1, 1, -1, 0,   //
      1, 1, -1, -1;
  Matrix G(nx, 2);
  G << 0, 0,  //
      1, 0,   //
      1, 0,   //
      1, 0;
  std::vector<Vector> inflow(T, Vector::Zero(nx));
  for (int phase = 0; phase < T; ++phase) {
    // x_{t+1} records stage t, whose demand sits in phase t.
    const double demand = spec.local_demand[positive_mod(phase - 1, T)];
    inflow[phase](2) = -demand;
    inflow[phase](3) = -demand;
  }

  Vector lower(nx), upper(nx), scale(nx);
  lower << 0.0, 0.0, -spec.line_limit, -kInf;
  upper << spec.battery_capacity, kInf, spec.line_limit, kInf;
  scale << spec.battery_capacity, std::max(1.0, spec.curtailment_max), 2.0 * spec.line_limit, 2.0 * spec.line_limit;
  Vector anchor = Vector::Zero(nx);
  anchor(0) = spec.initial_energy.value_or(0.5 * spec.battery_capacity);

  Vector u_lo(nu), u_hi(nu);
  u_lo << -spec.battery_max_charge, spec.conventional_min, 0.0, -spec.line_limit;
  u_hi << spec.battery_max_discharge, spec.conventional_max, spec.curtailment_max, spec.line_limit;

  GenericProblem p{
      .name = "vpp",
      .calendar = spec.market.calendar,
      .dynamics = {A, B, G, inflow},
      .noise = spec.market,
      .stage_loss = {},
      .risk = spec.risk,
      .constraint = {Matrix::Identity(nx, nx), lower, upper, spec.alpha, scale},
      .control_box = {u_lo, u_hi},
      .state_scale = scale,
      .anchor = anchor,
  };
  p.stage_loss = [spec](std::int64_t t, const Vector&, const Vector& w, const Vector& u, StageGradient* grad) {
    const int phase = static_cast<int>(positive_mod(t, static_cast<std::int64_t>(spec.local_demand.size())));
    const double demand = spec.local_demand[phase];
    const double da_price = spec.day_ahead_price[phase];
    const double rt_price = w(1);
    const double rt = u(1) + u(0) + (w(0) - u(2)) - demand - u(3);
    const double profit = da_price * u(3) + rt_price * rt - spec.conventional_cost * u(1);
    if (grad != nullptr) {
      grad->dx = Vector::Zero(nx);
      grad->du.resize(nu);
      grad->du << -rt_price, -rt_price + spec.conventional_cost, rt_price, -da_price + rt_price;
    }
    return -profit;
  };
  p.validate();
  return p;
}

double vpp_clearing_residual(const VppSpec& spec, std::int64_t t, const Vector& w, const Vector& u,
                             const Vector& x_next) {
  const int phase = static_cast<int>(positive_mod(t, static_cast<std::int64_t>(spec.local_demand.size())));
  const double demand = spec.local_demand[phase];
  const double generation = u(1) + (w(0) - u(2));
  const double draw = std::max(u(0), 0.0);
  const double charging = std::max(-u(0), 0.0);
  const double rt = x_next(3);
  const double purchases = std::max(-rt, 0.0) + std::max(-u(3), 0.0);
  const double sales = std::max(rt, 0.0) + std::max(u(3), 0.0);
  return (generation + draw + purchases) - (demand + charging + sales);
}

GenericProblem build_generic(const GenericSpec& spec) {
  const auto n = spec.A.rows();
  const auto k = spec.B.cols();
  const auto nw = spec.noise.dim;
  require(spec.loss_state.size() == n, "loss_state needs one entry per state");
  require(spec.loss_control.size() == k, "loss_control needs one entry per control");
  require(spec.loss_control_quadratic.rows() == k && spec.loss_control_quadratic.cols() == k,
          "loss_control_quadratic must be square in the controls");
  require(spec.loss_noise_control.rows() == nw && spec.loss_noise_control.cols() == k,
          "loss_noise_control must be noise x control");
  require(spec.state_lower.size() == n && spec.state_upper.size() == n, "state bounds need one entry per state");

  GenericProblem p{
      .name = "generic",
      .calendar = spec.noise.calendar,
      .dynamics = {spec.A, spec.B, spec.G.size() == 0 ? Matrix(Matrix::Zero(n, nw)) : spec.G, spec.inflow},
      .noise = spec.noise,
      .stage_loss = {},
      .risk = spec.risk,
      .constraint = {Matrix::Identity(n, n), spec.state_lower, spec.state_upper, spec.alpha,
                     width_or_one(spec.state_lower, spec.state_upper)},
      .control_box = {spec.control_lower, spec.control_upper},
      .state_scale = width_or_one(spec.state_lower, spec.state_upper),
      .anchor = spec.anchor.value_or(midpoint_or_zero(spec.state_lower, spec.state_upper)),
  };
  const Matrix R = 0.5 * (spec.loss_control_quadratic + spec.loss_control_quadratic.transpose());
  p.stage_loss = [cx = spec.loss_state, cu = spec.loss_control, R, N = spec.loss_noise_control](
                     std::int64_t, const Vector& x, const Vector& w, const Vector& u, StageGradient* grad) {
    if (grad != nullptr) {
      grad->dx = cx;
      grad->du = cu + R * u + N.transpose() * w;
    }
    return cx.dot(x) + cu.dot(u) + 0.5 * u.dot(R * u) + w.dot(N * u);
  };
  p.validate();
  return p;
}

}  // namespace pctl
