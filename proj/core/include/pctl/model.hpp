#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pctl/basis.hpp"
#include "pctl/calendar.hpp"
#include "pctl/pamar.hpp"
#include "pctl/risk.hpp"

namespace pctl {

/// x_t = A x_{t-1} + B u_{t-1} + G w_{t-1} + F_{t mod T}
///
/// G routes the noise realized during the previous stage into the state; it
/// is zero when the noise only affects the stage loss (hydropower).
struct LinearStateModel {
  Matrix A;
  Matrix B;
  Matrix G;
  /// inflow[phase], periodic exogenous supply
  std::vector<Vector> inflow;

  [[nodiscard]] int state_dim() const noexcept { return static_cast<int>(A.rows()); }
  [[nodiscard]] int control_dim() const noexcept { return static_cast<int>(B.cols()); }
  [[nodiscard]] int noise_dim() const noexcept { return static_cast<int>(G.cols()); }
  [[nodiscard]] int period() const noexcept { return static_cast<int>(inflow.size()); }

  void validate() const;
};

/// `w_prev` may be empty, meaning no noise input. Throws on non-finite input.
[[nodiscard]] Vector step_dynamics(const LinearStateModel& m, std::int64_t t, const Vector& x_prev,
                                   const Vector& u_prev, const Vector& w_prev = Vector());

/// Affine inverse demand p(z, t) = c_t - d_{s(t)} z with the intercept c_t
/// following a PAMAR process.
struct DemandModel {
  PamarModel intercept;
  /// slope[phase] >= 0
  std::vector<double> slope;
};

/// Area under the demand curve up to delivered energy e:
/// c e - d e^2 / 2. Throws on negative energy.
[[nodiscard]] double stage_revenue(const DemandModel& dm, std::int64_t t, double intercept, double energy);

/// max(0, a . u)
[[nodiscard]] double total_power(const Vector& efficiency, const Vector& u);

struct StageGradient {
  Vector dx;
  Vector du;
};

/// Stage loss V(t, x_t, w_t, u_t); fills `grad` (if non-null) with a
/// (sub)gradient in x and u.
using StageLossFn =
    std::function<double(std::int64_t t, const Vector& x, const Vector& w, const Vector& u, StageGradient* grad)>;

/// lower <= H x <= upper with probability >= 1 - alpha. Infinite bounds are
/// allowed. `scale` normalizes excess in penalties (one entry per row of H).
struct ChanceConstraint {
  Matrix H;
  Vector lower;
  Vector upper;
  double alpha = 0.05;
  Vector scale;

  [[nodiscard]] Vector apply(const Vector& x) const { return H * x; }
};

struct GenericProblem {
  std::string name;
  SeasonCalendar calendar;
  LinearStateModel dynamics;
  PamarModel noise;
  StageLossFn stage_loss;
  RiskAggregator risk;
  ChanceConstraint constraint;
  ControlBox control_box;
  /// Units for moment matching (wrap-around gap, terminal targets).
  Vector state_scale;
  /// Default initial state.
  Vector anchor;

  [[nodiscard]] int state_dim() const noexcept { return dynamics.state_dim(); }
  [[nodiscard]] int control_dim() const noexcept { return dynamics.control_dim(); }
  [[nodiscard]] int noise_dim() const noexcept { return noise.dim; }

  void validate() const;
};

/// Same problem with every stage loss multiplied by `factor`.
[[nodiscard]] GenericProblem scale_losses(GenericProblem problem, double factor);

struct HydropowerSpec {
  Matrix A;
  Matrix B;
  std::vector<Vector> inflow;
  Vector efficiency;
  Vector control_lower;
  Vector control_upper;
  Vector storage_lower;
  Vector storage_upper;
  DemandModel demand;
  double alpha = 0.05;
  RiskAggregator risk;
  std::optional<Vector> initial_storage;
};

/// Reservoir network with revenue loss -stage_revenue(c_t, a . u_t) and the
/// chance constraint on storage bounds.
[[nodiscard]] GenericProblem build_hydropower(const HydropowerSpec& spec);

/**
 * Virtual power plant at one market node.
 *
 * Controls u = (battery draw, conventional generation, renewable curtailment,
 * day-ahead sales); negative draw charges the battery, negative sales buy.
 * Noise w = (renewable availability, real-time price).
 * State x = (battery energy, renewable output, line flow, real-time sales),
 * the last three recording the previous stage.
 *
 * The real-time trade is the residual that clears the market:
 *   rt = gen + draw + (avail - curtail) - demand - day_ahead
 * and the line carries day_ahead + rt. Profit is
 *   day_ahead_price * day_ahead + rt_price * rt - conventional_cost * gen.
 * Battery energy evolves as E' = efficiency * E - draw (efficiency is the
 * per-step retention).
 */
struct VppSpec {
  double battery_capacity = 0.0;
  double battery_efficiency = 1.0;
  double battery_max_charge = 0.0;
  double battery_max_discharge = 0.0;
  std::optional<double> initial_energy;
  double conventional_min = 0.0;
  double conventional_max = 0.0;
  double conventional_cost = 0.0;
  double curtailment_max = 0.0;
  double line_limit = 0.0;
  /// per phase
  std::vector<double> local_demand;
  /// per phase
  std::vector<double> day_ahead_price;
  double alpha = 0.05;
  RiskAggregator risk;
  /// two components: renewable availability, real-time price
  PamarModel market;
};

[[nodiscard]] GenericProblem build_vpp(const VppSpec& spec);

/// Stage-level market-clearing residual
/// (generation + draw + purchases) - (demand + charging + sales) given the
/// stage noise, the control, and the resulting state.
[[nodiscard]] double vpp_clearing_residual(const VppSpec& spec, std::int64_t t, const Vector& w, const Vector& u,
                                           const Vector& x_next);

/// Linear-quadratic problem straight from matrices:
///   loss = c_x . x + c_u . u + u' R u / 2 + w' N u
/// with h(x) = x bounded by [state_lower, state_upper].
struct GenericSpec {
  Matrix A;
  Matrix B;
  Matrix G;
  std::vector<Vector> inflow;
  Vector control_lower;
  Vector control_upper;
  Vector state_lower;
  Vector state_upper;
  double alpha = 0.05;
  RiskAggregator risk;
  PamarModel noise;
  Vector loss_state;
  Vector loss_control;
  Matrix loss_control_quadratic;
  Matrix loss_noise_control;
  std::optional<Vector> anchor;
};

[[nodiscard]] GenericProblem build_generic(const GenericSpec& spec);

}  // namespace pctl
