#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "pctl/calendar.hpp"

namespace pctl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One real periodic function of discrete time.
struct TimeAtom {
  enum class Kind { Constant, Cosine, Sine };

  Kind kind = Kind::Constant;
  /// Index of the owning calendar period (0-based).
  int component = 0;
  /// Period of the owning component, T_i.
  int period = 1;
  /// Harmonic k of 2*pi*k*t/T_i; 0 for the constant atom.
  int harmonic = 0;

  /// Computed from t mod T_i, so value(t) == value(t + T_i) bit for bit.
  [[nodiscard]] double value(std::int64_t t) const noexcept;

  bool operator==(const TimeAtom&) const = default;
};

/**
 * Fourier time basis partitioned by calendar period.
 *
 * Period T_i contributes cos/sin(2*pi*k*t/T_i) for k = 1..M_i, except
 * harmonics that are already periodic with a shorter calendar period: every
 * master-cycle harmonic belongs to the shortest period it fits, so the atom
 * sets of different periods are disjoint. At the Nyquist harmonic
 * k = T_i / 2 the sine vanishes on integers and only the cosine is kept.
 * The constant atom belongs to the last (master) period.
 */
class PeriodicBasis {
 public:
  /// Throws std::invalid_argument when harmonics.size() differs from the
  /// number of periods, any M_i < 0, or 2 * M_i > T_i.
  PeriodicBasis(SeasonCalendar calendar, std::vector<int> harmonics);

  [[nodiscard]] const SeasonCalendar& calendar() const noexcept { return calendar_; }
  [[nodiscard]] const std::vector<int>& harmonics() const noexcept { return harmonics_; }
  [[nodiscard]] const std::vector<TimeAtom>& atoms() const noexcept { return atoms_; }
  [[nodiscard]] int size() const noexcept { return static_cast<int>(atoms_.size()); }

  /// Atom values at time t.
  [[nodiscard]] Vector evaluate(std::int64_t t) const;
  /// Indices of atoms owned by calendar period i.
  [[nodiscard]] std::vector<int> component_atoms(int i) const;

  bool operator==(const PeriodicBasis&) const = default;

 private:
  SeasonCalendar calendar_;
  std::vector<int> harmonics_;
  std::vector<TimeAtom> atoms_;
};

[[nodiscard]] PeriodicBasis build_basis(const SeasonCalendar& cal, std::span<const int> harmonics_per_period);

/// Step indicators over the window start, ..., start + length - 1; atom k is
/// 1 at start + k and 0 elsewhere. Used for free per-step rules.
class WindowBasis {
 public:
  WindowBasis(std::int64_t start, int length);

  [[nodiscard]] std::int64_t start() const noexcept { return start_; }
  [[nodiscard]] int size() const noexcept { return length_; }
  [[nodiscard]] Vector evaluate(std::int64_t t) const;

  bool operator==(const WindowBasis&) const = default;

 private:
  std::int64_t start_;
  int length_;
};

using TimeBasis = std::variant<PeriodicBasis, WindowBasis>;

/// Componentwise bounds; the admissible control set.
struct ControlBox {
  Vector lower;
  Vector upper;

  [[nodiscard]] Vector clamp(const Vector& u) const;
  [[nodiscard]] bool contains(const Vector& u) const;
};

/**
 * Deterministic feedback policy, affine in the policy input z = (x, w) with
 * time-varying coefficients expanded in a time basis:
 *
 *   u(t, x, w) = clamp( sum_m a_m(t) (k_m + G_m z) )
 *
 * where G_m = [K_m | L_m] holds the state gain K_m (control per state unit)
 * and the gain L_m on the currently observed noise w (may be empty).
 */
class DecisionRule {
 public:
  DecisionRule(TimeBasis basis, int state_dim, int noise_dim, int control_dim, ControlBox box);

  [[nodiscard]] const TimeBasis& basis() const noexcept { return basis_; }
  [[nodiscard]] int state_dim() const noexcept { return state_dim_; }
  [[nodiscard]] int noise_dim() const noexcept { return noise_dim_; }
  [[nodiscard]] int control_dim() const noexcept { return control_dim_; }
  [[nodiscard]] int input_dim() const noexcept { return state_dim_ + noise_dim_; }
  [[nodiscard]] int num_atoms() const noexcept { return static_cast<int>(intercepts_.size()); }
  [[nodiscard]] const ControlBox& box() const noexcept { return box_; }

  [[nodiscard]] Vector& intercept(int m) { return intercepts_.at(m); }
  [[nodiscard]] const Vector& intercept(int m) const { return intercepts_.at(m); }
  /// control_dim x input_dim; columns [0, state_dim) act on x.
  [[nodiscard]] Matrix& gain(int m) { return gains_.at(m); }
  [[nodiscard]] const Matrix& gain(int m) const { return gains_.at(m); }

  /// Number of scalar coefficients: atoms * control_dim * (1 + input_dim).
  [[nodiscard]] int num_parameters() const noexcept;
  /// Flattened coefficients; per atom the intercept then the column-major gain.
  [[nodiscard]] Vector parameters() const;
  void set_parameters(const Vector& theta);

  [[nodiscard]] Vector atoms(std::int64_t t) const;
  /// Unclamped control.
  [[nodiscard]] Vector raw_control(std::int64_t t, const Vector& x, const Vector& w = Vector()) const;
  /// Collapsed coefficients at time t: (sum a_m k_m, sum a_m G_m).
  [[nodiscard]] std::pair<Vector, Matrix> effective(std::int64_t t) const;

 private:
  TimeBasis basis_;
  int state_dim_;
  int noise_dim_;
  int control_dim_;
  ControlBox box_;
  std::vector<Vector> intercepts_;
  std::vector<Matrix> gains_;
};

/// Clamped control. Throws std::invalid_argument on non-finite or
/// wrongly-sized input.
[[nodiscard]] Vector eval_policy(const DecisionRule& rule, std::int64_t t, const Vector& x,
                                 const Vector& w = Vector());

/// Per-path least-squares split of a state trajectory into one sequence per
/// calendar period plus a residual.
struct StateDecomposition {
  /// components[path][i] is state_dim x length.
  std::vector<std::vector<Matrix>> components;
  /// residual[path] is state_dim x length.
  std::vector<Matrix> residual;
};

/// `trajectories[path][k]` is the state at time start_time + k. Lengths must
/// agree and be multiples of the master period.
[[nodiscard]] StateDecomposition decompose_state(std::span<const std::vector<Vector>> trajectories,
                                                 const PeriodicBasis& basis, std::int64_t start_time = 0);

}  // namespace pctl
