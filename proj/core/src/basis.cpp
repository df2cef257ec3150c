#include "pctl/basis.hpp"

#include <Eigen/QR>

#include <cassert>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace pctl {

double TimeAtom::value(std::int64_t t) const noexcept {
  if (kind == Kind::Constant) return 1.0;
  const std::int64_t phase = positive_mod(t, period);
  const std::int64_t turns = (static_cast<std::int64_t>(harmonic) * phase) % period;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(turns) / static_cast<double>(period);
  return kind == Kind::Cosine ? std::cos(angle) : std::sin(angle);
}

PeriodicBasis::PeriodicBasis(SeasonCalendar calendar, std::vector<int> harmonics)
    : calendar_(std::move(calendar)), harmonics_(std::move(harmonics)) {
  const auto& periods = calendar_.periods();
  if (harmonics_.size() != periods.size()) {
    throw std::invalid_argument("need one harmonic count per calendar period");
  }
  const std::int64_t T = calendar_.master_period();
  for (std::size_t i = 0; i < periods.size(); ++i) {
    const int Ti = periods[i];
    const int Mi = harmonics_[i];
    if (Mi < 0) throw std::invalid_argument("harmonic counts must be non-negative");
    if (2 * Mi > Ti) {
      std::ostringstream msg;
      msg << "period " << Ti << " cannot carry " << Mi << " harmonics (aliasing above Nyquist)";
      throw std::invalid_argument(msg.str());
    }
    for (int k = 1; k <= Mi; ++k) {
      // Master-cycle frequency of this harmonic; owned by the first period
      // on which it is periodic.
      const std::int64_t f = static_cast<std::int64_t>(k) * (T / Ti);
      bool owned_below = false;
      for (std::size_t j = 0; j < i; ++j) {
        if ((f * periods[j]) % T == 0) {
          owned_below = true;
          break;
        }
      }
      if (owned_below) continue;
      const int comp = static_cast<int>(i);
      atoms_.push_back({TimeAtom::Kind::Cosine, comp, Ti, k});
      if (2 * k != Ti) atoms_.push_back({TimeAtom::Kind::Sine, comp, Ti, k});
    }
  }
  atoms_.push_back({TimeAtom::Kind::Constant, calendar_.num_periods() - 1, static_cast<int>(T), 0});
}

Vector PeriodicBasis::evaluate(std::int64_t t) const {
  Vector a(size());
  for (int m = 0; m < size(); ++m) a(m) = atoms_[m].value(t);
  return a;
}

std::vector<int> PeriodicBasis::component_atoms(int i) const {
  std::vector<int> idx;
  for (int m = 0; m < size(); ++m) {
    if (atoms_[m].component == i) idx.push_back(m);
  }
  return idx;
}

PeriodicBasis build_basis(const SeasonCalendar& cal, std::span<const int> harmonics_per_period) {
  return PeriodicBasis(cal, std::vector<int>(harmonics_per_period.begin(), harmonics_per_period.end()));
}

WindowBasis::WindowBasis(std::int64_t start, int length) : start_(start), length_(length) {
  if (length < 1) throw std::invalid_argument("window basis needs at least one step");
}

Vector WindowBasis::evaluate(std::int64_t t) const {
  Vector a = Vector::Zero(length_);
  const std::int64_t k = t - start_;
  if (k >= 0 && k < length_) a(k) = 1.0;
  return a;
}

Vector ControlBox::clamp(const Vector& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

bool ControlBox::contains(const Vector& u) const {
  return (u.array() >= lower.array()).all() && (u.array() <= upper.array()).all();
}

DecisionRule::DecisionRule(TimeBasis basis, int state_dim, int noise_dim, int control_dim, ControlBox box)
    : basis_(std::move(basis)),
      state_dim_(state_dim),
      noise_dim_(noise_dim),
      control_dim_(control_dim),
      box_(std::move(box)) {
  if (state_dim < 0 || noise_dim < 0 || control_dim < 1) throw std::invalid_argument("bad rule dimensions");
  if (box_.lower.size() != control_dim || box_.upper.size() != control_dim) {
    throw std::invalid_argument("control box dimension mismatch");
  }
  if ((box_.lower.array() > box_.upper.array()).any()) throw std::invalid_argument("control box is empty");
  const int n = std::visit([](const auto& b) { return b.size(); }, basis_);
  intercepts_.assign(n, Vector::Zero(control_dim));
  gains_.assign(n, Matrix::Zero(control_dim, input_dim()));
}

int DecisionRule::num_parameters() const noexcept { return num_atoms() * control_dim_ * (1 + input_dim()); }

Vector DecisionRule::parameters() const {
  Vector theta(num_parameters());
  const int block = control_dim_ * (1 + input_dim());
  for (int m = 0; m < num_atoms(); ++m) {
    theta.segment(m * block, control_dim_) = intercepts_[m];
    theta.segment(m * block + control_dim_, control_dim_ * input_dim()) =
        Eigen::Map<const Vector>(gains_[m].data(), gains_[m].size());
  }
  return theta;
}

void DecisionRule::set_parameters(const Vector& theta) {
  if (theta.size() != num_parameters()) throw std::invalid_argument("parameter vector has wrong size");
  const int block = control_dim_ * (1 + input_dim());
  for (int m = 0; m < num_atoms(); ++m) {
    intercepts_[m] = theta.segment(m * block, control_dim_);
    gains_[m] = Eigen::Map<const Matrix>(theta.data() + m * block + control_dim_, control_dim_, input_dim());
  }
}

Vector DecisionRule::atoms(std::int64_t t) const {
  return std::visit([t](const auto& b) { return b.evaluate(t); }, basis_);
}

Vector DecisionRule::raw_control(std::int64_t t, const Vector& x, const Vector& w) const {
  if (x.size() != state_dim_) throw std::invalid_argument("state dimension mismatch");
  if (w.size() != noise_dim_) throw std::invalid_argument("noise input dimension mismatch");
  Vector z(input_dim());
  z << x, w;
  const Vector a = atoms(t);
  Vector u = Vector::Zero(control_dim_);
  for (int m = 0; m < num_atoms(); ++m) {
    if (a(m) == 0.0) continue;
    u += a(m) * (intercepts_[m] + gains_[m] * z);
  }
  return u;
}

std::pair<Vector, Matrix> DecisionRule::effective(std::int64_t t) const {
  const Vector a = atoms(t);
  Vector k = Vector::Zero(control_dim_);
  Matrix g = Matrix::Zero(control_dim_, input_dim());
  for (int m = 0; m < num_atoms(); ++m) {
    k += a(m) * intercepts_[m];
    g += a(m) * gains_[m];
  }
  return {k, g};
}

Vector eval_policy(const DecisionRule& rule, std::int64_t t, const Vector& x, const Vector& w) {
  if (!x.allFinite() || !w.allFinite()) throw std::invalid_argument("policy input must be finite");
  return rule.box().clamp(rule.raw_control(t, x, w));
}

StateDecomposition decompose_state(std::span<const std::vector<Vector>> trajectories, const PeriodicBasis& basis,
                                   std::int64_t start_time) {
  if (trajectories.empty()) throw std::invalid_argument("no trajectories to decompose");
  const std::size_t len = trajectories.front().size();
  const auto T = static_cast<std::size_t>(basis.calendar().master_period());
  if (len == 0 || len % T != 0) throw std::invalid_argument("trajectory length must be a multiple of the master period");
  for (const auto& tr : trajectories) {
    if (tr.size() != len) throw std::invalid_argument("ragged trajectory lengths");
  }
  const auto dim = trajectories.front().front().size();
  const int n_atoms = basis.size();

  Matrix design(static_cast<Eigen::Index>(len), n_atoms);
  for (std::size_t k = 0; k < len; ++k) {
    design.row(static_cast<Eigen::Index>(k)) = basis.evaluate(start_time + static_cast<std::int64_t>(k)).transpose();
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(design);
  // Distinct Fourier atoms over whole master cycles are orthogonal, so the
  // design has full column rank whenever the basis was built validly.
  assert(qr.rank() == n_atoms);
  if (qr.rank() != n_atoms) throw std::logic_error("rank-deficient time basis");

  const int S = basis.calendar().num_periods();
  std::vector<std::vector<int>> owned(S);
  for (int i = 0; i < S; ++i) owned[i] = basis.component_atoms(i);

  StateDecomposition out;
  for (const auto& tr : trajectories) {
    Matrix y(static_cast<Eigen::Index>(len), dim);
    for (std::size_t k = 0; k < len; ++k) y.row(static_cast<Eigen::Index>(k)) = tr[k].transpose();
    const Matrix coef = qr.solve(y);  // atoms x dim

    std::vector<Matrix> parts;
    Matrix fitted = Matrix::Zero(static_cast<Eigen::Index>(len), dim);
    for (int i = 0; i < S; ++i) {
      Matrix part = Matrix::Zero(static_cast<Eigen::Index>(len), dim);
      for (int m : owned[i]) part += design.col(m) * coef.row(m);
      fitted += part;
      parts.push_back(part.transpose());
    }
    out.components.push_back(std::move(parts));
    out.residual.push_back((y - fitted).transpose());
  }
  return out;
}

}  // namespace pctl
