#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "pctl/calendar.hpp"

namespace pctl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Independent 64-bit seed for substream `index` of `seed` (splitmix64 mix).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/**
 * Multi-seasonal periodic ARMA process
 *
 *   Y_t = mu_s(t) + sum_{i=1..p} phi_{i,s(t)} Y_{t-i} + sum_{i=0..q} theta_{i,s(t)} eps_{t-i}
 *
 * with eps_t ~ N(eta_bar_{t mod T}, diag(sigma^2)).
 *
 * Every season tuple s(t) is determined by the master phase t mod T (the last
 * tuple entry), so all seasonal parameters are stored per master phase. That
 * is the same as keying on the full tuple.
 *
 * Stability is deliberately not checked here; simulate_ensemble reports
 * variance growth instead.
 */
struct PamarModel {
  PamarModel(SeasonCalendar calendar, int dim, int ar_order, int ma_order);

  SeasonCalendar calendar;
  int dim;
  /// mean[phase]
  std::vector<Vector> mean;
  /// ar[i - 1][phase] for lag i = 1..p
  std::vector<std::vector<Matrix>> ar;
  /// ma[i][phase] for lag i = 0..q; ma[0] defaults to the identity
  std::vector<std::vector<Matrix>> ma;
  /// innovation_mean[phase]
  std::vector<Vector> innovation_mean;
  /// per-component standard deviation, >= 0
  Vector innovation_stddev;

  [[nodiscard]] int ar_order() const noexcept { return static_cast<int>(ar.size()); }
  [[nodiscard]] int ma_order() const noexcept { return static_cast<int>(ma.size()) - 1; }
  [[nodiscard]] int period() const noexcept { return calendar.master_period(); }

  /// Seasonal mean keyed by a full season tuple.
  [[nodiscard]] const Vector& mean_for(std::span<const int> season) const;

  /// Throws std::invalid_argument on shape mismatch or non-finite entries.
  void validate() const;

  /// Scalar PAR(1) with per-phase mean and AR coefficient; sigma applies to
  /// every phase and the innovation mean is zero.
  [[nodiscard]] static PamarModel scalar_par1(SeasonCalendar calendar, std::span<const double> mean,
                                              std::span<const double> phi, double sigma);
};

/// Pre-sample history as of some time t0: values[0] = Y_{t0-1},
/// values[1] = Y_{t0-2}, ...; innovations likewise for eps.
struct PamarHistory {
  std::vector<Vector> values;
  std::vector<Vector> innovations;

  /// Zero history sized for the model's orders.
  [[nodiscard]] static PamarHistory zeros(const PamarModel& model);
  /// History as of t0 sitting on the periodic mean (values) and the
  /// innovation means; zeros when the model has no periodic mean.
  [[nodiscard]] static PamarHistory at_mean(const PamarModel& model, std::int64_t t0);
};

/// Per-phase unconditional mean: the fixed cycle of the noise-free
/// recursion. Empty when that recursion does not settle (unstable or
/// extremely persistent models).
[[nodiscard]] std::vector<Vector> periodic_mean(const PamarModel& model);

/// One realized path Y_{start}, ..., Y_{start+len-1} with the innovations that
/// produced it. Replaying `innovations` from `history` reproduces `values`
/// exactly.
struct NoisePath {
  std::int64_t start_time = 0;
  PamarHistory history;
  std::vector<Vector> values;
  std::vector<Vector> innovations;
  std::uint64_t seed = 0;

  [[nodiscard]] int length() const noexcept { return static_cast<int>(values.size()); }
  /// History as of start_time + steps, i.e. after consuming `steps` values.
  [[nodiscard]] PamarHistory history_after(int steps) const;
};

/// The single place where innovations are drawn.
[[nodiscard]] Vector sample_innovation(const PamarModel& model, std::int64_t t, std::mt19937_64& rng);

/// Runs the recursion over given innovations.
[[nodiscard]] std::vector<Vector> replay(const PamarModel& model, std::span<const Vector> innovations,
                                         const PamarHistory& history, std::int64_t start_time = 0);

[[nodiscard]] NoisePath simulate_path(const PamarModel& model, int length, const PamarHistory& history,
                                      std::uint64_t seed, std::int64_t start_time = 0);

struct EnsembleDiagnostics {
  /// Largest per-phase, per-component ratio of variance in the final cycle
  /// to variance in the first simulated cycle (burn-in included). 1 when the
  /// run is shorter than two cycles.
  double max_variance_growth = 1.0;
  bool diverged = false;
};

struct Ensemble {
  std::vector<NoisePath> paths;
  EnsembleDiagnostics diagnostics;
};

/// M independent paths; path m draws from derive_seed(seed, m), starts from
/// the mean history (PamarHistory::at_mean) at start_time - burn_in_cycles * T
/// and keeps the last
/// `length` steps. Variance growth above `divergence_threshold` (or any
/// non-finite value) sets diagnostics.diverged.
[[nodiscard]] Ensemble simulate_ensemble(const PamarModel& model, int paths, int length, int burn_in_cycles,
                                         std::uint64_t seed, std::int64_t start_time = 0,
                                         double divergence_threshold = 1e6);

/// Conditional mean of Y_{start}, ..., Y_{start+horizon-1} given the history,
/// with unobserved innovations replaced by their means.
[[nodiscard]] std::vector<Vector> forecast(const PamarModel& model, const PamarHistory& history, int horizon,
                                           std::int64_t start_time);

/// Inverts the recursion: innovations implied by observed values. Requires an
/// invertible ma[0].
[[nodiscard]] std::vector<Vector> infer_innovations(const PamarModel& model, std::span<const Vector> values,
                                                    const PamarHistory& history, std::int64_t start_time = 0);

/// Per-phase sample moments. `sample_count` is the number of samples pooled
/// into each phase.
struct EnsembleStats {
  std::vector<Vector> mean;
  std::vector<Matrix> covariance;
  std::int64_t sample_count = 0;
};

/// Pools series[m][k] (time start_time + k) by phase modulo `period`.
/// Every series must have the same length, a multiple of `period`.
/// Covariance uses the n - 1 normalization (zero when n == 1).
[[nodiscard]] EnsembleStats moments_by_phase(std::span<const std::vector<Vector>> series, int period,
                                             std::int64_t start_time = 0);

/// moments_by_phase over noise path values with the calendar's master period.
[[nodiscard]] EnsembleStats periodic_moments(std::span<const NoisePath> ensemble, const SeasonCalendar& cal);

}  // namespace pctl
