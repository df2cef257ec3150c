#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace pctl {

/// Statistical aggregation of sampled losses.
///
/// `beta` is the TAIL FRACTION: CVaR_beta is the mean of the worst beta-mass
/// of the loss distribution, so beta = 1 is the plain expectation and
/// beta -> 0 approaches the worst case. (Some texts parametrize by the
/// confidence level 1 - beta instead.)
struct RiskAggregator {
  enum class Kind { Expectation, CVaR };

  Kind kind = Kind::Expectation;
  double beta = 1.0;

  [[nodiscard]] static RiskAggregator expectation() { return {Kind::Expectation, 1.0}; }
  [[nodiscard]] static RiskAggregator cvar(double beta) { return {Kind::CVaR, beta}; }

  bool operator==(const RiskAggregator&) const = default;
};

/// Aggregated value plus d(value)/d(loss_m) for every sample. For CVaR the
/// sensitivities are the tail weights at the optimal threshold, i.e. a valid
/// subgradient.
struct RiskValue {
  double value = 0.0;
  std::vector<double> sensitivity;
  /// Optimal threshold of the variational form (the (1-beta) quantile for
  /// CVaR); NaN for Expectation.
  double threshold = 0.0;
};

/**
 * Expectation: weighted mean.
 * CVaR_beta:   min_eta eta + (1/beta) sum_m w_m max(loss_m - eta, 0),
 *              evaluated exactly by sorting; the boundary atom is split so the
 *              tail carries exactly beta mass.
 *
 * Inputs are losses. To penalize low revenue pass loss = -revenue.
 * `weights` may be empty (uniform) or M non-negative values summing to 1.
 * Throws std::invalid_argument on empty input, non-finite losses, bad
 * weights, or beta outside (0, 1].
 */
[[nodiscard]] RiskValue aggregate_with_sensitivity(const RiskAggregator& agg, std::span<const double> losses,
                                                   std::span<const double> weights = {});

[[nodiscard]] double aggregate(const RiskAggregator& agg, std::span<const double> losses,
                               std::span<const double> weights = {});

/// Lower empirical quantile: the smallest sample v whose empirical CDF value
/// (fraction of samples <= v) is at least `level`. Level 0 gives the minimum.
[[nodiscard]] double empirical_quantile(std::span<const double> values, double level);

/// Index (into `values`) of the sample selected by empirical_quantile. Ties
/// resolve to the lowest index.
[[nodiscard]] std::size_t empirical_quantile_index(std::span<const double> values, double level);

/// Fraction of samples with any component outside [lower, upper].
[[nodiscard]] double violation_rate(std::span<const Eigen::VectorXd> h_values, const Eigen::VectorXd& lower,
                                    const Eigen::VectorXd& upper);

}  // namespace pctl
