#include "pctl/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pctl {

namespace {

std::vector<double> checked_weights(std::span<const double> losses, std::span<const double> weights) {
  if (losses.empty()) throw std::invalid_argument("risk aggregation needs at least one sample");
  for (double l : losses) {
    if (!std::isfinite(l)) throw std::invalid_argument("losses must be finite");
  }
  const std::size_t n = losses.size();
  if (weights.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  if (weights.size() != n) throw std::invalid_argument("weights and losses differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("weights must sum to one");
  return {weights.begin(), weights.end()};
}

}  // namespace

RiskValue aggregate_with_sensitivity(const RiskAggregator& agg, std::span<const double> losses,
                                     std::span<const double> weights) {
  const std::vector<double> w = checked_weights(losses, weights);
  const std::size_t n = losses.size();
  RiskValue out;
  out.sensitivity.assign(n, 0.0);

  if (agg.kind == RiskAggregator::Kind::Expectation) {
    for (std::size_t m = 0; m < n; ++m) {
      out.value += w[m] * losses[m];
      out.sensitivity[m] = w[m];
    }
    out.threshold = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

  if (!(agg.beta > 0.0 && agg.beta <= 1.0)) throw std::invalid_argument("CVaR beta must lie in (0, 1]");

  // Worst losses first; stable so ties keep input order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });

  double remaining = agg.beta;
  double tail_sum = 0.0;
  out.threshold = losses[order.back()];
  for (std::size_t idx : order) {
    if (remaining <= 0.0) break;
    const double take = std::min(w[idx], remaining);
    tail_sum += take * losses[idx];
    out.sensitivity[idx] = take / agg.beta;
    remaining -= take;
    out.threshold = losses[idx];
  }
  // Rounding in the weights can leave a sliver of tail mass unassigned; it
  // belongs to the boundary atom.
  if (remaining > 0.0) {
    tail_sum += remaining * out.threshold;
  }
  out.value = tail_sum / agg.beta;
  if (agg.beta == 1.0) {
    // Identity with the expectation, bit for bit.
    out.value = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      out.value += w[m] * losses[m];
      out.sensitivity[m] = w[m];
    }
  }
  return out;
}

double aggregate(const RiskAggregator& agg, std::span<const double> losses, std::span<const double> weights) {
  return aggregate_with_sensitivity(agg, losses, weights).value;
}

std::size_t empirical_quantile_index(std::span<const double> values, double level) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("quantile input must be finite");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const auto n = static_cast<double>(values.size());
  std::size_t k = 1;
  while (k < values.size() && static_cast<double>(k) / n < level) ++k;
  // Among equal values the CDF jumps at the first of them.
  std::size_t pos = k - 1;
  while (pos > 0 && values[order[pos - 1]] == values[order[pos]]) --pos;
  return order[pos];
}

double empirical_quantile(std::span<const double> values, double level) {
  return values[empirical_quantile_index(values, level)];
}

double violation_rate(std::span<const Eigen::VectorXd> h_values, const Eigen::VectorXd& lower,
                      const Eigen::VectorXd& upper) {
  if (h_values.empty()) throw std::invalid_argument("violation rate of an empty sample");
  if (lower.size() != upper.size()) throw std::invalid_argument("bound dimensions differ");
  std::size_t violated = 0;
  for (const auto& h : h_values) {
    if (h.size() != lower.size()) throw std::invalid_argument("constraint value dimension mismatch");
    if ((h.array() < lower.array()).any() || (h.array() > upper.array()).any()) ++violated;
  }
  return static_cast<double>(violated) / static_cast<double>(h_values.size());
}

}  // namespace pctl
