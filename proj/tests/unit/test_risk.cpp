#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pctl/risk.hpp"
#include "support.hpp"

using namespace pctl;

namespace {

// Tail mean by brute force on equally weighted samples whose count makes
// beta * n an integer.
double tail_mean(std::vector<double> v, int k) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return std::accumulate(v.begin(), v.begin() + k, 0.0) / k;
}

}  // namespace

TEST_SUITE("risk") {
  TEST_CASE("CVaR with an integral tail is the mean of the worst samples") {
    testing::Gen g(1);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 10 * g.integer(1, 10);
      const auto v = g.samples(n, -5.0, 5.0);
      for (int k : {1, n / 10, n / 2, n}) {
        const double beta = static_cast<double>(k) / n;
        CHECK(aggregate(RiskAggregator::cvar(beta), v) == doctest::Approx(tail_mean(v, k)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("CVaR is ordered between mean and maximum and monotone in beta") {
    testing::Gen g(2);
    for (int trial = 0; trial < 200; ++trial) {
      const auto v = g.samples(g.integer(1, 60), -3.0, 7.0);
      const double mean = aggregate(RiskAggregator::expectation(), v);
      const double mx = *std::max_element(v.begin(), v.end());
      double prev = mx;
      for (double beta : {0.01, 0.05, 0.2, 0.5, 0.9, 1.0}) {
        const double c = aggregate(RiskAggregator::cvar(beta), v);
        CHECK(c <= prev + 1e-12);
        CHECK(c >= mean - 1e-12);
        CHECK(c <= mx + 1e-12);
        prev = c;
      }
    }
  }

  TEST_CASE("CVaR is translation equivariant and positively homogeneous") {
    testing::Gen g(3);
    for (int trial = 0; trial < 100; ++trial) {
      auto v = g.samples(g.integer(1, 40), -1.0, 1.0);
      const double beta = g.uniform(0.01, 1.0);
      const double a = g.uniform(-10.0, 10.0);
      const double c = g.uniform(0.1, 10.0);
      const double base = aggregate(RiskAggregator::cvar(beta), v);
      auto shifted = v;
      for (auto& x : shifted) x = c * x + a;
      CHECK(aggregate(RiskAggregator::cvar(beta), shifted) == doctest::Approx(c * base + a).epsilon(1e-10));
    }
  }

  TEST_CASE("a weighted sample equals the sample with duplicated atoms") {
    testing::Gen g(4);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = g.integer(1, 12);
      const auto v = g.samples(n, -2.0, 2.0);
      std::vector<int> mult(n);
      std::vector<double> dup;
      int total = 0;
      for (int i = 0; i < n; ++i) {
        mult[i] = g.integer(1, 4);
        total += mult[i];
        for (int k = 0; k < mult[i]; ++k) dup.push_back(v[i]);
      }
      std::vector<double> w(n);
      for (int i = 0; i < n; ++i) w[i] = static_cast<double>(mult[i]) / total;
      const double beta = g.uniform(0.05, 1.0);
      CHECK(aggregate(RiskAggregator::cvar(beta), v, w) ==
            doctest::Approx(aggregate(RiskAggregator::cvar(beta), dup)).epsilon(1e-10));
    }
  }

  TEST_CASE("sensitivities are a probability vector and match finite differences") {
    testing::Gen g(5);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = g.integer(2, 30);
      const auto v = g.samples(n, -4.0, 4.0);
      const double beta = g.uniform(0.05, 1.0);
      const RiskValue r = aggregate_with_sensitivity(RiskAggregator::cvar(beta), v);
      double sum = 0.0;
      for (double s : r.sensitivity) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0 / (beta * n) + 1e-12);
        sum += s;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      // Continuous samples have no ties, so CVaR is linear near v except at
      // the boundary atom; a small one-sided step stays linear.
      const int i = g.integer(0, n - 1);
      auto up = v;
      up[i] += 1e-9;
      const double fd = (aggregate(RiskAggregator::cvar(beta), up) - r.value) / 1e-9;
      CHECK(std::abs(fd - r.sensitivity[i]) < 1e-4 + 1e-3 * std::abs(fd));
    }
  }

  TEST_CASE("beta = 1 is the expectation bit for bit") {
    testing::Gen g(6);
    for (int trial = 0; trial < 100; ++trial) {
      const auto v = g.samples(g.integer(1, 50), -1e3, 1e3);
      CHECK(aggregate(RiskAggregator::cvar(1.0), v) == aggregate(RiskAggregator::expectation(), v));
    }
  }

  TEST_CASE("invalid inputs throw") {
    const std::vector<double> v{1.0, 2.0};
    CHECK_THROWS_AS((void)aggregate(RiskAggregator::cvar(0.0), v), std::invalid_argument);
    CHECK_THROWS_AS((void)aggregate(RiskAggregator::cvar(1.5), v), std::invalid_argument);
    CHECK_THROWS_AS((void)aggregate(RiskAggregator::expectation(), std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS((void)aggregate(RiskAggregator::expectation(), v, std::vector<double>{0.3, 0.3}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)aggregate(RiskAggregator::expectation(), std::vector<double>{1.0, NAN}),
                    std::invalid_argument);
  }

  TEST_CASE("empirical quantile is the lower quantile") {
    const std::vector<double> v{5.0, 1.0, 4.0, 2.0, 3.0};
    CHECK(empirical_quantile(v, 0.0) == 1.0);
    CHECK(empirical_quantile(v, 0.2) == 1.0);
    CHECK(empirical_quantile(v, 0.21) == 2.0);
    CHECK(empirical_quantile(v, 0.95) == 5.0);
    CHECK(empirical_quantile(v, 1.0) == 5.0);
    const std::vector<double> ties{2.0, 1.0, 2.0};
    CHECK(empirical_quantile_index(ties, 1.0) == 0);
  }

  TEST_CASE("violation rate counts samples outside the box") {
    std::vector<Eigen::VectorXd> h{Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(-0.1, 0.5), Eigen::Vector2d(0.5, 2.0),
                                   Eigen::Vector2d(1.0, 0.0)};
    CHECK(violation_rate(h, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 1.0)) == doctest::Approx(0.5));
  }
}
