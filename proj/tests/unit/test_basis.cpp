#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "pctl/basis.hpp"
#include "support.hpp"

using namespace pctl;

namespace {

PeriodicBasis random_basis(testing::Gen& g) {
  SeasonCalendar cal(g.periods(3, 4));
  std::vector<int> h;
  for (int p : cal.periods()) h.push_back(g.integer(0, p / 2));
  return PeriodicBasis(cal, h);
}

}  // namespace

TEST_SUITE("basis") {
  TEST_CASE("atom counts, Nyquist handling and harmonic limits") {
    // T = 4 with two harmonics: cos/sin at k = 1, cosine only at k = 2.
    const PeriodicBasis b(SeasonCalendar({4}), {2});
    CHECK(b.size() == 4);
    CHECK(b.atoms().back().kind == TimeAtom::Kind::Constant);
    CHECK_THROWS_AS(PeriodicBasis(SeasonCalendar({4}), {3}), std::invalid_argument);
    CHECK_THROWS_AS(PeriodicBasis(SeasonCalendar({4}), {-1}), std::invalid_argument);
    CHECK_THROWS_AS(PeriodicBasis(SeasonCalendar({2, 4}), {1}), std::invalid_argument);
    CHECK(PeriodicBasis(SeasonCalendar({5}), {0}).size() == 1);
  }

  TEST_CASE("harmonics shared with a shorter period belong to that period") {
    // k = 2 on T = 4 equals k = 1 on T = 2.
    const PeriodicBasis b(SeasonCalendar({2, 4}), {1, 2});
    int owned_by_master = 0;
    for (const auto& a : b.atoms()) {
      if (a.component == 1 && a.kind != TimeAtom::Kind::Constant) ++owned_by_master;
    }
    CHECK(owned_by_master == 2);
    CHECK(b.size() == 4);
  }

  TEST_CASE("atom values match closed forms and are periodic") {
    testing::Gen g(1);
    for (int trial = 0; trial < 50; ++trial) {
      const PeriodicBasis b = random_basis(g);
      for (const auto& a : b.atoms()) {
        for (int rep = 0; rep < 20; ++rep) {
          const std::int64_t t = g.integer(-1000, 1000);
          const double angle = 2.0 * std::numbers::pi * a.harmonic * static_cast<double>(t) / a.period;
          const double expect = a.kind == TimeAtom::Kind::Constant ? 1.0
                                : a.kind == TimeAtom::Kind::Cosine ? std::cos(angle)
                                                                   : std::sin(angle);
          CHECK(std::abs(a.value(t) - expect) < 1e-9);
          CHECK(a.value(t) == a.value(t + a.period));
        }
      }
    }
  }

  TEST_CASE("atoms are linearly independent over one master cycle") {
    testing::Gen g(2);
    for (int trial = 0; trial < 50; ++trial) {
      const PeriodicBasis b = random_basis(g);
      const int T = b.calendar().master_period();
      Matrix design(T, b.size());
      for (int t = 0; t < T; ++t) design.row(t) = b.evaluate(t).transpose();
      CHECK(Eigen::ColPivHouseholderQR<Matrix>(design).rank() == b.size());
    }
  }

  TEST_CASE("window basis is a step indicator") {
    const WindowBasis w(5, 3);
    CHECK(w.evaluate(4).isZero());
    CHECK(w.evaluate(6) == Eigen::Vector3d(0, 1, 0));
    CHECK(w.evaluate(8).isZero());
    CHECK_THROWS_AS(WindowBasis(0, 0), std::invalid_argument);
  }

  TEST_CASE("rule parameters round-trip and effective coefficients agree with raw control") {
    testing::Gen g(3);
    for (int trial = 0; trial < 30; ++trial) {
      const PeriodicBasis b = random_basis(g);
      const int nx = g.integer(1, 3), nw = g.integer(0, 2), nu = g.integer(1, 3);
      DecisionRule r(b, nx, nw, nu, {Vector::Constant(nu, -1.0), Vector::Constant(nu, 1.0)});
      const Vector theta = g.vector(r.num_parameters(), -1.0, 1.0);
      r.set_parameters(theta);
      CHECK(r.parameters() == theta);
      for (int rep = 0; rep < 10; ++rep) {
        const std::int64_t t = g.integer(0, 200);
        const Vector x = g.vector(nx, -2.0, 2.0), w = g.vector(nw, -2.0, 2.0);
        Vector z(nx + nw);
        z << x, w;
        const auto [k, G] = r.effective(t);
        CHECK((k + G * z - r.raw_control(t, x, w)).norm() < 1e-12);
        const Vector u = eval_policy(r, t, x, w);
        CHECK(r.box().contains(u));
        CHECK(u == r.box().clamp(r.raw_control(t, x, w)));
      }
    }
  }

  TEST_CASE("eval_policy rejects bad inputs") {
    DecisionRule r(PeriodicBasis(SeasonCalendar({2}), {1}), 1, 0, 1, {Vector::Zero(1), Vector::Ones(1)});
    CHECK_THROWS_AS((void)eval_policy(r, 0, Vector::Constant(1, NAN)), std::invalid_argument);
    CHECK_THROWS_AS((void)eval_policy(r, 0, Vector::Zero(2)), std::invalid_argument);
    CHECK_THROWS_AS(DecisionRule(WindowBasis(0, 1), 1, 0, 1, {Vector::Ones(1), Vector::Zero(1)}),
                    std::invalid_argument);
  }

  TEST_CASE("state decomposition reconstructs trajectories and recovers seasonal parts") {
    const PeriodicBasis b(SeasonCalendar({2, 6}), {1, 2});
    const int T = 6;
    std::vector<std::vector<Vector>> tr(1);
    for (int t = 0; t < 4 * T; ++t) {
      const double weekly = (t % 2 == 0) ? 1.0 : -1.0;
      const double seasonal = 3.0 * std::cos(2.0 * std::numbers::pi * t / 6.0);
      tr[0].push_back(Eigen::Vector2d(weekly + seasonal + 0.01 * t, seasonal));
    }
    const StateDecomposition d = decompose_state(tr, b);
    REQUIRE(d.components[0].size() == 2);
    Matrix total = d.residual[0];
    for (const auto& c : d.components[0]) total += c;
    for (int t = 0; t < 4 * T; ++t) CHECK((total.col(t) - tr[0][t]).norm() < 1e-10);
    // The second coordinate is a pure master-period cosine.
    CHECK(d.components[0][0].row(1).norm() < 1e-10);
    CHECK(d.residual[0].row(1).norm() < 1e-10);
    CHECK(std::abs(d.components[0][0](0, 0) - 1.0) < 0.05);
  }
}
