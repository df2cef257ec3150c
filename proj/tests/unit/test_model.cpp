#include <doctest.h>

#include <cmath>

#include "pctl/model.hpp"
#include "support.hpp"

using namespace pctl;

namespace {

// Central differences of the stage loss in u, against its reported gradient.
void check_control_gradient(const GenericProblem& p, testing::Gen& g, std::int64_t t, const Vector& x, const Vector& w,
                            const Vector& u) {
  StageGradient grad;
  (void)p.stage_loss(t, x, w, u, &grad);
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    Vector up = u, dn = u;
    const double h = 1e-6;
    up(j) += h;
    dn(j) -= h;
    const double fd = (p.stage_loss(t, x, w, up, nullptr) - p.stage_loss(t, x, w, dn, nullptr)) / (2 * h);
    CHECK(std::abs(fd - grad.du(j)) < 1e-5 * (1.0 + std::abs(fd)));
  }
  (void)g;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("step dynamics applies the inflow of the arriving phase") {
    LinearStateModel m{Matrix::Identity(1, 1), -Matrix::Identity(1, 1), Matrix::Constant(1, 1, 2.0),
                       {Vector::Constant(1, 10.0), Vector::Constant(1, 20.0)}};
    const Vector x = step_dynamics(m, 3, Vector::Constant(1, 1.0), Vector::Constant(1, 0.5), Vector::Constant(1, 0.25));
    CHECK(x(0) == doctest::Approx(1.0 - 0.5 + 0.5 + 20.0));
    CHECK(step_dynamics(m, -2, Vector::Zero(1), Vector::Zero(1))(0) == 10.0);
    CHECK_THROWS_AS((void)step_dynamics(m, 0, Vector::Constant(1, NAN), Vector::Zero(1)), std::invalid_argument);
  }

  TEST_CASE("consumer surplus is the area under the demand curve") {
    DemandModel dm{PamarModel::scalar_par1(SeasonCalendar({2}), std::vector<double>{0, 0}, std::vector<double>{0, 0}, 0),
                   {2.0, 4.0}};
    // integral_0^e (c - d z) dz
    CHECK(stage_revenue(dm, 0, 10.0, 3.0) == doctest::Approx(10.0 * 3.0 - 9.0));
    CHECK(stage_revenue(dm, 1, 10.0, 3.0) == doctest::Approx(30.0 - 18.0));
    CHECK_THROWS_AS((void)stage_revenue(dm, 0, 1.0, -1.0), std::invalid_argument);
    CHECK(total_power(Eigen::Vector2d(0.9, 0.8), Eigen::Vector2d(1.0, 2.0)) == doctest::Approx(2.5));
  }

  TEST_CASE("tiny hydropower fixture has one reservoir and one turbine") {
    const RunConfig cfg = testing::load_fixture("hydro_tiny.json");
    const GenericProblem p = cfg.build_problem();
    CHECK(p.state_dim() == 1);
    CHECK(p.control_dim() == 1);
    CHECK(p.calendar.master_period() == 4);
    CHECK(p.anchor(0) == 5.0);
    // loss = -(c e - d e^2 / 2)
    CHECK(p.stage_loss(0, Vector::Constant(1, 5.0), Vector::Constant(1, 10.0), Vector::Constant(1, 2.0), nullptr) ==
          doctest::Approx(-(20.0 - 4.0)));
    testing::Gen g(1);
    for (int rep = 0; rep < 20; ++rep) {
      check_control_gradient(p, g, g.integer(0, 3), Vector::Constant(1, 5.0), g.vector(1, 5.0, 12.0),
                             g.vector(1, 0.1, 3.0));
    }
  }

  TEST_CASE("VPP transitions clear the market at every step") {
    const RunConfig cfg = testing::load_fixture("vpp_three_period.json");
    const GenericProblem p = cfg.build_problem();
    const auto& spec = std::get<VppSpec>(cfg.problem);
    testing::Gen g(2);
    for (int rep = 0; rep < 500; ++rep) {
      const std::int64_t t = g.integer(0, 30);
      const Vector x = g.vector(4, 0.0, 10.0);
      const Vector u = p.control_box.clamp(g.vector(4, -12.0, 12.0));
      const Vector w = Eigen::Vector2d(g.uniform(0.0, 8.0), g.uniform(10.0, 60.0));
      const Vector next = step_dynamics(p.dynamics, t + 1, x, u, w);
      CHECK(std::abs(vpp_clearing_residual(spec, t, w, u, next)) < 1e-9);
      CHECK(next(0) == doctest::Approx(spec.battery_efficiency * x(0) - u(0)));
      check_control_gradient(p, g, t, x, w, u);
    }
  }

  TEST_CASE("generic quadratic loss and its gradient") {
    GenericSpec s{
        .A = Matrix::Identity(2, 2),
        .B = Matrix::Identity(2, 2),
        .G = Matrix::Zero(2, 1),
        .inflow = {Vector::Zero(2)},
        .control_lower = Vector::Constant(2, -1.0),
        .control_upper = Vector::Constant(2, 1.0),
        .state_lower = Vector::Constant(2, -5.0),
        .state_upper = Vector::Constant(2, 5.0),
        .alpha = 0.1,
        .risk = RiskAggregator::expectation(),
        .noise = PamarModel::scalar_par1(SeasonCalendar({1}), std::vector<double>{0.0}, std::vector<double>{0.0}, 1.0),
        .loss_state = Eigen::Vector2d(1.0, -1.0),
        .loss_control = Eigen::Vector2d(0.5, 0.0),
        .loss_control_quadratic = Eigen::Matrix2d{{2.0, 0.5}, {0.5, 1.0}},
        .loss_noise_control = Matrix{{1.0, -2.0}},
        .anchor = std::nullopt,
    };
    const GenericProblem p = build_generic(s);
    CHECK(p.anchor.isZero());
    CHECK(p.state_scale == Vector::Constant(2, 10.0));
    testing::Gen g(3);
    for (int rep = 0; rep < 20; ++rep) {
      check_control_gradient(p, g, 0, g.vector(2, -1, 1), g.vector(1, -1, 1), g.vector(2, -1, 1));
    }
    const GenericProblem doubled = scale_losses(p, 2.0);
    const Vector x = Eigen::Vector2d(0.3, 0.1), w = Vector::Constant(1, 0.7), u = Eigen::Vector2d(0.2, -0.4);
    CHECK(doubled.stage_loss(0, x, w, u, nullptr) == doctest::Approx(2.0 * p.stage_loss(0, x, w, u, nullptr)));
  }

  TEST_CASE("problem validation catches inconsistent pieces") {
    GenericProblem p = testing::load_fixture("hydro_tiny.json").build_problem();
    p.state_scale = Vector::Zero(1);
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = testing::load_fixture("hydro_tiny.json").build_problem();
    p.dynamics.inflow.pop_back();
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
}
