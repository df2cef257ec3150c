#include <doctest.h>

#include "pctl/error.hpp"
#include "pctl/solver.hpp"
#include "support.hpp"

using namespace pctl;

TEST_SUITE("evaluate") {
  TEST_CASE("report shapes and reproducibility") {
    const RunConfig cfg = testing::load_fixture("hydro_stochastic.json", {"solver.scenarios=30"});
    const GenericProblem p = cfg.build_problem();
    const Solution sol = solve_offline(p, cfg.basis(), cfg.solver_settings());
    EvaluationSettings es = cfg.evaluation_settings();
    es.paths = 50;
    es.cycles = 2;
    const EvaluationReport a = rolling_evaluate(p, sol, es);
    const EvaluationReport b = rolling_evaluate(p, sol, es);
    CHECK(a.welfare_per_cycle.size() == 2);
    CHECK(a.end_of_cycle_mean.size() == 2);
    CHECK(a.storage_drift.size() == 2);
    CHECK(a.violation_rate.size() == 8);
    CHECK(a.trajectories.size() == 50);
    CHECK(a.trajectories[0].states.size() == 9);
    CHECK(a.welfare_per_cycle == b.welfare_per_cycle);

    // Welfare is minus the summed stage losses, averaged over paths.
    double w = 0.0;
    for (const auto& tr : a.trajectories) {
      for (int k = 0; k < 4; ++k) w -= tr.losses[k];
    }
    CHECK(a.welfare_per_cycle[0] == doctest::Approx(w / 50.0));
    for (const auto& tr : a.trajectories) {
      for (const auto& u : tr.controls) CHECK(p.control_box.contains(u));
    }
  }

  TEST_CASE("closed loop with the offline rule reproduces eval_policy") {
    const RunConfig cfg = testing::load_fixture("hydro_tiny.json");
    const GenericProblem p = cfg.build_problem();
    const Solution sol = solve_offline(p, cfg.basis(), cfg.solver_settings());
    EvaluationSettings es = cfg.evaluation_settings();
    es.paths = 1;
    es.cycles = 2;
    const EvaluationReport rep = rolling_evaluate(p, sol, es);
    const auto& tr = rep.trajectories[0];
    for (int k = 0; k < 8; ++k) {
      const Vector w = Vector::Constant(1, p.noise.mean[k % 4](0));
      CHECK(tr.controls[k] == eval_policy(sol.rule, k, tr.states[k], w));
    }
  }

  TEST_CASE("transient-in-the-loop evaluation runs and stays admissible") {
    const RunConfig cfg = testing::load_fixture(
        "hydro_stochastic.json", {"solver.scenarios=30", "transient.scenarios=10", "transient.max_iterations=30"});
    const GenericProblem p = cfg.build_problem();
    const Solution sol = solve_offline(p, cfg.basis(), cfg.solver_settings());
    EvaluationSettings es = cfg.evaluation_settings();
    es.paths = 4;
    es.cycles = 1;
    es.use_transient = true;
    const EvaluationReport rep = rolling_evaluate(p, sol, es);
    for (const auto& tr : rep.trajectories) {
      for (const auto& u : tr.controls) CHECK(p.control_box.contains(u));
    }
  }

  TEST_CASE("missing initial ensemble is a missing input") {
    const RunConfig cfg = testing::load_fixture("hydro_tiny.json");
    const GenericProblem p = cfg.build_problem();
    Solution sol = solve_offline(p, cfg.basis(), cfg.solver_settings());
    sol.initial_ensemble.clear();
    CHECK_THROWS_AS((void)rolling_evaluate(p, sol, cfg.evaluation_settings()), MissingInputError);
  }
}
