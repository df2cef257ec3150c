#include <doctest.h>

#include "pctl/error.hpp"
#include "pctl/solver.hpp"
#include "support.hpp"

using namespace pctl;

TEST_SUITE("solver") {
  TEST_CASE("settings validation") {
    SolverSettings s;
    CHECK_NOTHROW(s.validate());
    s.step_shrink = 1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SolverSettings{};
    s.scenarios = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SolverSettings{};
    s.chance_weight = -1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }

  TEST_CASE("accepted objective values never increase") {
    const RunConfig cfg = testing::load_fixture("hydro_stochastic.json", {"solver.scenarios=40"});
    const GenericProblem p = cfg.build_problem();
    SolverSettings s = cfg.solver_settings();
    s.max_iterations = 200;
    const auto scen = offline_scenarios(p, s);
    const SaaInstance inst = make_offline_instance(p, scen, std::vector<Vector>(scen.size(), p.anchor), s);
    DecisionRule r(cfg.basis(), 1, 1, 1, p.control_box);
    r.intercept(r.num_atoms() - 1)(0) = 1.5;
    const double start = saa_objective(inst, r).total;
    const OptimizeResult res = optimize_rule(inst, r, s);
    REQUIRE(res.trace.size() >= 2);
    CHECK(res.trace.front() == start);
    for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1]);
    CHECK(res.trace.back() < start);
    CHECK(saa_objective(inst, res.rule).total == doctest::Approx(res.trace.back()));
  }

  TEST_CASE("offline solve is deterministic for a seed") {
    const RunConfig cfg = testing::load_fixture("hydro_stochastic.json", {"solver.scenarios=30"});
    const GenericProblem p = cfg.build_problem();
    const Solution a = solve_offline(p, cfg.basis(), cfg.solver_settings());
    const Solution b = solve_offline(p, cfg.basis(), cfg.solver_settings());
    CHECK(a.rule.parameters() == b.rule.parameters());
    CHECK(a.diagnostics.objective_trace == b.diagnostics.objective_trace);
    SolverSettings other = cfg.solver_settings();
    other.seed += 1;
    const Solution c = solve_offline(p, cfg.basis(), other);
    CHECK(c.rule.parameters() != a.rule.parameters());
  }

  TEST_CASE("tiny deterministic instance closes the cycle") {
    const RunConfig cfg = testing::load_fixture("hydro_tiny.json");
    const GenericProblem p = cfg.build_problem();
    const Solution sol = solve_offline(p, cfg.basis(), cfg.solver_settings());
    CHECK(sol.diagnostics.converged);
    CHECK(sol.diagnostics.status == "converged");
    CHECK(sol.diagnostics.wrap_gap < 1e-2);
    CHECK(sol.state_stats.mean.size() == 4);
    CHECK(std::abs(sol.terminal_ensemble[0](0) - sol.initial_ensemble[0](0)) < 0.1);
    const ObjectiveValue again = reevaluate(p, sol, cfg.solver_settings());
    CHECK(again.total == doctest::Approx(sol.diagnostics.objective).epsilon(1e-12));
    CHECK(sol.diagnostics.round_objectives.size() == static_cast<std::size_t>(sol.diagnostics.picard_rounds));
  }

  TEST_CASE("limits are reported rather than hidden") {
    const RunConfig cfg =
        testing::load_fixture("hydro_tiny.json", {"solver.max_iterations=1", "solver.picard_rounds=1"});
    const Solution sol = solve_offline(cfg.build_problem(), cfg.basis(), cfg.solver_settings());
    CHECK_FALSE(sol.diagnostics.converged);
    CHECK(sol.diagnostics.status != "converged");
  }

  TEST_CASE("finite-horizon mode runs a single round without a terminal target") {
    const RunConfig cfg = testing::load_fixture("hydro_tiny.json", {"solver.periodic=false"});
    const GenericProblem p = cfg.build_problem();
    const Solution sol = solve_offline(p, cfg.basis(), cfg.solver_settings());
    CHECK(sol.diagnostics.picard_rounds == 1);
    CHECK(sol.diagnostics.wrap_penalty == 0.0);
    const SaaInstance inst = make_offline_instance(p, sol.scenarios, sol.initial_ensemble, cfg.solver_settings());
    CHECK_FALSE(inst.terminal_target.has_value());
    // Without the wrap-around term the water is sold off: storage ends lower.
    CHECK(sol.terminal_ensemble[0](0) < sol.initial_ensemble[0](0) - 1.0);
  }

  TEST_CASE("explosive noise aborts the offline solve") {
    const RunConfig cfg = testing::load_fixture(
        "hydro_tiny.json", {"noise.ar=[5.0]", "noise.innovation_stddev=1.0", "solver.burn_in_cycles=3",
                            "solver.scenarios=20"});
    CHECK_THROWS_AS((void)solve_offline(cfg.build_problem(), cfg.basis(), cfg.solver_settings()), DivergenceError);
  }

  TEST_CASE("basis calendar must match the problem") {
    const RunConfig cfg = testing::load_fixture("hydro_tiny.json");
    CHECK_THROWS_AS(
        (void)solve_offline(cfg.build_problem(), PeriodicBasis(SeasonCalendar({2}), {1}), cfg.solver_settings()),
        std::invalid_argument);
  }
}
