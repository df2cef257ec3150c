#include <doctest.h>

#include <cmath>

#include "pctl/solver.hpp"
#include "support.hpp"

using namespace pctl;

TEST_SUITE("tree") {
  TEST_CASE("tree shape and scenario export") {
    const RunConfig cfg = testing::load_fixture("tree_cascade.json", {"baseline.control_grid=7"});
    const TreeResult r = solve_tree_baseline(cfg.build_problem(), cfg.tree_settings());
    CHECK(r.nodes == 3 + 9 + 27);
    CHECK(r.scenarios.size() == 27);
    CHECK(r.first_stage_controls.size() == 3);
    for (std::size_t i = 0; i < r.scenarios.size(); ++i) {
      CHECK(r.scenarios[i].length() == 3);
      CHECK(r.scenario_controls[i].size() == 3);
    }
    // Siblings share their ancestors' values.
    CHECK(r.scenarios[0].values[0] == r.scenarios[1].values[0]);
    CHECK(r.scenarios[0].values[1] == r.scenarios[1].values[1]);
  }

  TEST_CASE("deterministic single branch picks the myopic grid optimum") {
    // Loss per stage is -(c u - u^2); with ample storage the best grid point
    // is the one nearest c / 2.
    const RunConfig cfg = testing::load_fixture(
        "tree_cascade.json", {"noise.innovation_stddev=0.0", "baseline.branching=1", "baseline.control_grid=13"});
    const TreeResult r = solve_tree_baseline(cfg.build_problem(), cfg.tree_settings());
    const double c[] = {5.0, 4.5, 5.5};
    double expect = 0.0;
    for (int k = 0; k < 3; ++k) {
      double best = INFINITY;
      for (int i = 0; i < 13; ++i) {
        const double u = 3.0 * i / 12.0;
        best = std::min(best, -(c[k] * u - u * u));
      }
      expect += best;
    }
    CHECK(r.objective == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("size guards fire before any enumeration") {
    const RunConfig cfg = testing::load_fixture("tree_cascade.json", {"baseline.branching=50", "baseline.depth=5"});
    CHECK_THROWS_AS((void)solve_tree_baseline(cfg.build_problem(), cfg.tree_settings()), std::length_error);
    TreeSettings s = testing::load_fixture("tree_cascade.json").tree_settings();
    s.max_evaluations = 10.0;
    CHECK_THROWS_AS((void)solve_tree_baseline(cfg.build_problem(), s), std::length_error);
  }

  TEST_CASE("infeasible bounds are reported") {
    const RunConfig cfg = testing::load_fixture("tree_cascade.json", {"problem.storage_upper=[4.5, 20.0]"});
    CHECK_THROWS((void)solve_tree_baseline(cfg.build_problem(), cfg.tree_settings()));
  }
}
