#include <doctest.h>

#include "pctl/error.hpp"
#include "pctl/solver.hpp"
#include "support.hpp"

using namespace pctl;

namespace {

struct Setup {
  RunConfig cfg;
  GenericProblem problem;
  Solution offline;
};

Setup solved(const std::string& fixture, std::vector<std::string> overrides = {}) {
  RunConfig cfg = testing::load_fixture(fixture, std::move(overrides));
  GenericProblem p = cfg.build_problem();
  Solution sol = solve_offline(p, cfg.basis(), cfg.solver_settings());
  return {std::move(cfg), std::move(p), std::move(sol)};
}

}  // namespace

TEST_SUITE("transient") {
  TEST_CASE("request built from a path carries the current value and later history") {
    const RunConfig cfg = testing::load_fixture("hydro_stochastic.json");
    const PamarModel& m = cfg.noise();
    const NoisePath path = simulate_path(m, 8, PamarHistory::zeros(m), 3, 10);
    const TransientRequest req = transient_request_from_path(path, 5, Vector::Constant(1, 4.0), 17);
    CHECK(req.time == 15);
    CHECK(req.end_time == 17);
    CHECK(req.current_noise == path.values[5]);
    CHECK(req.history.values.front() == path.values[5]);
    CHECK_THROWS_AS((void)transient_request_from_path(path, 8, Vector::Zero(1), 20), std::out_of_range);
  }

  TEST_CASE("transient first control is admissible and reproducible") {
    const Setup s = solved("hydro_stochastic.json", {"solver.scenarios=40"});
    const RunConfig& cfg = s.cfg;
    const PamarModel& m = cfg.noise();
    const NoisePath path = simulate_path(m, 4, PamarHistory::at_mean(m, 0), 5, 0);
    const TransientRequest req = transient_request_from_path(path, 2, Vector::Constant(1, 6.0), 4);
    const TransientSolution a = solve_transient(s.problem, s.offline, req, cfg.transient_settings());
    const TransientSolution b = solve_transient(s.problem, s.offline, req, cfg.transient_settings());
    CHECK(s.problem.control_box.contains(a.first_control));
    CHECK(a.first_control == b.first_control);
    CHECK(a.objective.total <= a.objective_trace.front());
  }

  TEST_CASE("window must fit in one period and the offline solution must be complete") {
    const Setup s = solved("hydro_tiny.json");
    TransientRequest req;
    req.time = 0;
    req.end_time = 9;
    req.state = Vector::Constant(1, 5.0);
    req.current_noise = Vector::Constant(1, 10.0);
    req.history = PamarHistory::zeros(s.cfg.noise());
    CHECK_THROWS_AS((void)solve_transient(s.problem, s.offline, req, s.cfg.transient_settings()),
                    std::invalid_argument);
    req.end_time = 2;
    Solution broken = s.offline;
    broken.state_stats.mean.clear();
    CHECK_THROWS_AS((void)solve_transient(s.problem, broken, req, s.cfg.transient_settings()), MissingInputError);
  }
}
