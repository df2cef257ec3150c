#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "pctl/error.hpp"
#include "pctl/io.hpp"
#include "support.hpp"

using namespace pctl;

TEST_SUITE("io") {
  TEST_CASE("solution documents round-trip exactly") {
    const RunConfig cfg = testing::load_fixture("hydro_stochastic.json", {"solver.scenarios=20"});
    const GenericProblem p = cfg.build_problem();
    const Solution sol = solve_offline(p, cfg.basis(), cfg.solver_settings());
    const std::string text = solution_to_json(sol, p.name);
    const Solution back = solution_from_json(text);
    CHECK(solution_to_json(back, p.name) == text);
    CHECK(back.rule.parameters() == sol.rule.parameters());
    CHECK(back.initial_ensemble == sol.initial_ensemble);
    CHECK(std::get<PeriodicBasis>(back.rule.basis()) == cfg.basis());
    for (int t = 0; t < 9; ++t) {
      const Vector x = Vector::Constant(1, 0.5 * t);
      const Vector w = Vector::Constant(1, 5.0);
      CHECK(eval_policy(back.rule, t, x, w) == eval_policy(sol.rule, t, x, w));
    }
  }

  TEST_CASE("foreign or damaged documents are rejected") {
    CHECK_THROWS_AS((void)solution_from_json("{\"format\": \"other\"}"), ConfigError);
    CHECK_THROWS_AS((void)solution_from_json("not json"), ConfigError);
    CHECK_THROWS_AS((void)solution_from_json("{\"format\": \"pctl-solution\", \"version\": 1}"), ConfigError);
    CHECK_THROWS_AS((void)read_solution("/nonexistent/solution.json"), MissingInputError);
  }

  TEST_CASE("noise CSV is long format with full precision") {
    const PamarModel m = PamarModel::scalar_par1(SeasonCalendar({2}), std::vector<double>{1.0, 2.0},
                                                 std::vector<double>{0.5, 0.5}, 1.0);
    const Ensemble e = simulate_ensemble(m, 2, 2, 0, 4, 6);
    std::ostringstream out;
    write_noise_csv(out, e.paths);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "path_id,t,component,value");
    int rows = 0;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string f[4];
      for (auto& s : f) std::getline(ss, s, ',');
      const int m_id = std::stoi(f[0]);
      const int t = std::stoi(f[1]);
      CHECK(std::stod(f[3]) == e.paths[m_id].values[t - 6](0));
      ++rows;
    }
    CHECK(rows == 4);
  }

  TEST_CASE("trajectory CSV leaves control columns of the final state empty") {
    PathTrajectory tr;
    tr.states = {Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
    tr.controls = {Vector::Constant(1, 0.5)};
    tr.raw_controls = tr.controls;
    tr.losses = {-3.0};
    std::ostringstream out;
    write_trajectories_csv(out, std::span<const PathTrajectory>(&tr, 1), 4);
    CHECK(out.str() == "path_id,t,x0,u0,loss\n0,4,1,0.5,-3\n0,5,2,,\n");
  }

  TEST_CASE("write_text creates directories") {
    const auto dir = std::filesystem::temp_directory_path() / "pctl_io_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    write_text(dir / "a.txt", "hello");
    CHECK(std::filesystem::file_size(dir / "a.txt") == 5);
    std::filesystem::remove_all(dir.parent_path());
  }
}
