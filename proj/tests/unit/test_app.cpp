#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pctl/app.hpp"
#include "pctl/io.hpp"
#include "support.hpp"

using namespace pctl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pctl_app_test" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

int run_quiet(CliOptions o) {
  std::ostringstream log;
  return run(o, log);
}

CliOptions command(const std::string& name, const std::string& fixture, const fs::path& out) {
  CliOptions o;
  o.command = name;
  o.config = testing::fixture(fixture);
  o.out = out;
  return o;
}

}  // namespace

TEST_SUITE("app") {
  TEST_CASE("solve-offline writes solution, trajectories and manifest") {
    const fs::path dir = scratch("offline");
    CHECK(run_quiet(command("solve-offline", "hydro_tiny.json", dir)) == kExitOk);
    CHECK(fs::exists(dir / "solution.json"));
    CHECK(fs::exists(dir / "trajectories.csv"));
    const auto m = manifest(dir);
    CHECK(m["exit_code"] == 0);
    CHECK(m["command"] == "solve-offline");
    CHECK(m["seed"] == 11);
    CHECK(m["config_hash"].get<std::string>().size() == 16);
    CHECK(m["config_hash"] == fnv1a_hex(serialize_config(testing::load_fixture("hydro_tiny.json"))));
    CHECK(m["outputs"].size() == 2);
    CHECK(m["wall_time_seconds"].get<double>() >= 0.0);
  }

  TEST_CASE("repeated seeded runs write byte-identical solutions") {
    const fs::path a = scratch("repeat_a");
    const fs::path b = scratch("repeat_b");
    auto o = command("solve-offline", "hydro_stochastic.json", a);
    o.overrides = {"solver.scenarios=25"};
    CHECK(run_quiet(o) == kExitOk);
    o.out = b;
    CHECK(run_quiet(o) == kExitOk);
    CHECK(slurp(a / "solution.json") == slurp(b / "solution.json"));
    o.out = scratch("repeat_c");
    o.seed = 99;
    CHECK(run_quiet(o) == kExitOk);
    CHECK(slurp(*o.out / "solution.json") != slurp(a / "solution.json"));
    CHECK(manifest(*o.out)["seed"] == 99);
  }

  TEST_CASE("exit codes") {
    CHECK(run_quiet(command("evaluate", "hydro_tiny.json", scratch("no_solution"))) == kExitMissingInput);

    auto bad = command("solve-offline", "hydro_tiny.json", scratch("bad_config"));
    bad.overrides = {"solver.bogus=1"};
    CHECK(run_quiet(bad) == kExitConfig);
    CHECK(manifest(*bad.out)["exit_code"] == kExitConfig);

    auto slow = command("solve-offline", "hydro_tiny.json", scratch("limits"));
    slow.overrides = {"solver.max_iterations=1", "solver.picard_rounds=1"};
    CHECK(run_quiet(slow) == kExitNonconvergence);
    CHECK(fs::exists(*slow.out / "solution.json"));

    auto wild = command("simulate-noise", "par1_two_season.json", scratch("divergent"));
    wild.overrides = {"noise.ar=[[5.0, 5.0]]", "simulate.paths=20"};
    CHECK(run_quiet(wild) == kExitDivergence);

    auto missing = command("solve-offline", "hydro_tiny.json", scratch("missing"));
    missing.config = "/nonexistent/config.json";
    CHECK(run_quiet(missing) == kExitMissingInput);

    CHECK(run_quiet(command("launch", "hydro_tiny.json", scratch("unknown"))) == kExitConfig);
  }

  TEST_CASE("simulate-noise CSV reproduces the library ensemble") {
    const fs::path dir = scratch("simulate");
    auto o = command("simulate-noise", "par1_two_season.json", dir);
    o.overrides = {"simulate.paths=300"};
    CHECK(run_quiet(o) == kExitOk);
    const RunConfig cfg = testing::load_fixture("par1_two_season.json", o.overrides);
    const Ensemble e = simulate_ensemble(cfg.noise(), 300, 2, 3, cfg.seed);
    const EnsembleStats lib = periodic_moments(e.paths, cfg.calendar());

    std::ifstream in(dir / "noise.csv");
    std::string line;
    std::getline(in, line);
    double sum[2] = {0, 0};
    int count[2] = {0, 0};
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string f[4];
      for (auto& s : f) std::getline(ss, s, ',');
      const int t = std::stoi(f[1]);
      sum[t % 2] += std::stod(f[3]);
      ++count[t % 2];
    }
    for (int s = 0; s < 2; ++s) CHECK(sum[s] / count[s] == doctest::Approx(lib.mean[s](0)).epsilon(1e-12));
  }

  TEST_CASE("transient, evaluate and baseline commands") {
    const fs::path off = scratch("chain_offline");
    auto o = command("solve-offline", "hydro_stochastic.json", off);
    o.overrides = {"solver.scenarios=30", "evaluate.paths=20", "transient.scenarios=10"};
    REQUIRE(run_quiet(o) == kExitOk);

    auto tr = command("solve-transient", "hydro_stochastic.json", scratch("chain_transient"));
    tr.overrides = o.overrides;
    tr.solution = off / "solution.json";
    tr.state = std::vector<double>{5.0};
    tr.time = 6;
    CHECK(run_quiet(tr) == kExitOk);
    const auto doc = nlohmann::json::parse(slurp(*tr.out / "transient.json"));
    CHECK(doc["time"] == 6);
    CHECK(doc["end_time"] == 8);

    tr.state.reset();
    tr.out = scratch("chain_no_state");
    CHECK(run_quiet(tr) == kExitMissingInput);

    auto ev = command("evaluate", "hydro_stochastic.json", scratch("chain_evaluate"));
    ev.overrides = o.overrides;
    ev.solution = off / "solution.json";
    CHECK(run_quiet(ev) == kExitOk);
    CHECK(fs::exists(*ev.out / "evaluation.json"));

    const fs::path base = scratch("chain_baseline");
    CHECK(run_quiet(command("baseline", "tree_cascade.json", base)) == kExitOk);
    CHECK(fs::exists(base / "baseline.json"));
  }

  TEST_CASE("transient accepts an observed history file") {
    const fs::path off = scratch("history_offline");
    auto o = command("solve-offline", "hydro_stochastic.json", off);
    o.overrides = {"solver.scenarios=30", "transient.scenarios=10", "simulate.paths=1", "simulate.length=8"};
    REQUIRE(run_quiet(o) == kExitOk);
    const fs::path sim = scratch("history_noise");
    auto s = command("simulate-noise", "hydro_stochastic.json", sim);
    s.overrides = o.overrides;
    REQUIRE(run_quiet(s) == kExitOk);

    auto tr = command("solve-transient", "hydro_stochastic.json", scratch("history_transient"));
    tr.overrides = o.overrides;
    tr.solution = off / "solution.json";
    tr.state = std::vector<double>{4.0};
    tr.history = sim / "noise.csv";
    tr.time = 7;
    CHECK(run_quiet(tr) == kExitOk);
    tr.time = 5;
    tr.out = scratch("history_wrong_time");
    CHECK(run_quiet(tr) == kExitMissingInput);
  }
}
