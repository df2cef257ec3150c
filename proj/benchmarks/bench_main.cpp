#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pctl/config.hpp"
#include "pctl/risk.hpp"
#include "pctl/solver.hpp"

namespace {

pctl::RunConfig fixture(const char* name) { return pctl::load_config(std::string(PCTL_FIXTURE_DIR) + "/" + name); }

void BM_SimulateEnsemble(benchmark::State& st) {
  const pctl::RunConfig cfg = fixture("hydro_stochastic.json");
  const int paths = static_cast<int>(st.range(0));
  for (auto _ : st) {
    auto e = pctl::simulate_ensemble(cfg.noise(), paths, 8, 3, 1);
    benchmark::DoNotOptimize(e.paths.data());
  }
  st.SetItemsProcessed(st.iterations() * paths);
}
BENCHMARK(BM_SimulateEnsemble)->Arg(100)->Arg(1000)->Arg(10000);

void BM_Cvar(benchmark::State& st) {
  std::mt19937_64 rng(47);
  std::normal_distribution<double> n;
  std::vector<double> losses(st.range(0));
  for (auto& l : losses) l = n(rng);
  const auto agg = pctl::RiskAggregator::cvar(0.1);
  for (auto _ : st) benchmark::DoNotOptimize(pctl::aggregate_with_sensitivity(agg, losses));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_Cvar)->Arg(100)->Arg(1000)->Arg(10000);

// One objective-plus-gradient evaluation, the inner loop of the solver.
void BM_ObjectiveGradient(benchmark::State& st) {
  pctl::RunConfig cfg = fixture("hydro_stochastic.json");
  cfg.solver.scenarios = static_cast<int>(st.range(0));
  const pctl::GenericProblem p = cfg.build_problem();
  const pctl::SolverSettings s = cfg.solver_settings();
  const auto scen = pctl::offline_scenarios(p, s);
  const pctl::SaaInstance inst =
      pctl::make_offline_instance(p, scen, std::vector<pctl::Vector>(scen.size(), p.anchor), s);
  pctl::DecisionRule rule(cfg.basis(), p.state_dim(), p.noise_dim(), p.control_dim(), p.control_box);
  rule.intercept(rule.num_atoms() - 1) = pctl::Vector::Constant(1, 1.5);
  pctl::Vector g;
  for (auto _ : st) benchmark::DoNotOptimize(pctl::saa_objective_with_gradient(inst, rule, g));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_ObjectiveGradient)->Arg(100)->Arg(500)->Arg(2000);

void BM_TreeBaseline(benchmark::State& st) {
  const pctl::RunConfig cfg = fixture("tree_cascade.json");
  const pctl::GenericProblem p = cfg.build_problem();
  for (auto _ : st) benchmark::DoNotOptimize(pctl::solve_tree_baseline(p, cfg.tree_settings()).objective);
}
BENCHMARK(BM_TreeBaseline)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
