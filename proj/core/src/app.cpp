#include "pctl/app.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "json_util.hpp"
#include "pctl/config.hpp"
#include "pctl/error.hpp"
#include "pctl/io.hpp"

#ifndef PCTL_VERSION
#define PCTL_VERSION "0.0.0"
#endif

namespace pctl {

using detail::json;

namespace {

struct Artifacts {
  std::vector<std::string> files;
  json summary = json::object();
  bool converged = true;
};

std::filesystem::path output_dir(const CliOptions& o, const RunConfig& cfg) {
  return o.out.value_or(std::filesystem::path(cfg.output_dir));
}

void write_csv(const std::filesystem::path& file, const std::string& text, Artifacts& a) {
  write_text(file, text);
  a.files.push_back(file.filename().string());
}

// Observed noise from a simulate-noise style CSV (path 0 only).
std::map<std::int64_t, Vector> read_noise_csv(const std::filesystem::path& file, int dim) {
  std::ifstream in(file);
  if (!in) throw MissingInputError("noise history not found: " + file.string());
  std::map<std::int64_t, Vector> rows;
  std::string line;
  std::getline(in, line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[4];
    for (auto& s : f) std::getline(ss, s, ',');
    try {
      if (std::stoll(f[0]) != 0) continue;
      const std::int64_t t = std::stoll(f[1]);
      const int c = std::stoi(f[2]);
      if (c < 0 || c >= dim) throw std::out_of_range("component");
      auto [it, fresh] = rows.try_emplace(t, Vector::Constant(dim, std::numeric_limits<double>::quiet_NaN()));
      it->second(c) = std::stod(f[3]);
    } catch (const std::exception&) {
      throw ConfigError(file.string() + ":" + std::to_string(lineno), "malformed noise history row");
    }
  }
  return rows;
}

TransientRequest build_request(const CliOptions& o, const RunConfig& cfg, const GenericProblem& problem) {
  if (!o.state) throw MissingInputError("solve-transient needs the observed state (--state)");
  const PamarModel& model = problem.noise;
  TransientRequest req;
  req.time = o.time;
  req.end_time = o.time + cfg.transient_horizon();
  req.state = Eigen::Map<const Vector>(o.state->data(), static_cast<Eigen::Index>(o.state->size()));
  if (req.state.size() != problem.state_dim()) {
    throw ConfigError("--state", "expected " + std::to_string(problem.state_dim()) + " values");
  }

  NoisePath observed;
  if (o.history) {
    const auto rows = read_noise_csv(*o.history, model.dim);
    if (rows.empty() || rows.rbegin()->first != o.time) {
      throw MissingInputError("noise history must end with the current time " + std::to_string(o.time));
    }
    std::int64_t expect = rows.begin()->first;
    observed.start_time = expect;
    for (const auto& [t, v] : rows) {
      if (t != expect++ || !v.allFinite()) throw ConfigError(o.history->string(), "noise history has gaps");
      observed.values.push_back(v);
    }
    observed.history = PamarHistory::at_mean(model, observed.start_time);
  } else {
    // No observations: the noise-free mean path after a burn-in.
    const int len = cfg.evaluate.burn_in_cycles * model.period() + 1;
    observed.start_time = o.time - len + 1;
    observed.history = PamarHistory::at_mean(model, observed.start_time);
    observed.values = forecast(model, observed.history, len, observed.start_time);
  }
  observed.innovations = infer_innovations(model, observed.values, observed.history, observed.start_time);
  return transient_request_from_path(observed, observed.length() - 1, req.state, req.end_time);
}

Artifacts solve_offline_cmd(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  Artifacts a;
  const GenericProblem problem = cfg.build_problem();
  const SolverSettings settings = cfg.solver_settings();
  const Solution sol = solve_offline(problem, cfg.basis(), settings);
  write_solution(dir / "solution.json", sol, problem.name);
  a.files.push_back("solution.json");

  const SaaInstance inst = make_offline_instance(problem, sol.scenarios, sol.initial_ensemble, settings);
  std::ostringstream csv;
  const Rollout ro = rollout(inst, sol.rule);
  write_trajectories_csv(csv, ro.paths, 0);
  write_csv(dir / "trajectories.csv", csv.str(), a);

  const Diagnostics& d = sol.diagnostics;
  a.converged = d.converged;
  a.summary = {{"objective", detail::encode(d.objective)}, {"wrap_gap", detail::encode(d.wrap_gap)},
               {"iterations", d.iterations},          {"picard_rounds", d.picard_rounds},
               {"status", d.status}};
  log << "solve-offline: objective " << d.objective << ", wrap gap " << d.wrap_gap << ", " << d.picard_rounds
      << " rounds, " << d.status << "\n";
  return a;
}

Artifacts solve_transient_cmd(const CliOptions& o, const RunConfig& cfg, const std::filesystem::path& dir,
                              std::ostream& log) {
  if (!o.solution) throw MissingInputError("solve-transient needs an offline solution file (--solution)");
  const Solution offline = read_solution(*o.solution);
  const GenericProblem problem = cfg.build_problem();
  const TransientRequest req = build_request(o, cfg, problem);
  const TransientSolution ts = solve_transient(problem, offline, req, cfg.transient_settings());
  write_text(dir / "transient.json", transient_to_json(ts, req));
  Artifacts a;
  a.files.push_back("transient.json");
  a.converged = ts.converged;
  a.summary = {{"objective", detail::encode(ts.objective.total)},
               {"first_control", detail::encode(ts.first_control)},
               {"iterations", ts.iterations}};
  log << "solve-transient: first control [" << ts.first_control.transpose() << "]\n";
  return a;
}

Artifacts evaluate_cmd(const CliOptions& o, const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  if (!o.solution) throw MissingInputError("evaluate needs an offline solution file (--solution)");
  const Solution offline = read_solution(*o.solution);
  const GenericProblem problem = cfg.build_problem();
  const EvaluationReport rep = rolling_evaluate(problem, offline, cfg.evaluation_settings());
  Artifacts a;
  write_text(dir / "evaluation.json", evaluation_to_json(rep));
  a.files.push_back("evaluation.json");
  std::ostringstream csv;
  write_trajectories_csv(csv, rep.trajectories, 0);
  write_csv(dir / "evaluation_trajectories.csv", csv.str(), a);
  a.summary = {{"welfare_per_cycle", rep.welfare_per_cycle},
               {"storage_drift", rep.storage_drift},
               {"max_violation_rate", rep.max_violation_rate}};
  log << "evaluate: " << cfg.evaluate.cycles << " cycles, max violation rate " << rep.max_violation_rate << "\n";
  return a;
}

Artifacts baseline_cmd(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  const GenericProblem problem = cfg.build_problem();
  const TreeResult res = solve_tree_baseline(problem, cfg.tree_settings());
  Artifacts a;
  write_text(dir / "baseline.json", tree_to_json(res));
  a.files.push_back("baseline.json");
  a.summary = {{"objective", detail::encode(res.objective)}, {"nodes", res.nodes}};
  log << "baseline: tree objective " << res.objective << " over " << res.nodes << " nodes\n";
  return a;
}

Artifacts simulate_cmd(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  const PamarModel& model = cfg.noise();
  const int length = cfg.simulate.length > 0 ? cfg.simulate.length : model.period();
  const Ensemble e = simulate_ensemble(model, cfg.simulate.paths, length, cfg.simulate.burn_in_cycles, cfg.seed);
  if (e.diagnostics.diverged) throw DivergenceError("noise process variance grows without bound");
  Artifacts a;
  std::ostringstream csv;
  write_noise_csv(csv, e.paths);
  write_csv(dir / "noise.csv", csv.str(), a);
  a.summary = {{"paths", cfg.simulate.paths},
               {"length", length},
               {"max_variance_growth", detail::encode(e.diagnostics.max_variance_growth)}};
  log << "simulate-noise: " << cfg.simulate.paths << " paths of length " << length << "\n";
  return a;
}

void write_manifest(const std::filesystem::path& dir, const CliOptions& o, const RunConfig* cfg, int code,
                    const std::string& message, const Artifacts& a, double seconds) {
  json m = {{"tool", "pctl"},
            {"version", PCTL_VERSION},
            {"command", o.command},
            {"exit_code", code},
            {"message", message},
            {"wall_time_seconds", seconds},
            {"outputs", a.files},
            {"summary", a.summary},
            {"inputs", {{"config", o.config.string()}, {"time", o.time}}}};
  if (o.solution) m["inputs"]["solution"] = o.solution->string();
  if (o.state) m["inputs"]["state"] = *o.state;
  if (o.history) m["inputs"]["history"] = o.history->string();
  if (cfg != nullptr) {
    const std::string canonical = serialize_config(*cfg);
    m["seed"] = cfg->seed;
    m["config_hash"] = fnv1a_hex(canonical);
    m["config"] = json::parse(canonical);
  }
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

int run(const CliOptions& o, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  std::optional<RunConfig> cfg;
  std::optional<std::filesystem::path> dir = o.out;
  Artifacts artifacts;
  int code = kExitOk;
  std::string message = "ok";
  try {
    std::vector<std::string> overrides = o.overrides;
    if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
    cfg.emplace(load_config(o.config, overrides));
    dir = output_dir(o, *cfg);
    if (o.command == "solve-offline") {
      artifacts = solve_offline_cmd(*cfg, *dir, log);
    } else if (o.command == "solve-transient") {
      artifacts = solve_transient_cmd(o, *cfg, *dir, log);
    } else if (o.command == "evaluate") {
      artifacts = evaluate_cmd(o, *cfg, *dir, log);
    } else if (o.command == "baseline") {
      artifacts = baseline_cmd(*cfg, *dir, log);
    } else if (o.command == "simulate-noise") {
      artifacts = simulate_cmd(*cfg, *dir, log);
    } else {
      throw ConfigError("command", "unknown command '" + o.command + "'");
    }
    if (!artifacts.converged) {
      code = kExitNonconvergence;
      message = "solver did not converge within its limits";
    }
  } catch (const ConfigError& e) {
    code = kExitConfig;
    message = e.what();
  } catch (const MissingInputError& e) {
    code = kExitMissingInput;
    message = e.what();
  } catch (const DivergenceError& e) {
    code = kExitDivergence;
    message = e.what();
  } catch (const std::invalid_argument& e) {
    code = kExitConfig;
    message = e.what();
  } catch (const std::exception& e) {
    code = kExitFailure;
    message = e.what();
  }
  if (code != kExitOk) log << "error: " << message << "\n";
  if (dir) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
      write_manifest(*dir, o, cfg ? &*cfg : nullptr, code, message, artifacts, seconds);
    } catch (const std::exception& e) {
      log << "error: could not write manifest: " << e.what() << "\n";
      if (code == kExitOk) code = kExitFailure;
    }
  }
  return code;
}

}  // namespace pctl
