#include "pctl/io.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json_util.hpp"

namespace pctl {

using detail::decode_matrix;
using detail::decode_number;
using detail::decode_vector;
using detail::encode;
using detail::json;

namespace {

const char* atom_kind(TimeAtom::Kind k) {
  switch (k) {
    case TimeAtom::Kind::Constant:
      return "const";
    case TimeAtom::Kind::Cosine:
      return "cos";
    case TimeAtom::Kind::Sine:
      return "sin";
  }
  return "?";
}

json encode_doubles(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(encode(x));
  return a;
}

json encode_states(const std::vector<Vector>& xs) {
  json a = json::array();
  for (const auto& x : xs) a.push_back(encode(x));
  return a;
}

json encode_stats(const EnsembleStats& s) {
  json means = json::array();
  json covs = json::array();
  for (const auto& m : s.mean) means.push_back(encode(m));
  for (const auto& c : s.covariance) covs.push_back(encode(c));
  return {{"mean", means}, {"covariance", covs}, {"sample_count", s.sample_count}};
}

json encode_objective(const ObjectiveValue& o) {
  return {{"total", encode(o.total)},
          {"risk", encode(o.risk)},
          {"chance_penalty", encode(o.chance_penalty)},
          {"terminal_penalty", encode(o.terminal_penalty)},
          {"terminal_gap", encode(o.wrap_gap)},
          {"stage_risk", encode_doubles(o.stage_risk)},
          {"violation_rate", encode_doubles(o.violation_rate)}};
}

const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "missing field");
  return j.at(key);
}

std::vector<Vector> decode_states(const json& j, const std::string& path, Eigen::Index dim) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of states");
  std::vector<Vector> xs;
  for (std::size_t i = 0; i < j.size(); ++i) xs.push_back(decode_vector(j[i], path + "." + std::to_string(i), dim));
  return xs;
}

std::vector<double> decode_doubles(const json& j, const std::string& path) {
  const Vector v = decode_vector(j, path);
  return {v.data(), v.data() + v.size()};
}

}  // namespace

std::string solution_to_json(const Solution& sol, const std::string& problem_name) {
  const auto* basis = std::get_if<PeriodicBasis>(&sol.rule.basis());
  if (basis == nullptr) throw std::invalid_argument("only periodic rules are stored as solutions");
  const DecisionRule& r = sol.rule;

  json atoms = json::array();
  for (const auto& a : basis->atoms()) {
    atoms.push_back({{"kind", atom_kind(a.kind)}, {"component", a.component}, {"period", a.period},
                     {"harmonic", a.harmonic}});
  }
  json intercepts = json::array();
  json gains = json::array();
  for (int m = 0; m < r.num_atoms(); ++m) {
    intercepts.push_back(encode(r.intercept(m)));
    gains.push_back(encode(r.gain(m)));
  }
  const Diagnostics& d = sol.diagnostics;
  json doc = {
      {"format", kSolutionFormat},
      {"version", kSolutionVersion},
      {"problem", problem_name},
      {"seed", sol.seed},
      {"calendar", {{"periods", basis->calendar().periods()}}},
      {"basis", {{"harmonics", basis->harmonics()}, {"atoms", atoms}}},
      {"rule",
       {{"state_dim", r.state_dim()},
        {"noise_dim", r.noise_dim()},
        {"control_dim", r.control_dim()},
        {"control_lower", encode(r.box().lower)},
        {"control_upper", encode(r.box().upper)},
        {"intercepts", intercepts},
        {"gains", gains}}},
      {"initial_ensemble", encode_states(sol.initial_ensemble)},
      {"terminal_ensemble", encode_states(sol.terminal_ensemble)},
      {"state_stats", encode_stats(sol.state_stats)},
      {"diagnostics",
       {{"objective", encode(d.objective)},
        {"risk", encode(d.risk)},
        {"chance_penalty", encode(d.chance_penalty)},
        {"wrap_penalty", encode(d.wrap_penalty)},
        {"wrap_gap", encode(d.wrap_gap)},
        {"mean_shift", encode(d.mean_shift)},
        {"violation_rate", encode_doubles(d.violation_rate)},
        {"iterations", d.iterations},
        {"picard_rounds", d.picard_rounds},
        {"converged", d.converged},
        {"status", d.status},
        {"noise_variance_growth", encode(d.noise_variance_growth)},
        {"round_objectives", encode_doubles(d.round_objectives)},
        {"objective_trace", encode_doubles(d.objective_trace)}}},
  };
  return doc.dump(2) + "\n";
}

Solution solution_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("solution file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kSolutionFormat) {
    throw ConfigError("format", "not a pctl solution document");
  }
  if (field(doc, "version", "") != kSolutionVersion) throw ConfigError("version", "unsupported solution version");

  try {
    const json& cal = field(doc, "calendar", "");
    const SeasonCalendar calendar(field(cal, "periods", "calendar").get<std::vector<int>>());
    const json& b = field(doc, "basis", "");
    PeriodicBasis basis(calendar, field(b, "harmonics", "basis").get<std::vector<int>>());
    const json& jr = field(doc, "rule", "");
    const int nx = field(jr, "state_dim", "rule").get<int>();
    const int nw = field(jr, "noise_dim", "rule").get<int>();
    const int nu = field(jr, "control_dim", "rule").get<int>();
    ControlBox box{decode_vector(field(jr, "control_lower", "rule"), "rule.control_lower", nu),
                   decode_vector(field(jr, "control_upper", "rule"), "rule.control_upper", nu)};
    DecisionRule rule(basis, nx, nw, nu, box);
    const json& ki = field(jr, "intercepts", "rule");
    const json& kg = field(jr, "gains", "rule");
    if (!ki.is_array() || !kg.is_array() || static_cast<int>(ki.size()) != rule.num_atoms() ||
        static_cast<int>(kg.size()) != rule.num_atoms()) {
      throw ConfigError("rule", "coefficient count does not match the basis");
    }
    for (int m = 0; m < rule.num_atoms(); ++m) {
      const std::string idx = std::to_string(m);
      rule.intercept(m) = decode_vector(ki[m], "rule.intercepts." + idx, nu);
      rule.gain(m) = decode_matrix(kg[m], "rule.gains." + idx, nu, nx + nw);
    }

    Solution sol{std::move(rule), {}, {}, {}, {}, {}, field(doc, "seed", "").get<std::uint64_t>()};
    sol.initial_ensemble = decode_states(field(doc, "initial_ensemble", ""), "initial_ensemble", nx);
    sol.terminal_ensemble = decode_states(field(doc, "terminal_ensemble", ""), "terminal_ensemble", nx);
    const json& st = field(doc, "state_stats", "");
    sol.state_stats.mean = decode_states(field(st, "mean", "state_stats"), "state_stats.mean", nx);
    const json& covs = field(st, "covariance", "state_stats");
    for (std::size_t i = 0; i < covs.size(); ++i) {
      sol.state_stats.covariance.push_back(decode_matrix(covs[i], "state_stats.covariance." + std::to_string(i), nx, nx));
    }
    sol.state_stats.sample_count = field(st, "sample_count", "state_stats").get<std::int64_t>();

    const json& jd = field(doc, "diagnostics", "");
    Diagnostics& d = sol.diagnostics;
    d.objective = decode_number(field(jd, "objective", "diagnostics"), "diagnostics.objective");
    d.risk = decode_number(field(jd, "risk", "diagnostics"), "diagnostics.risk");
    d.chance_penalty = decode_number(field(jd, "chance_penalty", "diagnostics"), "diagnostics.chance_penalty");
    d.wrap_penalty = decode_number(field(jd, "wrap_penalty", "diagnostics"), "diagnostics.wrap_penalty");
    d.wrap_gap = decode_number(field(jd, "wrap_gap", "diagnostics"), "diagnostics.wrap_gap");
    d.mean_shift = decode_number(field(jd, "mean_shift", "diagnostics"), "diagnostics.mean_shift");
    d.violation_rate = decode_doubles(field(jd, "violation_rate", "diagnostics"), "diagnostics.violation_rate");
    d.iterations = field(jd, "iterations", "diagnostics").get<int>();
    d.picard_rounds = field(jd, "picard_rounds", "diagnostics").get<int>();
    d.converged = field(jd, "converged", "diagnostics").get<bool>();
    d.status = field(jd, "status", "diagnostics").get<std::string>();
    d.noise_variance_growth =
        decode_number(field(jd, "noise_variance_growth", "diagnostics"), "diagnostics.noise_variance_growth");
    d.round_objectives = decode_doubles(field(jd, "round_objectives", "diagnostics"), "diagnostics.round_objectives");
    d.objective_trace = decode_doubles(field(jd, "objective_trace", "diagnostics"), "diagnostics.objective_trace");
    return sol;
  } catch (const json::exception& e) {
    throw ConfigError("", std::string("malformed solution document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", std::string("inconsistent solution document: ") + e.what());
  }
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + file.string());
}

void write_solution(const std::filesystem::path& file, const Solution& solution, const std::string& problem_name) {
  write_text(file, solution_to_json(solution, problem_name));
}

Solution read_solution(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingInputError("solution file not found: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return solution_from_json(buf.str());
}

void write_noise_csv(std::ostream& out, std::span<const NoisePath> paths) {
  out << "path_id,t,component,value\n";
  out << std::setprecision(17);
  for (std::size_t m = 0; m < paths.size(); ++m) {
    const NoisePath& p = paths[m];
    for (int k = 0; k < p.length(); ++k) {
      for (Eigen::Index j = 0; j < p.values[k].size(); ++j) {
        out << m << ',' << p.start_time + k << ',' << j << ',' << p.values[k](j) << '\n';
      }
    }
  }
}

void write_trajectories_csv(std::ostream& out, std::span<const PathTrajectory> paths, std::int64_t start_time) {
  if (paths.empty()) return;
  const auto nx = paths.front().states.front().size();
  const auto nu = paths.front().controls.empty() ? 0 : paths.front().controls.front().size();
  out << "path_id,t";
  for (Eigen::Index j = 0; j < nx; ++j) out << ",x" << j;
  for (Eigen::Index j = 0; j < nu; ++j) out << ",u" << j;
  out << ",loss\n";
  out << std::setprecision(17);
  for (std::size_t m = 0; m < paths.size(); ++m) {
    const PathTrajectory& tr = paths[m];
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      out << m << ',' << start_time + static_cast<std::int64_t>(k);
      for (Eigen::Index j = 0; j < nx; ++j) out << ',' << tr.states[k](j);
      const bool has_control = k < tr.controls.size();
      for (Eigen::Index j = 0; j < nu; ++j) {
        out << ',';
        if (has_control) out << tr.controls[k](j);
      }
      out << ',';
      if (has_control) out << tr.losses[k];
      out << '\n';
    }
  }
}

std::string transient_to_json(const TransientSolution& sol, const TransientRequest& req) {
  json intercepts = json::array();
  json gains = json::array();
  for (int k = 0; k < sol.rule.num_atoms(); ++k) {
    intercepts.push_back(encode(sol.rule.intercept(k)));
    gains.push_back(encode(sol.rule.gain(k)));
  }
  json doc = {{"format", "pctl-transient"},
              {"version", 1},
              {"time", req.time},
              {"end_time", req.end_time},
              {"state", encode(req.state)},
              {"current_noise", encode(req.current_noise)},
              {"first_control", encode(sol.first_control)},
              {"objective", encode_objective(sol.objective)},
              {"iterations", sol.iterations},
              {"converged", sol.converged},
              {"rule", {{"intercepts", intercepts}, {"gains", gains}}},
              {"objective_trace", encode_doubles(sol.objective_trace)}};
  return doc.dump(2) + "\n";
}

std::string tree_to_json(const TreeResult& res) {
  json doc = {{"format", "pctl-tree"},
              {"version", 1},
              {"objective", encode(res.objective)},
              {"nodes", res.nodes},
              {"first_stage_controls", encode_states(res.first_stage_controls)},
              {"leaves", res.scenarios.size()}};
  return doc.dump(2) + "\n";
}

std::string evaluation_to_json(const EvaluationReport& rep) {
  json doc = {{"format", "pctl-evaluation"},
              {"version", 1},
              {"welfare_per_cycle", encode_doubles(rep.welfare_per_cycle)},
              {"end_of_cycle_mean", encode_states(rep.end_of_cycle_mean)},
              {"storage_drift", encode_doubles(rep.storage_drift)},
              {"state_stats", encode_stats(rep.state_stats)},
              {"violation_rate", encode_doubles(rep.violation_rate)},
              {"max_violation_rate", encode(rep.max_violation_rate)}};
  return doc.dump(2) + "\n";
}

}  // namespace pctl
