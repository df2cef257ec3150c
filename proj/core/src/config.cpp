#include "pctl/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace pctl {

using detail::decode_number;
using detail::encode;
using detail::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Object reader that remembers which keys were consumed so that leftovers
// can be reported as unknown.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "expected an object, got " + std::string(j.type_name()));
  }

  const json* opt(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& req(const std::string& key) {
    if (const json* p = opt(key)) return *p;
    throw ConfigError(at(key), "missing required field");
  }

  [[nodiscard]] std::string at(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (used_.count(item.key()) == 0) throw ConfigError(at(item.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double as_number(const json& j, const std::string& path) { return decode_number(j, path); }

double as_finite(const json& j, const std::string& path) { return detail::decode_finite(j, path); }

std::int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer, got " + std::string(j.type_name()));
  return j.get<std::int64_t>();
}

int as_int32(const json& j, const std::string& path) {
  const std::int64_t v = as_int(j, path);
  if (v < -(1LL << 31) || v >= (1LL << 31)) throw ConfigError(path, "integer out of range");
  return static_cast<int>(v);
}

std::uint64_t as_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ConfigError(path, "expected a non-negative integer");
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

bool is_numeric(const json& j) {
  if (j.is_number()) return true;
  if (!j.is_string()) return false;
  const auto& s = j.get_ref<const std::string&>();
  return s == "inf" || s == "+inf" || s == "-inf" || s == "nan";
}

bool all_numeric(const json& j) {
  if (!j.is_array()) return false;
  for (const auto& e : j) {
    if (!is_numeric(e)) return false;
  }
  return true;
}

// Fixed-length vector; a single number broadcasts.
Vector vector_of(const json& j, const std::string& path, Eigen::Index n) {
  if (is_numeric(j)) return Vector::Constant(n, as_number(j, path));
  return detail::decode_vector(j, path, n);
}

// Vector of any length.
Vector free_vector(const json& j, const std::string& path) {
  if (is_numeric(j)) return Vector::Constant(1, as_number(j, path));
  return detail::decode_vector(j, path);
}

// Matrix with inferred shape; a number is 1x1.
Matrix free_matrix(const json& j, const std::string& path) {
  if (is_numeric(j)) return Matrix::Constant(1, 1, as_number(j, path));
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(path, "expected a matrix (array of rows)");
  return detail::decode_matrix(j, path);
}

// Accepts a number (1x1), a row (r == 1), a column (c == 1) or rows.
std::optional<Matrix> try_matrix(const json& j, Eigen::Index r, Eigen::Index c) {
  if (is_numeric(j)) {
    if (r == 1 && c == 1) return Matrix::Constant(1, 1, decode_number(j, ""));
    return std::nullopt;
  }
  if (!j.is_array()) return std::nullopt;
  if (all_numeric(j)) {
    if (r == 1 && static_cast<Eigen::Index>(j.size()) == c) return detail::decode_vector(j, "").transpose();
    if (c == 1 && static_cast<Eigen::Index>(j.size()) == r) return detail::decode_vector(j, "");
    return std::nullopt;
  }
  if (static_cast<Eigen::Index>(j.size()) != r) return std::nullopt;
  for (const auto& row : j) {
    if (!all_numeric(row) || static_cast<Eigen::Index>(row.size()) != c) return std::nullopt;
  }
  return detail::decode_matrix(j, "", r, c);
}

std::vector<Matrix> per_phase_matrix(const json& j, const std::string& path, int T, Eigen::Index r, Eigen::Index c) {
  if (auto m = try_matrix(j, r, c)) return std::vector<Matrix>(T, *m);
  if (j.is_array() && static_cast<int>(j.size()) == T) {
    std::vector<Matrix> out;
    for (int s = 0; s < T; ++s) {
      auto m = try_matrix(j[s], r, c);
      if (!m) {
        throw ConfigError(path + "." + std::to_string(s),
                          "expected a " + std::to_string(r) + "x" + std::to_string(c) + " matrix");
      }
      out.push_back(*m);
    }
    return out;
  }
  throw ConfigError(path, "expected one " + std::to_string(r) + "x" + std::to_string(c) + " matrix or " +
                              std::to_string(T) + " of them (one per phase)");
}

std::vector<Vector> per_phase_vector(const json& j, const std::string& path, int T, Eigen::Index n) {
  if (is_numeric(j)) {
    if (n != 1) throw ConfigError(path, "a single number only works for one-dimensional entries");
    return std::vector<Vector>(T, Vector::Constant(1, as_number(j, path)));
  }
  if (!j.is_array()) throw ConfigError(path, "expected a vector or a per-phase table");
  if (all_numeric(j)) {
    if (n == 1 && static_cast<int>(j.size()) == T) {
      std::vector<Vector> out;
      for (int s = 0; s < T; ++s) out.push_back(Vector::Constant(1, as_number(j[s], path + "." + std::to_string(s))));
      return out;
    }
    if (static_cast<Eigen::Index>(j.size()) == n) return std::vector<Vector>(T, detail::decode_vector(j, path, n));
    throw ConfigError(path, "expected " + std::to_string(n) + " entries or " + std::to_string(T) + " per-phase rows");
  }
  if (static_cast<int>(j.size()) != T) {
    throw ConfigError(path, "per-phase table needs " + std::to_string(T) + " rows, got " + std::to_string(j.size()));
  }
  std::vector<Vector> out;
  for (int s = 0; s < T; ++s) out.push_back(vector_of(j[s], path + "." + std::to_string(s), n));
  return out;
}

std::vector<double> per_phase_scalar(const json& j, const std::string& path, int T) {
  std::vector<double> out;
  for (const auto& v : per_phase_vector(j, path, T, 1)) out.push_back(v(0));
  return out;
}

json encode_phases(const std::vector<Vector>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(encode(x));
  return a;
}

json encode_phases(const std::vector<Matrix>& v) {
  json a = json::array();
  for (const auto& m : v) a.push_back(encode(m));
  return a;
}

json encode_phases(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(encode(x));
  return a;
}

// --- sections --------------------------------------------------------------

PamarModel parse_noise(const json& j, const SeasonCalendar& cal, const std::string& path) {
  Obj o(j, path);
  const int T = cal.master_period();
  int dim = 1;
  if (const json* d = o.opt("dim")) dim = as_int32(*d, o.at("dim"));
  if (dim < 1) throw ConfigError(o.at("dim"), "dimension must be positive");

  const json* ar = o.opt("ar");
  const json* ma = o.opt("ma");
  if (ar != nullptr && !ar->is_array()) throw ConfigError(o.at("ar"), "expected a list with one entry per lag");
  if (ma != nullptr && !ma->is_array()) throw ConfigError(o.at("ma"), "expected a list with one entry per lag");
  const int p = ar == nullptr ? 0 : static_cast<int>(ar->size());
  const int q = ma == nullptr ? 0 : static_cast<int>(ma->size());

  PamarModel model(cal, dim, p, q);
  model.mean = per_phase_vector(o.req("mean"), o.at("mean"), T, dim);
  for (int i = 0; i < p; ++i) {
    model.ar[i] = per_phase_matrix((*ar)[i], o.at("ar") + "." + std::to_string(i), T, dim, dim);
  }
  for (int i = 0; i < q; ++i) {
    model.ma[i + 1] = per_phase_matrix((*ma)[i], o.at("ma") + "." + std::to_string(i), T, dim, dim);
  }
  if (const json* m0 = o.opt("ma0")) model.ma[0] = per_phase_matrix(*m0, o.at("ma0"), T, dim, dim);
  if (const json* im = o.opt("innovation_mean")) {
    model.innovation_mean = per_phase_vector(*im, o.at("innovation_mean"), T, dim);
  }
  model.innovation_stddev = vector_of(o.req("innovation_stddev"), o.at("innovation_stddev"), dim);
  o.finish();
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return model;
}

json noise_to_json(const PamarModel& m) {
  json ar = json::array();
  for (const auto& lag : m.ar) ar.push_back(encode_phases(lag));
  json ma = json::array();
  for (std::size_t i = 1; i < m.ma.size(); ++i) ma.push_back(encode_phases(m.ma[i]));
  return {{"dim", m.dim},
          {"mean", encode_phases(m.mean)},
          {"ar", ar},
          {"ma", ma},
          {"ma0", encode_phases(m.ma[0])},
          {"innovation_mean", encode_phases(m.innovation_mean)},
          {"innovation_stddev", encode(m.innovation_stddev)}};
}

RiskAggregator parse_risk(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j == "expectation") return RiskAggregator::expectation();
    throw ConfigError(path, "unknown risk measure '" + j.get<std::string>() + "'");
  }
  Obj o(j, path);
  const std::string kind = as_string(o.req("kind"), o.at("kind"));
  RiskAggregator r;
  if (kind == "expectation") {
    r = RiskAggregator::expectation();
  } else if (kind == "cvar") {
    const double beta = as_finite(o.req("beta"), o.at("beta"));
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError(o.at("beta"), "CVaR tail fraction must lie in (0, 1]");
    r = RiskAggregator::cvar(beta);
  } else {
    throw ConfigError(o.at("kind"), "unknown risk measure '" + kind + "' (expected expectation or cvar)");
  }
  o.finish();
  return r;
}

json risk_to_json(const RiskAggregator& r) {
  if (r.kind == RiskAggregator::Kind::Expectation) return {{"kind", "expectation"}};
  return {{"kind", "cvar"}, {"beta", r.beta}};
}

double read_alpha(Obj& o) {
  const double alpha = o.opt("alpha") ? as_finite(*o.opt("alpha"), o.at("alpha")) : 0.05;
  if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError(o.at("alpha"), "violation level must lie in (0, 0.5)");
  return alpha;
}

HydropowerSpec parse_hydropower(Obj& o, const PamarModel& noise) {
  const int T = noise.period();
  const Matrix A = free_matrix(o.req("A"), o.at("A"));
  const auto n = A.rows();
  if (A.cols() != n) throw ConfigError(o.at("A"), "reservoir matrix must be square");
  const Matrix B = free_matrix(o.req("B"), o.at("B"));
  if (B.rows() != n) throw ConfigError(o.at("B"), "turbine matrix needs one row per reservoir");
  const auto k = B.cols();
  if (noise.dim != 1) throw ConfigError("noise.dim", "hydropower demand intercept is scalar");

  HydropowerSpec s{
      .A = A,
      .B = B,
      .inflow = per_phase_vector(o.req("inflow"), o.at("inflow"), T, n),
      .efficiency = vector_of(o.req("efficiency"), o.at("efficiency"), k),
      .control_lower = vector_of(o.req("control_lower"), o.at("control_lower"), k),
      .control_upper = vector_of(o.req("control_upper"), o.at("control_upper"), k),
      .storage_lower = vector_of(o.req("storage_lower"), o.at("storage_lower"), n),
      .storage_upper = vector_of(o.req("storage_upper"), o.at("storage_upper"), n),
      .demand = {noise, per_phase_scalar(o.req("demand_slope"), o.at("demand_slope"), T)},
      .alpha = read_alpha(o),
      .risk = o.opt("risk") ? parse_risk(*o.opt("risk"), o.at("risk")) : RiskAggregator::expectation(),
      .initial_storage = std::nullopt,
  };
  if (const json* x0 = o.opt("initial_storage")) s.initial_storage = vector_of(*x0, o.at("initial_storage"), n);
  return s;
}

json hydropower_to_json(const HydropowerSpec& s) {
  json j = {{"type", "hydropower"},
            {"A", encode(s.A)},
            {"B", encode(s.B)},
            {"inflow", encode_phases(s.inflow)},
            {"efficiency", encode(s.efficiency)},
            {"control_lower", encode(s.control_lower)},
            {"control_upper", encode(s.control_upper)},
            {"storage_lower", encode(s.storage_lower)},
            {"storage_upper", encode(s.storage_upper)},
            {"demand_slope", encode_phases(s.demand.slope)},
            {"alpha", s.alpha},
            {"risk", risk_to_json(s.risk)}};
  if (s.initial_storage) j["initial_storage"] = encode(*s.initial_storage);
  return j;
}

VppSpec parse_vpp(Obj& o, const PamarModel& noise) {
  const int T = noise.period();
  if (noise.dim != 2) throw ConfigError("noise.dim", "VPP market process has two components (availability, price)");
  auto num = [&](const char* key) { return as_finite(o.req(key), o.at(key)); };
  std::optional<double> initial_energy;
  if (const json* e = o.opt("initial_energy")) initial_energy = as_finite(*e, o.at("initial_energy"));
  return VppSpec{
      .battery_capacity = num("battery_capacity"),
      .battery_efficiency = num("battery_efficiency"),
      .battery_max_charge = num("battery_max_charge"),
      .battery_max_discharge = num("battery_max_discharge"),
      .initial_energy = initial_energy,
      .conventional_min = num("conventional_min"),
      .conventional_max = num("conventional_max"),
      .conventional_cost = num("conventional_cost"),
      .curtailment_max = num("curtailment_max"),
      .line_limit = num("line_limit"),
      .local_demand = per_phase_scalar(o.req("local_demand"), o.at("local_demand"), T),
      .day_ahead_price = per_phase_scalar(o.req("day_ahead_price"), o.at("day_ahead_price"), T),
      .alpha = read_alpha(o),
      .risk = o.opt("risk") ? parse_risk(*o.opt("risk"), o.at("risk")) : RiskAggregator::expectation(),
      .market = noise,
  };
}

json vpp_to_json(const VppSpec& s) {
  json j = {{"type", "vpp"},
            {"battery_capacity", s.battery_capacity},
            {"battery_efficiency", s.battery_efficiency},
            {"battery_max_charge", s.battery_max_charge},
            {"battery_max_discharge", s.battery_max_discharge},
            {"conventional_min", s.conventional_min},
            {"conventional_max", s.conventional_max},
            {"conventional_cost", s.conventional_cost},
            {"curtailment_max", s.curtailment_max},
            {"line_limit", s.line_limit},
            {"local_demand", encode_phases(s.local_demand)},
            {"day_ahead_price", encode_phases(s.day_ahead_price)},
            {"alpha", s.alpha},
            {"risk", risk_to_json(s.risk)}};
  if (s.initial_energy) j["initial_energy"] = *s.initial_energy;
  return j;
}

GenericSpec parse_generic(Obj& o, const PamarModel& noise) {
  const int T = noise.period();
  const Matrix A = free_matrix(o.req("A"), o.at("A"));
  const auto n = A.rows();
  if (A.cols() != n) throw ConfigError(o.at("A"), "state matrix must be square");
  const Matrix B = free_matrix(o.req("B"), o.at("B"));
  if (B.rows() != n) throw ConfigError(o.at("B"), "control matrix needs one row per state");
  const auto k = B.cols();
  const auto nw = noise.dim;
  GenericSpec s{
      .A = A,
      .B = B,
      .G = Matrix::Zero(n, nw),
      .inflow = per_phase_vector(o.req("inflow"), o.at("inflow"), T, n),
      .control_lower = vector_of(o.req("control_lower"), o.at("control_lower"), k),
      .control_upper = vector_of(o.req("control_upper"), o.at("control_upper"), k),
      .state_lower = vector_of(o.req("state_lower"), o.at("state_lower"), n),
      .state_upper = vector_of(o.req("state_upper"), o.at("state_upper"), n),
      .alpha = read_alpha(o),
      .risk = o.opt("risk") ? parse_risk(*o.opt("risk"), o.at("risk")) : RiskAggregator::expectation(),
      .noise = noise,
      .loss_state = Vector::Zero(n),
      .loss_control = Vector::Zero(k),
      .loss_control_quadratic = Matrix::Zero(k, k),
      .loss_noise_control = Matrix::Zero(nw, k),
      .anchor = std::nullopt,
  };
  auto shaped = [&](const char* key, Eigen::Index r, Eigen::Index c) -> std::optional<Matrix> {
    const json* j = o.opt(key);
    if (j == nullptr) return std::nullopt;
    auto m = try_matrix(*j, r, c);
    if (!m) throw ConfigError(o.at(key), "expected a " + std::to_string(r) + "x" + std::to_string(c) + " matrix");
    return m;
  };
  if (auto G = shaped("G", n, nw)) s.G = *G;
  if (const json* j = o.opt("loss_state")) s.loss_state = vector_of(*j, o.at("loss_state"), n);
  if (const json* j = o.opt("loss_control")) s.loss_control = vector_of(*j, o.at("loss_control"), k);
  if (auto R = shaped("loss_control_quadratic", k, k)) s.loss_control_quadratic = *R;
  if (auto N = shaped("loss_noise_control", nw, k)) s.loss_noise_control = *N;
  if (const json* j = o.opt("anchor")) s.anchor = vector_of(*j, o.at("anchor"), n);
  return s;
}

json generic_to_json(const GenericSpec& s) {
  json j = {{"type", "generic"},
            {"A", encode(s.A)},
            {"B", encode(s.B)},
            {"G", encode(s.G)},
            {"inflow", encode_phases(s.inflow)},
            {"control_lower", encode(s.control_lower)},
            {"control_upper", encode(s.control_upper)},
            {"state_lower", encode(s.state_lower)},
            {"state_upper", encode(s.state_upper)},
            {"alpha", s.alpha},
            {"risk", risk_to_json(s.risk)},
            {"loss_state", encode(s.loss_state)},
            {"loss_control", encode(s.loss_control)},
            {"loss_control_quadratic", encode(s.loss_control_quadratic)},
            {"loss_noise_control", encode(s.loss_noise_control)}};
  if (s.anchor) j["anchor"] = encode(*s.anchor);
  return j;
}

// Reads solver keys present in `o` on top of `base`.
SolverSettings parse_solver_keys(Obj& o, SolverSettings s) {
  auto real = [&](const char* key, double& dst) {
    if (const json* j = o.opt(key)) dst = as_finite(*j, o.at(key));
  };
  auto integer = [&](const char* key, int& dst) {
    if (const json* j = o.opt(key)) dst = as_int32(*j, o.at(key));
  };
  auto flag = [&](const char* key, bool& dst) {
    if (const json* j = o.opt(key)) dst = as_bool(*j, o.at(key));
  };
  real("initial_step", s.initial_step);
  real("step_shrink", s.step_shrink);
  real("min_step", s.min_step);
  integer("max_iterations", s.max_iterations);
  real("chance_weight", s.chance_weight);
  real("wrap_weight", s.wrap_weight);
  integer("picard_rounds", s.picard_rounds);
  real("objective_tolerance", s.objective_tolerance);
  integer("patience", s.patience);
  real("wrap_tolerance", s.wrap_tolerance);
  real("picard_tolerance", s.picard_tolerance);
  integer("scenarios", s.scenarios);
  integer("burn_in_cycles", s.burn_in_cycles);
  flag("periodic", s.periodic);
  flag("noise_feedback", s.noise_feedback);
  if (const json* j = o.opt("anchor")) s.anchor = free_vector(*j, o.at("anchor"));
  return s;
}

json solver_to_json(const SolverSettings& s) {
  json j = {{"initial_step", s.initial_step},
            {"step_shrink", s.step_shrink},
            {"min_step", s.min_step},
            {"max_iterations", s.max_iterations},
            {"chance_weight", s.chance_weight},
            {"wrap_weight", s.wrap_weight},
            {"picard_rounds", s.picard_rounds},
            {"objective_tolerance", s.objective_tolerance},
            {"patience", s.patience},
            {"wrap_tolerance", s.wrap_tolerance},
            {"picard_tolerance", s.picard_tolerance},
            {"scenarios", s.scenarios},
            {"burn_in_cycles", s.burn_in_cycles},
            {"periodic", s.periodic},
            {"noise_feedback", s.noise_feedback}};
  if (s.anchor) j["anchor"] = encode(*s.anchor);
  return j;
}

void check_settings(const SolverSettings& s, const std::string& path) {
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

// Line and column of a byte offset (both 1-based).
std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("", "override '" + spec + "' is not of the form key=value");
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::string path;
  std::stringstream ss(key);
  std::string seg;
  std::vector<std::string> segs;
  while (std::getline(ss, seg, '.')) segs.push_back(seg);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string& s = segs[i];
    if (s.empty()) throw ConfigError(key, "empty path segment in override");
    path = join(path, s);
    const bool last = i + 1 == segs.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(s);
      } catch (const std::exception&) {
        throw ConfigError(path, "expected an array index");
      }
      if (idx >= node->size()) throw ConfigError(path, "array index out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError(path, "cannot descend into a scalar");
      if (!last && !node->contains(s)) (*node)[s] = json::object();
      node = &(*node)[s];
    }
  }
  *node = std::move(value);
}

}  // namespace

const PamarModel& RunConfig::noise() const {
  return std::visit(
      [](const auto& s) -> const PamarModel& {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, HydropowerSpec>) {
          return s.demand.intercept;
        } else if constexpr (std::is_same_v<S, VppSpec>) {
          return s.market;
        } else {
          return s.noise;
        }
      },
      problem);
}

std::string RunConfig::problem_type() const {
  static const char* names[] = {"hydropower", "vpp", "generic"};
  return names[problem.index()];
}

GenericProblem RunConfig::build_problem() const {
  return std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, HydropowerSpec>) {
          return build_hydropower(s);
        } else if constexpr (std::is_same_v<S, VppSpec>) {
          return build_vpp(s);
        } else {
          return build_generic(s);
        }
      },
      problem);
}

PeriodicBasis RunConfig::basis() const { return PeriodicBasis(calendar(), harmonics); }

SolverSettings RunConfig::solver_settings() const {
  SolverSettings s = solver;
  s.seed = seed;
  return s;
}

SolverSettings RunConfig::transient_settings() const {
  SolverSettings s = transient.settings;
  s.seed = derive_seed(seed, 0x7a);
  return s;
}

int RunConfig::transient_horizon() const {
  return transient.horizon > 0 ? transient.horizon : calendar().master_period();
}

EvaluationSettings RunConfig::evaluation_settings() const {
  EvaluationSettings e;
  e.cycles = evaluate.cycles;
  e.paths = evaluate.paths;
  e.burn_in_cycles = evaluate.burn_in_cycles;
  e.use_transient = evaluate.use_transient;
  e.transient_horizon = transient_horizon();
  e.transient = transient_settings();
  e.seed = derive_seed(seed, 0xe7a1);
  return e;
}

TreeSettings RunConfig::tree_settings() const {
  TreeSettings t = baseline;
  t.seed = derive_seed(seed, 0x7e3);
  return t;
}

bool RunConfig::operator==(const RunConfig& other) const { return serialize_config(*this) == serialize_config(other); }

std::string serialize_config(const RunConfig& c) {
  json problem = std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, HydropowerSpec>) {
          return hydropower_to_json(s);
        } else if constexpr (std::is_same_v<S, VppSpec>) {
          return vpp_to_json(s);
        } else {
          return generic_to_json(s);
        }
      },
      c.problem);
  json transient = solver_to_json(c.transient.settings);
  transient["horizon"] = c.transient.horizon;
  json baseline = {{"branching", c.baseline.branching},
                   {"depth", c.baseline.depth},
                   {"control_grid", c.baseline.control_grid},
                   {"burn_in_cycles", c.baseline.burn_in_cycles},
                   {"start_time", c.baseline.start_time},
                   {"max_nodes", c.baseline.max_nodes}};
  if (c.baseline.initial_state) baseline["initial_state"] = encode(*c.baseline.initial_state);
  json doc = {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"calendar", {{"periods", c.calendar().periods()}}},
      {"basis", {{"harmonics", c.harmonics}}},
      {"noise", noise_to_json(c.noise())},
      {"problem", problem},
      {"solver", solver_to_json(c.solver)},
      {"transient", transient},
      {"evaluate",
       {{"cycles", c.evaluate.cycles},
        {"paths", c.evaluate.paths},
        {"burn_in_cycles", c.evaluate.burn_in_cycles},
        {"use_transient", c.evaluate.use_transient}}},
      {"baseline", baseline},
      {"simulate",
       {{"paths", c.simulate.paths}, {"length", c.simulate.length}, {"burn_in_cycles", c.simulate.burn_in_cycles}}},
  };
  return doc.dump(2) + "\n";
}

RunConfig parse_config(const std::string& text, std::span<const std::string> overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::ostringstream msg;
    msg << "parse error at line " << line << ", column " << col << ": " << e.what();
    throw ConfigError("", msg.str());
  }
  for (const auto& o : overrides) apply_override(doc, o);

  Obj root(doc, "");
  const std::uint64_t seed = root.opt("seed") ? as_u64(*root.opt("seed"), "seed") : 1;
  const std::string out = root.opt("output_dir") ? as_string(*root.opt("output_dir"), "output_dir") : "out";

  Obj cal_obj(root.req("calendar"), "calendar");
  const json& periods_json = cal_obj.req("periods");
  if (!periods_json.is_array()) throw ConfigError("calendar.periods", "expected a list of integers");
  std::vector<int> periods;
  for (std::size_t i = 0; i < periods_json.size(); ++i) {
    periods.push_back(as_int32(periods_json[i], "calendar.periods." + std::to_string(i)));
  }
  cal_obj.finish();
  std::optional<SeasonCalendar> cal;
  try {
    cal.emplace(periods);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("calendar.periods", e.what());
  }
  const int T = cal->master_period();

  Obj basis_obj(root.req("basis"), "basis");
  const json& h = basis_obj.req("harmonics");
  if (!h.is_array()) throw ConfigError("basis.harmonics", "expected one integer per period");
  std::vector<int> harmonics;
  for (std::size_t i = 0; i < h.size(); ++i) harmonics.push_back(as_int32(h[i], "basis.harmonics." + std::to_string(i)));
  basis_obj.finish();
  try {
    (void)PeriodicBasis(*cal, harmonics);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("basis.harmonics", e.what());
  }

  const PamarModel noise = parse_noise(root.req("noise"), *cal, "noise");

  Obj prob(root.req("problem"), "problem");
  const std::string type = as_string(prob.req("type"), "problem.type");
  std::optional<ProblemSpec> spec;
  if (type == "hydropower") {
    spec.emplace(parse_hydropower(prob, noise));
  } else if (type == "vpp") {
    spec.emplace(parse_vpp(prob, noise));
  } else if (type == "generic") {
    spec.emplace(parse_generic(prob, noise));
  } else {
    throw ConfigError("problem.type", "unknown problem type '" + type + "' (expected hydropower, vpp or generic)");
  }
  prob.finish();

  SolverSettings solver;
  if (const json* j = root.opt("solver")) {
    Obj o(*j, "solver");
    solver = parse_solver_keys(o, solver);
    o.finish();
  }
  check_settings(solver, "solver");

  TransientConfig transient{0, solver};
  if (const json* j = root.opt("transient")) {
    Obj o(*j, "transient");
    if (const json* hz = o.opt("horizon")) transient.horizon = as_int32(*hz, "transient.horizon");
    transient.settings = parse_solver_keys(o, solver);
    o.finish();
  }
  check_settings(transient.settings, "transient");
  if (transient.horizon < 0 || transient.horizon > T) {
    throw ConfigError("transient.horizon", "window must lie in 1.." + std::to_string(T) + " (0 for a full period)");
  }

  EvaluateConfig evaluate;
  if (const json* j = root.opt("evaluate")) {
    Obj o(*j, "evaluate");
    if (const json* v = o.opt("cycles")) evaluate.cycles = as_int32(*v, "evaluate.cycles");
    if (const json* v = o.opt("paths")) evaluate.paths = as_int32(*v, "evaluate.paths");
    if (const json* v = o.opt("burn_in_cycles")) evaluate.burn_in_cycles = as_int32(*v, "evaluate.burn_in_cycles");
    if (const json* v = o.opt("use_transient")) evaluate.use_transient = as_bool(*v, "evaluate.use_transient");
    o.finish();
  }
  if (evaluate.cycles < 1) throw ConfigError("evaluate.cycles", "must be at least 1");
  if (evaluate.paths < 1) throw ConfigError("evaluate.paths", "must be at least 1");
  if (evaluate.burn_in_cycles < 0) throw ConfigError("evaluate.burn_in_cycles", "must be non-negative");

  TreeSettings baseline;
  if (const json* j = root.opt("baseline")) {
    Obj o(*j, "baseline");
    if (const json* v = o.opt("branching")) baseline.branching = as_int32(*v, "baseline.branching");
    if (const json* v = o.opt("depth")) baseline.depth = as_int32(*v, "baseline.depth");
    if (const json* v = o.opt("control_grid")) baseline.control_grid = as_int32(*v, "baseline.control_grid");
    if (const json* v = o.opt("burn_in_cycles")) baseline.burn_in_cycles = as_int32(*v, "baseline.burn_in_cycles");
    if (const json* v = o.opt("start_time")) baseline.start_time = as_int(*v, "baseline.start_time");
    if (const json* v = o.opt("max_nodes")) baseline.max_nodes = as_int(*v, "baseline.max_nodes");
    if (const json* v = o.opt("initial_state")) baseline.initial_state = free_vector(*v, "baseline.initial_state");
    o.finish();
  }
  if (baseline.branching < 1) throw ConfigError("baseline.branching", "must be at least 1");
  if (baseline.depth < 1) throw ConfigError("baseline.depth", "must be at least 1");
  if (baseline.control_grid < 1) throw ConfigError("baseline.control_grid", "must be at least 1");
  if (baseline.burn_in_cycles < 0) throw ConfigError("baseline.burn_in_cycles", "must be non-negative");
  if (baseline.max_nodes < 1 || baseline.max_nodes > 1'000'000) {
    throw ConfigError("baseline.max_nodes", "must lie in 1..1000000");
  }

  SimulateConfig simulate;
  if (const json* j = root.opt("simulate")) {
    Obj o(*j, "simulate");
    if (const json* v = o.opt("paths")) simulate.paths = as_int32(*v, "simulate.paths");
    if (const json* v = o.opt("length")) simulate.length = as_int32(*v, "simulate.length");
    if (const json* v = o.opt("burn_in_cycles")) simulate.burn_in_cycles = as_int32(*v, "simulate.burn_in_cycles");
    o.finish();
  }
  if (simulate.paths < 1) throw ConfigError("simulate.paths", "must be at least 1");
  if (simulate.length < 0) throw ConfigError("simulate.length", "must be non-negative");
  if (simulate.burn_in_cycles < 0) throw ConfigError("simulate.burn_in_cycles", "must be non-negative");
  root.finish();

  RunConfig cfg{
      .seed = seed,
      .output_dir = out,
      .harmonics = harmonics,
      .problem = std::move(*spec),
      .solver = solver,
      .transient = transient,
      .evaluate = evaluate,
      .baseline = baseline,
      .simulate = simulate,
  };
  // Cross-field checks that need the assembled problem.
  GenericProblem problem = [&] {
    try {
      return cfg.build_problem();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("problem", e.what());
    }
  }();
  auto check_anchor = [&](const std::optional<Vector>& a, const std::string& path) {
    if (a && a->size() != problem.state_dim()) {
      throw ConfigError(path, "needs " + std::to_string(problem.state_dim()) + " entries (one per state)");
    }
  };
  check_anchor(cfg.solver.anchor, "solver.anchor");
  check_anchor(cfg.transient.settings.anchor, "transient.anchor");
  check_anchor(cfg.baseline.initial_state, "baseline.initial_state");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file, std::span<const std::string> overrides) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingInputError("cannot read configuration file " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pctl
