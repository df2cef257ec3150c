#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pctl/error.hpp"
#include "pctl/solver.hpp"

namespace pctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Node {
  int parent = -1;
  int level = 0;
  std::int64_t time = 0;
  Vector w;
  Vector innovation;
  PamarHistory history;  // as of time + 1
  std::vector<int> children;
  Vector control;
};

class TreeSolver {
 public:
  TreeSolver(const GenericProblem& p, const TreeSettings& s) : p_(p), s_(s) {
    build_grid();
    build_tree();
  }

  TreeResult solve() {
    const Vector x0 = s_.initial_state.value_or(p_.anchor);
    if (x0.size() != p_.state_dim() || !x0.allFinite()) throw std::invalid_argument("bad initial state");
    double total = 0.0;
    for (int c : roots_) total += value(c, x0, nullptr);
    if (!std::isfinite(total)) throw Error("no grid policy keeps the state within bounds on every branch");

    TreeResult out;
    out.objective = total / static_cast<double>(roots_.size());
    out.nodes = static_cast<std::int64_t>(nodes_.size());
    for (int c : roots_) record(c, x0);
    for (int c : roots_) out.first_stage_controls.push_back(nodes_[c].control);
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
      if (!nodes_[i].children.empty()) continue;
      std::vector<int> chain;
      for (int n = i; n >= 0; n = nodes_[n].parent) chain.insert(chain.begin(), n);
      NoisePath path;
      path.start_time = s_.start_time;
      path.history = root_history_;
      path.seed = s_.seed;
      std::vector<Vector> controls;
      for (int n : chain) {
        path.values.push_back(nodes_[n].w);
        path.innovations.push_back(nodes_[n].innovation);
        controls.push_back(nodes_[n].control);
      }
      out.scenarios.push_back(std::move(path));
      out.scenario_controls.push_back(std::move(controls));
    }
    return out;
  }

 private:
  void build_grid() {
    const ControlBox& box = p_.control_box;
    if (!box.lower.allFinite() || !box.upper.allFinite()) throw std::invalid_argument("tree baseline needs a bounded control box");
    if (s_.control_grid < 1) throw std::invalid_argument("control grid needs at least one point");
    const int nu = p_.control_dim();
    const int n = s_.control_grid;
    double count = std::pow(static_cast<double>(n), nu);
    if (count > 1e7) throw std::invalid_argument("control grid too large to enumerate");
    std::vector<int> idx(nu, 0);
    while (true) {
      Vector u(nu);
      for (int j = 0; j < nu; ++j) {
        const double f = n == 1 ? 0.5 : static_cast<double>(idx[j]) / (n - 1);
        u(j) = box.lower(j) + f * (box.upper(j) - box.lower(j));
      }
      grid_.push_back(std::move(u));
      int j = 0;
      while (j < nu && ++idx[j] == n) idx[j++] = 0;
      if (j == nu) break;
    }
  }

  void build_tree() {
    if (s_.branching < 1 || s_.depth < 1) throw std::invalid_argument("branching and depth must be positive");
    double total = 0.0;
    double width = 1.0;
    for (int l = 0; l < s_.depth; ++l) {
      width *= s_.branching;
      total += width;
    }
    if (total > static_cast<double>(s_.max_nodes)) {
      std::ostringstream msg;
      msg << "scenario tree would have " << total << " nodes, above the guard of " << s_.max_nodes;
      throw std::length_error(msg.str());
    }
    const double work = std::pow(static_cast<double>(grid_.size()) * s_.branching, s_.depth);
    if (work > s_.max_evaluations) {
      std::ostringstream msg;
      msg << "exhaustive enumeration needs about " << work << " stage evaluations, above the guard of "
          << s_.max_evaluations;
      throw std::length_error(msg.str());
    }

    const PamarModel& model = p_.noise;
    const int T = model.period();
    const int len = s_.burn_in_cycles * T;
    root_history_ = PamarHistory::at_mean(model, s_.start_time - len);
    if (s_.burn_in_cycles > 0) {
      const NoisePath burn =
          simulate_path(model, len, root_history_, derive_seed(s_.seed, 0xb0b0), s_.start_time - len);
      root_history_ = burn.history_after(len);
    }
    const std::uint64_t tree_seed = derive_seed(s_.seed, 0x7e3e);

    auto spawn = [&](int parent, const PamarHistory& hist, std::int64_t t, int level) {
      for (int c = 0; c < s_.branching; ++c) {
        const auto id = static_cast<std::uint64_t>(nodes_.size());
        const NoisePath step = simulate_path(model, 1, hist, derive_seed(tree_seed, id), t);
        Node n;
        n.parent = parent;
        n.level = level;
        n.time = t;
        n.w = step.values.front();
        n.innovation = step.innovations.front();
        n.history = step.history_after(1);
        nodes_.push_back(std::move(n));
        if (parent < 0) {
          roots_.push_back(static_cast<int>(id));
        } else {
          nodes_[parent].children.push_back(static_cast<int>(id));
        }
      }
    };
    spawn(-1, root_history_, s_.start_time, 1);
    // Breadth-first; nodes_ grows while we walk it.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].level < s_.depth) {
        const PamarHistory hist = nodes_[i].history;
        spawn(static_cast<int>(i), hist, nodes_[i].time + 1, nodes_[i].level + 1);
      }
    }
  }

  [[nodiscard]] bool feasible(const Vector& x) const {
    const Vector h = p_.constraint.apply(x);
    constexpr double tol = 1e-12;
    return ((h - p_.constraint.lower).array() >= -tol).all() && ((p_.constraint.upper - h).array() >= -tol).all();
  }

  double value(int id, const Vector& x, Vector* best_u) const {
    const Node& n = nodes_[id];
    double best = kInf;
    for (const Vector& u : grid_) {
      const Vector next = step_dynamics(p_.dynamics, n.time + 1, x, u, n.w);
      if (!feasible(next)) continue;
      double v = p_.stage_loss(n.time, x, n.w, u, nullptr);
      if (!n.children.empty()) {
        double acc = 0.0;
        for (int c : n.children) {
          acc += value(c, next, nullptr);
          if (!std::isfinite(acc)) break;
        }
        v += acc / static_cast<double>(n.children.size());
      }
      if (v < best) {
        best = v;
        if (best_u != nullptr) *best_u = u;
      }
    }
    return best;
  }

  void record(int id, const Vector& x) {
    Vector u;
    (void)value(id, x, &u);
    nodes_[id].control = u;
    const Vector next = step_dynamics(p_.dynamics, nodes_[id].time + 1, x, u, nodes_[id].w);
    for (int c : nodes_[id].children) record(c, next);
  }

  const GenericProblem& p_;
  const TreeSettings& s_;
  std::vector<Vector> grid_;
  std::vector<Node> nodes_;
  std::vector<int> roots_;
  PamarHistory root_history_;
};

}  // namespace

TreeResult solve_tree_baseline(const GenericProblem& problem, const TreeSettings& settings) {
  problem.validate();
  return TreeSolver(problem, settings).solve();
}

}  // namespace pctl
