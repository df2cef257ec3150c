#include "pctl/pamar.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <stdexcept>

namespace pctl {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void check_history(const PamarModel& model, const PamarHistory& history) {
  if (static_cast<int>(history.values.size()) != model.ar_order()) {
    throw std::invalid_argument("history must hold exactly p past values");
  }
  if (static_cast<int>(history.innovations.size()) != model.ma_order()) {
    throw std::invalid_argument("history must hold exactly q past innovations");
  }
  for (const auto& v : history.values) {
    if (v.size() != model.dim || !v.allFinite()) {
      throw std::invalid_argument("history value has wrong size or is non-finite");
    }
  }
  for (const auto& e : history.innovations) {
    if (e.size() != model.dim || !e.allFinite()) {
      throw std::invalid_argument("history innovation has wrong size or is non-finite");
    }
  }
}

// Shifts `v` into the front of a most-recent-first window of fixed length.
void push_front(std::vector<Vector>& window, const Vector& v) {
  if (window.empty()) return;
  std::rotate(window.rbegin(), window.rbegin() + 1, window.rend());
  window.front() = v;
}

// Deterministic part of the recursion at time t, excluding theta_0 eps_t.
Vector predictable_part(const PamarModel& model, int phase, const std::vector<Vector>& past_values,
                        const std::vector<Vector>& past_innovations) {
  Vector y = model.mean[phase];
  for (int i = 1; i <= model.ar_order(); ++i) {
    y.noalias() += model.ar[i - 1][phase] * past_values[i - 1];
  }
  for (int i = 1; i <= model.ma_order(); ++i) {
    y.noalias() += model.ma[i][phase] * past_innovations[i - 1];
  }
  return y;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ (index * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

PamarModel::PamarModel(SeasonCalendar cal, int dimension, int ar_order, int ma_order)
    : calendar(std::move(cal)), dim(dimension) {
  if (dim <= 0) throw std::invalid_argument("process dimension must be positive");
  if (ar_order < 0 || ma_order < 0) throw std::invalid_argument("model orders must be non-negative");
  const int T = calendar.master_period();
  mean.assign(T, Vector::Zero(dim));
  ar.assign(ar_order, std::vector<Matrix>(T, Matrix::Zero(dim, dim)));
  ma.assign(ma_order + 1, std::vector<Matrix>(T, Matrix::Zero(dim, dim)));
  ma[0].assign(T, Matrix::Identity(dim, dim));
  innovation_mean.assign(T, Vector::Zero(dim));
  innovation_stddev = Vector::Ones(dim);
}

const Vector& PamarModel::mean_for(std::span<const int> season) const {
  if (static_cast<int>(season.size()) != calendar.num_periods()) {
    throw std::invalid_argument("season tuple has wrong arity");
  }
  const int phase = season.back();
  if (phase < 0 || phase >= period()) throw std::invalid_argument("season index out of range");
  for (int i = 0; i < calendar.num_periods(); ++i) {
    if (season[i] != phase % calendar.periods()[i]) {
      throw std::invalid_argument("season tuple is not reachable by any time step");
    }
  }
  return mean[phase];
}

void PamarModel::validate() const {
  const auto T = static_cast<std::size_t>(period());
  if (mean.size() != T || innovation_mean.size() != T) {
    throw std::invalid_argument("seasonal tables must have one entry per phase");
  }
  if (ma.empty()) throw std::invalid_argument("moving-average table must include lag 0");
  if (innovation_stddev.size() != dim || !innovation_stddev.allFinite() || (innovation_stddev.array() < 0).any()) {
    throw std::invalid_argument("innovation stddev must be finite, non-negative, one per component");
  }
  for (std::size_t k = 0; k < T; ++k) {
    if (mean[k].size() != dim || !mean[k].allFinite()) throw std::invalid_argument("non-finite seasonal mean");
    if (innovation_mean[k].size() != dim || !innovation_mean[k].allFinite()) {
      throw std::invalid_argument("non-finite innovation mean");
    }
  }
  auto check_table = [&](const std::vector<std::vector<Matrix>>& table, const char* what) {
    for (const auto& lag : table) {
      if (lag.size() != T) throw std::invalid_argument(std::string(what) + " table must cover every phase");
      for (const auto& m : lag) {
        if (m.rows() != dim || m.cols() != dim) throw std::invalid_argument(std::string(what) + " matrix has wrong shape");
        if (!all_finite(m)) throw std::invalid_argument(std::string("non-finite ") + what + " coefficient");
      }
    }
  };
  check_table(ar, "autoregressive");
  check_table(ma, "moving-average");
}

PamarModel PamarModel::scalar_par1(SeasonCalendar cal, std::span<const double> mean_by_phase,
                                   std::span<const double> phi_by_phase, double sigma) {
  PamarModel model(std::move(cal), 1, 1, 0);
  const auto T = static_cast<std::size_t>(model.period());
  if (mean_by_phase.size() != T || phi_by_phase.size() != T) {
    throw std::invalid_argument("scalar_par1 needs one mean and one phi per phase");
  }
  for (std::size_t k = 0; k < T; ++k) {
    model.mean[k](0) = mean_by_phase[k];
    model.ar[0][k](0, 0) = phi_by_phase[k];
  }
  model.innovation_stddev(0) = sigma;
  return model;
}

PamarHistory PamarHistory::zeros(const PamarModel& model) {
  PamarHistory h;
  h.values.assign(model.ar_order(), Vector::Zero(model.dim));
  h.innovations.assign(model.ma_order(), Vector::Zero(model.dim));
  return h;
}

std::vector<Vector> periodic_mean(const PamarModel& model) {
  model.validate();
  const int T = model.period();
  constexpr int kMaxCycles = 100000;
  PamarHistory h = PamarHistory::zeros(model);
  std::vector<Vector> cycle = forecast(model, h, T, 0);
  for (int c = 0; c < kMaxCycles; ++c) {
    NoisePath p;
    p.history = h;
    p.values = cycle;
    p.innovations.assign(T, Vector::Zero(model.dim));
    for (int k = 0; k < T; ++k) p.innovations[k] = model.innovation_mean[k];
    h = p.history_after(T);
    std::vector<Vector> next = forecast(model, h, T, 0);
    double change = 0.0;
    bool finite = true;
    for (int k = 0; k < T; ++k) {
      finite = finite && next[k].allFinite();
      change = std::max(change, ((next[k] - cycle[k]).cwiseAbs().array() / (1.0 + next[k].cwiseAbs().array())).maxCoeff());
    }
    if (!finite) return {};
    cycle = std::move(next);
    if (change <= 1e-13) return cycle;
  }
  return {};
}

PamarHistory PamarHistory::at_mean(const PamarModel& model, std::int64_t t0) {
  PamarHistory h = zeros(model);
  const std::vector<Vector> m = periodic_mean(model);
  if (m.empty()) return h;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    h.values[i] = m[model.calendar.phase(t0 - 1 - static_cast<std::int64_t>(i))];
  }
  for (std::size_t i = 0; i < h.innovations.size(); ++i) {
    h.innovations[i] = model.innovation_mean[model.calendar.phase(t0 - 1 - static_cast<std::int64_t>(i))];
  }
  return h;
}

PamarHistory NoisePath::history_after(int steps) const {
  if (steps < 0 || steps > length()) throw std::out_of_range("history_after beyond path length");
  PamarHistory h;
  auto take = [steps](const std::vector<Vector>& realized, const std::vector<Vector>& before, std::size_t n) {
    std::vector<Vector> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto back = static_cast<std::int64_t>(steps) - 1 - static_cast<std::int64_t>(i);
      out.push_back(back >= 0 ? realized[back] : before[static_cast<std::size_t>(-back - 1)]);
    }
    return out;
  };
  h.values = take(values, history.values, history.values.size());
  h.innovations = take(innovations, history.innovations, history.innovations.size());
  return h;
}

Vector sample_innovation(const PamarModel& model, std::int64_t t, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int phase = model.calendar.phase(t);
  Vector eps = model.innovation_mean[phase];
  for (int j = 0; j < model.dim; ++j) {
    eps(j) += model.innovation_stddev(j) * normal(rng);
  }
  return eps;
}

std::vector<Vector> replay(const PamarModel& model, std::span<const Vector> innovations, const PamarHistory& history,
                           std::int64_t start_time) {
  model.validate();
  check_history(model, history);
  std::vector<Vector> past_values = history.values;
  std::vector<Vector> past_innovations = history.innovations;
  std::vector<Vector> out;
  out.reserve(innovations.size());
  for (std::size_t k = 0; k < innovations.size(); ++k) {
    const int phase = model.calendar.phase(start_time + static_cast<std::int64_t>(k));
    Vector y = predictable_part(model, phase, past_values, past_innovations);
    y.noalias() += model.ma[0][phase] * innovations[k];
    push_front(past_values, y);
    push_front(past_innovations, innovations[k]);
    out.push_back(std::move(y));
  }
  return out;
}

NoisePath simulate_path(const PamarModel& model, int length, const PamarHistory& history, std::uint64_t seed,
                        std::int64_t start_time) {
  if (length < 1) throw std::invalid_argument("path length must be at least 1");
  model.validate();
  check_history(model, history);
  std::mt19937_64 rng(seed);
  NoisePath path;
  path.start_time = start_time;
  path.history = history;
  path.seed = seed;
  path.innovations.reserve(length);
  for (int k = 0; k < length; ++k) {
    path.innovations.push_back(sample_innovation(model, start_time + k, rng));
  }
  path.values = replay(model, path.innovations, history, start_time);
  return path;
}

Ensemble simulate_ensemble(const PamarModel& model, int paths, int length, int burn_in_cycles, std::uint64_t seed,
                           std::int64_t start_time, double divergence_threshold) {
  if (paths < 1) throw std::invalid_argument("ensemble needs at least one path");
  if (burn_in_cycles < 0) throw std::invalid_argument("burn-in cycles must be non-negative");
  if (length < 1) throw std::invalid_argument("path length must be at least 1");
  const int T = model.period();
  const int burn = burn_in_cycles * T;
  const PamarHistory cold = PamarHistory::at_mean(model, start_time - burn);

  Ensemble out;
  out.paths.reserve(paths);
  // Reference cycle for the growth diagnostic, in full-path coordinates.
  const int total = burn + length;
  const bool growth_defined = total >= 2 * T;
  std::vector<std::vector<Vector>> ref_window;
  std::vector<std::vector<Vector>> last_window;

  for (int m = 0; m < paths; ++m) {
    const std::uint64_t path_seed = derive_seed(seed, static_cast<std::uint64_t>(m));
    NoisePath full = simulate_path(model, total, cold, path_seed, start_time - burn);
    for (const auto& y : full.values) {
      if (!y.allFinite()) out.diagnostics.diverged = true;
    }
    if (growth_defined) {
      ref_window.emplace_back(full.values.begin(), full.values.begin() + T);
      last_window.emplace_back(full.values.end() - T, full.values.end());
    }
    NoisePath kept;
    kept.start_time = start_time;
    kept.seed = path_seed;
    kept.history = full.history_after(burn);
    kept.values.assign(full.values.begin() + burn, full.values.end());
    kept.innovations.assign(full.innovations.begin() + burn, full.innovations.end());
    out.paths.push_back(std::move(kept));
  }

  if (growth_defined && paths > 1 && !out.diagnostics.diverged) {
    const EnsembleStats ref = moments_by_phase(ref_window, T);
    const EnsembleStats last = moments_by_phase(last_window, T);
    double growth = 1.0;
    for (int k = 0; k < T; ++k) {
      for (int j = 0; j < model.dim; ++j) {
        const double a = ref.covariance[k](j, j);
        const double b = last.covariance[k](j, j);
        if (a > 1e-300) {
          growth = std::max(growth, b / a);
        } else if (b > 1e-12) {
          growth = std::numeric_limits<double>::infinity();
        }
      }
    }
    out.diagnostics.max_variance_growth = growth;
    if (!(growth <= divergence_threshold)) out.diagnostics.diverged = true;
  }
  return out;
}

std::vector<Vector> forecast(const PamarModel& model, const PamarHistory& history, int horizon,
                             std::int64_t start_time) {
  if (horizon < 0) throw std::invalid_argument("forecast horizon must be non-negative");
  model.validate();
  if (static_cast<int>(history.values.size()) < model.ar_order() ||
      static_cast<int>(history.innovations.size()) < model.ma_order()) {
    throw std::invalid_argument("history is too short for the model orders");
  }
  PamarHistory trimmed;
  trimmed.values.assign(history.values.begin(), history.values.begin() + model.ar_order());
  trimmed.innovations.assign(history.innovations.begin(), history.innovations.begin() + model.ma_order());
  std::vector<Vector> expected;
  expected.reserve(horizon);
  for (int k = 0; k < horizon; ++k) {
    expected.push_back(model.innovation_mean[model.calendar.phase(start_time + k)]);
  }
  return replay(model, expected, trimmed, start_time);
}

std::vector<Vector> infer_innovations(const PamarModel& model, std::span<const Vector> values,
                                      const PamarHistory& history, std::int64_t start_time) {
  model.validate();
  check_history(model, history);
  std::vector<Vector> past_values = history.values;
  std::vector<Vector> past_innovations = history.innovations;
  std::vector<Vector> out;
  out.reserve(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const int phase = model.calendar.phase(start_time + static_cast<std::int64_t>(k));
    if (values[k].size() != model.dim) throw std::invalid_argument("observed value has wrong size");
    const Vector rest = values[k] - predictable_part(model, phase, past_values, past_innovations);
    Eigen::FullPivLU<Matrix> lu(model.ma[0][phase]);
    if (!lu.isInvertible()) throw std::invalid_argument("lag-0 moving-average matrix is singular");
    Vector eps = lu.solve(rest);
    push_front(past_values, values[k]);
    push_front(past_innovations, eps);
    out.push_back(std::move(eps));
  }
  return out;
}

EnsembleStats moments_by_phase(std::span<const std::vector<Vector>> series, int period, std::int64_t start_time) {
  if (series.empty()) throw std::invalid_argument("moments need at least one series");
  if (period < 1) throw std::invalid_argument("period must be positive");
  const std::size_t len = series.front().size();
  if (len == 0 || len % static_cast<std::size_t>(period) != 0) {
    throw std::invalid_argument("series length must be a positive multiple of the period");
  }
  for (const auto& s : series) {
    if (s.size() != len) throw std::invalid_argument("ragged series lengths");
  }
  const auto dim = series.front().front().size();
  EnsembleStats stats;
  stats.mean.assign(period, Vector::Zero(dim));
  stats.covariance.assign(period, Matrix::Zero(dim, dim));
  const auto n = static_cast<std::int64_t>(series.size() * (len / period));
  stats.sample_count = n;

  for (const auto& s : series) {
    for (std::size_t k = 0; k < len; ++k) {
      const auto phase = positive_mod(start_time + static_cast<std::int64_t>(k), period);
      stats.mean[phase] += s[k];
    }
  }
  for (auto& m : stats.mean) m /= static_cast<double>(n);
  if (n > 1) {
    for (const auto& s : series) {
      for (std::size_t k = 0; k < len; ++k) {
        const auto phase = positive_mod(start_time + static_cast<std::int64_t>(k), period);
        const Vector d = s[k] - stats.mean[phase];
        stats.covariance[phase].noalias() += d * d.transpose();
      }
    }
    for (auto& c : stats.covariance) {
      c /= static_cast<double>(n - 1);
      c = 0.5 * (c + c.transpose()).eval();
    }
  }
  return stats;
}

EnsembleStats periodic_moments(std::span<const NoisePath> ensemble, const SeasonCalendar& cal) {
  if (ensemble.empty()) throw std::invalid_argument("moments need at least one path");
  std::vector<std::vector<Vector>> series;
  series.reserve(ensemble.size());
  const std::int64_t start = ensemble.front().start_time;
  for (const auto& p : ensemble) {
    if (positive_mod(p.start_time - start, cal.master_period()) != 0) {
      throw std::invalid_argument("paths must start at the same phase");
    }
    series.push_back(p.values);
  }
  return moments_by_phase(series, cal.master_period(), start);
}

}  // namespace pctl
