#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pctl/config.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(PCTL_FIXTURE_DIR) / name; }

inline pctl::RunConfig load_fixture(const std::string& name, std::vector<std::string> overrides = {}) {
  return pctl::load_config(fixture(name), overrides);
}

// Small generator helpers over a seeded engine.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

  pctl::Vector vector(int n, double lo, double hi) {
    pctl::Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  pctl::Matrix matrix(int r, int c, double lo, double hi) {
    pctl::Matrix m(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) m(i, j) = uniform(lo, hi);
    }
    return m;
  }

  std::vector<double> samples(int n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  // Calendar with nested periods built from random factors.
  std::vector<int> periods(int max_levels, int max_factor) {
    std::vector<int> p{integer(1, max_factor)};
    const int levels = integer(1, max_levels);
    for (int i = 1; i < levels; ++i) p.push_back(p.back() * integer(2, max_factor));
    return p;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace testing
