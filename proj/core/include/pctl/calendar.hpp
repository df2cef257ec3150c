#pragma once

#include <cstdint>
#include <vector>

namespace pctl {

/// Nested seasonal periods T_1 < ... < T_S, each dividing the master period
/// T = T_S. Time is discrete and unitless.
class SeasonCalendar {
 public:
  /// Throws std::invalid_argument unless `periods` is nonempty, strictly
  /// increasing, positive, and every entry divides the last one.
  explicit SeasonCalendar(std::vector<int> periods);

  [[nodiscard]] const std::vector<int>& periods() const noexcept { return periods_; }
  [[nodiscard]] int master_period() const noexcept { return periods_.back(); }
  [[nodiscard]] int num_periods() const noexcept { return static_cast<int>(periods_.size()); }

  /// Phase of `t` within the master cycle, in [0, T). Negative t wraps.
  [[nodiscard]] int phase(std::int64_t t) const noexcept;

  bool operator==(const SeasonCalendar&) const = default;

 private:
  std::vector<int> periods_;
};

/// Season tuple (t mod T_1, ..., t mod T_S). Requires t >= 0.
[[nodiscard]] std::vector<int> season_index(std::int64_t t, const SeasonCalendar& cal);

/// Non-negative remainder.
[[nodiscard]] constexpr std::int64_t positive_mod(std::int64_t t, std::int64_t n) noexcept {
  const std::int64_t r = t % n;
  return r < 0 ? r + n : r;
}

}  // namespace pctl
