#include "pctl/calendar.hpp"

#include <sstream>
#include <stdexcept>

namespace pctl {

SeasonCalendar::SeasonCalendar(std::vector<int> periods) : periods_(std::move(periods)) {
  if (periods_.empty()) {
    throw std::invalid_argument("season calendar needs at least one period");
  }
  for (std::size_t i = 0; i < periods_.size(); ++i) {
    if (periods_[i] <= 0) {
      throw std::invalid_argument("season periods must be positive");
    }
    if (i > 0 && periods_[i] <= periods_[i - 1]) {
      throw std::invalid_argument("season periods must be strictly increasing");
    }
  }
  const int master = periods_.back();
  for (int p : periods_) {
    if (master % p != 0) {
      std::ostringstream msg;
      msg << "period " << p << " does not divide the master period " << master;
      throw std::invalid_argument(msg.str());
    }
  }
}

int SeasonCalendar::phase(std::int64_t t) const noexcept {
  return static_cast<int>(positive_mod(t, master_period()));
}

std::vector<int> season_index(std::int64_t t, const SeasonCalendar& cal) {
  if (t < 0) {
    throw std::invalid_argument("season_index requires t >= 0");
  }
  std::vector<int> tuple;
  tuple.reserve(cal.periods().size());
  for (int p : cal.periods()) {
    tuple.push_back(static_cast<int>(t % p));
  }
  return tuple;
}

}  // namespace pctl
