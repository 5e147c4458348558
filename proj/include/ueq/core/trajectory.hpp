#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ueq/core/measure.hpp"

namespace ueq {

/// Append-only observation sequence. The events visible at age n are always
/// a prefix of those visible at age n + 1.
template <class Event>
class ObservationLog {
 public:
  void append(Event e) { events_.push_back(std::move(e)); }

  [[nodiscard]] std::size_t age() const { return events_.size(); }

  /// Observations available at age `n`.
  [[nodiscard]] std::span<const Event> at_age(std::size_t n) const {
    if (n > events_.size()) throw std::out_of_range("observation age in the future");
    return {events_.data(), n};
  }

  [[nodiscard]] std::span<const Event> events() const { return events_; }

 private:
  std::vector<Event> events_;
};

/// What the checkers need from one learning age.
struct AgeRecord {
  int age = 0;
  /// Induced distribution over control labels, keyed by site name.
  std::map<std::string, FiniteMeasure<double>> induced;
  double regret = 0.0;
  /// NaN when the lab does not track a desperation index.
  double kappa = std::numeric_limits<double>::quiet_NaN();
};

class TrajectoryStats {
 public:
  void push(AgeRecord r) {
    if (!per_age_.empty() && r.age <= per_age_.back().age) {
      throw std::invalid_argument("trajectory ages must be strictly increasing");
    }
    per_age_.push_back(std::move(r));
  }

  [[nodiscard]] const std::vector<AgeRecord>& per_age() const { return per_age_; }
  [[nodiscard]] std::size_t size() const { return per_age_.size(); }
  [[nodiscard]] bool empty() const { return per_age_.empty(); }

  [[nodiscard]] std::vector<std::string> sites() const {
    std::vector<std::string> out;
    if (per_age_.empty()) return out;
    for (const auto& [k, v] : per_age_.front().induced) out.push_back(k);
    return out;
  }

 private:
  std::vector<AgeRecord> per_age_;
};

/// Default trailing window for the liminf surrogate: a quarter of the ages,
/// at least 50, never more than the trajectory length.
[[nodiscard]] inline std::size_t default_window(std::size_t ages) {
  const std::size_t w = std::max<std::size_t>(50, ages / 4);
  return std::min(w, ages);
}

}  // namespace ueq
