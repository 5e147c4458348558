#pragma once

#include <cmath>
#include <compare>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ueq/core/measure.hpp"

namespace ueq {

using State = int;
using Action = double;
using PlayerId = int;
using ScenarioId = int;
using StatePath = std::vector<State>;
using JointAction = std::vector<Action>;

/// A (time, state) pair at which a decision is taken.
struct Site {
  int time = 0;
  State state = 0;
  friend auto operator<=>(const Site&, const Site&) = default;
};

/// A Markov control: one action per site.
class Control {
 public:
  Control() = default;
  Control(std::initializer_list<std::pair<const Site, Action>> init) : decision_(init) {}

  void set(Site site, Action a) { decision_[site] = a; }

  [[nodiscard]] Action at(int t, State x) const {
    auto it = decision_.find(Site{t, x});
    if (it == decision_.end()) {
      throw std::out_of_range("control undefined at site (" + std::to_string(t) + ", " +
                              std::to_string(x) + ")");
    }
    return it->second;
  }

  [[nodiscard]] bool defined_at(int t, State x) const {
    return decision_.contains(Site{t, x});
  }

  [[nodiscard]] bool empty() const { return decision_.empty(); }
  [[nodiscard]] const std::map<Site, Action>& decisions() const { return decision_; }

  /// Restriction to times in [begin, end). Two controls are identified by the
  /// quotient relation exactly when their truncations agree.
  [[nodiscard]] Control truncated(int begin, int end) const {
    Control out;
    for (const auto& [site, a] : decision_) {
      if (site.time >= begin && site.time < end) out.decision_.emplace(site, a);
    }
    return out;
  }

  friend bool operator==(const Control&, const Control&) = default;
  friend bool operator<(const Control& a, const Control& b) {
    return std::lexicographical_compare(
        a.decision_.begin(), a.decision_.end(), b.decision_.begin(), b.decision_.end(),
        [](const auto& x, const auto& y) {
          if (x.first != y.first) return x.first < y.first;
          return x.second < y.second;
        });
  }

 private:
  std::map<Site, Action> decision_;
};

/// One control per player, indexed by player id.
using JointControl = std::vector<Control>;

/// Finite, time-indexed game skeleton: states per time, actions per site and player.
struct TimeIndexedGame {
  int horizon_bound = 0;
  std::vector<std::vector<State>> states_at;  ///< indexed by t = 0..horizon_bound
  std::function<std::vector<Action>(PlayerId, int, State)> actions_at;
  int players = 1;

  [[nodiscard]] const std::vector<State>& states(int t) const {
    if (t < 0 || t >= static_cast<int>(states_at.size())) {
      throw std::out_of_range("time outside game horizon");
    }
    return states_at[static_cast<std::size_t>(t)];
  }

  void validate() const {
    if (static_cast<int>(states_at.size()) != horizon_bound + 1) {
      throw std::invalid_argument("states_at must cover t = 0..horizon_bound");
    }
    for (int t = 0; t <= horizon_bound; ++t) {
      if (states(t).empty()) throw std::invalid_argument("empty state set");
      for (State x : states(t)) {
        for (PlayerId i = 0; i < players; ++i) {
          if (actions_at(i, t, x).empty()) throw std::invalid_argument("empty action set");
        }
      }
    }
  }
};

/// Finite stand-in for the value-uncertainty probability space.
struct ScenarioSpace {
  std::vector<ScenarioId> scenarios;
  std::vector<double> weights;

  static ScenarioSpace single(ScenarioId id = 0) { return {{id}, {1.0}}; }

  static ScenarioSpace uniform(int n) {
    ScenarioSpace s;
    for (int k = 0; k < n; ++k) {
      s.scenarios.push_back(k);
      s.weights.push_back(1.0 / n);
    }
    return s;
  }

  [[nodiscard]] std::size_t size() const { return scenarios.size(); }

  void validate() const {
    if (scenarios.size() != weights.size() || scenarios.empty()) {
      throw std::invalid_argument("scenario space: ids and weights must match and be non-empty");
    }
    double s = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("scenario space: negative weight");
      s += w;
    }
    if (std::abs(s - 1.0) > kMassTolerance) {
      throw std::invalid_argument("scenario space: weights must sum to 1");
    }
  }
};

/// A player's estimations at one learning age.
///
/// `transition` returns a probability on states_at(t+1); `opponent_model`
/// returns a probability over joint controls given the owner's control;
/// `policy_prior` returns a probability over the owner's controls.
struct EstimationBundle {
  PlayerId owner = 0;
  std::function<int(int, State)> horizon;
  std::function<FiniteMeasure<State>(int, State, const JointAction&)> transition;
  std::function<FiniteMeasure<JointControl>(int, const Control&)> opponent_model;
  std::function<double(ScenarioId, int, State, const JointAction&)> transition_cost;
  std::function<double(ScenarioId, int, State)> state_value;
  std::function<FiniteMeasure<Control>(ScenarioId, int, State)> policy_prior;
  std::function<double(int, State)> best_expectation;

  /// Truncation of `a` to the decision window [t, t + horizon(t, x)).
  [[nodiscard]] Control canonical(const Control& a, int t, State x) const {
    return a.truncated(t, t + horizon(t, x));
  }
};

/// Every Markov control of `player` on the sites with time in [begin, end).
/// Throws when the count would exceed `limit`.
[[nodiscard]] inline std::vector<Control> enumerate_controls(const TimeIndexedGame& game,
                                                             PlayerId player, int begin,
                                                             int end,
                                                             std::size_t limit = 10000) {
  std::vector<Control> out{Control{}};
  for (int t = begin; t < end && t <= game.horizon_bound; ++t) {
    for (State x : game.states(t)) {
      const auto acts = game.actions_at(player, t, x);
      if (out.size() * acts.size() > limit) {
        throw std::length_error("control space exceeds enumeration limit");
      }
      std::vector<Control> next;
      next.reserve(out.size() * acts.size());
      for (const auto& c : out) {
        for (Action a : acts) {
          Control d = c;
          d.set(Site{t, x}, a);
          next.push_back(std::move(d));
        }
      }
      out = std::move(next);
    }
  }
  return out;
}

}  // namespace ueq
