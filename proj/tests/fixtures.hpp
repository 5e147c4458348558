#pragma once

// Small games shared by the core tests.

#include <vector>

#include "ueq/core/game.hpp"

namespace ueq::testing {

/// Joint state of the repeated two-player game packed as 2·x1 + x2.
inline State pack(int x1, int x2) { return 2 * x1 + x2; }
inline int first(State s) { return s / 2; }
inline int second(State s) { return s % 2; }

/// One-step two-player game with Bernoulli transitions p(x^i' = 1) = a^i.
inline TimeIndexedGame two_player_game(std::vector<Action> grid = {0.0, 0.4, 0.6, 1.0}) {
  TimeIndexedGame g;
  g.horizon_bound = 1;
  g.players = 2;
  g.states_at = {{0}, {0, 1, 2, 3}};
  g.actions_at = [grid](PlayerId, int, State) { return grid; };
  return g;
}

inline FiniteMeasure<State> bernoulli_pair(Action a1, Action a2) {
  FiniteMeasure<State> m;
  for (int x1 = 0; x1 < 2; ++x1) {
    for (int x2 = 0; x2 < 2; ++x2) {
      const double p = (x1 ? a1 : 1 - a1) * (x2 ? a2 : 1 - a2);
      if (p > 0) m.add(pack(x1, x2), p);
    }
  }
  return m;
}

/// Player 1's estimations in reward form: F = c·a¹, φ(y) = −1{x²(y) = 1}.
inline EstimationBundle player_one_bundle(double c) {
  EstimationBundle b;
  b.owner = 0;
  b.horizon = [](int, State) { return 1; };
  b.transition = [](int, State, const JointAction& a) { return bernoulli_pair(a[0], a[1]); };
  b.transition_cost = [c](ScenarioId, int, State, const JointAction& a) { return c * a[0]; };
  b.state_value = [](ScenarioId, int, State y) { return second(y) == 1 ? -1.0 : 0.0; };
  b.best_expectation = [](int, State) { return 0.0; };
  return b;
}

inline Control constant_control(Action a, int t = 0, State x = 0) {
  Control c;
  c.set(Site{t, x}, a);
  return c;
}

}  // namespace ueq::testing
