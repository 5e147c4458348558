#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "ueq/core/game.hpp"
#include "ueq/core/measure.hpp"

namespace ueq {

/// Pure-action profile of a normal-form game: one action index per player.
using Profile = std::vector<int>;

/// Finite normal-form game with scenario-indexed payoffs (values to maximize).
/// Scenario-free games simply ignore the scenario argument.
struct NormalFormGame {
  std::vector<int> num_actions;
  std::function<double(ScenarioId, PlayerId, const Profile&)> payoff;

  [[nodiscard]] int players() const { return static_cast<int>(num_actions.size()); }
};

/// The four equilibrium integrals for player i under a joint law ρ, which
/// differ only in where the sup over the deviation α̃ⁱ sits relative to the
/// disintegration ρ = ρ^{-i}(·|αⁱ) ρⁱ(dαⁱ).
struct EquilibriumValues {
  double nash_type = 0.0;          ///< sup inside, depends on α^{-i}
  double correlated = 0.0;         ///< sup depends on the recommended αⁱ
  double uncertain = 0.0;          ///< sup depends on the scenario ω
  double coarse_correlated = 0.0;  ///< sup outside every integral
};

namespace detail {

inline Profile with_action(Profile p, PlayerId i, int a) {
  p[static_cast<std::size_t>(i)] = a;
  return p;
}

}  // namespace detail

/// Evaluates the four rows by exhaustive enumeration. For the uncertain row
/// the deviation α̃ⁱ moves the others' law to ρ^{-i}(·|α̃ⁱ); deviations
/// outside supp ρⁱ fall back to the marginal ρ^{-i}.
[[nodiscard]] inline EquilibriumValues equilibrium_condition_values(
    const NormalFormGame& game, const FiniteMeasure<Profile>& rho, PlayerId i,
    const ScenarioSpace& scenarios = ScenarioSpace::single()) {
  if (!rho.is_probability()) throw std::invalid_argument("joint law is not normalized");
  scenarios.validate();
  const auto slot = static_cast<std::size_t>(i);
  const int n_dev = game.num_actions.at(slot);
  // Rows without a scenario integral see the P̂-averaged payoff.
  auto averaged = [&](const Profile& p) {
    double s = 0.0;
    for (std::size_t k = 0; k < scenarios.size(); ++k) {
      s += scenarios.weights[k] * game.payoff(scenarios.scenarios[k], i, p);
    }
    return s;
  };

  // ρⁱ and the un-normalized conditional masses ρ(·, αⁱ = a).
  std::map<int, double> marginal;
  for (const auto& [p, w] : rho.atoms()) marginal[p.at(slot)] += w;

  auto conditional_value = [&](const auto& pay, int recommended, int deviation) {
    double s = 0.0;
    for (const auto& [p, m] : rho.atoms()) {
      if (p[slot] != recommended) continue;
      s += m * pay(detail::with_action(p, i, deviation));
    }
    return s / marginal.at(recommended);
  };
  auto marginal_value = [&](const auto& pay, int deviation) {
    double s = 0.0;
    for (const auto& [p, m] : rho.atoms()) s += m * pay(detail::with_action(p, i, deviation));
    return s;
  };

  EquilibriumValues out;
  for (const auto& [p, m] : rho.atoms()) {
    double best = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < n_dev; ++d) best = std::max(best, averaged(detail::with_action(p, i, d)));
    out.nash_type += m * best;
  }
  for (const auto& [a, m] : marginal) {
    if (m <= 0.0) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < n_dev; ++d) best = std::max(best, conditional_value(averaged, a, d));
    out.correlated += m * best;
  }
  {
    double best = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < n_dev; ++d) best = std::max(best, marginal_value(averaged, d));
    out.coarse_correlated = best;
  }
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    const ScenarioId w = scenarios.scenarios[k];
    auto pay = [&](const Profile& p) { return game.payoff(w, i, p); };
    double best = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < n_dev; ++d) {
      auto it = marginal.find(d);
      const double v = (it != marginal.end() && it->second > 0.0) ? conditional_value(pay, d, d)
                                                                  : marginal_value(pay, d);
      best = std::max(best, v);
    }
    out.uncertain += scenarios.weights[k] * best;
  }
  return out;
}

}  // namespace ueq
