#pragma once

#include <optional>
#include <stdexcept>

#include "ueq/core/game.hpp"
#include "ueq/core/measure.hpp"

namespace ueq {

namespace detail {

inline JointAction joint_action_at(const JointControl& profile, int t, State x) {
  JointAction out;
  out.reserve(profile.size());
  for (const auto& c : profile) out.push_back(c.at(t, x));
  return out;
}

inline int resolve_horizon(const TimeIndexedGame& game, const EstimationBundle& bundle, int t,
                           State x, std::optional<int> steps) {
  const int h = steps ? *steps : bundle.horizon(t, x);
  if (h < 0) throw std::invalid_argument("negative horizon");
  if (t + h > game.horizon_bound) throw std::out_of_range("horizon overflow");
  return h;
}

}  // namespace detail

/// Exact law of the state path (X_t, …, X_{t+h}) started at x, where each
/// step draws from the estimated kernel at the profile's joint action.
/// `steps` overrides the estimated horizon (used for truncated values).
[[nodiscard]] inline FiniteMeasure<StatePath> chain_distribution(
    const TimeIndexedGame& game, const EstimationBundle& bundle, int t, State x,
    const JointControl& profile, std::optional<int> steps = std::nullopt) {
  const int h = detail::resolve_horizon(game, bundle, t, x, steps);
  auto paths = FiniteMeasure<StatePath>::dirac(StatePath{x});
  for (int s = t; s < t + h; ++s) {
    FiniteMeasure<StatePath> next;
    for (const auto& [path, w] : paths.atoms()) {
      const State here = path.back();
      const auto kernel = bundle.transition(s, here, detail::joint_action_at(profile, s, here));
      if (!kernel.is_probability()) throw std::invalid_argument("transition is not normalized");
      for (const auto& [y, p] : kernel.atoms()) {
        if (p == 0.0) continue;
        StatePath extended = path;
        extended.push_back(y);
        next.add(std::move(extended), w * p);
      }
    }
    paths = std::move(next);
  }
  return paths;
}

/// Expected terminal value plus accumulated transition cost along the chain.
[[nodiscard]] inline double value_of_profile(const TimeIndexedGame& game,
                                             const EstimationBundle& bundle,
                                             ScenarioId scenario, int t, State x,
                                             const JointControl& profile,
                                             std::optional<int> steps = std::nullopt) {
  const int h = detail::resolve_horizon(game, bundle, t, x, steps);
  const auto paths = chain_distribution(game, bundle, t, x, profile, h);
  return paths.integrate([&](const StatePath& path) {
    double v = bundle.state_value(scenario, t + h, path.back());
    for (int k = 0; k < h; ++k) {
      const int s = t + k;
      const State xs = path[static_cast<std::size_t>(k)];
      v += bundle.transition_cost(scenario, s, xs, detail::joint_action_at(profile, s, xs));
    }
    return v;
  });
}

/// Value of the owner's control, integrating profile values against the
/// opponent model. Profiles may leave the owner's slot empty; a filled slot
/// must agree with `own` on the decision window.
[[nodiscard]] inline double value_of_control(const TimeIndexedGame& game,
                                             const EstimationBundle& bundle,
                                             ScenarioId scenario, int t, State x,
                                             const Control& own,
                                             std::optional<int> steps = std::nullopt) {
  const auto model = bundle.opponent_model(t, own);
  if (!model.is_probability()) throw std::invalid_argument("opponent model is not normalized");
  const auto slot = static_cast<std::size_t>(bundle.owner);
  const Control own_window = bundle.canonical(own, t, x);
  double v = 0.0;
  for (const auto& [profile, w] : model.atoms()) {
    if (w == 0.0) continue;
    if (slot >= profile.size()) throw std::invalid_argument("opponent model clash");
    JointControl completed = profile;
    if (completed[slot].empty()) {
      completed[slot] = own;
    } else if (bundle.canonical(completed[slot], t, x) != own_window) {
      throw std::invalid_argument("opponent model clash");
    }
    v += w * value_of_profile(game, bundle, scenario, t, x, completed, steps);
  }
  return v;
}

/// ∫ J(ω, t, x, α) π̂(ω, t, x)(dα) for one scenario.
[[nodiscard]] inline double prior_weighted_value(const TimeIndexedGame& game,
                                                 const EstimationBundle& bundle,
                                                 ScenarioId scenario, int t, State x,
                                                 std::optional<int> steps = std::nullopt) {
  const auto prior = bundle.policy_prior(scenario, t, x);
  return prior.integrate([&](const Control& a) {
    return value_of_control(game, bundle, scenario, t, x, a, steps);
  });
}

}  // namespace ueq
