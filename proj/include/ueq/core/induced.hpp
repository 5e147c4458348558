#pragma once

#include "ueq/core/game.hpp"
#include "ueq/core/measure.hpp"

namespace ueq {

/// Υ^{t,x} = Σ_ω P̂(ω) π̂(ω, t, x), with controls identified by their
/// truncation to the decision window.
[[nodiscard]] inline FiniteMeasure<Control> induce_control_distribution(
    const EstimationBundle& bundle, const ScenarioSpace& scenarios, int t, State x) {
  scenarios.validate();
  FiniteMeasure<Control> out;
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    const auto prior = bundle.policy_prior(scenarios.scenarios[k], t, x);
    for (const auto& [a, w] : prior.atoms()) {
      out.add(bundle.canonical(a, t, x), scenarios.weights[k] * w);
    }
  }
  return out;
}

/// γ^{t,x}: the image of Υ under α ↦ α(t, x).
[[nodiscard]] inline FiniteMeasure<Action> induce_action_distribution(
    const FiniteMeasure<Control>& ups, int t, State x) {
  return ups.pushforward([t, x](const Control& a) { return a.at(t, x); });
}

}  // namespace ueq
