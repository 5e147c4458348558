#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "ueq/core/measure.hpp"

namespace ueq {

/// Numerical probe of the continuity argument behind recurrent behavior:
/// when the estimations converge to `limit` and the behavior map is
/// continuous there, the induced behavior converges to the behavior of the
/// limit. Returns whether d(Υ(limit), Υ(last estimation)) ≤ tol.
///
/// This is a property check on a recorded sequence, not a proof.
template <class Estimation>
[[nodiscard]] bool lemma_continuity_probe(
    const std::vector<Estimation>& sequence,
    const std::function<FiniteMeasure<double>(const Estimation&)>& behavior_map,
    const Estimation& limit, Metric metric = Metric::kWasserstein1, double tol = 1e-6) {
  if (sequence.empty()) throw std::invalid_argument("empty estimation sequence");
  const auto target = behavior_map(limit);
  return distance(metric, target, behavior_map(sequence.back())) <= tol;
}

}  // namespace ueq
