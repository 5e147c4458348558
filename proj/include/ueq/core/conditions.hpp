#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ueq/core/game.hpp"
#include "ueq/core/measure.hpp"
#include "ueq/core/trajectory.hpp"
#include "ueq/core/value.hpp"

namespace ueq {

/// Optimality gap of the policy prior, averaged over scenarios and the prior:
///   Σ_ω P̂(ω) Σ_α π̂(ω)(α) [ sup_α̃ J(ω, α̃) − J(ω, α) ].
/// The sup ranges over `control_grid` together with the prior's own support,
/// so the integrand is never negative.
[[nodiscard]] inline double regret_condition(const TimeIndexedGame& game,
                                             const EstimationBundle& bundle,
                                             const ScenarioSpace& scenarios, int t, State x,
                                             const std::vector<Control>& control_grid) {
  if (control_grid.empty()) throw std::invalid_argument("empty control grid");
  scenarios.validate();
  double total = 0.0;
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    const ScenarioId w = scenarios.scenarios[k];
    const auto prior = bundle.policy_prior(w, t, x);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& a : control_grid) {
      best = std::max(best, value_of_control(game, bundle, w, t, x, a));
    }
    std::vector<double> vals;
    vals.reserve(prior.size());
    for (const auto& [a, p] : prior.atoms()) {
      vals.push_back(value_of_control(game, bundle, w, t, x, a));
      best = std::max(best, vals.back());
    }
    double gap = 0.0;
    for (std::size_t j = 0; j < vals.size(); ++j) gap += prior.atoms()[j].second * (best - vals[j]);
    total += scenarios.weights[k] * gap;
  }
  return total;
}

struct RecurrenceReport {
  double min_distance_tail = 0.0;
  std::vector<int> hit_ages;         ///< every age with distance ≤ r
  std::vector<double> distances;     ///< distance per recorded age
};

/// Finite-run surrogate for liminf_n d(reference, Υ_n): the smallest distance
/// over the trailing `window` ages. `hit_ages` lists all ages within `r`.
[[nodiscard]] inline RecurrenceReport recurrence_check(const TrajectoryStats& stats,
                                                       const std::string& site,
                                                       const FiniteMeasure<double>& reference,
                                                       Metric metric, std::size_t window,
                                                       double r = 0.0) {
  if (window == 0 || stats.size() < window) {
    throw std::invalid_argument("trajectory shorter than the recurrence window");
  }
  RecurrenceReport rep;
  rep.min_distance_tail = std::numeric_limits<double>::infinity();
  const auto& ages = stats.per_age();
  for (std::size_t n = 0; n < ages.size(); ++n) {
    auto it = ages[n].induced.find(site);
    if (it == ages[n].induced.end()) throw std::invalid_argument("site missing from trajectory: " + site);
    const double d = distance(metric, reference, it->second);
    rep.distances.push_back(d);
    if (d <= r + 1e-12) rep.hit_ages.push_back(ages[n].age);
    if (n + window >= ages.size()) rep.min_distance_tail = std::min(rep.min_distance_tail, d);
  }
  return rep;
}

/// κ(t, x) = P̂( ∫ J dπ̂ > B̂(t, x) ).
[[nodiscard]] inline double kappa(const TimeIndexedGame& game, const EstimationBundle& bundle,
                                  const ScenarioSpace& scenarios, int t, State x) {
  scenarios.validate();
  const double bar = bundle.best_expectation(t, x);
  double k = 0.0;
  for (std::size_t j = 0; j < scenarios.size(); ++j) {
    if (prior_weighted_value(game, bundle, scenarios.scenarios[j], t, x) > bar) {
      k += scenarios.weights[j];
    }
  }
  return std::clamp(k, 0.0, 1.0);
}

enum class Mood {
  kDesperate,
  kDiscouraged,
  kDoubtful,
  kCautious,
  kHopeful,
  kDetermined,
  kConfident,
  kOptimistic,
  kEuphoric
};

inline constexpr std::array<std::string_view, 9> kMoodNames = {
    "Desperate", "Discouraged", "Doubtful",   "Cautious", "Hopeful",
    "Determined", "Confident",  "Optimistic", "Euphoric"};

/// Nine equal-width bins on [0, 1]; the last bin is closed.
[[nodiscard]] inline Mood mood_label(double k) {
  if (!(k >= 0.0 && k <= 1.0)) throw std::out_of_range("kappa outside [0, 1]");
  const int bin = std::min(8, static_cast<int>(std::floor(9.0 * k)));
  return static_cast<Mood>(bin);
}

[[nodiscard]] inline std::string_view to_string(Mood m) {
  return kMoodNames[static_cast<std::size_t>(m)];
}

/// κ_n > threshold at every recorded age that tracks κ.
[[nodiscard]] inline bool kappa_condition(const TrajectoryStats& stats, double threshold) {
  return std::all_of(stats.per_age().begin(), stats.per_age().end(), [&](const AgeRecord& r) {
    return std::isnan(r.kappa) || r.kappa > threshold;
  });
}

/// True iff every opponent model evaluated on the support of its owner's
/// induced distribution only charges profiles inside the support of the
/// product of all players' induced distributions.
[[nodiscard]] inline bool support_condition(std::span<const EstimationBundle> bundles,
                                            std::span<const FiniteMeasure<Control>> induced,
                                            int t, State x) {
  if (bundles.size() != induced.size()) {
    throw std::invalid_argument("support_condition: one induced distribution per player");
  }
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    for (const auto& a : induced[i].support()) {
      const auto model = bundles[i].opponent_model(t, a);
      for (const auto& profile : model.support()) {
        if (profile.size() != bundles.size()) return false;
        for (std::size_t j = 0; j < bundles.size(); ++j) {
          const Control& cj = (profile[j].empty() && j == i) ? a : profile[j];
          if (!induced[j].contains(bundles[j].canonical(cj, t, x))) return false;
        }
      }
    }
  }
  return true;
}

/// max_ω | ∫ J(T0; ω, ·) dπ̂ − ∫ J(ω, ·) dπ̂ |, where J(T0) stops the chain at
/// time T0 and scores it with the state value there.
[[nodiscard]] inline double time_consistency_residual(const TimeIndexedGame& game,
                                                      const EstimationBundle& bundle,
                                                      const ScenarioSpace& scenarios, int t,
                                                      State x, int t0) {
  const int h = bundle.horizon(t, x);
  if (t0 < t || t0 > t + h) throw std::out_of_range("T0 outside [t, t + horizon]");
  scenarios.validate();
  double worst = 0.0;
  for (ScenarioId w : scenarios.scenarios) {
    const double full = prior_weighted_value(game, bundle, w, t, x);
    const double cut = prior_weighted_value(game, bundle, w, t, x, t0 - t);
    worst = std::max(worst, std::abs(cut - full));
  }
  return worst;
}

}  // namespace ueq
