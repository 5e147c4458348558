#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ueq/core/measure.hpp"
#include "ueq/core/rng.hpp"
#include "ueq/core/trajectory.hpp"

namespace ueq::rl {

enum class Perspective { kState, kAction };

[[nodiscard]] inline Perspective parse_perspective(const std::string& s) {
  if (s == "state") return Perspective::kState;
  if (s == "action") return Perspective::kAction;
  throw std::invalid_argument("unknown bandit perspective: " + s);
}

/// Arms are indexed from 0; each carries a finitely supported reward law.
struct BanditSpec {
  std::vector<FiniteMeasure<double>> arms;
  double delta_f = 0.0;  ///< F̂(ω̂, a) ~ uniform[−δ_F, δ_F], iid per arm
  Perspective perspective = Perspective::kState;

  void validate() const {
    if (arms.empty()) throw std::invalid_argument("bandit needs at least one arm");
    for (const auto& a : arms) {
      if (!a.is_probability()) throw std::invalid_argument("arm reward law must be normalized");
    }
    if (!(delta_f >= 0.0)) throw std::invalid_argument("noise width must be non-negative");
  }
};

[[nodiscard]] inline FiniteMeasure<double> bernoulli_arm(double p) {
  FiniteMeasure<double> m;
  if (p < 1.0) m.add(0.0, 1.0 - p);
  if (p > 0.0) m.add(1.0, p);
  return m;
}

/// P(U₁ − U₂ > g) for U_i iid uniform[−δ, δ].
[[nodiscard]] inline double uniform_difference_tail(double g, double delta) {
  if (delta == 0.0) return g < 0 ? 1.0 : (g == 0 ? 0.5 : 0.0);
  const double w = 2 * delta;
  if (g >= w) return 0.0;
  if (g <= -w) return 1.0;
  if (g >= 0) return (w - g) * (w - g) / (2 * w * w);
  return 1.0 - (w + g) * (w + g) / (2 * w * w);
}

/// Law of argmax_a (μ̂_a + F̂(ω̂, a)) over noise scenarios. Closed form for two
/// arms; otherwise `n_scenarios` Monte Carlo draws with lowest-index ties.
[[nodiscard]] inline FiniteMeasure<int> argmax_law(const std::vector<double>& means, double delta_f,
                                                   int n_scenarios, Rng& rng, bool force_monte_carlo = false) {
  if (means.empty()) throw std::invalid_argument("no arms");
  if (!(delta_f >= 0.0)) throw std::invalid_argument("noise width must be non-negative");
  const int k = static_cast<int>(means.size());
  FiniteMeasure<int> out;
  if (k == 1) return FiniteMeasure<int>::dirac(0);
  if (k == 2 && !force_monte_carlo) {
    const double p0 = uniform_difference_tail(means[1] - means[0], delta_f);
    if (p0 > 0) out.add(0, p0);
    if (p0 < 1) out.add(1, 1.0 - p0);
    return out;
  }
  if (n_scenarios <= 0) throw std::invalid_argument("scenario count must be positive");
  std::uniform_real_distribution<double> u(-delta_f, delta_f);
  std::vector<long> hits(static_cast<std::size_t>(k), 0);
  for (int s = 0; s < n_scenarios; ++s) {
    int best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < k; ++a) {
      const double v = means[static_cast<std::size_t>(a)] + (delta_f > 0 ? u(rng) : 0.0);
      if (v > best_v) best_v = v, best = a;
    }
    ++hits[static_cast<std::size_t>(best)];
  }
  for (int a = 0; a < k; ++a) {
    if (hits[static_cast<std::size_t>(a)] > 0) {
      out.add(a, static_cast<double>(hits[static_cast<std::size_t>(a)]) / n_scenarios);
    }
  }
  return out;
}

/// State perspective: the chosen arm's reward is the next state's component,
/// so J(ω̂, a) = E[φ(a, X₁)] + F̂(ω̂, a) with E[φ(a, X₁)] the arm's mean.
[[nodiscard]] inline FiniteMeasure<int> bandit_state_policy(const BanditSpec& spec, int n_scenarios, Rng& rng,
                                                            bool force_monte_carlo = false) {
  spec.validate();
  std::vector<double> means;
  for (const auto& a : spec.arms) means.push_back(a.integrate([](double r) { return r; }));
  return argmax_law(means, spec.delta_f, n_scenarios, rng, force_monte_carlo);
}

using RewardProfile = std::vector<double>;

/// Γ̂ for the action perspective: the joint law of all arms' actions.
[[nodiscard]] inline FiniteMeasure<RewardProfile> arm_profile_law(const BanditSpec& spec) {
  FiniteMeasure<RewardProfile> out = FiniteMeasure<RewardProfile>::dirac({});
  for (const auto& arm : spec.arms) {
    FiniteMeasure<RewardProfile> next;
    for (const auto& [prefix, w] : out.atoms()) {
      for (const auto& [r, p] : arm.atoms()) {
        auto v = prefix;
        v.push_back(r);
        next.add(std::move(v), w * p);
      }
    }
    out = std::move(next);
  }
  return out;
}

/// Action perspective: J(ω̂, ℓ) = ∫ a_ℓ dΓ̂ + F̂(ω̂, ℓ).
[[nodiscard]] inline FiniteMeasure<int> bandit_action_policy(const FiniteMeasure<RewardProfile>& gamma_hat,
                                                             double delta_f, int n_scenarios, Rng& rng,
                                                             bool force_monte_carlo = false) {
  if (gamma_hat.empty()) throw std::invalid_argument("empty arm profile law");
  const std::size_t k = gamma_hat.atoms().front().first.size();
  std::vector<double> means(k, 0.0);
  for (const auto& [profile, w] : gamma_hat.atoms()) {
    if (profile.size() != k) throw std::invalid_argument("arm profiles differ in length");
    for (std::size_t l = 0; l < k; ++l) means[l] += w * profile[l];
  }
  return argmax_law(means, delta_f, n_scenarios, rng, force_monte_carlo);
}

[[nodiscard]] inline FiniteMeasure<int> bandit_policy(const BanditSpec& spec, int n_scenarios, Rng& rng) {
  if (spec.perspective == Perspective::kState) return bandit_state_policy(spec, n_scenarios, rng);
  return bandit_action_policy(arm_profile_law(spec), spec.delta_f, n_scenarios, rng);
}

/// An arm as a constant learner: its induced action law is its reward law at
/// every age, with nothing to regret.
[[nodiscard]] inline TrajectoryStats arm_trajectory(const BanditSpec& spec, int arm, int ages) {
  TrajectoryStats st;
  for (int n = 0; n < ages; ++n) {
    AgeRecord r;
    r.age = n;
    r.induced["action"] = spec.arms.at(static_cast<std::size_t>(arm));
    st.push(std::move(r));
  }
  return st;
}

}  // namespace ueq::rl
