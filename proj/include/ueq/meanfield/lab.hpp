#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ueq/core/conditions.hpp"
#include "ueq/core/measure.hpp"
#include "ueq/core/rng.hpp"
#include "ueq/core/trajectory.hpp"

namespace ueq::meanfield {

/// Joint law of (state, action) across the population.
using Population = FiniteMeasure<std::pair<double, double>>;

/// One atom of Γ̂: an initial state distribution and a law over control
/// labels. Controls in a one-step game are state-independent actions.
struct ProfilePoint {
  FiniteMeasure<double> mu;
  FiniteMeasure<double> controls;

  friend bool operator==(const ProfilePoint&, const ProfilePoint&) = default;
  friend bool operator<(const ProfilePoint& a, const ProfilePoint& b) {
    if (a.mu < b.mu) return true;
    if (b.mu < a.mu) return false;
    return a.controls < b.controls;
  }

  /// Ξ = μ ⊗ controls.
  [[nodiscard]] Population population() const { return product(mu, controls); }

  [[nodiscard]] bool homogeneous() const { return controls.size() == 1; }
};

using PopulationEstimate = FiniteMeasure<ProfilePoint>;

enum class TransitionRule { kBernoulli, kDiracAtAction };
enum class CostRule { kExample1, kExample2, kQuadratic };

/// φ(y, μ) = A·m² + B·y·m + C·y with m the mean of μ; F(a) = D·a² + E·a.
struct QuadraticCost {
  double a = 0, b = 0, c = 0, d = 0, e = 0;
};

struct OneStepGame {
  std::vector<double> states;
  TransitionRule transition = TransitionRule::kBernoulli;
  CostRule cost = CostRule::kExample1;
  QuadraticCost quadratic;
  int grid = 101;  ///< evaluation grid on [0,1] when endpoints do not suffice
};

/// S = {0,1}, p(·; 1) = a, φ = 2μ(1)² − 4·1{y=1}·μ(1), F = a² + a.
[[nodiscard]] inline OneStepGame example_one() {
  return {{0.0, 1.0}, TransitionRule::kBernoulli, CostRule::kExample1, {2, -4, 0, 1, 1}};
}

/// S = [0,1], p = δ_a, value ã·(1{μ̄ ≤ ½} − 1{μ̄ > ½}).
[[nodiscard]] inline OneStepGame example_two() {
  return {{}, TransitionRule::kDiracAtAction, CostRule::kExample2, {}};
}

/// One-step kernel p(x, μ, a; ·).
[[nodiscard]] inline FiniteMeasure<double> kernel(const OneStepGame& g, double /*x*/, double a) {
  if (g.transition == TransitionRule::kBernoulli) {
    FiniteMeasure<double> m;
    if (a < 1.0) m.add(0.0, 1.0 - a);
    if (a > 0.0) m.add(1.0, a);
    return m;
  }
  return FiniteMeasure<double>::dirac(a);
}

[[nodiscard]] inline FiniteMeasure<double> state_marginal(const Population& xi) {
  return xi.pushforward([](const std::pair<double, double>& p) { return p.first; });
}

[[nodiscard]] inline double mean(const FiniteMeasure<double>& m) {
  return m.integrate([](double y) { return y; });
}

struct FlowStep {
  Population xi;
  FiniteMeasure<double> mu;
};

/// Ξ_{s+1}(dy, dα) = ∫ p(x, μ_s, α; dy) dΞ_s(x, dα); element 0 is Ξ itself.
[[nodiscard]] inline std::vector<FlowStep> population_flow(const OneStepGame& g, const Population& xi,
                                                           int steps) {
  std::vector<FlowStep> out{{xi, state_marginal(xi)}};
  for (int s = 0; s < steps; ++s) {
    Population next;
    for (const auto& [xa, w] : out.back().xi.atoms()) {
      const auto step = kernel(g, xa.first, xa.second);
      for (const auto& [y, p] : step.atoms()) next.add({y, xa.second}, w * p);
    }
    auto mu = state_marginal(next);
    out.push_back({std::move(next), std::move(mu)});
  }
  return out;
}

/// Law of X₁ for the representative player at x using action ã.
[[nodiscard]] inline FiniteMeasure<double> player_flow(const OneStepGame& g, const Population& /*xi*/, double x,
                                                       double a) {
  return kernel(g, x, a).normalize();
}

/// Inner value J(Ξ; x, ã) = E[φ(X₁, μ₁) + F(ã)].
[[nodiscard]] inline double inner_value(const OneStepGame& g, const Population& xi, double x, double a) {
  const auto mu1 = population_flow(g, xi, 1).back().mu;
  const double m = mean(mu1);
  const auto law = player_flow(g, xi, x, a);
  switch (g.cost) {
    case CostRule::kExample2: {
      const double sign = m <= 0.5 ? 1.0 : -1.0;
      return law.integrate([sign](double y) { return sign * y; });
    }
    case CostRule::kExample1:
    case CostRule::kQuadratic: {
      const auto& q = g.quadratic;
      const double phi = law.integrate([&](double y) { return q.a * m * m + q.b * y * m + q.c * y; });
      return phi + q.d * a * a + q.e * a;
    }
  }
  return 0.0;
}

/// ∫ J(Ξ; x, ã) dΓ̂(Ξ).
[[nodiscard]] inline double mf_cost(const OneStepGame& g, const PopulationEstimate& gamma, double x, double a) {
  return gamma.integrate([&](const ProfilePoint& p) { return inner_value(g, p.population(), x, a); });
}

/// Ξ̄ = ∫ Ξ dΓ̂, mixed atom-wise.
[[nodiscard]] inline Population averaged_population(const PopulationEstimate& gamma) {
  Population out;
  for (const auto& [p, w] : gamma.atoms()) {
    const auto xi = p.population();
    for (const auto& [xa, v] : xi.atoms()) out.add(xa, w * v);
  }
  return out;
}

/// J(Ξ̄; x, ã): the cost at the averaged population.
[[nodiscard]] inline double fictitious_cost(const OneStepGame& g, const PopulationEstimate& gamma, double x,
                                            double a) {
  return inner_value(g, averaged_population(gamma), x, a);
}

/// Mean of the population's next-state law under Γ̂.
[[nodiscard]] inline double population_mean(const OneStepGame& g, const PopulationEstimate& gamma) {
  return gamma.integrate(
      [&](const ProfilePoint& p) { return mean(population_flow(g, p.population(), 1).back().mu); });
}

/// True when the maximum over [0,1] is attained at an endpoint.
[[nodiscard]] inline bool endpoint_optimal(const OneStepGame& g) {
  return g.cost != CostRule::kQuadratic || g.quadratic.d >= 0.0;
}

[[nodiscard]] inline std::vector<double> candidate_actions(const OneStepGame& g) {
  if (endpoint_optimal(g)) return {0.0, 1.0};
  std::vector<double> grid;
  for (int k = 0; k < g.grid; ++k) grid.push_back(static_cast<double>(k) / (g.grid - 1));
  return grid;
}

/// Maximizer of `value` over the candidate actions. An exact tie between
/// the endpoints is broken by a fair coin from `rng`; grid ties go low.
template <class Value>
[[nodiscard]] double best_action(const OneStepGame& g, Value&& value, Rng& rng) {
  const auto cand = candidate_actions(g);
  std::vector<double> v;
  for (double a : cand) v.push_back(value(a));
  if (cand.size() == 2 && v[0] == v[1]) return std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return cand[best];
}

[[nodiscard]] inline double best_response(const OneStepGame& g, const PopulationEstimate& gamma, Rng& rng,
                                          double x = 0.0) {
  return best_action(g, [&](double a) { return mf_cost(g, gamma, x, a); }, rng);
}

[[nodiscard]] inline double fictitious_best_response(const OneStepGame& g, const PopulationEstimate& gamma,
                                                     Rng& rng, double x = 0.0) {
  return best_action(g, [&](double a) { return fictitious_cost(g, gamma, x, a); }, rng);
}

inline constexpr double kPruneThreshold = 1e-12;

/// Γ_{n+1} = c·δ_{(μ, δ_best)} + (1 − c)·Γ_n, pruned at 1e−12.
[[nodiscard]] inline PopulationEstimate learning_step(const PopulationEstimate& gamma, const FiniteMeasure<double>& mu,
                                                      double best, double c, bool prune = true) {
  if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("mixing constant must lie in [0,1]");
  PopulationEstimate out;
  for (const auto& [p, w] : gamma.atoms()) {
    if ((1.0 - c) * w > 0.0) out.add(p, (1.0 - c) * w);
  }
  if (c > 0.0) out.add(ProfilePoint{mu, FiniteMeasure<double>::dirac(best)}, c);
  if (prune) out.prune(kPruneThreshold);
  return out;
}

struct Iterate {
  int iter = 0;
  double m = 0;     ///< population mean under Γ_n
  double best = 0;  ///< best response to Γ_n
  PopulationEstimate gamma;
};

struct MeanFieldRun {
  std::vector<Iterate> iterates;
  TrajectoryStats stats;  ///< site "action": γ_n = δ_{best_n}
};

enum class CostVariant { kAveraged, kFictitious };

/// Iterates best response → learning step from the homogeneous prior δ_{(μ, δ_{a0})}.
[[nodiscard]] inline MeanFieldRun run_mean_field(const OneStepGame& g, double a0, double c, int iters,
                                                 std::uint64_t seed, CostVariant variant = CostVariant::kAveraged,
                                                 bool prune = true) {
  if (iters < 0) throw std::invalid_argument("iteration count must be non-negative");
  Rng rng(seed);
  const auto mu = FiniteMeasure<double>::dirac(0.0);
  PopulationEstimate gamma = PopulationEstimate::dirac(ProfilePoint{mu, FiniteMeasure<double>::dirac(a0)});
  MeanFieldRun run;
  for (int n = 0; n < iters; ++n) {
    Iterate it;
    it.iter = n;
    it.m = population_mean(g, gamma);
    it.best = variant == CostVariant::kAveraged ? best_response(g, gamma, rng)
                                                : fictitious_best_response(g, gamma, rng);
    it.gamma = gamma;
    AgeRecord rec;
    rec.age = n;
    rec.induced["action"] = FiniteMeasure<double>::dirac(it.best);
    rec.regret = 0.0;  // endpoint-exact maximization
    run.stats.push(std::move(rec));
    gamma = learning_step(gamma, mu, it.best, c, prune);
    run.iterates.push_back(std::move(it));
  }
  return run;
}

/// m_{n+1} = c·1{m_n < ½} + (1 − c)·m_n, the population mean under example_one().
[[nodiscard]] inline std::vector<double> scalar_recursion(double a0, double c, int iters) {
  std::vector<double> m{a0};
  for (int n = 1; n < iters; ++n) {
    const double prev = m.back();
    m.push_back(c * (prev < 0.5 ? 1.0 : 0.0) + (1 - c) * prev);
  }
  return m;
}

/// Every support action of Ξ₀ attains max J(Ξ₀; ·) within 1e−12.
[[nodiscard]] inline bool relaxed_equilibrium_check(const OneStepGame& g, const FiniteMeasure<double>& xi0,
                                                    double x = 0.0) {
  const auto xi = product(FiniteMeasure<double>::dirac(x), xi0);
  auto cand = candidate_actions(g);
  for (double a : xi0.support()) cand.push_back(a);
  double best = -std::numeric_limits<double>::infinity();
  for (double a : cand) best = std::max(best, inner_value(g, xi, x, a));
  for (double a : xi0.support()) {
    if (inner_value(g, xi, x, a) < best - 1e-12) return false;
  }
  return true;
}

/// Occurrences of each best response within the last `tail` iterates.
[[nodiscard]] inline std::pair<int, int> tail_counts(const MeanFieldRun& run, std::size_t tail) {
  const auto& it = run.iterates;
  const std::size_t from = it.size() > tail ? it.size() - tail : 0;
  int zeros = 0, ones = 0;
  for (std::size_t k = from; k < it.size(); ++k) {
    if (it[k].best == 0.0) ++zeros;
    if (it[k].best == 1.0) ++ones;
  }
  return {zeros, ones};
}

/// Recurrence of γ_n to δ_0, δ_1 and their even mixture (total variation).
struct RecurrenceSummary {
  RecurrenceReport to_zero, to_one, to_mixture;
};

[[nodiscard]] inline RecurrenceSummary recurrence_summary(const MeanFieldRun& run, double r = 0.0) {
  const auto d0 = FiniteMeasure<double>::dirac(0.0), d1 = FiniteMeasure<double>::dirac(1.0);
  const auto w = default_window(run.stats.size());
  return {recurrence_check(run.stats, "action", d0, Metric::kTotalVariation, w, r),
          recurrence_check(run.stats, "action", d1, Metric::kTotalVariation, w, r),
          recurrence_check(run.stats, "action", mix(d0, d1, 0.5), Metric::kTotalVariation, w, r)};
}

[[nodiscard]] inline std::string format_atoms(const PopulationEstimate& gamma) {
  std::string s;
  char buf[64];
  for (const auto& [p, w] : gamma.atoms()) {
    if (!s.empty()) s += ';';
    const double a = p.controls.size() == 1 ? p.controls.atoms()[0].first : mean(p.controls);
    std::snprintf(buf, sizeof buf, "%.17g:%.17g", a, w);
    s += buf;
  }
  return s;
}

inline void write_csv(std::ostream& os, const MeanFieldRun& run) {
  os << "iter,m,best,gamma_atoms\n";
  char buf[64];
  for (const auto& it : run.iterates) {
    std::snprintf(buf, sizeof buf, "%.17g", it.m);
    os << it.iter << ',' << buf << ',' << it.best << ',' << format_atoms(it.gamma) << '\n';
  }
}

}  // namespace ueq::meanfield
