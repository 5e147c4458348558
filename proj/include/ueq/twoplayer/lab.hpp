#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ueq/core/measure.hpp"
#include "ueq/core/rng.hpp"
#include "ueq/core/trajectory.hpp"
#include "ueq/smallnet/net.hpp"

namespace ueq::twoplayer {

using smallnet::DropoutSample;
using smallnet::Net;

enum class Role { kOne, kTwo };

/// Repeated one-step game with Bernoulli transitions. Player 1 earns c·a¹
/// and pays 1 when player 2 lands in state 1; player 2 pays 1 on mismatch.
struct GameConfig {
  double c = 0.3;
  double b1 = 0.1;   ///< best expectation of player 1, in reward units
  double b2 = -0.2;  ///< best expectation of player 2, in reward units
  int k = 8;
  int memory_len = 200;  ///< 0 disables learning altogether
  double recency_decay = 0.98;
  int n_games = 1000;
  int grid = 101;
  std::uint64_t seed = 0;

  int sgd_steps = 5;
  double learning_rate = 0.05;
  int batch = 16;
  int hidden = 16;
  double cost_dropout = 0.1;
  int kappa_draws = 16;
  bool cost_noise = true;
  bool zero_init = false;

  void validate() const {
    if (!(c > 0)) throw std::invalid_argument("c must be positive");
    if (grid < 2) throw std::invalid_argument("action grid needs at least two points");
    if (memory_len < 0) throw std::invalid_argument("memory length must be non-negative");
    if (k < 1) throw std::invalid_argument("ensemble size must be positive");
    if (!(recency_decay > 0 && recency_decay < 1)) throw std::invalid_argument("recency decay must lie in (0,1)");
    if (n_games < 0) throw std::invalid_argument("number of games must be non-negative");
    if (sgd_steps < 0 || batch < 1 || hidden < 1 || kappa_draws < 1) {
      throw std::invalid_argument("invalid training parameters");
    }
    if (!(cost_dropout >= 0 && cost_dropout < 1)) throw std::invalid_argument("dropout must lie in [0,1)");
  }

  [[nodiscard]] double best_expectation(Role r) const { return r == Role::kOne ? b1 : b2; }
};

struct MemoryEntry {
  double own_action = 0;
  int own_state = 0;
  int opponent_state = 0;
  double cost = 0;
};

struct PlayerState {
  Role role = Role::kOne;
  std::vector<Net> action_nets;  ///< own action ↦ predicted opponent state
  std::vector<Net> cost_nets;    ///< own action ↦ cost residual, with dropout
  std::vector<MemoryEntry> memory;  ///< oldest first
  double kappa_ema = 0.5;
  double explore_scale = 1.0;
  /// Deterministic part of Ĵ on the action grid; refreshed after each update.
  std::vector<double> model_grid;
};

inline constexpr double kExploreCap = 8.0;
inline constexpr double kDesperateBand = 1.0 / 9.0;
inline constexpr double kConfidentBand = 6.0 / 9.0;

[[nodiscard]] inline std::vector<double> action_grid(int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) g[static_cast<std::size_t>(k)] = static_cast<double>(k) / (n - 1);
  return g;
}

[[nodiscard]] inline PlayerState make_player(Role role, const GameConfig& cfg, Rng& rng) {
  PlayerState p;
  p.role = role;
  smallnet::NetSpec act{{1, cfg.hidden, cfg.hidden, 1}, smallnet::OutputTransform::kSigmoid};
  smallnet::NetSpec cost{{1, cfg.hidden, cfg.hidden, 1}, smallnet::OutputTransform::kIdentity, 0, 1,
                         cfg.cost_dropout};
  for (int k = 0; k < cfg.k; ++k) {
    p.action_nets.push_back(cfg.zero_init ? Net(act) : Net(act, rng));
    p.cost_nets.push_back(cfg.zero_init ? Net(cost) : Net(cost, rng));
  }
  return p;
}

/// x^i ~ Bernoulli(a^i), independently.
[[nodiscard]] inline std::pair<int, int> env_step(double a1, double a2, Rng& rng) {
  if (!(a1 >= 0 && a1 <= 1 && a2 >= 0 && a2 <= 1)) throw std::invalid_argument("actions must lie in [0,1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int x1 = u(rng) < a1 ? 1 : 0;
  const int x2 = u(rng) < a2 ? 1 : 0;
  return {x1, x2};
}

[[nodiscard]] inline std::pair<double, double> realized_costs(double a1, double /*a2*/, int x1, int x2,
                                                              double c) {
  return {-c * a1 + (x2 == 1 ? 1.0 : 0.0), x1 != x2 ? 1.0 : 0.0};
}

/// Deterministic part of Ĵ: the cost implied by the action-net ensemble.
[[nodiscard]] inline double model_cost(const PlayerState& p, double c, double a) {
  const double in[1] = {a};
  double s = 0.0;
  for (const auto& n : p.action_nets) {
    const double hat = n.forward_scalar(in);
    s += p.role == Role::kOne ? hat : hat + a * (1 - 2 * hat);
  }
  s /= static_cast<double>(p.action_nets.size());
  return p.role == Role::kOne ? s - c * a : s;
}

/// Ĵ(ℓ, ω̂′, a) with the exploration scale applied to the cost-net term.
[[nodiscard]] inline double estimate_cost(const PlayerState& p, double a, std::size_t l,
                                          const DropoutSample& dropout, double c, bool noise = true) {
  double j = model_cost(p, c, a);
  if (noise) {
    const double in[1] = {a};
    j += p.explore_scale * p.cost_nets.at(l).forward_scalar(in, &dropout);
  }
  return j;
}

/// Index of the smallest value; ties go to the lowest index.
[[nodiscard]] inline std::size_t argmin_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] < v[best]) best = k;
  }
  return best;
}

/// Ĵ on the grid for one scenario, given the precomputed deterministic part.
[[nodiscard]] inline std::vector<double> scenario_costs(const PlayerState& p, const std::vector<double>& grid,
                                                        const std::vector<double>& model, std::size_t l,
                                                        const DropoutSample& dropout, bool noise) {
  std::vector<double> j = model;
  if (noise) {
    const auto& net = p.cost_nets.at(l);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double in[1] = {grid[g]};
      j[g] += p.explore_scale * net.forward_scalar(in, &dropout);
    }
  }
  return j;
}

[[nodiscard]] inline std::vector<double> model_costs(const PlayerState& p, const std::vector<double>& grid,
                                                     double c) {
  std::vector<double> m(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) m[g] = model_cost(p, c, grid[g]);
  return m;
}

struct Scenario {
  std::size_t net = 0;
  DropoutSample dropout;
};

[[nodiscard]] inline Scenario draw_scenario(const PlayerState& p, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, p.cost_nets.size() - 1);
  Scenario s;
  s.net = pick(rng);
  s.dropout = p.cost_nets[s.net].draw_dropout(rng);
  return s;
}

[[nodiscard]] inline std::vector<double> cached_model_costs(const PlayerState& p,
                                                            const std::vector<double>& grid, double c) {
  return p.model_grid.size() == grid.size() ? p.model_grid : model_costs(p, grid, c);
}

/// Draws one scenario (ℓ, ω̂′) and plays the grid argmin of Ĵ.
[[nodiscard]] inline double draw_action(const PlayerState& p, const GameConfig& cfg, Rng& rng) {
  const auto grid = action_grid(cfg.grid);
  const auto model = cached_model_costs(p, grid, cfg.c);
  const auto s = draw_scenario(p, rng);
  return grid[argmin_lowest(scenario_costs(p, grid, model, s.net, s.dropout, cfg.cost_noise))];
}

/// Scenario-wise argmins and the desperation index from `draws` scenarios:
/// κ is the fraction with −min Ĵ > B.
struct KappaEstimate {
  double kappa = 0;
  FiniteMeasure<double> induced;
};

[[nodiscard]] inline KappaEstimate estimate_kappa(const PlayerState& p, const GameConfig& cfg, Rng& rng) {
  const auto grid = action_grid(cfg.grid);
  const auto model = cached_model_costs(p, grid, cfg.c);
  const double b = cfg.best_expectation(p.role);
  KappaEstimate out;
  int hits = 0;
  for (int d = 0; d < cfg.kappa_draws; ++d) {
    const auto s = draw_scenario(p, rng);
    const auto j = scenario_costs(p, grid, model, s.net, s.dropout, cfg.cost_noise);
    const std::size_t g = argmin_lowest(j);
    if (-j[g] > b) ++hits;
    out.induced.add(grid[g], 1.0 / cfg.kappa_draws);
  }
  out.kappa = static_cast<double>(hits) / cfg.kappa_draws;
  return out;
}

/// Desperation rule on the exploration scale.
inline void adjust_explore(PlayerState& p, double kappa) {
  if (kappa < kDesperateBand) {
    p.explore_scale = std::min(p.explore_scale * 1.5, kExploreCap);
  } else if (kappa > kConfidentBand) {
    p.explore_scale = std::max(p.explore_scale * 0.9, 1.0);
  }
}

inline void remember(PlayerState& p, const MemoryEntry& e, int memory_len) {
  if (memory_len <= 0) return;
  p.memory.push_back(e);
  if (static_cast<int>(p.memory.size()) > memory_len) p.memory.erase(p.memory.begin());
}

/// Recency-weighted multinomial draw of memory indices (weight ρ^age, age 0 = newest).
[[nodiscard]] inline std::vector<std::size_t> sample_memory(const PlayerState& p, double rho, int n, Rng& rng) {
  const std::size_t m = p.memory.size();
  std::vector<double> w(m);
  double v = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    w[k] = v;
    v *= rho;
  }
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::vector<std::size_t> out(static_cast<std::size_t>(n));
  for (auto& i : out) i = pick(rng);
  return out;
}

/// Trains both ensembles on fresh recency-weighted batches, then applies the
/// desperation rule. Returns the κ estimate used by the rule.
inline KappaEstimate update_networks(PlayerState& p, const GameConfig& cfg, Rng& rng) {
  if (!p.memory.empty()) {
    for (int step = 0; step < cfg.sgd_steps; ++step) {
      for (auto& net : p.action_nets) {
        std::vector<smallnet::Sample> batch;
        for (auto i : sample_memory(p, cfg.recency_decay, cfg.batch, rng)) {
          const auto& e = p.memory[i];
          batch.push_back({{e.own_action}, {static_cast<double>(e.opponent_state)}});
        }
        net.train_step(batch, cfg.learning_rate);
      }
    }
    // Residuals against the freshly trained action nets, computed on demand.
    std::vector<double> residual(p.memory.size(), std::numeric_limits<double>::quiet_NaN());
    for (int step = 0; step < cfg.sgd_steps; ++step) {
      for (auto& net : p.cost_nets) {
        std::vector<smallnet::Sample> batch;
        for (auto i : sample_memory(p, cfg.recency_decay, cfg.batch, rng)) {
          if (std::isnan(residual[i])) residual[i] = p.memory[i].cost - model_cost(p, cfg.c, p.memory[i].own_action);
          batch.push_back({{p.memory[i].own_action}, {residual[i]}});
        }
        const auto mask = net.draw_dropout(rng);
        net.train_step(batch, cfg.learning_rate, &mask);
      }
    }
  }
  p.model_grid = model_costs(p, action_grid(cfg.grid), cfg.c);
  auto est = estimate_kappa(p, cfg, rng);
  p.kappa_ema = 0.8 * p.kappa_ema + 0.2 * est.kappa;
  adjust_explore(p, est.kappa);
  return est;
}

struct Round {
  int game = 0;
  double a1 = 0, a2 = 0;
  int x1 = 0, x2 = 0;
  double cost1 = 0, cost2 = 0;
  double kappa1 = 0, kappa2 = 0;
  double explore1 = 1, explore2 = 1;
};

struct Trace {
  std::vector<Round> rounds;
  /// Per player: induced action distribution (site "action"), negated
  /// realized cost as regret-free value bookkeeping, and κ per age.
  TrajectoryStats stats[2];
};

/// Simulates cfg.n_games rounds of draw → env_step → record → update.
[[nodiscard]] inline Trace run_experiment(const GameConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  PlayerState p[2] = {make_player(Role::kOne, cfg, rng), make_player(Role::kTwo, cfg, rng)};
  Trace tr;
  tr.rounds.reserve(static_cast<std::size_t>(cfg.n_games));
  for (int n = 0; n < cfg.n_games; ++n) {
    Round r;
    r.game = n;
    r.a1 = draw_action(p[0], cfg, rng);
    r.a2 = draw_action(p[1], cfg, rng);
    std::tie(r.x1, r.x2) = env_step(r.a1, r.a2, rng);
    std::tie(r.cost1, r.cost2) = realized_costs(r.a1, r.a2, r.x1, r.x2, cfg.c);
    remember(p[0], {r.a1, r.x1, r.x2, r.cost1}, cfg.memory_len);
    remember(p[1], {r.a2, r.x2, r.x1, r.cost2}, cfg.memory_len);
    for (int i = 0; i < 2; ++i) {
      auto est = update_networks(p[i], cfg, rng);
      (i == 0 ? r.kappa1 : r.kappa2) = est.kappa;
      (i == 0 ? r.explore1 : r.explore2) = p[i].explore_scale;
      AgeRecord rec;
      rec.age = n;
      rec.induced["action"] = std::move(est.induced);
      // Each scenario plays its exact grid argmin.
      rec.regret = 0.0;
      rec.kappa = est.kappa;
      tr.stats[i].push(std::move(rec));
    }
    tr.rounds.push_back(r);
  }
  return tr;
}

/// Makes every action net output the constant `state` (0 or 1): the last
/// layer is zeroed and its bias saturates the sigmoid.
inline void pin_action_nets(PlayerState& p, int state) {
  for (auto& n : p.action_nets) {
    const std::size_t last = n.num_layers() - 1;
    std::fill(n.weights(last).begin(), n.weights(last).end(), 0.0);
    n.biases(last)[0] = state == 1 ? 50.0 : -50.0;
  }
  p.model_grid.clear();
}

/// Grid argmins of both players when every action net predicts the opponent
/// in state 1 and the cost-net term is switched off.
[[nodiscard]] inline std::pair<double, double> frozen_opponent_argmins(GameConfig cfg) {
  cfg.cost_noise = false;
  Rng rng(cfg.seed);
  PlayerState p[2] = {make_player(Role::kOne, cfg, rng), make_player(Role::kTwo, cfg, rng)};
  for (auto& pl : p) pin_action_nets(pl, 1);
  return {draw_action(p[0], cfg, rng), draw_action(p[1], cfg, rng)};
}

/// Number of times the series crosses `level` (strictly below ↔ at or above).
[[nodiscard]] inline int count_crossings(const std::vector<Round>& rounds, double level) {
  int n = 0;
  for (std::size_t k = 1; k < rounds.size(); ++k) {
    if ((rounds[k - 1].a1 < level) != (rounds[k].a1 < level)) ++n;
  }
  return n;
}

/// Fraction of the last `tail` rounds with both actions above `level`.
[[nodiscard]] inline double tail_fraction_both_above(const std::vector<Round>& rounds, std::size_t tail,
                                                     double level) {
  const std::size_t n = std::min(tail, rounds.size());
  if (n == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t k = rounds.size() - n; k < rounds.size(); ++k) {
    if (rounds[k].a1 > level && rounds[k].a2 > level) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

inline void write_csv(std::ostream& os, const Trace& tr) {
  os << "game,a1,a2,x1,x2,cost1,cost2,kappa1,kappa2,explore1,explore2\n";
  for (const auto& r : tr.rounds) {
    os << r.game << ',' << r.a1 << ',' << r.a2 << ',' << r.x1 << ',' << r.x2 << ',' << r.cost1 << ','
       << r.cost2 << ',' << r.kappa1 << ',' << r.kappa2 << ',' << r.explore1 << ',' << r.explore2 << '\n';
  }
}

}  // namespace ueq::twoplayer
