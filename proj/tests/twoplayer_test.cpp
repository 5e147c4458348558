#include <gtest/gtest.h>

#include <sstream>

#include "ueq/twoplayer/lab.hpp"

namespace ueq::twoplayer {
namespace {

GameConfig small_config(std::uint64_t seed = 1) {
  GameConfig cfg;
  cfg.seed = seed;
  cfg.n_games = 60;
  cfg.k = 3;
  cfg.memory_len = 50;
  return cfg;
}

TEST(EnvStep, DegenerateActions) {
  Rng rng(1);
  for (int n = 0; n < 100; ++n) {
    EXPECT_EQ(env_step(0, 0, rng), std::make_pair(0, 0));
    EXPECT_EQ(env_step(1, 1, rng), std::make_pair(1, 1));
  }
  EXPECT_THROW((void)env_step(1.5, 0, rng), std::invalid_argument);
}

TEST(EnvStep, FairCoinMean) {
  Rng rng(2);
  double s = 0;
  for (int n = 0; n < 100000; ++n) s += env_step(0.5, 0.5, rng).first;
  // Standard deviation of the mean is 0.0016.
  EXPECT_NEAR(s / 1e5, 0.5, 0.01);
}

TEST(RealizedCosts, Examples) {
  EXPECT_DOUBLE_EQ(realized_costs(1, 0.2, 1, 0, 0.3).first, -0.3);
  EXPECT_EQ(realized_costs(0.4, 0.4, 1, 1, 0.3).second, 0.0);
  EXPECT_EQ(realized_costs(0.4, 0.4, 0, 0, 0.3).second, 0.0);
  EXPECT_EQ(realized_costs(0.4, 0.4, 0, 1, 0.3).second, 1.0);
  EXPECT_EQ(realized_costs(0, 1, 0, 1, 0.3).first, 1.0);
}

PlayerState zero_player(Role role, int pinned_state, GameConfig cfg = small_config()) {
  cfg.zero_init = true;
  Rng rng(0);
  auto p = make_player(role, cfg, rng);
  pin_action_nets(p, pinned_state);
  return p;
}

TEST(EstimateCost, ZeroNetsRoleOne) {
  auto p = zero_player(Role::kOne, 0);
  const auto d = p.cost_nets[0].draw_dropout(5);
  EXPECT_DOUBLE_EQ(estimate_cost(p, 1.0, 0, d, 0.3), -0.3);
}

TEST(EstimateCost, RoleTwoAgainstOpponentAtZeroAndOne) {
  const auto d = zero_player(Role::kTwo, 0).cost_nets[0].draw_dropout(5);
  for (double a : {0.0, 0.25, 0.7, 1.0}) {
    EXPECT_NEAR(estimate_cost(zero_player(Role::kTwo, 0), a, 0, d, 0.3), a, 1e-15);
    EXPECT_NEAR(estimate_cost(zero_player(Role::kTwo, 1), a, 0, d, 0.3), 1 - a, 1e-15);
  }
}

TEST(EstimateCost, ExploreScaleMultipliesCostNet) {
  Rng rng(3);
  auto cfg = small_config();
  auto p = make_player(Role::kOne, cfg, rng);
  const auto d = p.cost_nets[1].draw_dropout(9);
  const double in[1] = {0.4};
  const double noise = p.cost_nets[1].forward_scalar(in, &d);
  const double base = estimate_cost(p, 0.4, 1, d, cfg.c, false);
  p.explore_scale = 3.0;
  EXPECT_NEAR(estimate_cost(p, 0.4, 1, d, cfg.c) - base, 3.0 * noise, 1e-14);
}

TEST(DrawAction, ZeroNetsClosedForms) {
  auto cfg = small_config();
  Rng rng(4);
  EXPECT_EQ(draw_action(zero_player(Role::kOne, 0), cfg, rng), 1.0);
  EXPECT_EQ(draw_action(zero_player(Role::kTwo, 0), cfg, rng), 0.0);
  EXPECT_EQ(draw_action(zero_player(Role::kTwo, 1), cfg, rng), 1.0);
}

TEST(DrawAction, TiesGoToLowestGridPoint) {
  EXPECT_EQ(argmin_lowest({0.2, 0.1, 0.1}), 1u);
  EXPECT_EQ(action_grid(3)[argmin_lowest({0.2, 0.1, 0.1})], 0.5);
}

TEST(NashRecovery, FrozenOpponentModelGivesOneOne) {
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    for (double c : {0.05, 0.3, 1.0}) {
      GameConfig cfg;
      cfg.seed = seed;
      cfg.c = c;
      EXPECT_EQ(frozen_opponent_argmins(cfg), std::make_pair(1.0, 1.0)) << "seed " << seed << " c " << c;
    }
  }
}

TEST(UpdateNetworks, ActionNetsDriftTowardConstantOpponent) {
  auto cfg = small_config();
  Rng rng(6);
  auto p = make_player(Role::kOne, cfg, rng);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n = 0; n < 50; ++n) remember(p, {u(rng), 0, 0, 0.0}, cfg.memory_len);
  auto mean_output = [&] {
    double s = 0;
    for (double a : action_grid(11)) {
      const double in[1] = {a};
      for (const auto& net : p.action_nets) s += net.forward_scalar(in);
    }
    return s / (11.0 * static_cast<double>(p.action_nets.size()));
  };
  double prev = mean_output();
  for (int block = 0; block < 10; ++block) {
    for (int n = 0; n < 10; ++n) (void)update_networks(p, cfg, rng);
    const double cur = mean_output();
    EXPECT_LT(cur, prev) << "block " << block;
    prev = cur;
  }
}

TEST(UpdateNetworks, DesperationRaisesExploreScale) {
  auto cfg = small_config();
  cfg.b1 = 1e9;
  Rng rng(7);
  auto p = make_player(Role::kOne, cfg, rng);
  remember(p, {0.5, 0, 1, 0.85}, cfg.memory_len);
  double prev = p.explore_scale;
  for (int n = 0; n < 8; ++n) {
    const auto est = update_networks(p, cfg, rng);
    EXPECT_EQ(est.kappa, 0.0);
    if (prev < kExploreCap) {
      EXPECT_GT(p.explore_scale, prev);
    }
    EXPECT_LE(p.explore_scale, kExploreCap);
    prev = p.explore_scale;
  }
  EXPECT_EQ(p.explore_scale, kExploreCap);
}

TEST(UpdateNetworks, EuphoriaLowersExploreScaleToFloor) {
  auto cfg = small_config();
  cfg.b1 = -1e9;
  Rng rng(8);
  auto p = make_player(Role::kOne, cfg, rng);
  remember(p, {0.5, 0, 1, 0.85}, cfg.memory_len);
  p.explore_scale = 3.0;
  double prev = p.explore_scale;
  for (int n = 0; n < 30; ++n) {
    const auto est = update_networks(p, cfg, rng);
    EXPECT_EQ(est.kappa, 1.0);
    EXPECT_LE(p.explore_scale, prev);
    EXPECT_GE(p.explore_scale, 1.0);
    prev = p.explore_scale;
  }
  EXPECT_EQ(p.explore_scale, 1.0);
}

TEST(AdjustExplore, MiddleBandsLeaveScaleAlone) {
  PlayerState p;
  p.explore_scale = 2.0;
  adjust_explore(p, 0.5);
  EXPECT_EQ(p.explore_scale, 2.0);
  adjust_explore(p, 0.0);
  EXPECT_EQ(p.explore_scale, 3.0);
  adjust_explore(p, 1.0);
  EXPECT_EQ(p.explore_scale, 2.7);
}

TEST(Memory, RespectsLength) {
  PlayerState p;
  for (int n = 0; n < 10; ++n) remember(p, {n / 10.0, 0, 0, 0}, 4);
  ASSERT_EQ(p.memory.size(), 4u);
  EXPECT_EQ(p.memory.front().own_action, 0.6);
  PlayerState q;
  remember(q, {0.1, 0, 0, 0}, 0);
  EXPECT_TRUE(q.memory.empty());
}

TEST(Memory, RecencyWeightsFavorNewEntries) {
  PlayerState p;
  for (int n = 0; n < 100; ++n) remember(p, {0, 0, 0, 0}, 100);
  Rng rng(9);
  const auto idx = sample_memory(p, 0.9, 20000, rng);
  double newest = 0;
  for (auto i : idx) newest += (i == 99);
  // P(newest) = (1 − 0.9) / (1 − 0.9¹⁰⁰) ≈ 0.1.
  EXPECT_NEAR(newest / 20000, 0.1, 0.01);
}

TEST(RunExperiment, Deterministic) {
  const auto a = run_experiment(small_config(11)), b = run_experiment(small_config(11));
  ASSERT_EQ(a.rounds.size(), b.rounds.size());
  for (std::size_t k = 0; k < a.rounds.size(); ++k) {
    EXPECT_EQ(a.rounds[k].a1, b.rounds[k].a1);
    EXPECT_EQ(a.rounds[k].a2, b.rounds[k].a2);
    EXPECT_EQ(a.rounds[k].kappa1, b.rounds[k].kappa1);
    EXPECT_EQ(a.rounds[k].explore2, b.rounds[k].explore2);
  }
}

TEST(RunExperiment, InvariantsHoldAlongTheRun) {
  const auto tr = run_experiment(small_config(12));
  ASSERT_EQ(tr.rounds.size(), 60u);
  for (const auto& r : tr.rounds) {
    EXPECT_GE(r.a1, 0.0);
    EXPECT_LE(r.a1, 1.0);
    EXPECT_GE(r.explore1, 1.0);
    EXPECT_LE(r.explore1, kExploreCap);
    EXPECT_GE(r.explore2, 1.0);
    EXPECT_LE(r.explore2, kExploreCap);
    EXPECT_GE(r.kappa1, 0.0);
    EXPECT_LE(r.kappa1, 1.0);
  }
  for (const auto& st : tr.stats) {
    ASSERT_EQ(st.size(), 60u);
    for (const auto& rec : st.per_age()) EXPECT_TRUE(rec.induced.at("action").is_probability());
  }
}

TEST(RunExperiment, ZeroMemoryAndZeroNetsAreStationary) {
  auto cfg = small_config(13);
  cfg.memory_len = 0;
  cfg.zero_init = true;
  const auto tr = run_experiment(cfg);
  for (const auto& r : tr.rounds) {
    EXPECT_EQ(r.a1, 1.0);
    EXPECT_EQ(r.a2, 0.0);
  }
}

TEST(RunExperiment, InvalidConfigRejected) {
  auto cfg = small_config();
  cfg.grid = 1;
  EXPECT_THROW((void)run_experiment(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.c = 0;
  EXPECT_THROW((void)run_experiment(cfg), std::invalid_argument);
}

TEST(Csv, HeaderAndRowCount) {
  auto cfg = small_config(14);
  cfg.n_games = 5;
  std::ostringstream os;
  write_csv(os, run_experiment(cfg));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "game,a1,a2,x1,x2,cost1,cost2,kappa1,kappa2,explore1,explore2");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 5);
}

TEST(Crossings, CountsSideChanges) {
  std::vector<Round> r(5);
  const double a1[] = {0.1, 0.6, 0.7, 0.2, 0.5};
  for (int k = 0; k < 5; ++k) r[static_cast<std::size_t>(k)].a1 = a1[k];
  EXPECT_EQ(count_crossings(r, 0.5), 3);
}

}  // namespace
}  // namespace ueq::twoplayer
