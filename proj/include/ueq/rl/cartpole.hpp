#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "ueq/core/measure.hpp"
#include "ueq/core/rng.hpp"
#include "ueq/core/trajectory.hpp"
#include "ueq/smallnet/net.hpp"

namespace ueq::rl {

struct CartPoleState {
  double x = 0, x_dot = 0, theta = 0, theta_dot = 0;

  friend bool operator==(const CartPoleState&, const CartPoleState&) = default;
};

namespace cartpole {
inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kTotalMass = kCartMass + kPoleMass;
inline constexpr double kHalfLength = 0.5;
inline constexpr double kPoleMassLength = kPoleMass * kHalfLength;
inline constexpr double kForce = 10.0;
inline constexpr double kTau = 0.02;
inline constexpr double kXLimit = 2.4;
inline constexpr double kThetaLimit = 12.0 * 2.0 * std::numbers::pi / 360.0;
inline constexpr int kMaxSteps = 500;
}  // namespace cartpole

[[nodiscard]] inline bool terminal(const CartPoleState& s) {
  return s.x < -cartpole::kXLimit || s.x > cartpole::kXLimit || s.theta < -cartpole::kThetaLimit ||
         s.theta > cartpole::kThetaLimit;
}

/// Euler step of the frictionless cart-pole; no termination checks.
[[nodiscard]] inline CartPoleState advance(const CartPoleState& s, int a) {
  using namespace cartpole;
  const double force = a == 1 ? kForce : -kForce;
  const double c = std::cos(s.theta), sn = std::sin(s.theta);
  const double temp = (force + kPoleMassLength * s.theta_dot * s.theta_dot * sn) / kTotalMass;
  const double theta_acc =
      (kGravity * sn - c * temp) / (kHalfLength * (4.0 / 3.0 - kPoleMass * c * c / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * c / kTotalMass;
  return {s.x + kTau * s.x_dot, s.x_dot + kTau * x_acc, s.theta + kTau * s.theta_dot,
          s.theta_dot + kTau * theta_acc};
}

struct StepResult {
  CartPoleState next;
  double reward = 0;
  bool done = false;
};

/// One environment step: reward 1 when the next state is still in bounds.
[[nodiscard]] inline StepResult cartpole_step(const CartPoleState& s, int a) {
  if (terminal(s)) throw std::logic_error("stepping a terminal state");
  if (a != 0 && a != 1) throw std::invalid_argument("cart-pole action must be 0 or 1");
  const auto next = advance(s, a);
  const bool done = terminal(next);
  return {next, done ? 0.0 : 1.0, done};
}

[[nodiscard]] inline CartPoleState initial_state(Rng& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  CartPoleState s;
  s.x = u(rng);
  s.x_dot = u(rng);
  s.theta = u(rng);
  s.theta_dot = u(rng);
  return s;
}

/// Net input: each coordinate divided by a typical magnitude.
[[nodiscard]] inline std::array<double, 4> features(const CartPoleState& s) {
  return {s.x / cartpole::kXLimit, s.x_dot / 3.0, s.theta / cartpole::kThetaLimit, s.theta_dot / 3.5};
}

/// All of {0,1}^T in lexicographic order; index k encodes the sequence in
/// binary, most significant bit first.
[[nodiscard]] inline std::vector<std::vector<int>> enumerate_controls(int t) {
  if (t < 1 || t > 16) throw std::invalid_argument("control horizon must lie in [1, 16]");
  std::vector<std::vector<int>> out(std::size_t{1} << t, std::vector<int>(static_cast<std::size_t>(t)));
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (int j = 0; j < t; ++j) out[k][static_cast<std::size_t>(j)] = static_cast<int>((k >> (t - 1 - j)) & 1U);
  }
  return out;
}

[[nodiscard]] inline int first_action(std::size_t control, int t) { return static_cast<int>((control >> (t - 1)) & 1U); }

/// X_T for every control, by depth-first expansion of the binary tree.
/// `alive[k]` is false when rollout k left the bounds before step T.
struct Rollouts {
  std::vector<CartPoleState> leaves;
  std::vector<std::uint8_t> alive;
};

inline void expand(const CartPoleState& s, int depth, int t, std::size_t prefix, Rollouts& out) {
  if (depth == t) {
    out.leaves[prefix] = s;
    out.alive[prefix] = 1;
    return;
  }
  for (int a = 0; a < 2; ++a) {
    const auto next = advance(s, a);
    const std::size_t child = (prefix << 1) | static_cast<std::size_t>(a);
    if (terminal(next)) {
      const std::size_t span = std::size_t{1} << (t - depth - 1);
      for (std::size_t k = child * span; k < (child + 1) * span; ++k) out.alive[k] = 0;
      continue;
    }
    expand(next, depth + 1, t, child, out);
  }
}

[[nodiscard]] inline Rollouts rollout_all(const CartPoleState& s, int t) {
  Rollouts r;
  r.leaves.resize(std::size_t{1} << t);
  r.alive.assign(r.leaves.size(), 0);
  expand(s, 0, t, 0, r);
  return r;
}

struct CartPoleConfig {
  int k_phi = 5;
  int episodes = 1000;
  int horizon = 8;
  std::uint64_t seed = 0;
  int hidden = 32;
  double dropout = 0.1;
  double learning_rate = 0.2;
  int batch = 32;
  int sgd_steps = 4;
  double consistency_weight = 0.1;
  double value_scale = 1.0;  ///< softmax uses exp(J / value_scale)
  double output_bias = -5.0;
  int memory_episodes = 200;
  bool greedy = false;
  bool train = true;

  void validate() const {
    if (k_phi < 1) throw std::invalid_argument("k-phi must be positive");
    if (episodes < 0) throw std::invalid_argument("episode count must be non-negative");
    if (horizon < 1 || horizon > 16) throw std::invalid_argument("t-horizon must lie in [1, 16]");
    if (hidden < 1 || batch < 2 || sgd_steps < 0) throw std::invalid_argument("invalid network settings");
    if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("dropout must lie in [0, 1)");
    if (!(learning_rate > 0) || !(value_scale > 0)) throw std::invalid_argument("rates must be positive");
    if (memory_episodes < 2) throw std::invalid_argument("memory must hold at least two episodes");
  }
};

/// K_φ value nets mapping states to [0, 100]. A scenario is a net index with
/// a dropout mask, drawn uniformly.
class ValueEnsemble {
 public:
  struct Scenario {
    std::size_t net = 0;
    smallnet::DropoutSample dropout;
  };

  ValueEnsemble() = default;

  ValueEnsemble(const CartPoleConfig& cfg, Rng& rng) {
    const smallnet::NetSpec spec{{4, cfg.hidden, cfg.hidden, 1}, smallnet::OutputTransform::kAffine, 0.0, 100.0,
                                 cfg.dropout};
    for (int k = 0; k < cfg.k_phi; ++k) {
      smallnet::Net net(spec, rng);
      net.biases(2)[0] = cfg.output_bias;
      nets_.push_back(std::move(net));
    }
  }

  [[nodiscard]] std::size_t size() const { return nets_.size(); }
  [[nodiscard]] const smallnet::Net& net(std::size_t k) const { return nets_.at(k); }
  [[nodiscard]] smallnet::Net& net(std::size_t k) { return nets_.at(k); }

  [[nodiscard]] Scenario draw(Rng& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, nets_.size() - 1);
    const std::size_t k = pick(rng);
    return {k, nets_[k].draw_dropout(rng)};
  }

  /// Net outputs for a batch of states, one matrix product per layer.
  [[nodiscard]] Eigen::VectorXd evaluate(const Scenario& sc, const std::vector<CartPoleState>& states) const {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto& net = nets_.at(sc.net);
    const auto& spec = net.spec();
    const auto n = static_cast<Eigen::Index>(states.size());
    Eigen::MatrixXd h(4, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto f = features(states[static_cast<std::size_t>(j)]);
      for (int i = 0; i < 4; ++i) h(i, j) = f[static_cast<std::size_t>(i)];
    }
    const bool masked = spec.dropout > 0.0 && !sc.dropout.masks.empty();
    const double scale = masked ? 1.0 / (1.0 - spec.dropout) : 1.0;
    const std::size_t last = net.num_layers() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
      const auto n_out = spec.dims[l + 1], n_in = spec.dims[l];
      Eigen::Map<const RowMat> w(net.weights(l).data(), n_out, n_in);
      Eigen::Map<const Eigen::VectorXd> b(net.biases(l).data(), n_out);
      Eigen::MatrixXd z = w * h;
      z.colwise() += b;
      if (l == last) {
        h = z;
        break;
      }
      h = z.array().tanh().matrix();
      if (masked) {
        for (int o = 0; o < n_out; ++o) h.row(o) *= sc.dropout.masks[l][static_cast<std::size_t>(o)] ? scale : 0.0;
      }
    }
    Eigen::VectorXd out(n);
    for (Eigen::Index j = 0; j < n; ++j) out(j) = spec.lo + (spec.hi - spec.lo) / (1.0 + std::exp(-h(0, j)));
    return out;
  }

 private:
  std::vector<smallnet::Net> nets_;
};

/// J(ω̂, x, α^k) for every control: the scenario's value at X_T, or 0 when
/// the rollout terminates first.
[[nodiscard]] inline std::vector<double> control_values(const ValueEnsemble& ens, const ValueEnsemble::Scenario& sc,
                                                        const CartPoleState& x, int t) {
  const auto r = rollout_all(x, t);
  std::vector<CartPoleState> live;
  for (std::size_t k = 0; k < r.leaves.size(); ++k) {
    if (r.alive[k]) live.push_back(r.leaves[k]);
  }
  std::vector<double> j(r.leaves.size(), 0.0);
  if (live.empty()) return j;
  const auto v = ens.evaluate(sc, live);
  Eigen::Index i = 0;
  for (std::size_t k = 0; k < r.leaves.size(); ++k) {
    if (r.alive[k]) j[k] = v(i++);
  }
  return j;
}

/// π̂ ∝ exp(J / scale) over control indices, computed with a max shift.
[[nodiscard]] inline FiniteMeasure<int> softmax_policy(const std::vector<double>& j, double scale = 1.0) {
  if (j.empty()) throw std::invalid_argument("no controls");
  const double top = *std::max_element(j.begin(), j.end());
  std::vector<double> w(j.size());
  double z = 0;
  for (std::size_t k = 0; k < j.size(); ++k) z += w[k] = std::exp((j[k] - top) / scale);
  FiniteMeasure<int> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.add(static_cast<int>(k), w[k] / z);
  return out;
}

[[nodiscard]] inline FiniteMeasure<int> policy_distribution(const ValueEnsemble& ens, const CartPoleState& x,
                                                            const ValueEnsemble::Scenario& sc, int t,
                                                            double scale = 1.0) {
  return softmax_policy(control_values(ens, sc, x, t), scale);
}

/// ϒ^x restricted to the first action, averaged over every net with its
/// mask switched off.
[[nodiscard]] inline FiniteMeasure<double> first_action_law(const ValueEnsemble& ens, const CartPoleState& x, int t,
                                                            double scale = 1.0) {
  FiniteMeasure<double> out;
  for (std::size_t k = 0; k < ens.size(); ++k) {
    const auto pi = policy_distribution(ens, x, {k, {}}, t, scale);
    for (const auto& [c, w] : pi.atoms()) {
      out.add(first_action(static_cast<std::size_t>(c), t), w / static_cast<double>(ens.size()));
    }
  }
  return out;
}

struct Episode {
  std::vector<CartPoleState> states;
  int score = 0;
};

/// Regression target 100·(score/best + score/500)/2.
[[nodiscard]] inline double performance_target(int score, int best) {
  const double rel = best > 0 ? static_cast<double>(score) / best : 0.0;
  return 100.0 * (rel + static_cast<double>(score) / cartpole::kMaxSteps) / 2.0;
}

/// Loss units: targets live in [0, 100], so sample weights carry 1/100² to
/// keep the step size comparable to a unit-range regression.
inline constexpr double kTargetUnits = 1e-4;

/// Episode indices in the top and bottom quartiles by score (at least one each).
[[nodiscard]] inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> quartiles(
    const std::deque<Episode>& memory) {
  std::vector<std::size_t> order(memory.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return memory[a].score < memory[b].score; });
  const std::size_t q = std::max<std::size_t>(1, order.size() / 4);
  return {{order.end() - static_cast<std::ptrdiff_t>(q), order.end()},
          {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(q)}};
}

/// One round of updates: each net draws its own balanced batch from the top
/// and bottom quartiles plus time-consistency pairs (x_t, x_{t+T}).
inline void train_value_ensemble(ValueEnsemble& ens, const std::deque<Episode>& memory, int best_score,
                                 const CartPoleConfig& cfg, Rng& rng) {
  if (memory.size() < 2) return;
  const auto [top, bottom] = quartiles(memory);
  std::vector<std::size_t> long_eps;
  for (std::size_t k = 0; k < memory.size(); ++k) {
    if (memory[k].states.size() > static_cast<std::size_t>(cfg.horizon)) long_eps.push_back(k);
  }
  auto pick_from = [&](const std::vector<std::size_t>& ids) {
    return ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
  };
  const int half = cfg.batch / 2;
  std::vector<smallnet::Sample> batch;
  for (std::size_t n = 0; n < ens.size(); ++n) {
    auto& net = ens.net(n);
    for (int step = 0; step < cfg.sgd_steps; ++step) {
      batch.clear();
      for (int b = 0; b < cfg.batch; ++b) {
        const auto& ep = memory[pick_from(b < half ? top : bottom)];
        const auto& s = ep.states[std::uniform_int_distribution<std::size_t>(0, ep.states.size() - 1)(rng)];
        const auto f = features(s);
        batch.push_back({{f.begin(), f.end()}, {performance_target(ep.score, best_score)}, kTargetUnits});
      }
      if (!long_eps.empty() && cfg.consistency_weight > 0) {
        for (int b = 0; b < half; ++b) {
          const auto& ep = memory[pick_from(long_eps)];
          const std::size_t t0 = std::uniform_int_distribution<std::size_t>(
              0, ep.states.size() - 1 - static_cast<std::size_t>(cfg.horizon))(rng);
          const auto f0 = features(ep.states[t0]);
          const auto f1 = features(ep.states[t0 + static_cast<std::size_t>(cfg.horizon)]);
          const double ahead = net.forward_scalar(f1);
          batch.push_back({{f0.begin(), f0.end()}, {ahead}, cfg.consistency_weight * kTargetUnits});
        }
      }
      const auto mask = net.draw_dropout(rng);
      (void)net.train_step(batch, cfg.learning_rate, &mask);
    }
  }
}

struct CartPoleRun {
  std::vector<int> scores;
  TrajectoryStats stats;  ///< site "first-action" at each episode's initial state
};

/// Runs one episode with receding-horizon control; re-plans at every step.
[[nodiscard]] inline Episode play_episode(const ValueEnsemble& ens, const CartPoleConfig& cfg, Rng& rng) {
  Episode ep;
  auto s = initial_state(rng);
  for (int step = 0; step < cartpole::kMaxSteps; ++step) {
    ep.states.push_back(s);
    const auto sc = ens.draw(rng);
    const auto j = control_values(ens, sc, s, cfg.horizon);
    std::size_t k;
    if (cfg.greedy) {
      k = static_cast<std::size_t>(std::max_element(j.begin(), j.end()) - j.begin());
    } else {
      const auto pi = softmax_policy(j, cfg.value_scale);
      std::vector<double> w;
      for (const auto& [c, p] : pi.atoms()) w.push_back(p);
      k = std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng);
    }
    const auto r = cartpole_step(s, first_action(k, cfg.horizon));
    if (r.done) break;
    ep.score += 1;
    s = r.next;
  }
  return ep;
}

[[nodiscard]] inline CartPoleRun run_cartpole(const CartPoleConfig& cfg, ValueEnsemble* out = nullptr) {
  cfg.validate();
  Rng rng(cfg.seed);
  ValueEnsemble ens(cfg, rng);
  std::deque<Episode> memory;
  int best = 0;
  CartPoleRun run;
  for (int e = 0; e < cfg.episodes; ++e) {
    auto ep = play_episode(ens, cfg, rng);
    AgeRecord rec;
    rec.age = e;
    rec.induced["first-action"] = first_action_law(ens, ep.states.front(), cfg.horizon, cfg.value_scale);
    run.stats.push(std::move(rec));
    run.scores.push_back(ep.score);
    best = std::max(best, ep.score);
    memory.push_back(std::move(ep));
    if (memory.size() > static_cast<std::size_t>(cfg.memory_episodes)) memory.pop_front();
    if (cfg.train) train_value_ensemble(ens, memory, best, cfg, rng);
  }
  if (out != nullptr) *out = std::move(ens);
  return run;
}

/// Trailing moving average with window w (shorter at the start).
[[nodiscard]] inline std::vector<double> moving_average(const std::vector<int>& xs, std::size_t w) {
  std::vector<double> out;
  double s = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    s += xs[k];
    if (k >= w) s -= xs[k - w];
    out.push_back(s / static_cast<double>(std::min(k + 1, w)));
  }
  return out;
}

[[nodiscard]] inline double max_moving_average(const std::vector<int>& xs, std::size_t w) {
  if (xs.size() < w) return 0.0;
  const auto ma = moving_average(xs, w);
  return *std::max_element(ma.begin() + static_cast<std::ptrdiff_t>(w - 1), ma.end());
}

inline void write_csv(std::ostream& os, const CartPoleRun& run) {
  os << "episode,score,ma100\n";
  const auto ma = moving_average(run.scores, 100);
  for (std::size_t k = 0; k < run.scores.size(); ++k) os << k << ',' << run.scores[k] << ',' << ma[k] << '\n';
}

}  // namespace ueq::rl
