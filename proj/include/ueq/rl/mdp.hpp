#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "ueq/core/measure.hpp"
#include "ueq/core/rng.hpp"

namespace ueq::rl {

/// Finite discounted MDP with rewards to be maximized.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> kernel;  ///< p(x, a; y) at [(x * n_actions + a) * n_states + y]
  std::vector<double> reward;  ///< F(x, a) at [x * n_actions + a]
  double discount = 0.9;

  [[nodiscard]] double p(int x, int a, int y) const {
    return kernel[static_cast<std::size_t>((x * n_actions + a) * n_states + y)];
  }
  [[nodiscard]] double F(int x, int a) const { return reward[static_cast<std::size_t>(x * n_actions + a)]; }

  void validate() const {
    if (n_states <= 0 || n_actions <= 0) throw std::invalid_argument("empty MDP");
    const auto rows = static_cast<std::size_t>(n_states * n_actions);
    if (kernel.size() != rows * static_cast<std::size_t>(n_states) || reward.size() != rows) {
      throw std::invalid_argument("MDP table size mismatch");
    }
    for (int x = 0; x < n_states; ++x) {
      for (int a = 0; a < n_actions; ++a) {
        double s = 0;
        for (int y = 0; y < n_states; ++y) {
          if (p(x, a, y) < 0) throw std::invalid_argument("negative transition probability");
          s += p(x, a, y);
        }
        if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("kernel row does not sum to 1");
      }
    }
    if (!(discount >= 0.0)) throw std::invalid_argument("discount must be non-negative");
  }
};

/// Random MDP with Dirichlet(1) rows and uniform[0,1) rewards.
[[nodiscard]] inline TabularMDP random_mdp(int n_states, int n_actions, double discount, Rng& rng) {
  TabularMDP m{n_states, n_actions, {}, {}, discount};
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < n_states * n_actions; ++r) {
    std::vector<double> row(static_cast<std::size_t>(n_states));
    double s = 0;
    for (double& v : row) s += v = e(rng);
    for (double& v : row) v /= s;
    // Push the rounding residue into the largest entry so rows sum to 1.
    double t = 0;
    for (double v : row) t += v;
    *std::max_element(row.begin(), row.end()) += 1.0 - t;
    m.kernel.insert(m.kernel.end(), row.begin(), row.end());
    m.reward.push_back(u(rng));
  }
  return m;
}

/// Per-state policy γ^x over action indices.
using Policy = std::vector<FiniteMeasure<int>>;

[[nodiscard]] inline Policy greedy_policy(const TabularMDP& m, const Eigen::MatrixXd& q) {
  Policy pi;
  for (int x = 0; x < m.n_states; ++x) {
    Eigen::Index a;
    q.row(x).maxCoeff(&a);
    pi.push_back(FiniteMeasure<int>::dirac(static_cast<int>(a)));
  }
  return pi;
}

[[nodiscard]] inline Policy uniform_policy(const TabularMDP& m) {
  std::vector<int> all(static_cast<std::size_t>(m.n_actions));
  for (int a = 0; a < m.n_actions; ++a) all[static_cast<std::size_t>(a)] = a;
  return Policy(static_cast<std::size_t>(m.n_states), FiniteMeasure<int>::uniform(all));
}

/// Q(x,a) = F(x,a) + λ Σ_y p(x,a;y) Σ_ã γ^y(ã) Q(y,ã), solved directly.
/// Returns an n_states × n_actions matrix.
[[nodiscard]] inline Eigen::MatrixXd q_value(const TabularMDP& m, const Policy& pi) {
  m.validate();
  if (!(m.discount < 1.0)) throw std::domain_error("discount must be below 1");
  if (pi.size() != static_cast<std::size_t>(m.n_states)) throw std::invalid_argument("policy size mismatch");
  const int n = m.n_states * m.n_actions;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (int x = 0; x < m.n_states; ++x) {
    for (int u = 0; u < m.n_actions; ++u) {
      const int r = x * m.n_actions + u;
      b(r) = m.F(x, u);
      for (int y = 0; y < m.n_states; ++y) {
        for (const auto& [v, w] : pi[static_cast<std::size_t>(y)].atoms()) {
          a(r, y * m.n_actions + v) -= m.discount * m.p(x, u, y) * w;
        }
      }
    }
  }
  const Eigen::VectorXd q = a.partialPivLu().solve(b);
  Eigen::MatrixXd out(m.n_states, m.n_actions);
  for (int x = 0; x < m.n_states; ++x) {
    for (int u = 0; u < m.n_actions; ++u) out(x, u) = q(x * m.n_actions + u);
  }
  return out;
}

/// max |Q − (F + λ P γ Q)| over (x, a).
[[nodiscard]] inline double q_residual(const TabularMDP& m, const Policy& pi, const Eigen::MatrixXd& q) {
  double worst = 0;
  for (int x = 0; x < m.n_states; ++x) {
    for (int u = 0; u < m.n_actions; ++u) {
      double rhs = m.F(x, u);
      for (int y = 0; y < m.n_states; ++y) {
        double inner = 0;
        for (const auto& [v, w] : pi[static_cast<std::size_t>(y)].atoms()) inner += w * q(y, v);
        rhs += m.discount * m.p(x, u, y) * inner;
      }
      worst = std::max(worst, std::abs(q(x, u) - rhs));
    }
  }
  return worst;
}

/// max_x |V(x) − max_a [F(x,a) + λ Σ_y p(x,a;y) V(y)]|.
[[nodiscard]] inline double bellman_check(const TabularMDP& m, const std::vector<double>& v) {
  if (v.size() != static_cast<std::size_t>(m.n_states)) throw std::invalid_argument("value size mismatch");
  double worst = 0;
  for (int x = 0; x < m.n_states; ++x) {
    double best = -std::numeric_limits<double>::infinity();
    for (int u = 0; u < m.n_actions; ++u) {
      double s = m.F(x, u);
      for (int y = 0; y < m.n_states; ++y) s += m.discount * m.p(x, u, y) * v[static_cast<std::size_t>(y)];
      best = std::max(best, s);
    }
    worst = std::max(worst, std::abs(v[static_cast<std::size_t>(x)] - best));
  }
  return worst;
}

/// Value iteration followed by an exact policy-evaluation polish, so the
/// result solves the Bellman optimality equation to rounding.
[[nodiscard]] inline std::vector<double> value_iteration(const TabularMDP& m, double tol = 1e-13,
                                                         int max_iter = 100000) {
  m.validate();
  if (!(m.discount < 1.0)) throw std::domain_error("discount must be below 1");
  std::vector<double> v(static_cast<std::size_t>(m.n_states), 0.0), next(v.size());
  Eigen::MatrixXd q(m.n_states, m.n_actions);
  for (int it = 0; it < max_iter; ++it) {
    double delta = 0;
    for (int x = 0; x < m.n_states; ++x) {
      for (int u = 0; u < m.n_actions; ++u) {
        double s = m.F(x, u);
        for (int y = 0; y < m.n_states; ++y) s += m.discount * m.p(x, u, y) * v[static_cast<std::size_t>(y)];
        q(x, u) = s;
      }
      next[static_cast<std::size_t>(x)] = q.row(x).maxCoeff();
      delta = std::max(delta, std::abs(next[static_cast<std::size_t>(x)] - v[static_cast<std::size_t>(x)]));
    }
    v.swap(next);
    if (delta < tol) break;
  }
  // Policy improvement from the value-iteration greedy policy until stable.
  auto pi = greedy_policy(m, q);
  for (int round = 0; round < 100; ++round) {
    const auto qp = q_value(m, pi);
    auto improved = greedy_policy(m, qp);
    for (int x = 0; x < m.n_states; ++x) v[static_cast<std::size_t>(x)] = qp.row(x).maxCoeff();
    if (improved == pi) break;
    pi = std::move(improved);
  }
  return v;
}

}  // namespace ueq::rl
