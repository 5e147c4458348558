#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ueq/smallnet/net.hpp"

namespace ueq::smallnet {

/// Central finite-difference gradient of net.loss(batch, sample).
[[nodiscard]] inline std::vector<double> numeric_gradient(const Net& net, std::span<const Sample> batch,
                                                          const DropoutSample* sample = nullptr,
                                                          double step = 1e-5) {
  Net probe = net;
  auto p = net.parameters();
  std::vector<double> g(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double keep = p[k];
    p[k] = keep + step;
    probe.set_parameters(p);
    const double up = probe.loss(batch, sample);
    p[k] = keep - step;
    probe.set_parameters(p);
    const double down = probe.loss(batch, sample);
    p[k] = keep;
    g[k] = (up - down) / (2 * step);
  }
  return g;
}

/// ‖g_analytic − g_numeric‖ / (‖g_analytic‖ + ‖g_numeric‖), 0 when both vanish.
[[nodiscard]] inline double gradient_relative_error(const Net& net, std::span<const Sample> batch,
                                                    const DropoutSample* sample = nullptr,
                                                    double step = 1e-5) {
  const auto ga = net.gradient(batch, sample);
  const auto gn = numeric_gradient(net, batch, sample, step);
  double diff = 0, na = 0, nn = 0;
  for (std::size_t k = 0; k < ga.size(); ++k) {
    diff += (ga[k] - gn[k]) * (ga[k] - gn[k]);
    na += ga[k] * ga[k];
    nn += gn[k] * gn[k];
  }
  const double denom = std::sqrt(na) + std::sqrt(nn);
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

/// Random net with at most `max_params` parameters and a random batch, for
/// gradient checks.
struct GradCheckCase {
  Net net;
  std::vector<Sample> batch;
  DropoutSample dropout;
};

[[nodiscard]] inline GradCheckCase random_gradcheck_case(Rng& rng, std::size_t max_params = 100) {
  std::uniform_int_distribution<int> width(1, 5), depth(0, 2), kind(0, 2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    NetSpec spec;
    spec.dims.push_back(width(rng));
    const int hidden = depth(rng);
    for (int h = 0; h < hidden; ++h) spec.dims.push_back(width(rng));
    spec.dims.push_back(width(rng) % 2 + 1);
    spec.transform = static_cast<OutputTransform>(kind(rng));
    spec.lo = -2.0;
    spec.hi = 3.0;
    spec.dropout = hidden > 0 ? 0.25 : 0.0;
    Net net(spec, rng);
    if (net.num_parameters() > max_params) continue;
    GradCheckCase c{net, {}, net.draw_dropout(rng)};
    for (int n = 0; n < 4; ++n) {
      Sample s;
      for (int i = 0; i < net.input_dim(); ++i) s.input.push_back(u(rng));
      for (int o = 0; o < net.output_dim(); ++o) s.target.push_back(u(rng));
      s.weight = 0.5 + 0.5 * (u(rng) + 1);
      c.batch.push_back(std::move(s));
    }
    return c;
  }
}

}  // namespace ueq::smallnet
