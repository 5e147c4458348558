#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ueq/core/rng.hpp"

namespace ueq::smallnet {

enum class OutputTransform { kSigmoid, kAffine, kIdentity };

[[nodiscard]] inline std::string to_string(OutputTransform t) {
  switch (t) {
    case OutputTransform::kSigmoid: return "sigmoid";
    case OutputTransform::kAffine: return "affine";
    case OutputTransform::kIdentity: return "identity";
  }
  return "identity";
}

[[nodiscard]] inline OutputTransform parse_output_transform(const std::string& s) {
  if (s == "sigmoid") return OutputTransform::kSigmoid;
  if (s == "affine") return OutputTransform::kAffine;
  if (s == "identity") return OutputTransform::kIdentity;
  throw std::invalid_argument("unknown output transform: " + s);
}

/// Binary keep-masks for the hidden layers, derived from a recorded seed.
struct DropoutSample {
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint8_t>> masks;
};

/// One training pair. `weight` scales the pair's contribution to the loss.
struct Sample {
  std::vector<double> input;
  std::vector<double> target;
  double weight = 1.0;
};

struct NetSpec {
  std::vector<int> dims;
  OutputTransform transform = OutputTransform::kIdentity;
  double lo = 0.0;
  double hi = 1.0;
  double dropout = 0.0;
};

/// Fully connected tanh network with an output transform and inverted dropout.
class Net {
 public:
  Net() = default;

  /// Zero-weight network.
  explicit Net(NetSpec spec) : spec_(std::move(spec)) {
    if (spec_.dims.size() < 2) throw std::invalid_argument("net needs at least two layers");
    for (int d : spec_.dims) {
      if (d <= 0) throw std::invalid_argument("layer width must be positive");
    }
    if (!(spec_.dropout >= 0.0 && spec_.dropout < 1.0)) {
      throw std::invalid_argument("dropout rate must lie in [0,1)");
    }
    if (spec_.transform == OutputTransform::kAffine && !(spec_.lo < spec_.hi)) {
      throw std::invalid_argument("affine output needs lo < hi");
    }
    for (std::size_t l = 0; l + 1 < spec_.dims.size(); ++l) {
      weights_.emplace_back(static_cast<std::size_t>(spec_.dims[l] * spec_.dims[l + 1]), 0.0);
      biases_.emplace_back(static_cast<std::size_t>(spec_.dims[l + 1]), 0.0);
    }
  }

  /// Weights uniform in ±1/√fan_in.
  Net(NetSpec spec, Rng& rng) : Net(std::move(spec)) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec_.dims[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& w : weights_[l]) w = u(rng);
      for (double& b : biases_[l]) b = u(rng);
    }
  }

  [[nodiscard]] const NetSpec& spec() const { return spec_; }
  [[nodiscard]] int input_dim() const { return spec_.dims.front(); }
  [[nodiscard]] int output_dim() const { return spec_.dims.back(); }
  [[nodiscard]] std::size_t num_layers() const { return weights_.size(); }

  /// Row-major (out × in) weight matrix of layer l.
  [[nodiscard]] std::vector<double>& weights(std::size_t l) { return weights_.at(l); }
  [[nodiscard]] const std::vector<double>& weights(std::size_t l) const { return weights_.at(l); }
  [[nodiscard]] std::vector<double>& biases(std::size_t l) { return biases_.at(l); }
  [[nodiscard]] const std::vector<double>& biases(std::size_t l) const { return biases_.at(l); }

  [[nodiscard]] std::size_t num_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  /// Flat view: layer by layer, weights then biases.
  [[nodiscard]] std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(num_parameters());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      p.insert(p.end(), weights_[l].begin(), weights_[l].end());
      p.insert(p.end(), biases_[l].begin(), biases_[l].end());
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != num_parameters()) throw std::invalid_argument("parameter count mismatch");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (double& w : weights_[l]) w = p[k++];
      for (double& b : biases_[l]) b = p[k++];
    }
  }

  [[nodiscard]] DropoutSample draw_dropout(std::uint64_t seed) const {
    DropoutSample s;
    s.seed = seed;
    Rng rng(seed);
    std::bernoulli_distribution keep(1.0 - spec_.dropout);
    for (std::size_t l = 1; l + 1 < spec_.dims.size(); ++l) {
      std::vector<std::uint8_t> m(static_cast<std::size_t>(spec_.dims[l]));
      for (auto& b : m) b = keep(rng) ? 1 : 0;
      s.masks.push_back(std::move(m));
    }
    return s;
  }

  [[nodiscard]] DropoutSample draw_dropout(Rng& rng) const { return draw_dropout(rng()); }

  [[nodiscard]] std::vector<double> forward(std::span<const double> x,
                                            const DropoutSample* sample = nullptr) const {
    thread_local Trace tr;
    run(x, sample, tr);
    return tr.out;
  }

  /// First output component, without allocating.
  [[nodiscard]] double forward_scalar(std::span<const double> x,
                                      const DropoutSample* sample = nullptr) const {
    thread_local Trace tr;
    run(x, sample, tr);
    return tr.out[0];
  }

  /// Weighted mean squared error over the batch.
  [[nodiscard]] double loss(std::span<const Sample> batch, const DropoutSample* sample = nullptr) const {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    double total = 0.0;
    Trace tr;
    for (const auto& s : batch) {
      run(s.input, sample, tr);
      total += s.weight * squared_error(tr.out, s.target);
    }
    return total / static_cast<double>(batch.size());
  }

  /// Gradient of loss() with respect to parameters(), by backpropagation.
  [[nodiscard]] std::vector<double> gradient(std::span<const Sample> batch,
                                             const DropoutSample* sample = nullptr) const {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    std::vector<std::vector<double>> gw(weights_.size()), gb(biases_.size());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      gw[l].assign(weights_[l].size(), 0.0);
      gb[l].assign(biases_[l].size(), 0.0);
    }
    accumulate(batch, sample, gw, gb);
    std::vector<double> g;
    g.reserve(num_parameters());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      g.insert(g.end(), gw[l].begin(), gw[l].end());
      g.insert(g.end(), gb[l].begin(), gb[l].end());
    }
    return g;
  }

  /// One SGD step on the batch. Returns the pre-step loss; throws "divergence"
  /// when the loss or the updated weights are not finite.
  double train_step(std::span<const Sample> batch, double learning_rate,
                    const DropoutSample* sample = nullptr) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    std::vector<std::vector<double>> gw(weights_.size()), gb(biases_.size());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      gw[l].assign(weights_[l].size(), 0.0);
      gb[l].assign(biases_[l].size(), 0.0);
    }
    const double l0 = accumulate(batch, sample, gw, gb);
    if (!std::isfinite(l0)) throw std::runtime_error("divergence");
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (std::size_t k = 0; k < weights_[l].size(); ++k) weights_[l][k] -= learning_rate * gw[l][k];
      for (std::size_t k = 0; k < biases_[l].size(); ++k) biases_[l][k] -= learning_rate * gb[l][k];
    }
    for (const auto& w : weights_) {
      for (double v : w) {
        if (!std::isfinite(v)) throw std::runtime_error("divergence");
      }
    }
    return l0;
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "ueq-smallnet";
    j["version"] = 1;
    j["dims"] = spec_.dims;
    j["transform"] = to_string(spec_.transform);
    j["lo"] = spec_.lo;
    j["hi"] = spec_.hi;
    j["dropout"] = spec_.dropout;
    j["weights"] = weights_;
    j["biases"] = biases_;
    return j;
  }

  [[nodiscard]] static Net from_json(const nlohmann::json& j) {
    if (j.at("format") != "ueq-smallnet" || j.at("version") != 1) {
      throw std::invalid_argument("unsupported net record");
    }
    NetSpec spec{j.at("dims").get<std::vector<int>>(),
                 parse_output_transform(j.at("transform").get<std::string>()),
                 j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("dropout").get<double>()};
    Net n(std::move(spec));
    auto w = j.at("weights").get<std::vector<std::vector<double>>>();
    auto b = j.at("biases").get<std::vector<std::vector<double>>>();
    if (w.size() != n.weights_.size() || b.size() != n.biases_.size()) {
      throw std::invalid_argument("layer count mismatch");
    }
    for (std::size_t l = 0; l < w.size(); ++l) {
      if (w[l].size() != n.weights_[l].size() || b[l].size() != n.biases_[l].size()) {
        throw std::invalid_argument("layer shape mismatch");
      }
    }
    n.weights_ = std::move(w);
    n.biases_ = std::move(b);
    return n;
  }

  bool operator==(const Net& o) const {
    return spec_.dims == o.spec_.dims && spec_.transform == o.spec_.transform && spec_.lo == o.spec_.lo &&
           spec_.hi == o.spec_.hi && spec_.dropout == o.spec_.dropout && weights_ == o.weights_ &&
           biases_ == o.biases_;
  }

 private:
  struct Trace {
    std::vector<std::vector<double>> act;  // post-activation (and mask) per layer, act[0] = input
    std::vector<double> pre_out;           // output pre-activation
    std::vector<double> out;
  };

  static double squared_error(const std::vector<double>& y, const std::vector<double>& t) {
    if (t.size() != y.size()) throw std::invalid_argument("target dimension mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += (y[k] - t[k]) * (y[k] - t[k]);
    return s / static_cast<double>(y.size());
  }

  [[nodiscard]] bool masked(const DropoutSample* sample) const {
    return sample != nullptr && spec_.dropout > 0.0;
  }

  void run(std::span<const double> x, const DropoutSample* sample, Trace& tr) const {
    if (x.size() != static_cast<std::size_t>(spec_.dims.front())) {
      throw std::invalid_argument("input dimension mismatch");
    }
    const bool use_mask = masked(sample);
    if (use_mask && sample->masks.size() + 2 != spec_.dims.size()) {
      throw std::invalid_argument("dropout sample does not match the net");
    }
    const double scale = use_mask ? 1.0 / (1.0 - spec_.dropout) : 1.0;
    tr.act.resize(weights_.size());
    tr.act[0].assign(x.begin(), x.end());
    const std::size_t last = weights_.size() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
      const auto n_in = static_cast<std::size_t>(spec_.dims[l]);
      const auto n_out = static_cast<std::size_t>(spec_.dims[l + 1]);
      auto& z = l == last ? tr.pre_out : tr.act[l + 1];
      z.assign(biases_[l].begin(), biases_[l].end());
      const double* in = tr.act[l].data();
      const double* w = weights_[l].data();
      for (std::size_t o = 0; o < n_out; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < n_in; ++i) s += w[o * n_in + i] * in[i];
        z[o] += s;
      }
      if (l == last) {
        tr.out.resize(n_out);
        for (std::size_t o = 0; o < n_out; ++o) tr.out[o] = transform(z[o]);
      } else {
        for (std::size_t o = 0; o < n_out; ++o) {
          z[o] = std::tanh(z[o]);
          if (use_mask) z[o] = sample->masks[l][o] ? z[o] * scale : 0.0;
        }
      }
    }
  }

  [[nodiscard]] double transform(double z) const {
    switch (spec_.transform) {
      case OutputTransform::kSigmoid: return sigmoid(z);
      case OutputTransform::kAffine: return spec_.lo + (spec_.hi - spec_.lo) * sigmoid(z);
      case OutputTransform::kIdentity: return z;
    }
    return z;
  }

  [[nodiscard]] double transform_derivative(double z) const {
    switch (spec_.transform) {
      case OutputTransform::kSigmoid: {
        const double s = sigmoid(z);
        return s * (1 - s);
      }
      case OutputTransform::kAffine: {
        const double s = sigmoid(z);
        return (spec_.hi - spec_.lo) * s * (1 - s);
      }
      case OutputTransform::kIdentity: return 1.0;
    }
    return 1.0;
  }

  static double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  double accumulate(std::span<const Sample> batch, const DropoutSample* sample,
                    std::vector<std::vector<double>>& gw, std::vector<std::vector<double>>& gb) const {
    const bool use_mask = masked(sample);
    const double scale = use_mask ? 1.0 / (1.0 - spec_.dropout) : 1.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const std::size_t last = weights_.size() - 1;
    Trace tr;
    double total = 0.0;
    std::vector<double> delta, prev;
    for (const auto& s : batch) {
      run(s.input, sample, tr);
      total += s.weight * squared_error(tr.out, s.target);
      const auto n_out = tr.out.size();
      delta.assign(n_out, 0.0);
      const double c = s.weight * inv_n * 2.0 / static_cast<double>(n_out);
      for (std::size_t o = 0; o < n_out; ++o) {
        delta[o] = c * (tr.out[o] - s.target[o]) * transform_derivative(tr.pre_out[o]);
      }
      for (std::size_t l = last + 1; l-- > 0;) {
        const auto n_in = static_cast<std::size_t>(spec_.dims[l]);
        const auto n_o = static_cast<std::size_t>(spec_.dims[l + 1]);
        const auto& in = tr.act[l];
        for (std::size_t o = 0; o < n_o; ++o) {
          gb[l][o] += delta[o];
          for (std::size_t i = 0; i < n_in; ++i) gw[l][o * n_in + i] += delta[o] * in[i];
        }
        if (l == 0) break;
        prev.assign(n_in, 0.0);
        const double* w = weights_[l].data();
        for (std::size_t o = 0; o < n_o; ++o) {
          for (std::size_t i = 0; i < n_in; ++i) prev[i] += w[o * n_in + i] * delta[o];
        }
        // in[i] = mask·scale·tanh(z); d in/dz = mask·scale·(1 − tanh²).
        for (std::size_t i = 0; i < n_in; ++i) {
          if (use_mask && !sample->masks[l - 1][i]) {
            prev[i] = 0.0;
            continue;
          }
          const double th = use_mask ? in[i] / scale : in[i];
          prev[i] *= (use_mask ? scale : 1.0) * (1.0 - th * th);
        }
        delta.swap(prev);
      }
    }
    return total * inv_n;
  }

  NetSpec spec_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;
};

}  // namespace ueq::smallnet
