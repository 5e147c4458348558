#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ueq {

/// Mass tolerance used for every "probability-normalized" check.
inline constexpr double kMassTolerance = 1e-9;

/// A finitely supported, nonnegative measure.
///
/// Atoms are kept sorted by support point and merged on insertion, so two
/// measures with the same mass on the same points compare equal regardless
/// of the order in which they were built. `Point` needs a strict weak order
/// through `operator<` and equality through `operator==`.
template <class Point>
class FiniteMeasure {
 public:
  using point_type = Point;
  using Atom = std::pair<Point, double>;

  FiniteMeasure() = default;

  FiniteMeasure(std::initializer_list<Atom> atoms) {
    for (const auto& [p, w] : atoms) add(p, w);
  }

  static FiniteMeasure dirac(Point p) {
    FiniteMeasure m;
    m.add(std::move(p), 1.0);
    return m;
  }

  /// Uniform probability over the listed points (duplicates merge).
  static FiniteMeasure uniform(const std::vector<Point>& points) {
    FiniteMeasure m;
    if (points.empty()) return m;
    const double w = 1.0 / static_cast<double>(points.size());
    for (const auto& p : points) m.add(p, w);
    return m;
  }

  /// Adds `weight` at `p`, merging with an existing atom at the same point.
  void add(Point p, double weight) {
    if (!(weight >= 0.0) || !std::isfinite(weight)) {
      throw std::invalid_argument("negative or non-finite measure weight");
    }
    auto it = std::lower_bound(
        atoms_.begin(), atoms_.end(), p,
        [](const Atom& a, const Point& q) { return a.first < q; });
    if (it != atoms_.end() && !(p < it->first) && !(it->first < p)) {
      it->second += weight;
    } else {
      atoms_.insert(it, Atom{std::move(p), weight});
    }
  }

  [[nodiscard]] const std::vector<Atom>& atoms() const { return atoms_; }
  [[nodiscard]] std::size_t size() const { return atoms_.size(); }
  [[nodiscard]] bool empty() const { return atoms_.empty(); }

  [[nodiscard]] double total_mass() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.second;
    return s;
  }

  [[nodiscard]] bool is_probability(double tol = kMassTolerance) const {
    return std::abs(total_mass() - 1.0) <= tol;
  }

  /// Mass at a single point (0 when the point is not in the support).
  [[nodiscard]] double mass_at(const Point& p) const {
    auto it = std::lower_bound(
        atoms_.begin(), atoms_.end(), p,
        [](const Atom& a, const Point& q) { return a.first < q; });
    if (it != atoms_.end() && !(p < it->first) && !(it->first < p)) return it->second;
    return 0.0;
  }

  [[nodiscard]] bool contains(const Point& p) const { return mass_at(p) > 0.0; }

  /// Points with strictly positive mass, in canonical order.
  [[nodiscard]] std::vector<Point> support() const {
    std::vector<Point> out;
    for (const auto& [p, w] : atoms_) {
      if (w > 0.0) out.push_back(p);
    }
    return out;
  }

  void scale(double factor) {
    for (auto& a : atoms_) a.second *= factor;
  }

  /// Rescales to total mass one. Throws on a zero measure.
  FiniteMeasure& normalize() {
    const double m = total_mass();
    if (!(m > 0.0)) throw std::invalid_argument("cannot normalize a zero measure");
    scale(1.0 / m);
    return *this;
  }

  /// Drops atoms lighter than `threshold`, then renormalizes.
  FiniteMeasure& prune(double threshold) {
    std::erase_if(atoms_, [threshold](const Atom& a) { return a.second < threshold; });
    return normalize();
  }

  template <class F>
  [[nodiscard]] double integrate(F&& f) const {
    double s = 0.0;
    for (const auto& [p, w] : atoms_) s += w * f(p);
    return s;
  }

  /// Image measure under `f`; atoms with equal images merge.
  template <class F>
  [[nodiscard]] auto pushforward(F&& f) const {
    using Image = std::decay_t<std::invoke_result_t<F&, const Point&>>;
    FiniteMeasure<Image> out;
    for (const auto& [p, w] : atoms_) out.add(f(p), w);
    return out;
  }

  friend bool operator==(const FiniteMeasure&, const FiniteMeasure&) = default;
  friend bool operator<(const FiniteMeasure& a, const FiniteMeasure& b) {
    return std::lexicographical_compare(
        a.atoms_.begin(), a.atoms_.end(), b.atoms_.begin(), b.atoms_.end(),
        [](const Atom& x, const Atom& y) {
          if (x.first < y.first) return true;
          if (y.first < x.first) return false;
          return x.second < y.second;
        });
  }

 private:
  std::vector<Atom> atoms_;
};

/// w·a + (1 − w)·b.
template <class P>
[[nodiscard]] FiniteMeasure<P> mix(const FiniteMeasure<P>& a, const FiniteMeasure<P>& b,
                                   double w) {
  FiniteMeasure<P> out;
  for (const auto& [p, m] : a.atoms()) out.add(p, w * m);
  for (const auto& [p, m] : b.atoms()) out.add(p, (1.0 - w) * m);
  return out;
}

/// Σ_k weights[k]·parts[k].
template <class P>
[[nodiscard]] FiniteMeasure<P> mixture(const std::vector<double>& weights,
                                       const std::vector<FiniteMeasure<P>>& parts) {
  if (weights.size() != parts.size()) {
    throw std::invalid_argument("mixture: weight/part count mismatch");
  }
  FiniteMeasure<P> out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (const auto& [p, m] : parts[k].atoms()) out.add(p, weights[k] * m);
  }
  return out;
}

/// Product measure on pairs.
template <class A, class B>
[[nodiscard]] FiniteMeasure<std::pair<A, B>> product(const FiniteMeasure<A>& a,
                                                     const FiniteMeasure<B>& b) {
  FiniteMeasure<std::pair<A, B>> out;
  for (const auto& [p, wp] : a.atoms()) {
    for (const auto& [q, wq] : b.atoms()) out.add({p, q}, wp * wq);
  }
  return out;
}

/// Total variation distance, sup_A |a(A) − b(A)| = ½ Σ |a − b|.
template <class P>
[[nodiscard]] double total_variation(const FiniteMeasure<P>& a, const FiniteMeasure<P>& b) {
  const auto& x = a.atoms();
  const auto& y = b.atoms();
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() || j < y.size()) {
    if (j == y.size() || (i < x.size() && x[i].first < y[j].first)) {
      s += std::abs(x[i++].second);
    } else if (i == x.size() || y[j].first < x[i].first) {
      s += std::abs(y[j++].second);
    } else {
      s += std::abs(x[i++].second - y[j++].second);
    }
  }
  return 0.5 * s;
}

/// Wasserstein-1 distance between probability measures on the real line,
/// computed as ∫ |F_a − F_b| over the merged support.
[[nodiscard]] inline double wasserstein1(const FiniteMeasure<double>& a,
                                         const FiniteMeasure<double>& b) {
  std::vector<double> pts;
  for (const auto& [p, w] : a.atoms()) pts.push_back(p);
  for (const auto& [p, w] : b.atoms()) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  double fa = 0.0, fb = 0.0, dist = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    fa += a.mass_at(pts[k]);
    fb += b.mass_at(pts[k]);
    dist += std::abs(fa - fb) * (pts[k + 1] - pts[k]);
  }
  return dist;
}

/// Distribution metrics available to the recurrence checks.
enum class Metric { kTotalVariation, kWasserstein1 };

[[nodiscard]] inline Metric parse_metric(const std::string& id) {
  if (id == "tv" || id == "total-variation") return Metric::kTotalVariation;
  if (id == "w1" || id == "wasserstein-1" || id == "wasserstein-1-on-[0,1]") {
    return Metric::kWasserstein1;
  }
  throw std::invalid_argument("unknown metric id: " + id);
}

[[nodiscard]] inline double distance(Metric metric, const FiniteMeasure<double>& a,
                                     const FiniteMeasure<double>& b) {
  return metric == Metric::kTotalVariation ? total_variation(a, b) : wasserstein1(a, b);
}

}  // namespace ueq
