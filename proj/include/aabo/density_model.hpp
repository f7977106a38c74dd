#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "aabo/anchor_space.hpp"
#include "aabo/encoding.hpp"
#include "aabo/error.hpp"
#include "aabo/random.hpp"

namespace aabo {

struct Observation {
  std::vector<double> x;
  double y = 0.0;  // loss, lower is better
};

struct DensityOptions {
  double gamma = 0.15;
  std::size_t min_points = 0;  // 0 selects 2 * dim + 2
  double categorical_smoothing = 0.1;
  double bandwidth_floor = 1e-3;  // fraction of each continuous dim's range
};

inline constexpr double kAcquisitionEpsilon = 1e-12;
// Absolute bandwidth floor for dims whose range is a single point.
inline constexpr double kMinBandwidth = 1e-9;

inline std::size_t default_min_points(std::size_t dim) { return 2 * dim + 2; }

// Product-kernel density: Gaussian on continuous dims with a Scott-type
// bandwidth, additive-smoothed indicator on categorical dims.
class KernelDensity {
 public:
  KernelDensity(std::vector<std::vector<double>> points, std::vector<Dimension> dims,
                double smoothing = 0.1, double floor_fraction = 1e-3)
      : points_(std::move(points)), dims_(std::move(dims)), smoothing_(smoothing) {
    if (points_.empty()) throw InvalidInput("kernel density needs at least one point");
    for (const auto& p : points_) {
      if (p.size() != dims_.size()) throw InvalidInput("point width does not match dimensions");
    }
    const double n = static_cast<double>(points_.size());
    const double shrink = std::pow(n, -1.0 / (static_cast<double>(dims_.size()) + 4.0));
    bandwidths_.assign(dims_.size(), 0.0);
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (dims_[d].kind != DimKind::continuous) continue;
      double mean = 0.0;
      for (const auto& p : points_) mean += p[d];
      mean /= n;
      double var = 0.0;
      for (const auto& p : points_) var += (p[d] - mean) * (p[d] - mean);
      const double sd = points_.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
      bandwidths_[d] = std::max({sd * shrink, floor_fraction * (dims_[d].hi - dims_[d].lo),
                                 kMinBandwidth});
    }
  }

  double log_pdf(std::span<const double> x) const {
    if (x.size() != dims_.size()) throw InvalidInput("query width does not match dimensions");
    std::vector<double> terms;
    terms.reserve(points_.size());
    for (const auto& p : points_) {
      double lk = 0.0;
      for (std::size_t d = 0; d < dims_.size(); ++d) lk += log_kernel(d, x[d], p[d]);
      terms.push_back(lk);
    }
    const double m = *std::max_element(terms.begin(), terms.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s) - std::log(static_cast<double>(points_.size()));
  }

  double pdf(std::span<const double> x) const { return std::exp(log_pdf(x)); }

  // Picks a stored point uniformly and perturbs it with the kernel;
  // continuous coordinates are clipped into their dim's range.
  std::vector<double> sample(Rng& rng) const {
    const auto& base = points_[uniform_int(rng, 0, static_cast<std::int64_t>(points_.size()) - 1)];
    std::vector<double> out(dims_.size());
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      const auto& dim = dims_[d];
      if (dim.kind == DimKind::continuous) {
        out[d] = std::clamp(normal(rng, base[d], bandwidths_[d]), dim.lo, dim.hi);
      } else {
        const int m = dim.categories();
        const double keep = (1.0 + smoothing_) / (1.0 + smoothing_ * m);
        if (uniform01(rng) < keep) {
          out[d] = base[d];
        } else {
          // every other category is equally likely
          auto c = uniform_int(rng, 0, m - 2);
          double v = dim.lo + static_cast<double>(c);
          if (v >= base[d]) v += 1.0;
          out[d] = v;
        }
      }
    }
    return out;
  }

  const std::vector<double>& bandwidths() const { return bandwidths_; }
  const std::vector<Dimension>& dims() const { return dims_; }
  const std::vector<std::vector<double>>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  double log_kernel(std::size_t d, double x, double center) const {
    const auto& dim = dims_[d];
    if (dim.kind == DimKind::continuous) {
      const double h = bandwidths_[d];
      const double z = (x - center) / h;
      return -0.5 * z * z - std::log(h) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    const double hit = std::lround(x) == std::lround(center) ? 1.0 : 0.0;
    return std::log((hit + smoothing_) / (1.0 + smoothing_ * dim.categories()));
  }

  std::vector<std::vector<double>> points_;
  std::vector<Dimension> dims_;
  std::vector<double> bandwidths_;
  double smoothing_;
};

// Good/bad density pair of a Tree-Parzen-style estimator.
class DensityModel {
 public:
  DensityModel(KernelDensity good, KernelDensity bad, double split_threshold, double gamma)
      : good_(std::move(good)), bad_(std::move(bad)), threshold_(split_threshold), gamma_(gamma) {}

  // Returns nullopt when there are fewer than min_points observations; the
  // caller then samples from the prior. The good set is the ceil(gamma * n)
  // lowest losses (ties by input order), or the single lowest if every loss
  // is equal.
  static std::optional<DensityModel> fit(const std::vector<Observation>& observations,
                                         const std::vector<Dimension>& dims,
                                         const DensityOptions& options = {}) {
    if (!(options.gamma > 0.0 && options.gamma < 1.0)) throw InvalidInput("gamma must lie in (0, 1)");
    const std::size_t need =
        std::max<std::size_t>(2, options.min_points ? options.min_points : default_min_points(dims.size()));
    const std::size_t n = observations.size();
    if (n < need) return std::nullopt;
    for (const auto& o : observations) {
      if (!std::isfinite(o.y)) throw InvalidInput("observation loss must be finite");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return observations[a].y < observations[b].y;
    });
    const bool all_equal = observations[order.front()].y == observations[order.back()].y;
    std::size_t n_good = good_count(n, options.gamma);
    if (all_equal) n_good = 1;

    std::vector<std::vector<double>> good, bad;
    for (std::size_t r = 0; r < n; ++r) {
      (r < n_good ? good : bad).push_back(observations[order[r]].x);
    }
    const double threshold = observations[order[n_good - 1]].y;
    return DensityModel(
        KernelDensity(std::move(good), dims, options.categorical_smoothing, options.bandwidth_floor),
        KernelDensity(std::move(bad), dims, options.categorical_smoothing, options.bandwidth_floor),
        threshold, options.gamma);
  }

  // ceil(gamma * n), kept within [1, n - 1].
  static std::size_t good_count(std::size_t n, double gamma) {
    const double raw = std::ceil(gamma * static_cast<double>(n) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n - 1);
  }

  double log_l(std::span<const double> x) const { return good_.log_pdf(x); }
  double log_g(std::span<const double> x) const { return bad_.log_pdf(x); }

  // log(l(x) / max(g(x), eps)); ranking by this avoids underflow in wide encodings.
  double log_acquisition(std::span<const double> x) const {
    return log_l(x) - std::max(log_g(x), std::log(kAcquisitionEpsilon));
  }

  // l(x) / max(g(x), eps), saturated to the largest finite double.
  double acquisition(std::span<const double> x) const {
    const double v = std::exp(log_acquisition(x));
    if (std::isnan(v)) return 0.0;
    return std::min(v, std::numeric_limits<double>::max());
  }

  const KernelDensity& good() const { return good_; }
  const KernelDensity& bad() const { return bad_; }
  double split_threshold() const { return threshold_; }
  double gamma() const { return gamma_; }

 private:
  KernelDensity good_;
  KernelDensity bad_;
  double threshold_;
  double gamma_;
};

// Draws n_candidates points from the good density and returns the one with
// the largest acquisition (first on ties).
inline std::vector<double> propose_vector(const DensityModel& model, int n_candidates, Rng& rng) {
  if (n_candidates < 1) throw InvalidInput("n_candidates must be >= 1");
  std::vector<double> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_candidates; ++i) {
    auto x = model.good().sample(rng);
    const double s = model.log_acquisition(x);
    if (best.empty() || s > best_score) {
      best_score = s;
      best = std::move(x);
    }
  }
  return best;
}

namespace detail {

inline constexpr int kProposalRedraws = 100;

// Decodes a good-density draw into a feasible configuration, redrawing when
// an anchor breaks the size limits and patching from the prior as a last resort.
inline AnchorConfiguration draw_feasible(const DensityModel& model, const SearchSpace& space, Rng& rng) {
  AnchorConfiguration config;
  for (int attempt = 0; attempt < kProposalRedraws; ++attempt) {
    config = decode(model.good().sample(rng), space);
    if (is_valid(config, space)) return config;
  }
  for (std::size_t l = 0; l < config.levels.size(); ++l) {
    const auto& lv = space.levels[l];
    for (auto& a : config.levels[l]) {
      if (!is_feasible_at(a, lv.stride, space.limits)) a = sample_anchor(rng, lv, space.limits);
    }
  }
  return canonicalize(std::move(config));
}

}  // namespace detail

// Next configuration to evaluate. Without a model this is exactly the prior
// sample for the seed; otherwise the acquisition argmax over n_candidates
// draws from the good density.
inline AnchorConfiguration propose(const DensityModel* model, const SearchSpace& space,
                                   int n_candidates, std::uint64_t seed) {
  if (n_candidates < 1) throw InvalidInput("n_candidates must be >= 1");
  if (model == nullptr) return sample_configuration(space, seed);
  Rng rng = make_rng(seed);
  AnchorConfiguration best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_candidates; ++i) {
    AnchorConfiguration c = detail::draw_feasible(*model, space, rng);
    const double s = model->log_acquisition(encode(c, space));
    if (i == 0 || s > best_score) {
      best_score = s;
      best = std::move(c);
    }
  }
  return best;
}

}  // namespace aabo
