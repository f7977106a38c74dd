#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "aabo/error.hpp"
#include "aabo/random.hpp"

namespace aabo {

struct BoxRecord {
  double width = 0.0;   // pixels
  double height = 0.0;  // pixels
  std::int64_t image_id = 0;
};

// Anchor shape in (scale, ratio) form: scale = sqrt(w*h), ratio = h/w.
struct ScaleRatio {
  double scale = 0.0;
  double ratio = 0.0;

  double width() const { return scale / std::sqrt(ratio); }
  double height() const { return scale * std::sqrt(ratio); }

  friend bool operator==(const ScaleRatio&, const ScaleRatio&) = default;
  friend auto operator<=>(const ScaleRatio&, const ScaleRatio&) = default;
};

// Largest admissible anchor width and height, in pixels.
struct GlobalLimits {
  double max_width = 0.0;
  double max_height = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double rel_tol = 0.0) const {
    return v >= lo * (1.0 - rel_tol) && v <= hi * (1.0 + rel_tol);
  }
  double log_width() const { return std::log(hi) - std::log(lo); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct CountRange {
  int lo = 1;
  int hi = 1;
  friend bool operator==(const CountRange&, const CountRange&) = default;
};

// Search region of one pyramid level. Scales are basic scales: the anchor's
// pixel scale is scale * stride.
struct LevelSpace {
  int level_index = 0;
  CountRange anchor_count;
  Interval scale_range;
  Interval ratio_range;
  int stride = 1;

  friend bool operator==(const LevelSpace&, const LevelSpace&) = default;
};

struct SearchSpace {
  GlobalLimits limits;
  std::vector<LevelSpace> levels;

  std::size_t num_levels() const { return levels.size(); }
};

// Per-level anchor lists, basic scales as in LevelSpace.
struct AnchorConfiguration {
  std::vector<std::vector<ScaleRatio>> levels;

  std::size_t num_anchors() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += l.size();
    return n;
  }
  friend bool operator==(const AnchorConfiguration&, const AnchorConfiguration&) = default;
};

// Relative slack for boundary comparisons that pass through sqrt/log/exp.
inline constexpr double kBoundaryTolerance = 1e-12;
inline constexpr double kRangeTolerance = 1e-9;

inline ScaleRatio box_to_scale_ratio(const BoxRecord& box) {
  if (!(box.width > 0.0) || !(box.height > 0.0) || !std::isfinite(box.width) ||
      !std::isfinite(box.height)) {
    throw InvalidInput("box dimensions must be positive and finite (width=" +
                       std::to_string(box.width) + ", height=" + std::to_string(box.height) + ")");
  }
  return {std::sqrt(box.width * box.height), box.height / box.width};
}

// Admissible ratios for a pixel scale: [scale^2 / W^2, H^2 / scale^2].
inline Interval ratio_bounds(double scale, const GlobalLimits& limits) {
  if (!(scale > 0.0)) throw InvalidInput("scale must be positive");
  const double cap = std::sqrt(limits.max_width * limits.max_height);
  if (scale > cap * (1.0 + kBoundaryTolerance)) {
    throw InfeasibleScale("scale " + std::to_string(scale) + " exceeds sqrt(W*H) = " +
                          std::to_string(cap));
  }
  const double lo = scale * scale / (limits.max_width * limits.max_width);
  const double hi = limits.max_height * limits.max_height / (scale * scale);
  return {lo, std::max(lo, hi)};
}

// Equivalent to width <= W && height <= H for the pair's box.
inline bool is_feasible(const ScaleRatio& pair, const GlobalLimits& limits) {
  if (!(pair.scale > 0.0) || !(pair.ratio > 0.0)) return false;
  const double w2 = limits.max_width * limits.max_width;
  const double h2 = limits.max_height * limits.max_height;
  const double s2 = pair.scale * pair.scale;
  return pair.ratio >= (s2 / w2) * (1.0 - kBoundaryTolerance) &&
         pair.ratio <= (h2 / s2) * (1.0 + kBoundaryTolerance);
}

inline ScaleRatio to_pixels(const ScaleRatio& basic, int stride) {
  return {basic.scale * stride, basic.ratio};
}

inline bool is_feasible_at(const ScaleRatio& basic, int stride, const GlobalLimits& limits) {
  return is_feasible(to_pixels(basic, stride), limits);
}

// Pyramid level of a box: clamp(floor(log2(scale / base_scale)), 0, num_levels - 1).
inline int assign_level(const ScaleRatio& pair, int num_levels, double base_scale) {
  if (num_levels < 1) throw InvalidInput("num_levels must be >= 1");
  if (!(base_scale > 0.0)) throw InvalidInput("base_scale must be positive");
  const double l = std::floor(std::log2(pair.scale / base_scale));
  if (!(l > 0.0)) return 0;
  return static_cast<int>(std::min<double>(l, num_levels - 1));
}

inline int level_stride(int base_stride, int level) { return base_stride << level; }

// Throws InvalidInput describing the first violated invariant.
inline void validate(const SearchSpace& space) {
  const auto& lim = space.limits;
  if (!(lim.max_width > 0.0) || !(lim.max_height > 0.0)) {
    throw InvalidInput("global limits must be positive");
  }
  if (space.levels.empty()) throw InvalidInput("search space has no levels");
  const double cap = std::sqrt(lim.max_width * lim.max_height);
  for (std::size_t i = 0; i < space.levels.size(); ++i) {
    const auto& lv = space.levels[i];
    const std::string where = "level " + std::to_string(i) + ": ";
    if (lv.level_index != static_cast<int>(i)) throw InvalidInput(where + "level indices must be consecutive from 0");
    if (lv.stride < 1) throw InvalidInput(where + "stride must be positive");
    if (lv.anchor_count.lo < 1 || lv.anchor_count.lo > lv.anchor_count.hi) {
      throw InvalidInput(where + "anchor count range must satisfy 1 <= min <= max");
    }
    for (const auto* r : {&lv.scale_range, &lv.ratio_range}) {
      if (!(r->lo > 0.0) || !(r->lo <= r->hi) || !std::isfinite(r->hi)) {
        throw InvalidInput(where + "ranges must be positive with lo <= hi");
      }
    }
    const double s_lo = lv.scale_range.lo * lv.stride;
    if (s_lo > cap * (1.0 + kRangeTolerance)) {
      throw InvalidInput(where + "scale range lies entirely above sqrt(W*H)");
    }
    const Interval b = ratio_bounds(std::min(s_lo, cap), lim);
    if (lv.ratio_range.hi < b.lo * (1.0 - kRangeTolerance) ||
        lv.ratio_range.lo > b.hi * (1.0 + kRangeTolerance)) {
      throw InvalidInput(where + "ratio range does not meet the size-limit bounds");
    }
    if (i > 0) {
      const auto& prev = space.levels[i - 1];
      if (lv.anchor_count.hi > prev.anchor_count.hi) {
        throw InvalidInput(where + "anchor count maximum increases over the previous level");
      }
      if (lv.scale_range.log_width() > prev.scale_range.log_width() + kRangeTolerance) {
        throw InvalidInput(where + "scale range is wider than the previous level");
      }
      if (lv.ratio_range.log_width() > prev.ratio_range.log_width() + kRangeTolerance) {
        throw InvalidInput(where + "ratio range is wider than the previous level");
      }
    }
  }
}

// Throws InvalidInput unless config fits the space's counts, ranges, and size limits.
inline void validate(const AnchorConfiguration& config, const SearchSpace& space) {
  if (config.levels.size() != space.levels.size()) {
    throw InvalidInput("configuration has " + std::to_string(config.levels.size()) +
                       " levels, space has " + std::to_string(space.levels.size()));
  }
  for (std::size_t i = 0; i < config.levels.size(); ++i) {
    const auto& lv = space.levels[i];
    const auto& anchors = config.levels[i];
    const std::string where = "level " + std::to_string(i) + ": ";
    const int n = static_cast<int>(anchors.size());
    if (n < lv.anchor_count.lo || n > lv.anchor_count.hi) {
      throw InvalidInput(where + std::to_string(n) + " anchors outside count range [" +
                         std::to_string(lv.anchor_count.lo) + ", " +
                         std::to_string(lv.anchor_count.hi) + "]");
    }
    for (const auto& a : anchors) {
      if (!lv.scale_range.contains(a.scale, kRangeTolerance) ||
          !lv.ratio_range.contains(a.ratio, kRangeTolerance)) {
        throw InvalidInput(where + "anchor (" + std::to_string(a.scale) + ", " +
                           std::to_string(a.ratio) + ") outside the level's ranges");
      }
      if (!is_feasible_at(a, lv.stride, space.limits)) {
        throw InvalidInput(where + "anchor (" + std::to_string(a.scale) + ", " +
                           std::to_string(a.ratio) + ") exceeds the global size limits");
      }
    }
  }
}

inline bool is_valid(const AnchorConfiguration& config, const SearchSpace& space) {
  try {
    validate(config, space);
    return true;
  } catch (const InvalidInput&) {
    return false;
  }
}

// Sorts each level's anchors by scale, then ratio.
inline AnchorConfiguration canonicalize(AnchorConfiguration config) {
  for (auto& l : config.levels) std::sort(l.begin(), l.end());
  return config;
}

struct SpaceBuildParams {
  double quantile_lo = 0.02;
  double quantile_hi = 0.98;
  double padding = 1.1;  // multiplies each range's log-width about its log-center
  double base_scale = 32.0;
  int base_stride = 4;
  int min_count = 1;
  std::vector<int> max_counts{9, 8, 7, 6, 5};  // last entry repeats for deeper pyramids
};

namespace detail {

// Linear-interpolation empirical quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

struct LogRange {
  double lo;
  double hi;
  double center() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

inline LogRange padded_quantiles(std::vector<double> logs, double qlo, double qhi, double padding) {
  std::sort(logs.begin(), logs.end());
  LogRange r{quantile_sorted(logs, qlo), quantile_sorted(logs, qhi)};
  const double half = 0.5 * r.width() * padding;
  const double c = r.center();
  return {c - half, c + half};
}

inline Interval from_logs(double lo, double hi) {
  const double a = std::exp(lo);
  return {a, std::max(a, std::exp(hi))};
}

inline Interval shrink_to_log_width(const Interval& r, double width) {
  if (r.log_width() <= width) return r;
  const double c = 0.5 * (std::log(r.lo) + std::log(r.hi));
  Interval out = from_logs(c - 0.5 * width, c + 0.5 * width);
  // exp rounding can leave the new width a hair above the target
  out.lo = std::max(out.lo, r.lo);
  out.hi = std::min(out.hi, r.hi);
  while (out.log_width() > width && out.hi > out.lo) out.hi = std::nextafter(out.hi, out.lo);
  return out;
}

// Intersects a level's ranges with the size-limit bounds at its stride.
inline void clip_to_limits(LevelSpace& lv, const GlobalLimits& limits) {
  const double cap = std::sqrt(limits.max_width * limits.max_height) / lv.stride;
  lv.scale_range.hi = std::min(lv.scale_range.hi, cap);
  lv.scale_range.lo = std::min(lv.scale_range.lo, lv.scale_range.hi);
  const Interval b = ratio_bounds(lv.scale_range.lo * lv.stride, limits);
  auto& r = lv.ratio_range;
  if (r.hi < b.lo) {
    r = {b.lo, b.lo};
  } else if (r.lo > b.hi) {
    r = {b.hi, b.hi};
  } else {
    r = {std::max(r.lo, b.lo), std::min(r.hi, b.hi)};
  }
}

}  // namespace detail

// Builds a feature-map-wise space from ground-truth boxes: per-level quantile
// ranges, padded in log space, clipped to the size limits, then narrowed so
// deeper levels are never more diverse than shallower ones.
inline SearchSpace build_space(const std::vector<BoxRecord>& boxes, int num_levels,
                               const GlobalLimits& limits, const SpaceBuildParams& params = {}) {
  if (boxes.empty()) throw InvalidInput("no boxes to build a search space from");
  if (num_levels < 1) throw InvalidInput("num_levels must be >= 1");
  if (!(limits.max_width > 0.0) || !(limits.max_height > 0.0)) {
    throw InvalidInput("global limits must be positive");
  }
  if (!(params.quantile_lo >= 0.0 && params.quantile_lo <= params.quantile_hi &&
        params.quantile_hi <= 1.0)) {
    throw InvalidInput("quantiles must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(params.padding >= 1.0)) throw InvalidInput("padding factor must be >= 1");
  if (params.base_stride < 1) throw InvalidInput("base stride must be positive");
  if (params.min_count < 1 || params.max_counts.empty()) {
    throw InvalidInput("anchor count parameters must be positive");
  }

  std::vector<std::vector<double>> log_scales(num_levels), log_ratios(num_levels);
  for (const auto& box : boxes) {
    const ScaleRatio sr = box_to_scale_ratio(box);
    if (!is_feasible(sr, limits)) continue;
    const int l = assign_level(sr, num_levels, params.base_scale);
    log_scales[l].push_back(std::log(sr.scale / level_stride(params.base_stride, l)));
    log_ratios[l].push_back(std::log(sr.ratio));
  }
  std::vector<int> populated;
  for (int l = 0; l < num_levels; ++l) {
    if (!log_scales[l].empty()) populated.push_back(l);
  }
  if (populated.empty()) throw InfeasibleSpace("every box exceeds the global size limits");

  std::vector<detail::LogRange> scale_ranges(num_levels), ratio_ranges(num_levels);
  for (int l : populated) {
    scale_ranges[l] = detail::padded_quantiles(log_scales[l], params.quantile_lo,
                                               params.quantile_hi, params.padding);
    ratio_ranges[l] = detail::padded_quantiles(log_ratios[l], params.quantile_lo,
                                               params.quantile_hi, params.padding);
  }
  // Empty levels borrow from the nearest populated level (lower level on ties).
  for (int l = 0; l < num_levels; ++l) {
    if (!log_scales[l].empty()) continue;
    int best = populated.front();
    for (int p : populated) {
      if (std::abs(p - l) < std::abs(best - l)) best = p;
    }
    scale_ranges[l] = scale_ranges[best];
    ratio_ranges[l] = ratio_ranges[best];
  }

  SearchSpace space{limits, {}};
  int count_cap = params.max_counts.front();
  for (int l = 0; l < num_levels; ++l) {
    const int max_here =
        params.max_counts[std::min<std::size_t>(l, params.max_counts.size() - 1)];
    count_cap = std::max(1, std::min(count_cap, max_here));
    LevelSpace lv;
    lv.level_index = l;
    lv.stride = level_stride(params.base_stride, l);
    lv.anchor_count = {std::min(params.min_count, count_cap), count_cap};
    lv.scale_range = detail::from_logs(scale_ranges[l].lo, scale_ranges[l].hi);
    lv.ratio_range = detail::from_logs(ratio_ranges[l].lo, ratio_ranges[l].hi);
    detail::clip_to_limits(lv, limits);
    if (l > 0) {
      const auto& prev = space.levels.back();
      lv.scale_range = detail::shrink_to_log_width(lv.scale_range, prev.scale_range.log_width());
      detail::clip_to_limits(lv, limits);
      lv.ratio_range = detail::shrink_to_log_width(lv.ratio_range, prev.ratio_range.log_width());
    }
    space.levels.push_back(lv);
  }
  validate(space);
  return space;
}

// Per-level box counts under the same assignment build_space uses.
inline std::vector<std::size_t> level_box_counts(const std::vector<BoxRecord>& boxes, int num_levels,
                                                 const GlobalLimits& limits,
                                                 const SpaceBuildParams& params = {}) {
  std::vector<std::size_t> counts(num_levels, 0);
  for (const auto& box : boxes) {
    const ScaleRatio sr = box_to_scale_ratio(box);
    if (is_feasible(sr, limits)) ++counts[assign_level(sr, num_levels, params.base_scale)];
  }
  return counts;
}

// Log-uniform draw on [lo, hi]; exact for degenerate intervals.
inline double sample_log_uniform(Rng& rng, const Interval& r) {
  if (r.lo == r.hi) return r.lo;
  const double v = std::exp(uniform(rng, std::log(r.lo), std::log(r.hi)));
  return std::clamp(v, r.lo, r.hi);
}

inline constexpr int kMaxRejections = 10000;

// Draws one anchor of a level, rejecting pairs outside the size limits.
inline ScaleRatio sample_anchor(Rng& rng, const LevelSpace& lv, const GlobalLimits& limits) {
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    const ScaleRatio pair{sample_log_uniform(rng, lv.scale_range),
                          sample_log_uniform(rng, lv.ratio_range)};
    if (is_feasible_at(pair, lv.stride, limits)) return pair;
  }
  throw InfeasibleSpace("level " + std::to_string(lv.level_index) + ": no feasible anchor after " +
                        std::to_string(kMaxRejections) + " draws");
}

inline AnchorConfiguration sample_configuration(const SearchSpace& space, Rng& rng) {
  AnchorConfiguration config;
  config.levels.reserve(space.levels.size());
  for (const auto& lv : space.levels) {
    const auto n = uniform_int(rng, lv.anchor_count.lo, lv.anchor_count.hi);
    std::vector<ScaleRatio> anchors;
    anchors.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) anchors.push_back(sample_anchor(rng, lv, space.limits));
    config.levels.push_back(std::move(anchors));
  }
  return canonicalize(std::move(config));
}

// Prior sample: uniform counts, log-uniform scales and ratios, feasible by rejection.
inline AnchorConfiguration sample_configuration(const SearchSpace& space, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample_configuration(space, rng);
}

}  // namespace aabo
