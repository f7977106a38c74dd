#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "aabo/anchor_space.hpp"

namespace aabo {

enum class DimKind { continuous, categorical };

// One coordinate of an encoded configuration. Categorical dims take the
// integer values lo..hi.
struct Dimension {
  DimKind kind = DimKind::continuous;
  double lo = 0.0;
  double hi = 0.0;

  int categories() const { return static_cast<int>(hi - lo) + 1; }
};

// Layout per level: [count, (log scale, log ratio) x max_count]. Slots past the
// count hold the log-range midpoints.
inline std::vector<Dimension> encoding_dims(const SearchSpace& space) {
  std::vector<Dimension> dims;
  for (const auto& lv : space.levels) {
    dims.push_back({DimKind::categorical, static_cast<double>(lv.anchor_count.lo),
                    static_cast<double>(lv.anchor_count.hi)});
    for (int j = 0; j < lv.anchor_count.hi; ++j) {
      dims.push_back({DimKind::continuous, std::log(lv.scale_range.lo), std::log(lv.scale_range.hi)});
      dims.push_back({DimKind::continuous, std::log(lv.ratio_range.lo), std::log(lv.ratio_range.hi)});
    }
  }
  return dims;
}

inline std::size_t encoding_width(const SearchSpace& space) {
  std::size_t w = 0;
  for (const auto& lv : space.levels) w += 1 + 2 * static_cast<std::size_t>(lv.anchor_count.hi);
  return w;
}

// Canonical vector for a configuration; anchor order does not matter.
inline std::vector<double> encode(const AnchorConfiguration& config, const SearchSpace& space) {
  validate(config, space);
  const AnchorConfiguration canon = canonicalize(config);
  std::vector<double> x;
  x.reserve(encoding_width(space));
  for (std::size_t l = 0; l < space.levels.size(); ++l) {
    const auto& lv = space.levels[l];
    const auto& anchors = canon.levels[l];
    x.push_back(static_cast<double>(anchors.size()));
    const double mid_s = 0.5 * (std::log(lv.scale_range.lo) + std::log(lv.scale_range.hi));
    const double mid_r = 0.5 * (std::log(lv.ratio_range.lo) + std::log(lv.ratio_range.hi));
    for (int j = 0; j < lv.anchor_count.hi; ++j) {
      if (j < static_cast<int>(anchors.size())) {
        x.push_back(std::log(anchors[j].scale));
        x.push_back(std::log(anchors[j].ratio));
      } else {
        x.push_back(mid_s);
        x.push_back(mid_r);
      }
    }
  }
  return x;
}

// Inverse of encode. Values are clamped into the space's counts and ranges;
// size-limit feasibility is not enforced here.
inline AnchorConfiguration decode(std::span<const double> x, const SearchSpace& space) {
  if (x.size() != encoding_width(space)) {
    throw InvalidInput("encoded vector has width " + std::to_string(x.size()) + ", expected " +
                       std::to_string(encoding_width(space)));
  }
  AnchorConfiguration config;
  std::size_t pos = 0;
  for (const auto& lv : space.levels) {
    const long n = std::clamp<long>(std::lround(x[pos]), lv.anchor_count.lo, lv.anchor_count.hi);
    ++pos;
    std::vector<ScaleRatio> anchors;
    for (int j = 0; j < lv.anchor_count.hi; ++j, pos += 2) {
      if (j >= n) continue;
      anchors.push_back({std::clamp(std::exp(x[pos]), lv.scale_range.lo, lv.scale_range.hi),
                         std::clamp(std::exp(x[pos + 1]), lv.ratio_range.lo, lv.ratio_range.hi)});
    }
    config.levels.push_back(std::move(anchors));
  }
  return canonicalize(std::move(config));
}

}  // namespace aabo
