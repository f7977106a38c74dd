#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "aabo/anchor_space.hpp"
#include "aabo/hash.hpp"
#include "aabo/random.hpp"
#include "aabo/serialization.hpp"

namespace aabo {

// Something the search can spend budget on. `evaluate` receives the 1-based
// budget index of the configuration and a per-trial seed, and throws
// ObjectiveFailure when an evaluation cannot produce a reward. `true_value`
// is set only for simulation objectives whose per-configuration mean is known.
struct Objective {
  std::function<double(const AnchorConfiguration&, std::size_t budget_index, std::uint64_t seed)> evaluate;
  std::function<double(const AnchorConfiguration&)> true_value;
};

// Maps boxes to pyramid levels and levels to strides.
struct LevelAssigner {
  double base_scale = 32.0;
  std::vector<int> strides;

  int num_levels() const { return static_cast<int>(strides.size()); }
  int level_of(const BoxRecord& box) const {
    return assign_level(box_to_scale_ratio(box), num_levels(), base_scale);
  }
};

inline LevelAssigner assigner_for(const SearchSpace& space, double base_scale = 32.0) {
  LevelAssigner a{base_scale, {}};
  for (const auto& lv : space.levels) a.strides.push_back(lv.stride);
  return a;
}

// IoU of two rectangles sharing a center.
inline double centered_iou(double w_a, double h_a, double w_b, double h_b) {
  const double inter = std::min(w_a, w_b) * std::min(h_a, h_b);
  return inter / (w_a * h_a + w_b * h_b - inter);
}

// Best centered IoU between a box and the anchors of one level.
inline double best_iou(const BoxRecord& box, const std::vector<ScaleRatio>& anchors, int stride) {
  double best = 0.0;
  for (const auto& a : anchors) {
    const ScaleRatio px = to_pixels(a, stride);
    best = std::max(best, centered_iou(px.width(), px.height(), box.width, box.height));
  }
  return best;
}

// Boxes pre-grouped by level so repeated evaluations skip the assignment.
class CoverageObjective {
 public:
  CoverageObjective(std::vector<BoxRecord> boxes, LevelAssigner assigner)
      : assigner_(std::move(assigner)), by_level_(assigner_.num_levels()) {
    if (boxes.empty()) throw InvalidInput("coverage needs at least one box");
    if (assigner_.num_levels() < 1) throw InvalidInput("coverage needs at least one level");
    for (const auto& b : boxes) by_level_[assigner_.level_of(b)].push_back(b);
    total_ = boxes.size();
  }

  // Mean over boxes of the best centered IoU among the anchors of the box's level.
  double operator()(const AnchorConfiguration& config) const {
    if (static_cast<int>(config.levels.size()) != assigner_.num_levels()) {
      throw InvalidInput("configuration level count does not match the level assigner");
    }
    double sum = 0.0;
    for (int l = 0; l < assigner_.num_levels(); ++l) {
      for (const auto& b : by_level_[l]) sum += best_iou(b, config.levels[l], assigner_.strides[l]);
    }
    return sum / static_cast<double>(total_);
  }

  const LevelAssigner& assigner() const { return assigner_; }
  const std::vector<std::vector<BoxRecord>>& boxes_by_level() const { return by_level_; }

 private:
  LevelAssigner assigner_;
  std::vector<std::vector<BoxRecord>> by_level_;
  std::size_t total_ = 0;
};

inline double coverage_reward(const AnchorConfiguration& config, const std::vector<BoxRecord>& boxes,
                              const LevelAssigner& assigner) {
  return CoverageObjective(boxes, assigner)(config);
}

inline Objective make_coverage_objective(std::vector<BoxRecord> boxes, LevelAssigner assigner) {
  auto cov = std::make_shared<CoverageObjective>(std::move(boxes), std::move(assigner));
  Objective obj;
  obj.evaluate = [cov](const AnchorConfiguration& c, std::size_t, std::uint64_t) { return (*cov)(c); };
  return obj;
}

// Stable 64-bit identity of a configuration, independent of anchor order.
inline std::uint64_t config_fingerprint(const AnchorConfiguration& config) {
  return fnv1a64(to_json(canonicalize(config)).dump());
}

// ---- budget-dependent surrogate ---------------------------------------------

// Learning-curve surrogate: asymptote(c) * (1 - exp(-t / tau(c))) + N(0, sigma^2).
struct SurrogateParams {
  std::function<double(const AnchorConfiguration&)> asymptote;
  std::function<double(const AnchorConfiguration&)> tau;
  double sigma = 0.0;
};

inline double surrogate_mean(const AnchorConfiguration& config, std::size_t t, const SurrogateParams& p) {
  if (t < 1) throw InvalidInput("budget index must be >= 1");
  const double a = p.asymptote(config);
  const double tau = p.tau(config);
  if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput("surrogate asymptote must lie in [0, 1]");
  if (!(tau > 0.0)) throw InvalidInput("surrogate time constant must be positive");
  return a * (1.0 - std::exp(-static_cast<double>(t) / tau));
}

// Noise is a pure function of (configuration, t, seed).
inline double surrogate_reward(const AnchorConfiguration& config, std::size_t t,
                               const SurrogateParams& p, std::uint64_t seed) {
  const double mean = surrogate_mean(config, t, p);
  if (p.sigma <= 0.0) return mean;
  Rng rng = make_rng(derive_seed(seed, {config_fingerprint(config), t}));
  return mean + p.sigma * standard_normal(rng);
}

inline Objective make_surrogate_objective(SurrogateParams params) {
  auto p = std::make_shared<SurrogateParams>(std::move(params));
  Objective obj;
  obj.evaluate = [p](const AnchorConfiguration& c, std::size_t t, std::uint64_t seed) {
    return surrogate_reward(c, t, *p, seed);
  };
  obj.true_value = [p](const AnchorConfiguration& c) { return p->asymptote(c); };
  return obj;
}

// Shape of the coverage-linked surrogate: the asymptote is the coverage of a
// hidden box sample; tau grows as the smallest well-covered box shrinks, so
// configurations serving small objects converge slowly.
struct CoverageSurrogateShape {
  double sigma = 0.05;
  double tau_ref = 2.0;   // tau when the smallest covered box has the reference scale
  double tau_min = 0.5;
  double tau_max = 20.0;
  double cover_iou = 0.5;  // a box counts as covered at or above this IoU
};

inline SurrogateParams coverage_surrogate(std::vector<BoxRecord> boxes, LevelAssigner assigner,
                                          const CoverageSurrogateShape& shape = {}) {
  if (!(shape.tau_min > 0.0 && shape.tau_min <= shape.tau_max)) {
    throw InvalidInput("surrogate tau bounds must satisfy 0 < tau_min <= tau_max");
  }
  std::vector<double> scales;
  for (const auto& b : boxes) scales.push_back(box_to_scale_ratio(b).scale);
  std::sort(scales.begin(), scales.end());
  const double ref_scale = scales.empty() ? 1.0 : scales[scales.size() / 2];
  auto cov = std::make_shared<CoverageObjective>(std::move(boxes), std::move(assigner));
  SurrogateParams p;
  p.sigma = shape.sigma;
  p.asymptote = [cov](const AnchorConfiguration& c) { return (*cov)(c); };
  p.tau = [cov, shape, ref_scale](const AnchorConfiguration& c) {
    double smallest = std::numeric_limits<double>::infinity();
    const auto& by_level = cov->boxes_by_level();
    for (std::size_t l = 0; l < by_level.size(); ++l) {
      for (const auto& b : by_level[l]) {
        if (best_iou(b, c.levels.at(l), cov->assigner().strides[l]) >= shape.cover_iou) {
          smallest = std::min(smallest, box_to_scale_ratio(b).scale);
        }
      }
    }
    if (!std::isfinite(smallest)) return shape.tau_min;
    return std::clamp(shape.tau_ref * ref_scale / smallest, shape.tau_min, shape.tau_max);
  };
  return p;
}

}  // namespace aabo
