#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "aabo/anchor_space.hpp"

namespace aabo {

struct KMeansResult {
  std::vector<ScaleRatio> centers;       // sorted by scale, then ratio
  std::vector<int> assignment;           // per input box, index into centers
  std::vector<double> wcss_history;      // within-cluster sum of squares after each update step
  int iterations = 0;
};

inline constexpr int kKMeansMaxIterations = 300;

namespace detail {

using Point2 = std::array<double, 2>;

inline double sq_dist(const Point2& a, const Point2& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

inline double wcss(const std::vector<Point2>& pts, const std::vector<Point2>& centers,
                   const std::vector<int>& assign) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += sq_dist(pts[i], centers[assign[i]]);
  return s;
}

}  // namespace detail

// Lloyd's k-means over (log scale, log ratio) with k-means++ seeding. Stops
// when assignments stop changing or after 300 iterations.
inline KMeansResult kmeans_cluster(const std::vector<BoxRecord>& boxes, int k, std::uint64_t seed) {
  using detail::Point2;
  if (k < 1) throw InvalidInput("k must be >= 1");
  std::vector<Point2> pts;
  pts.reserve(boxes.size());
  for (const auto& b : boxes) {
    const ScaleRatio sr = box_to_scale_ratio(b);
    pts.push_back({std::log(sr.scale), std::log(sr.ratio)});
  }
  std::vector<Point2> distinct = pts;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<int>(distinct.size()) < k) {
    throw InvalidInput("k-means needs at least " + std::to_string(k) + " distinct boxes, got " +
                       std::to_string(distinct.size()));
  }

  Rng rng = make_rng(seed);
  std::vector<Point2> centers;
  centers.push_back(distinct[uniform_int(rng, 0, static_cast<std::int64_t>(distinct.size()) - 1)]);
  std::vector<double> d2(distinct.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < distinct.size(); ++i) {
      d2[i] = std::min(d2[i], detail::sq_dist(distinct[i], centers.back()));
      total += d2[i];
    }
    double u = uniform01(rng) * total;
    std::size_t pick = distinct.size();
    for (std::size_t i = 0; i < distinct.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      u -= d2[i];
      if (u < 0.0) break;
    }
    centers.push_back(distinct[pick]);
  }

  KMeansResult out;
  std::vector<int> assign(pts.size(), -1);
  for (int it = 0; it < kKMeansMaxIterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      int best = 0;
      double best_d = detail::sq_dist(pts[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = detail::sq_dist(pts[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    out.iterations = it + 1;

    std::vector<Point2> sums(k, Point2{0.0, 0.0});
    std::vector<int> sizes(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sums[assign[i]][0] += pts[i][0];
      sums[assign[i]][1] += pts[i][1];
      ++sizes[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        centers[c] = {sums[c][0] / sizes[c], sums[c][1] / sizes[c]};
      }
    }
    // An emptied cluster takes over the point farthest from its center.
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = detail::sq_dist(pts[i], centers[assign[i]]);
        if (d > far_d && sizes[assign[i]] > 1) {
          far_d = d;
          far = i;
        }
      }
      --sizes[assign[far]];
      assign[far] = c;
      sizes[c] = 1;
      centers[c] = pts[far];
    }
    out.wcss_history.push_back(detail::wcss(pts, centers, assign));
  }

  std::vector<ScaleRatio> unsorted;
  for (const auto& c : centers) unsorted.push_back({std::exp(c[0]), std::exp(c[1])});
  std::vector<int> order(k);
  for (int c = 0; c < k; ++c) order[c] = c;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return unsorted[a] < unsorted[b]; });
  std::vector<int> rank(k);
  for (int r = 0; r < k; ++r) {
    rank[order[r]] = r;
    out.centers.push_back(unsorted[order[r]]);
  }
  out.assignment.reserve(assign.size());
  for (int a : assign) out.assignment.push_back(rank[a]);
  return out;
}

inline std::vector<ScaleRatio> kmeans_anchors(const std::vector<BoxRecord>& boxes, int k,
                                              std::uint64_t seed) {
  return kmeans_cluster(boxes, k, seed).centers;
}

}  // namespace aabo
