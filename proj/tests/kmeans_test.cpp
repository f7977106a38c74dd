#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "aabo/kmeans.hpp"

using namespace aabo;

namespace {

std::vector<BoxRecord> three_clusters(std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<BoxRecord> boxes;
  const double centers[3][2] = {{20.0, 0.5}, {80.0, 1.0}, {300.0, 2.0}};
  for (int i = 0; i < 300; ++i) {
    const auto& c = centers[i % 3];
    const double s = c[0] * std::exp(normal(rng, 0.0, 0.05));
    const double r = c[1] * std::exp(normal(rng, 0.0, 0.05));
    boxes.push_back({s / std::sqrt(r), s * std::sqrt(r), i});
  }
  return boxes;
}

}  // namespace

TEST(KMeans, RecoversSeparatedClusters) {
  const auto res = kmeans_cluster(three_clusters(3), 3, 42);
  ASSERT_EQ(res.centers.size(), 3u);
  EXPECT_NEAR(res.centers[0].scale, 20.0, 1.0);
  EXPECT_NEAR(res.centers[1].scale, 80.0, 4.0);
  EXPECT_NEAR(res.centers[2].scale, 300.0, 15.0);
  EXPECT_NEAR(res.centers[2].ratio, 2.0, 0.1);
  for (std::size_t i = 0; i < res.assignment.size(); ++i) EXPECT_EQ(res.assignment[i], static_cast<int>(i % 3));
}

TEST(KMeans, WithinClusterSumOfSquaresNeverIncreases) {
  Rng rng = make_rng(9);
  std::vector<BoxRecord> boxes;
  for (int i = 0; i < 400; ++i) boxes.push_back({uniform(rng, 5.0, 500.0), uniform(rng, 5.0, 500.0), i});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto res = kmeans_cluster(boxes, 9, seed);
    ASSERT_FALSE(res.wcss_history.empty());
    for (std::size_t i = 1; i < res.wcss_history.size(); ++i) {
      EXPECT_LE(res.wcss_history[i], res.wcss_history[i - 1] * (1 + 1e-12));
    }
    EXPECT_LE(res.iterations, kKMeansMaxIterations);
  }
}

TEST(KMeans, AssignmentIsNearestCenter) {
  const auto boxes = three_clusters(8);
  const auto res = kmeans_cluster(boxes, 5, 1);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto sr = box_to_scale_ratio(boxes[i]);
    double best = 1e300;
    int arg = -1;
    for (std::size_t c = 0; c < res.centers.size(); ++c) {
      const double dx = std::log(sr.scale) - std::log(res.centers[c].scale);
      const double dy = std::log(sr.ratio) - std::log(res.centers[c].ratio);
      if (dx * dx + dy * dy < best) {
        best = dx * dx + dy * dy;
        arg = static_cast<int>(c);
      }
    }
    EXPECT_EQ(res.assignment[i], arg);
  }
}

TEST(KMeans, DeterministicAndSorted) {
  const auto boxes = three_clusters(4);
  const auto a = kmeans_anchors(boxes, 4, 7);
  EXPECT_EQ(a, kmeans_anchors(boxes, 4, 7));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
}

TEST(KMeans, TooFewDistinctBoxes) {
  std::vector<BoxRecord> boxes(10, BoxRecord{10.0, 10.0, 0});
  EXPECT_THROW(kmeans_cluster(boxes, 2, 0), InvalidInput);
  EXPECT_EQ(kmeans_cluster(boxes, 1, 0).centers.size(), 1u);
  EXPECT_THROW(kmeans_cluster(boxes, 0, 0), InvalidInput);
}
