#include <chrono>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "aabo/external_objective.hpp"
#include "aabo/objectives.hpp"

using namespace aabo;

namespace {

const std::string kFixtures = AABO_FIXTURES;

// Independent coverage: level by direct doubling, IoU written out in full.
double brute_coverage(const AnchorConfiguration& c, const std::vector<BoxRecord>& boxes, double base_scale,
                      const std::vector<int>& strides) {
  double total = 0.0;
  for (const auto& b : boxes) {
    const double s = std::sqrt(b.width * b.height);
    int level = 0;
    while (level + 1 < static_cast<int>(strides.size()) && s >= base_scale * std::pow(2.0, level + 1)) ++level;
    double best = 0.0;
    for (const auto& a : c.levels[level]) {
      const double aw = a.scale * strides[level] / std::sqrt(a.ratio);
      const double ah = a.scale * strides[level] * std::sqrt(a.ratio);
      const double inter = std::min(aw, b.width) * std::min(ah, b.height);
      best = std::max(best, inter / (aw * ah + b.width * b.height - inter));
    }
    total += best;
  }
  return total / static_cast<double>(boxes.size());
}

SearchSpace three_level_space() {
  SearchSpace s{{1333.0, 1333.0}, {}};
  for (int l = 0; l < 3; ++l) s.levels.push_back({l, {1, 5 - l}, {2.0, 16.0}, {0.3, 3.0}, 4 << l});
  return s;
}

}  // namespace

TEST(CenteredIou, Examples) {
  EXPECT_DOUBLE_EQ(centered_iou(2.0, 2.0, 1.0, 1.0), 0.25);
  EXPECT_DOUBLE_EQ(centered_iou(3.0, 5.0, 3.0, 5.0), 1.0);
  EXPECT_DOUBLE_EQ(centered_iou(4.0, 1.0, 1.0, 4.0), 1.0 / 7.0);
}

TEST(Coverage, IdenticalAnchorGivesOne) {
  const std::vector<BoxRecord> boxes{{24.0, 12.0, 0}};
  const LevelAssigner assigner{32.0, {4}};
  const ScaleRatio basic{std::sqrt(24.0 * 12.0) / 4.0, 0.5};
  EXPECT_NEAR(coverage_reward({{{basic}}}, boxes, assigner), 1.0, 1e-12);
}

TEST(Coverage, MatchesBruteForceOnRandomInstances) {
  const auto space = three_level_space();
  const auto assigner = assigner_for(space);
  Rng rng = make_rng(31);
  for (int inst = 0; inst < 1000; ++inst) {
    std::vector<BoxRecord> boxes;
    const auto n = uniform_int(rng, 1, 12);
    for (int i = 0; i < n; ++i) boxes.push_back({uniform(rng, 3.0, 400.0), uniform(rng, 3.0, 400.0), i});
    const auto c = sample_configuration(space, static_cast<std::uint64_t>(inst));
    const double got = coverage_reward(c, boxes, assigner);
    EXPECT_NEAR(got, brute_coverage(c, boxes, 32.0, assigner.strides), 1e-12);
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0);
  }
}

TEST(Coverage, InvariantUnderUniformRescaling) {
  const auto space = three_level_space();
  Rng rng = make_rng(2);
  std::vector<BoxRecord> boxes;
  for (int i = 0; i < 30; ++i) boxes.push_back({uniform(rng, 5.0, 60.0), uniform(rng, 5.0, 60.0), i});
  const auto c = sample_configuration(space, 4);
  // Doubling box sizes and base scale moves nothing between levels; doubling anchor scales keeps IoU.
  auto scaled_boxes = boxes;
  for (auto& b : scaled_boxes) {
    b.width *= 2.0;
    b.height *= 2.0;
  }
  auto scaled = c;
  for (auto& lv : scaled.levels) {
    for (auto& a : lv) a.scale *= 2.0;
  }
  EXPECT_NEAR(coverage_reward(c, boxes, assigner_for(space, 32.0)),
              coverage_reward(scaled, scaled_boxes, assigner_for(space, 64.0)), 1e-12);
}

TEST(Coverage, RejectsEmptyBoxesAndLevelMismatch) {
  EXPECT_THROW(coverage_reward({{{{1.0, 1.0}}}}, {}, LevelAssigner{32.0, {4}}), InvalidInput);
  EXPECT_THROW(coverage_reward({{{{1.0, 1.0}}}}, {{4.0, 4.0, 0}}, LevelAssigner{32.0, {4, 8}}), InvalidInput);
}

TEST(Surrogate, ClosedFormAndSaturation) {
  SurrogateParams p;
  p.asymptote = [](const AnchorConfiguration&) { return 0.8; };
  p.tau = [](const AnchorConfiguration&) { return 3.0; };
  p.sigma = 0.0;
  const AnchorConfiguration c{{{{1.0, 1.0}}}};
  EXPECT_NEAR(surrogate_reward(c, 3, p, 0), 0.8 * (1.0 - std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(surrogate_reward(c, 60, p, 0), 0.8, 1e-6);
  EXPECT_THROW(surrogate_reward(c, 0, p, 0), InvalidInput);
}

TEST(Surrogate, NoiseDeterministicPerConfigBudgetSeed) {
  SurrogateParams p;
  p.asymptote = [](const AnchorConfiguration&) { return 0.5; };
  p.tau = [](const AnchorConfiguration&) { return 1.0; };
  p.sigma = 0.1;
  const AnchorConfiguration c{{{{1.0, 1.0}}}};
  EXPECT_EQ(surrogate_reward(c, 4, p, 7), surrogate_reward(c, 4, p, 7));
  EXPECT_NE(surrogate_reward(c, 4, p, 7), surrogate_reward(c, 4, p, 8));
  EXPECT_NE(surrogate_reward(c, 4, p, 7), surrogate_reward(c, 5, p, 7));
  const auto obj = make_surrogate_objective(p);
  EXPECT_DOUBLE_EQ(obj.true_value(c), 0.5);
}

TEST(Surrogate, ValidatesParameters) {
  SurrogateParams p;
  p.asymptote = [](const AnchorConfiguration&) { return 1.5; };
  p.tau = [](const AnchorConfiguration&) { return 1.0; };
  EXPECT_THROW(surrogate_mean({}, 1, p), InvalidInput);
  p.asymptote = [](const AnchorConfiguration&) { return 0.5; };
  p.tau = [](const AnchorConfiguration&) { return 0.0; };
  EXPECT_THROW(surrogate_mean({}, 1, p), InvalidInput);
}

TEST(CoverageSurrogate, SmallObjectConfigsConvergeSlower) {
  const std::vector<BoxRecord> boxes{{6.0, 6.0, 0}, {20.0, 20.0, 0}, {40.0, 40.0, 0}, {50.0, 50.0, 0}};
  const LevelAssigner assigner{32.0, {4, 8}};
  const auto p = coverage_surrogate(boxes, assigner);
  const AnchorConfiguration small{{{{1.5, 1.0}}, {{5.0, 1.0}}}};  // covers the 6 px box
  const AnchorConfiguration large{{{{5.0, 1.0}}, {{5.0, 1.0}}}};  // 20 px and up
  EXPECT_GT(p.tau(small), p.tau(large));
  EXPECT_NEAR(p.asymptote(small), coverage_reward(small, boxes, assigner), 1e-15);
}

TEST(ExternalProtocol, RequestIsOneJsonLine) {
  const AnchorConfiguration c{{{{2.5, 0.5}, {4.0, 1.0}}}};
  const auto req = external_request(c, 3, 42);
  EXPECT_EQ(req, read_text_file(kFixtures + "/external_request.golden"));
  ASSERT_FALSE(req.empty());
  EXPECT_EQ(req.back(), '\n');
  EXPECT_EQ(req.find('\n'), req.size() - 1);
  EXPECT_NO_THROW(json::parse(req));
}

TEST(ExternalProtocol, ParsesReward) {
  EXPECT_DOUBLE_EQ(parse_external_reward("0.5\n"), 0.5);
  EXPECT_DOUBLE_EQ(parse_external_reward("  -1e-3 "), -1e-3);
  EXPECT_THROW(parse_external_reward("abc"), ObjectiveFailure);
  EXPECT_THROW(parse_external_reward("0.5 0.6"), ObjectiveFailure);
  EXPECT_THROW(parse_external_reward(""), ObjectiveFailure);
  EXPECT_THROW(parse_external_reward("nan"), ObjectiveFailure);
}

TEST(ExternalCommand, EchoStub) {
  const auto obj = make_external_objective("cat > /dev/null; echo 0.5");
  EXPECT_DOUBLE_EQ(obj.evaluate({{{{1.0, 1.0}}}}, 1, 0), 0.5);
}

TEST(ExternalCommand, SeesTheRequest) {
  // Reward = budget index read back from the request.
  const auto obj = make_external_objective(
      "python3 -c 'import json,sys; print(json.loads(sys.stdin.readline())[\"budget_index\"] / 10)'");
  EXPECT_DOUBLE_EQ(obj.evaluate({{{{1.0, 1.0}}}}, 7, 0), 0.7);
}

TEST(ExternalCommand, Failures) {
  const AnchorConfiguration c{{{{1.0, 1.0}}}};
  EXPECT_THROW(make_external_objective("echo abc").evaluate(c, 1, 0), ObjectiveFailure);
  EXPECT_THROW(make_external_objective("echo 0.5; exit 3").evaluate(c, 1, 0), ObjectiveFailure);
  ExternalCommandOptions quick;
  quick.timeout = std::chrono::milliseconds(200);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(make_external_objective("sleep 5; echo 1", quick).evaluate(c, 1, 0), ObjectiveFailure);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(3));
}

TEST(ExternalCommand, IgnoresStdinItDoesNotRead) {
  EXPECT_DOUBLE_EQ(make_external_objective("echo 0.25").evaluate({{{{1.0, 1.0}}}}, 1, 0), 0.25);
}
