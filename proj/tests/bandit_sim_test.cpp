#include <filesystem>

#include <gtest/gtest.h>

#include "aabo/bandit_sim.hpp"

using namespace aabo;

namespace {

const std::string kFixtures = AABO_FIXTURES;

}  // namespace

TEST(ArmSpec, InlineGaussianAndBernoulli) {
  const auto g = parse_arm_spec("gaussian:0,0.3, 0.6");
  ASSERT_EQ(g.size(), 3u);
  EXPECT_DOUBLE_EQ(g[2].mu, 0.6);
  EXPECT_DOUBLE_EQ(g[0].sigma, 1.0);
  const auto b = parse_arm_spec("bernoulli:0.2,0.9");
  EXPECT_EQ(b[1].dist, RewardDist::bernoulli);
}

TEST(ArmSpec, JsonFile) {
  const auto arms = parse_arm_spec(kFixtures + "/ten_arms.json");
  ASSERT_EQ(arms.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(arms[k].mu, 0.3 * k, 1e-12);
}

TEST(ArmSpec, MalformedSpecs) {
  EXPECT_THROW(parse_arm_spec("gaussian:"), InvalidInput);
  EXPECT_THROW(parse_arm_spec("gaussian:0.1,,0.2"), InvalidInput);
  EXPECT_THROW(parse_arm_spec("gaussian:0.1,abc"), InvalidInput);
  EXPECT_THROW(parse_arm_spec("bernoulli:1.5"), InvalidInput);
  EXPECT_THROW(parse_arm_spec("/no/such/file.json"), InvalidInput);
}

TEST(BanditSim, SingleArmHasZeroRegret) {
  const auto arms = parse_arm_spec("gaussian:0.4");
  for (auto policy : {BanditPolicy::smc, BanditPolicy::random, BanditPolicy::halving}) {
    const auto c = simulate_regret(arms, policy, 50, 3, 0);
    for (double r : c.regret_mean) EXPECT_EQ(r, 0.0);
    for (double f : c.best_arm_pull_frac) EXPECT_EQ(f, 1.0);
  }
}

TEST(BanditSim, RegretMatchesTraceOracle) {
  const auto arms = parse_arm_spec("gaussian:0,0.5,1");
  const std::vector<double> mus{0.0, 0.5, 1.0};
  const auto c = simulate_regret(arms, BanditPolicy::smc, 200, 1, 11, true);
  const auto trace = simulate_trace(arms, BanditPolicy::smc, 200, derive_seed(11, {0}));
  EXPECT_NEAR(c.regret_mean.back(), regret(trace, mus), 1e-9);
  EXPECT_EQ(c.regret_stderr.back(), 0.0);
  ASSERT_EQ(c.per_seed.size(), 1u);
  EXPECT_NEAR(c.per_seed[0].back(), c.regret_mean.back(), 1e-12);
}

TEST(BanditSim, HalvingAndRandomUseFullHorizon) {
  const auto arms = parse_arm_spec("bernoulli:0.1,0.2,0.3,0.4,0.5");
  for (std::size_t horizon : {5, 37, 200}) {
    EXPECT_EQ(simulate_trace(arms, BanditPolicy::halving, horizon, 1).size(), horizon);
    EXPECT_EQ(simulate_trace(arms, BanditPolicy::random, horizon, 1).size(), horizon);
  }
}

TEST(BanditSim, SmcConcentratesOnBestArm) {
  const auto arms = parse_arm_spec(kFixtures + "/ten_arms.json");
  const auto smc = simulate_regret(arms, BanditPolicy::smc, 2000, 5, 1);
  const auto rnd = simulate_regret(arms, BanditPolicy::random, 2000, 5, 1);
  EXPECT_LT(smc.regret_mean.back(), rnd.regret_mean.back());
  EXPECT_GT(smc.best_arm_pull_frac.back(), 0.5);
}

TEST(BanditSim, CsvHeaderSchema) {
  const auto c = simulate_regret(parse_arm_spec("gaussian:0,1"), BanditPolicy::random, 3, 2, 0);
  const auto csv = regret_csv(c);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,regret_mean,regret_stderr,best_arm_pull_frac");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(BanditSim, DeterministicPerSeed) {
  const auto arms = parse_arm_spec("gaussian:0,0.3,0.6");
  EXPECT_EQ(simulate_trace(arms, BanditPolicy::smc, 100, 4), simulate_trace(arms, BanditPolicy::smc, 100, 4));
  EXPECT_NE(simulate_trace(arms, BanditPolicy::random, 100, 4), simulate_trace(arms, BanditPolicy::random, 100, 5));
}
