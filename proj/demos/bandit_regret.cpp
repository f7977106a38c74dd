#include <cstdio>

#include "aabo.hpp"

int main() {
  std::vector<aabo::ArmSpec> arms;
  for (int k = 0; k < 10; ++k) arms.push_back({aabo::RewardDist::gaussian, 0.3 * k, 1.0});
  for (auto policy : {aabo::BanditPolicy::smc, aabo::BanditPolicy::halving, aabo::BanditPolicy::random}) {
    const auto curve = aabo::simulate_regret(arms, policy, 4000, 20, 3);
    const char* name = policy == aabo::BanditPolicy::smc ? "smc" : policy == aabo::BanditPolicy::halving ? "halving" : "random";
    std::printf("%-8s regret %9.2f  best-arm fraction %.3f\n", name, curve.regret_mean.back(),
                curve.best_arm_pull_frac.back());
  }
}
