// Builds a search space from random boxes and searches anchors that cover them.
#include <cstdio>

#include "aabo.hpp"

int main() {
  aabo::Rng rng = aabo::make_rng(7);
  std::vector<aabo::BoxRecord> boxes;
  for (int i = 0; i < 400; ++i) {
    const double scale = std::exp(aabo::uniform(rng, std::log(12.0), std::log(500.0)));
    const double ratio = std::exp(aabo::normal(rng, 0.0, 0.6));
    boxes.push_back({scale / std::sqrt(ratio), scale * std::sqrt(ratio), i / 4});
  }
  const aabo::GlobalLimits limits{1333.0, 1333.0};
  const auto space = aabo::build_space(boxes, 5, limits);
  const auto objective = aabo::make_coverage_objective(boxes, aabo::assigner_for(space));

  aabo::EngineConfig config;
  config.pool_size = 8;
  config.budgets_per_generation = 24;
  config.generations = 6;
  config.min_points = 8;
  config.seed = 1;
  const auto result = aabo::run_search(space, objective, config);

  for (const auto& g : result.generations) {
    std::printf("generation %zu  best %.4f  incumbent %.4f%s\n", g.generation, g.generation_best, g.incumbent,
                g.model_used ? "  (model)" : "");
  }
  const auto random = aabo::random_search_policy(space, objective, result.total_budget, 1);
  std::printf("random search with the same budget: %.4f\n", random.best_reward);
  std::fputs(aabo::dump_document(aabo::to_json(result.best_config)).c_str(), stdout);
}
