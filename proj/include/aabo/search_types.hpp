#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "aabo/anchor_space.hpp"
#include "aabo/error.hpp"

namespace aabo {

enum class Proposer { prior, density_model, carryover };

inline const char* to_string(Proposer p) {
  switch (p) {
    case Proposer::prior: return "prior";
    case Proposer::density_model: return "density-model";
    case Proposer::carryover: return "carryover";
  }
  return "prior";
}

inline Proposer proposer_from_string(const std::string& s) {
  if (s == "prior") return Proposer::prior;
  if (s == "density-model") return Proposer::density_model;
  if (s == "carryover") return Proposer::carryover;
  throw InvalidInput("unknown proposer \"" + s + "\"");
}

inline constexpr double kFailedReward = -std::numeric_limits<double>::infinity();

struct TrialRecord {
  std::size_t trial_id = 0;
  std::size_t generation = 0;
  AnchorConfiguration config;
  Proposer proposer = Proposer::prior;
  std::vector<double> rewards;  // one per budget unit; kFailedReward marks a failure
  std::uint64_t seed = 0;
  bool failed = false;
  std::optional<double> true_value;  // known mean, simulation objectives only
  std::optional<std::size_t> carried_from;

  double best_reward() const {
    double b = kFailedReward;
    for (double r : rewards) b = std::max(b, r);
    return b;
  }
};

struct GenerationSummary {
  std::size_t generation = 0;
  std::size_t pulls = 0;
  std::size_t rounds = 0;
  bool model_used = false;
  double generation_best = kFailedReward;
  double incumbent = kFailedReward;
  std::size_t incumbent_trial = 0;
};

struct SearchResult {
  AnchorConfiguration best_config;
  double best_reward = kFailedReward;  // max over all recorded rewards
  std::optional<std::size_t> best_trial;
  std::vector<TrialRecord> trials;
  std::vector<GenerationSummary> generations;
  std::size_t total_budget = 0;
  std::size_t new_evaluations = 0;  // evaluations not replayed from a log
  std::size_t failed_evaluations = 0;
  std::string log_path;
};

// Recomputes best_config / best_reward / best_trial from the trials (first trial wins ties).
inline void select_best(SearchResult& result) {
  result.best_reward = kFailedReward;
  result.best_trial.reset();
  for (const auto& t : result.trials) {
    const double b = t.best_reward();
    if (b > result.best_reward) {
      result.best_reward = b;
      result.best_trial = t.trial_id;
      result.best_config = t.config;
    }
  }
}

}  // namespace aabo
