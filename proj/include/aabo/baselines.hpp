#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "aabo/anchor_space.hpp"
#include "aabo/objectives.hpp"
#include "aabo/random.hpp"
#include "aabo/search_types.hpp"

namespace aabo {

namespace detail {

inline double evaluate_or_fail(const Objective& objective, TrialRecord& trial, std::size_t t,
                               SearchResult& result) {
  double r;
  try {
    r = objective.evaluate(trial.config, t, trial.seed);
  } catch (const ObjectiveFailure&) {
    r = kFailedReward;
    trial.failed = true;
    ++result.failed_evaluations;
  }
  trial.rewards.push_back(r);
  ++result.total_budget;
  ++result.new_evaluations;
  return r;
}

inline TrialRecord make_trial(std::size_t id, AnchorConfiguration config, std::uint64_t seed,
                              const Objective& objective) {
  TrialRecord t;
  t.trial_id = id;
  t.config = std::move(config);
  t.seed = seed;
  if (objective.true_value) t.true_value = objective.true_value(t.config);
  return t;
}

}  // namespace detail

// Independent prior samples, one budget unit each.
inline SearchResult random_search_policy(const SearchSpace& space, const Objective& objective,
                                         std::size_t total_budget, std::uint64_t seed) {
  if (total_budget < 1) throw InvalidInput("total budget must be >= 1");
  SearchResult result;
  for (std::size_t i = 0; i < total_budget; ++i) {
    auto trial = detail::make_trial(i, sample_configuration(space, derive_seed(seed, {i, 1})),
                                    derive_seed(seed, {i, 2}), objective);
    detail::evaluate_or_fail(objective, trial, 1, result);
    result.trials.push_back(std::move(trial));
  }
  GenerationSummary g;
  g.pulls = total_budget;
  g.rounds = 1;
  result.generations.push_back(g);
  select_best(result);
  result.generations.back().generation_best = result.best_reward;
  result.generations.back().incumbent = result.best_reward;
  result.generations.back().incumbent_trial = result.best_trial.value_or(0);
  return result;
}

// Budget consumed by one bracket: sum over rungs of survivors * (r_i - r_{i-1}),
// with r_i = min_budget * eta^i and survivors floor(n / eta^i) (at least 1).
inline std::size_t halving_cost(std::size_t n, int eta, std::size_t min_budget, std::size_t rungs) {
  std::size_t cost = 0, survivors = n, prev = 0, budget = min_budget;
  for (std::size_t i = 0; i < rungs; ++i) {
    cost += survivors * (budget - prev);
    prev = budget;
    budget *= static_cast<std::size_t>(eta);
    survivors = std::max<std::size_t>(1, survivors / static_cast<std::size_t>(eta));
  }
  return cost;
}

struct HalvingTrace {
  std::vector<std::size_t> survivors_per_rung;
  std::vector<std::size_t> budget_per_rung;  // per-configuration budget reached at each rung
};

// One SuccessiveHalving bracket over the given starters. At rung i every
// survivor is trained up to min_budget * eta^i budget units (continuing
// earlier units) and ranked by its latest reward; the top floor(n / eta)
// advance. `winner_budget` extra units are then spent on the final survivor.
inline SearchResult successive_halving(const std::vector<AnchorConfiguration>& starters,
                                       const Objective& objective, int eta, std::size_t min_budget,
                                       std::size_t rungs, std::uint64_t seed,
                                       std::size_t winner_budget = 0, HalvingTrace* trace = nullptr,
                                       std::size_t first_trial_id = 0) {
  if (eta < 2) throw InvalidInput("eta must be >= 2");
  if (starters.empty()) throw InvalidInput("successive halving needs starters");
  if (min_budget < 1 || rungs < 1) throw InvalidInput("min budget and rung count must be >= 1");
  SearchResult result;
  for (std::size_t i = 0; i < starters.size(); ++i) {
    result.trials.push_back(
        detail::make_trial(first_trial_id + i, starters[i], derive_seed(seed, {i, 2}), objective));
  }
  std::vector<std::size_t> alive(starters.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
  std::size_t budget = min_budget;
  for (std::size_t rung = 0; rung < rungs; ++rung) {
    for (std::size_t idx : alive) {
      auto& t = result.trials[idx];
      while (t.rewards.size() < budget) detail::evaluate_or_fail(objective, t, t.rewards.size() + 1, result);
    }
    if (trace) {
      trace->survivors_per_rung.push_back(alive.size());
      trace->budget_per_rung.push_back(budget);
    }
    if (rung + 1 == rungs) break;
    std::stable_sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) {
      return result.trials[a].rewards.back() > result.trials[b].rewards.back();
    });
    alive.resize(std::max<std::size_t>(1, alive.size() / static_cast<std::size_t>(eta)));
    std::sort(alive.begin(), alive.end());
    budget *= static_cast<std::size_t>(eta);
  }
  if (winner_budget > 0) {
    std::size_t best = alive.front();
    for (std::size_t idx : alive) {
      if (result.trials[idx].rewards.back() > result.trials[best].rewards.back()) best = idx;
    }
    auto& t = result.trials[best];
    for (std::size_t i = 0; i < winner_budget; ++i) {
      detail::evaluate_or_fail(objective, t, t.rewards.size() + 1, result);
    }
  }
  GenerationSummary g;
  g.pulls = result.total_budget;
  g.rounds = rungs;
  result.generations.push_back(g);
  select_best(result);
  result.generations.back().generation_best = result.best_reward;
  result.generations.back().incumbent = result.best_reward;
  result.generations.back().incumbent_trial = result.best_trial.value_or(0);
  return result;
}

// A single bracket over the starters that consumes exactly total_budget: as
// many rungs as halving allows and the budget affords, the largest
// affordable minimum budget, and the remainder spent on the final survivor.
inline SearchResult successive_halving_for_budget(const std::vector<AnchorConfiguration>& starters,
                                                  const Objective& objective, int eta,
                                                  std::size_t total_budget, std::uint64_t seed) {
  if (eta < 2) throw InvalidInput("eta must be >= 2");
  std::size_t rungs = 1;
  for (std::size_t n = starters.size(); n >= static_cast<std::size_t>(eta); n /= static_cast<std::size_t>(eta)) ++rungs;
  while (rungs > 1 && halving_cost(starters.size(), eta, 1, rungs) > total_budget) --rungs;
  std::size_t r0 = 1;
  if (halving_cost(starters.size(), eta, 1, rungs) > total_budget) {
    throw InvalidInput("total budget too small for one halving bracket");
  }
  while (halving_cost(starters.size(), eta, r0 + 1, rungs) <= total_budget) ++r0;
  const std::size_t spent = halving_cost(starters.size(), eta, r0, rungs);
  return successive_halving(starters, objective, eta, r0, rungs, seed, total_budget - spent);
}

struct HalvingOptions {
  int eta = 3;
  std::size_t brackets = 3;     // Hyperband's s_max + 1
  std::size_t max_budget = 27;  // R: per-configuration budget of the last rung
};

// Hyperband-style outer loop: bracket s (s_max down to 0) starts
// ceil((s_max + 1) / (s + 1) * eta^s) prior samples at R / eta^s budget units
// and runs s + 1 rungs of halving.
inline SearchResult successive_halving_policy(const SearchSpace& space, const Objective& objective,
                                              const HalvingOptions& options, std::uint64_t seed) {
  if (options.eta < 2) throw InvalidInput("eta must be >= 2");
  if (options.brackets < 1) throw InvalidInput("brackets must be >= 1");
  const std::size_t s_max = options.brackets - 1;
  const double eta = options.eta;
  SearchResult all;
  for (std::size_t b = 0; b <= s_max; ++b) {
    const std::size_t s = s_max - b;
    const auto n = static_cast<std::size_t>(
        std::ceil(static_cast<double>(s_max + 1) / static_cast<double>(s + 1) * std::pow(eta, s)));
    const std::size_t r = std::max<std::size_t>(
        1, static_cast<std::size_t>(static_cast<double>(options.max_budget) / std::pow(eta, s)));
    std::vector<AnchorConfiguration> starters;
    for (std::size_t i = 0; i < n; ++i) starters.push_back(sample_configuration(space, derive_seed(seed, {b, i, 1})));
    SearchResult br = successive_halving(starters, objective, options.eta, r, s + 1,
                                         derive_seed(seed, {b, 3}), 0, nullptr, all.trials.size());
    for (auto& t : br.trials) {
      t.generation = b;
      all.trials.push_back(std::move(t));
    }
    GenerationSummary g = br.generations.front();
    g.generation = b;
    all.generations.push_back(g);
    all.total_budget += br.total_budget;
    all.new_evaluations += br.new_evaluations;
    all.failed_evaluations += br.failed_evaluations;
  }
  select_best(all);
  double inc = kFailedReward;
  for (auto& g : all.generations) {
    inc = std::max(inc, g.generation_best);
    g.incumbent = inc;
  }
  return all;
}

}  // namespace aabo
