#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "aabo/anchor_space.hpp"
#include "aabo/density_model.hpp"
#include "aabo/encoding.hpp"
#include "aabo/objectives.hpp"
#include "aabo/search_types.hpp"
#include "aabo/serialization.hpp"
#include "aabo/smc.hpp"
#include "aabo/trial_log.hpp"

namespace aabo {

struct EngineConfig {
  std::size_t pool_size = 8;                // K arms per generation
  std::size_t budgets_per_generation = 32;  // N budget units per generation
  std::size_t generations = 4;              // G
  double gamma = 0.15;
  int n_candidates = 64;
  std::size_t min_points = 0;  // 0 selects 2 * dim + 2
  std::size_t carryover_count = 1;
  std::uint64_t seed = 0;
  int max_retries = 0;      // extra attempts after an ObjectiveFailure
  std::size_t workers = 1;  // concurrent evaluations within a round; does not affect results
};

inline void validate(const EngineConfig& c) {
  if (c.pool_size < 2) throw InvalidInput("pool size must be >= 2");
  if (c.budgets_per_generation < c.pool_size) throw InvalidInput("budgets per generation must be >= pool size");
  if (c.generations < 1) throw InvalidInput("generations must be >= 1");
  if (c.carryover_count >= c.pool_size) throw InvalidInput("carryover count must be < pool size");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw InvalidInput("gamma must lie in (0, 1)");
  if (c.n_candidates < 1) throw InvalidInput("n_candidates must be >= 1");
  if (c.max_retries < 0) throw InvalidInput("max_retries must be >= 0");
  if (c.workers < 1) throw InvalidInput("workers must be >= 1");
}

// Result-affecting settings only; the worker count is left out.
inline json to_json(const EngineConfig& c) {
  return {{"pool_size", c.pool_size},
          {"budgets_per_generation", c.budgets_per_generation},
          {"generations", c.generations},
          {"gamma", c.gamma},
          {"n_candidates", c.n_candidates},
          {"min_points", c.min_points},
          {"carryover_count", c.carryover_count},
          {"seed", c.seed},
          {"max_retries", c.max_retries}};
}

inline std::string engine_config_hash(const EngineConfig& c, const SearchSpace& space,
                                      const std::string& objective_spec) {
  return to_hex(fnv1a64(to_json(c).dump() + "\n" + to_json(space).dump() + "\n" + objective_spec));
}

struct RunOptions {
  std::filesystem::path log_path;  // empty: no trial log
  bool resume = false;             // replay an existing log at log_path before continuing
  std::string objective_spec;      // identifies the objective in the log header and hash
};

// One budget unit as scheduled by the engine.
struct EnginePull {
  std::size_t generation = 0;
  std::size_t round = 0;
  std::size_t trial_id = 0;
  std::size_t arm = 0;
  std::size_t budget_index = 0;
  double reward = 0.0;
  std::optional<std::size_t> leader;  // arm index of the round's leader
};

struct EngineResult : SearchResult {
  std::vector<EnginePull> pulls;
  std::string config_hash;
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first exception.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::optional<double> evaluate_with_retries(const Objective& objective, const AnchorConfiguration& c,
                                                   std::size_t t, std::uint64_t seed, int retries) {
  for (int attempt = 0; attempt <= retries; ++attempt) {
    try {
      const double r = objective.evaluate(c, t, seed);
      if (std::isfinite(r)) return r;
    } catch (const ObjectiveFailure&) {
    }
  }
  return std::nullopt;
}

struct Replay {
  std::map<std::pair<std::size_t, std::size_t>, std::optional<double>> rewards;  // (trial, budget) -> reward
  std::map<std::size_t, std::string> configs;                                   // trial -> config JSON
};

inline Replay load_replay(const LogContents& log) {
  Replay r;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& rec = log.records[i];
    const std::size_t line = i + 2;
    try {
      const std::string type = rec.at("type");
      if (type == "trial") {
        r.configs[rec.at("trial_id").get<std::size_t>()] = rec.at("config").dump();
      } else if (type == "pull") {
        const auto& rw = rec.at("reward");
        std::optional<double> v;
        if (!rw.is_null()) v = rw.get<double>();
        r.rewards[{rec.at("trial_id").get<std::size_t>(), rec.at("budget_index").get<std::size_t>()}] = v;
      }
    } catch (const json::exception& e) {
      throw CorruptLog(line, std::string("malformed record: ") + e.what());
    }
  }
  return r;
}

inline json trial_json(const TrialRecord& t, std::size_t slot) {
  json j = {{"type", "trial"},
            {"trial_id", t.trial_id},
            {"generation", t.generation},
            {"slot", slot},
            {"proposer", to_string(t.proposer)},
            {"seed", t.seed},
            {"config", to_json(t.config)}};
  if (t.carried_from) j["carried_from"] = *t.carried_from;
  if (t.true_value) j["mu"] = *t.true_value;
  return j;
}

}  // namespace detail

// Generational search: each generation proposes a pool of K configurations
// (best-so-far carryovers plus density-model or prior proposals), spends N
// budget units on the pool with sub-sample mean comparisons, then folds
// (encoding, -best reward) of every successful trial into the observations
// and refits the density model. Deterministic for a fixed seed and a
// deterministic objective. With a log path every trial and budget unit is
// appended to a JSONL trial log; with resume, logged rewards are replayed
// instead of re-evaluated.
inline EngineResult run_search(const SearchSpace& space, const Objective& objective,
                               const EngineConfig& config, const RunOptions& options = {}) {
  validate(space);
  validate(config);
  if (!objective.evaluate) throw InvalidInput("objective has no evaluate function");
  const auto dims = encoding_dims(space);
  const std::size_t K = config.pool_size;

  EngineResult result;
  result.config_hash = engine_config_hash(config, space, options.objective_spec);
  result.log_path = options.log_path.string();

  detail::Replay replay;
  std::optional<TrialLogWriter> writer;
  if (!options.log_path.empty()) {
    json header = {{"schema", kLogSchema},
                   {"config_hash", result.config_hash},
                   {"engine", to_json(config)},
                   {"objective", options.objective_spec},
                   {"space", to_json(space)}};
    LogContents existing;
    if (options.resume) existing = read_trial_log(options.log_path);
    if (existing.header.is_null()) {
      writer = TrialLogWriter::create(options.log_path, std::move(header));
    } else {
      if (existing.header.value("config_hash", "") != result.config_hash) {
        throw ConfigMismatch("trial log " + options.log_path.string() +
                             " was written by a different engine configuration, space, or objective");
      }
      replay = detail::load_replay(existing);
      writer = TrialLogWriter::append_to(options.log_path, existing.valid_bytes);
    }
  }

  std::vector<Observation> observations;
  std::optional<DensityModel> model;
  DensityOptions density_options;
  density_options.gamma = config.gamma;
  density_options.min_points = config.min_points;

  for (std::size_t g = 0; g < config.generations; ++g) {
    // -- pool construction
    std::vector<std::size_t> pool;
    std::vector<std::size_t> carry_sources;
    if (g > 0 && config.carryover_count > 0) {
      std::vector<std::size_t> ranked;
      for (const auto& t : result.trials) {
        if (!t.failed) ranked.push_back(t.trial_id);
      }
      std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        return result.trials[a].best_reward() > result.trials[b].best_reward();
      });
      std::set<std::uint64_t> seen;
      for (std::size_t id : ranked) {
        if (carry_sources.size() >= config.carryover_count) break;
        if (seen.insert(config_fingerprint(result.trials[id].config)).second) carry_sources.push_back(id);
      }
    }
    for (std::size_t slot = 0; slot < K; ++slot) {
      TrialRecord t;
      t.trial_id = result.trials.size();
      t.generation = g;
      t.seed = derive_seed(config.seed, {g, slot, 2});
      if (slot < carry_sources.size()) {
        const auto& src = result.trials[carry_sources[slot]];
        t.config = src.config;
        t.proposer = Proposer::carryover;
        t.carried_from = src.trial_id;
      } else {
        t.config = propose(model ? &*model : nullptr, space, config.n_candidates,
                           derive_seed(config.seed, {g, slot, 1}));
        t.proposer = model ? Proposer::density_model : Proposer::prior;
      }
      if (objective.true_value) t.true_value = objective.true_value(t.config);
      const json record = detail::trial_json(t, slot);
      if (auto it = replay.configs.find(t.trial_id); it != replay.configs.end()) {
        if (it->second != record["config"].dump()) {
          throw ConfigMismatch("trial log diverges from this run at trial " + std::to_string(t.trial_id));
        }
      } else if (writer) {
        writer->write(record);
      }
      pool.push_back(t.trial_id);
      result.trials.push_back(std::move(t));
    }

    // -- budget allocation
    SmcScheduler sched(K, config.budgets_per_generation, derive_seed(config.seed, {g, 3}));
    while (!sched.done()) {
      const auto plan = sched.next_round();
      std::vector<std::optional<double>> outcome(plan.size());
      std::vector<std::size_t> fresh;
      for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& t = result.trials[pool[plan[i]]];
        auto it = replay.rewards.find({t.trial_id, t.rewards.size() + 1});
        if (it != replay.rewards.end()) {
          outcome[i] = it->second;
        } else {
          fresh.push_back(i);
        }
      }
      detail::parallel_for(fresh.size(), config.workers, [&](std::size_t f) {
        const std::size_t i = fresh[f];
        const auto& t = result.trials[pool[plan[i]]];
        outcome[i] = detail::evaluate_with_retries(objective, t.config, t.rewards.size() + 1, t.seed,
                                                   config.max_retries);
      });
      std::size_t next_fresh = 0;
      for (std::size_t i = 0; i < plan.size(); ++i) {
        auto& t = result.trials[pool[plan[i]]];
        const double reward = outcome[i].value_or(kFailedReward);
        if (!outcome[i]) {
          t.failed = true;
          ++result.failed_evaluations;
        }
        t.rewards.push_back(reward);
        sched.report(plan[i], reward);
        result.pulls.push_back({g, sched.round(), t.trial_id, plan[i], t.rewards.size(), reward, sched.leader()});
        ++result.total_budget;
        const bool is_fresh = next_fresh < fresh.size() && fresh[next_fresh] == i;
        if (is_fresh) {
          ++next_fresh;
          ++result.new_evaluations;
          if (writer) {
            json pull = {{"type", "pull"},
                         {"trial_id", t.trial_id},
                         {"generation", g},
                         {"round", sched.round()},
                         {"config_ref", t.trial_id},
                         {"budget_index", t.rewards.size()},
                         {"reward", outcome[i] ? json(reward) : json(nullptr)},
                         {"seed", t.seed},
                         {"arm", plan[i]},
                         {"n_k", t.rewards.size()},
                         {"leader", sched.leader() ? json(*sched.leader()) : json(nullptr)}};
            writer->write(std::move(pull));
          }
        }
      }
      if (writer) writer->flush();
    }
    if (writer) writer->sync();

    // -- model refit
    for (std::size_t id : pool) {
      const auto& t = result.trials[id];
      if (!t.failed) observations.push_back({encode(t.config, space), -t.best_reward()});
    }
    GenerationSummary summary;
    summary.generation = g;
    summary.pulls = config.budgets_per_generation;
    summary.rounds = sched.round();
    summary.model_used = model.has_value();
    for (std::size_t id : pool) summary.generation_best = std::max(summary.generation_best, result.trials[id].best_reward());
    select_best(result);
    summary.incumbent = result.best_reward;
    summary.incumbent_trial = result.best_trial.value_or(0);
    result.generations.push_back(summary);
    model = DensityModel::fit(observations, dims, density_options);
  }
  return result;
}

// Continues (or, for a missing or empty log, starts) the run recorded at
// log_path. Logged evaluations are replayed, never re-run.
inline EngineResult resume(const std::filesystem::path& log_path, const SearchSpace& space,
                           const Objective& objective, const EngineConfig& config,
                           const std::string& objective_spec) {
  return run_search(space, objective, config, {log_path, true, objective_spec});
}

}  // namespace aabo
