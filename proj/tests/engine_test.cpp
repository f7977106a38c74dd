#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "aabo/engine.hpp"

using namespace aabo;
namespace fs = std::filesystem;

namespace {

SearchSpace space_3l() {
  SearchSpace s{{1333.0, 1333.0}, {}};
  for (int l = 0; l < 3; ++l) s.levels.push_back({l, {1, 4 - l}, {2.0, 16.0}, {0.3, 3.0}, 4 << l});
  return s;
}

std::vector<BoxRecord> boxes_for_test() {
  Rng rng = make_rng(77);
  std::vector<BoxRecord> boxes;
  for (int i = 0; i < 120; ++i) {
    const double s = std::exp(uniform(rng, std::log(10.0), std::log(200.0)));
    const double r = std::exp(normal(rng, 0.0, 0.5));
    boxes.push_back({s / std::sqrt(r), s * std::sqrt(r), i});
  }
  return boxes;
}

Objective noisy_surrogate() {
  const auto s = space_3l();
  return make_surrogate_objective(coverage_surrogate(boxes_for_test(), assigner_for(s)));
}

EngineConfig small_config(std::uint64_t seed = 1) {
  EngineConfig c;
  c.pool_size = 4;
  c.budgets_per_generation = 12;
  c.generations = 3;
  c.min_points = 4;
  c.n_candidates = 16;
  c.seed = seed;
  return c;
}

fs::path temp_log(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "aabo_engine_test";
  fs::create_directories(dir);
  const auto p = dir / (name + ".jsonl");
  fs::remove(p);
  return p;
}

void expect_same(const SearchResult& a, const SearchResult& b) {
  ASSERT_EQ(a.trials.size(), b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].config, b.trials[i].config) << "trial " << i;
    EXPECT_EQ(a.trials[i].rewards, b.trials[i].rewards) << "trial " << i;
    EXPECT_EQ(a.trials[i].proposer, b.trials[i].proposer) << "trial " << i;
  }
  EXPECT_EQ(a.best_config, b.best_config);
  EXPECT_EQ(a.best_reward, b.best_reward);
  EXPECT_EQ(a.best_trial, b.best_trial);
  EXPECT_EQ(a.total_budget, b.total_budget);
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines, std::size_t n, const std::string& tail = "") {
  std::ofstream out(p, std::ios::trunc);
  for (std::size_t i = 0; i < n; ++i) out << lines[i] << "\n";
  out << tail;
}

}  // namespace

TEST(EngineConfig, Validation) {
  EngineConfig c = small_config();
  EXPECT_NO_THROW(validate(c));
  c.pool_size = 1;
  EXPECT_THROW(validate(c), InvalidInput);
  c = small_config();
  c.budgets_per_generation = 3;
  EXPECT_THROW(validate(c), InvalidInput);
  c = small_config();
  c.generations = 0;
  EXPECT_THROW(validate(c), InvalidInput);
  c = small_config();
  c.carryover_count = 4;
  EXPECT_THROW(validate(c), InvalidInput);
}

TEST(Engine, DegenerateSingleGeneration) {
  EngineConfig c;
  c.pool_size = 2;
  c.budgets_per_generation = 2;
  c.generations = 1;
  c.seed = 3;
  const auto obj = make_coverage_objective(boxes_for_test(), assigner_for(space_3l()));
  const auto r = run_search(space_3l(), obj, c);
  ASSERT_EQ(r.trials.size(), 2u);
  EXPECT_EQ(r.trials[0].rewards.size(), 1u);
  EXPECT_EQ(r.trials[1].rewards.size(), 1u);
  const std::size_t arg = r.trials[0].rewards[0] >= r.trials[1].rewards[0] ? 0 : 1;
  EXPECT_EQ(r.best_config, r.trials[arg].config);
  EXPECT_EQ(r.best_reward, r.trials[arg].rewards[0]);
}

TEST(Engine, BudgetConservedPerGeneration) {
  for (std::size_t N : {4, 7, 12, 30}) {
    auto c = small_config();
    c.budgets_per_generation = N;
    const auto r = run_search(space_3l(), noisy_surrogate(), c);
    std::map<std::size_t, std::size_t> per_gen;
    for (const auto& t : r.trials) per_gen[t.generation] += t.rewards.size();
    for (const auto& [g, n] : per_gen) EXPECT_EQ(n, N) << "generation " << g;
    EXPECT_EQ(r.total_budget, N * c.generations);
    EXPECT_EQ(r.pulls.size(), r.total_budget);
  }
}

TEST(Engine, BestRewardIsMaxOverAllRecordedRewards) {
  const auto r = run_search(space_3l(), noisy_surrogate(), small_config(5));
  double best = kFailedReward;
  for (const auto& t : r.trials) {
    for (double x : t.rewards) best = std::max(best, x);
  }
  EXPECT_EQ(r.best_reward, best);
}

TEST(Engine, IncumbentMonotoneWithCarryover) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = small_config(seed);
    c.generations = 5;
    const auto r = run_search(space_3l(), noisy_surrogate(), c);
    for (std::size_t g = 1; g < r.generations.size(); ++g) {
      EXPECT_GE(r.generations[g].incumbent, r.generations[g - 1].incumbent);
    }
    for (const auto& t : r.trials) {
      if (t.generation > 0 && t.proposer == Proposer::carryover) {
        ASSERT_TRUE(t.carried_from);
        EXPECT_EQ(t.config, r.trials[*t.carried_from].config);
      }
    }
  }
}

TEST(Engine, ModelUsedOnceEnoughObservations) {
  const auto r = run_search(space_3l(), noisy_surrogate(), small_config());
  EXPECT_FALSE(r.generations[0].model_used);
  EXPECT_TRUE(r.generations[1].model_used);
  for (const auto& t : r.trials) {
    if (t.generation == 0) EXPECT_EQ(t.proposer, Proposer::prior);
    if (t.generation > 0 && t.proposer != Proposer::carryover) EXPECT_EQ(t.proposer, Proposer::density_model);
  }
}

TEST(Engine, NoEarlyDiscardOnTraces) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = small_config(seed);
    c.pool_size = 6;
    c.budgets_per_generation = 40;
    const auto r = run_search(space_3l(), noisy_surrogate(), c);
    for (std::size_t g = 0; g < c.generations; ++g) {
      std::vector<EnginePull> pulls;
      for (const auto& p : r.pulls) {
        if (p.generation == g) pulls.push_back(p);
      }
      // Rebuild the state at each round start and check starving arms are served that round.
      SchedulerState st;
      st.arms.resize(c.pool_size);
      std::size_t i = 0;
      while (i < pulls.size()) {
        const std::size_t round = pulls[i].round;
        std::vector<std::size_t> served;
        std::size_t j = i;
        while (j < pulls.size() && pulls[j].round == round) served.push_back(pulls[j++].arm);
        const bool last_round = j == pulls.size();
        if (round >= 2 && !last_round) {
          const auto lead = elect_leader(st);
          for (std::size_t k = 0; k < st.arms.size(); ++k) {
            const auto& a = st.arms[k];
            if (k != lead && !a.failed() && static_cast<double>(a.pulls()) < st.c_n() &&
                a.pulls() < st.arms[lead].pulls()) {
              EXPECT_NE(std::find(served.begin(), served.end(), k), served.end())
                  << "seed " << seed << " generation " << g << " round " << round << " arm " << k;
            }
          }
        }
        for (; i < j; ++i) {
          st.arms[pulls[i].arm].append(pulls[i].reward);
          ++st.total_evals;
        }
      }
    }
  }
}

TEST(Engine, ObjectiveFailureMarksTrialAndExcludesIt) {
  const auto base = noisy_surrogate();
  Objective flaky;
  flaky.evaluate = [&](const AnchorConfiguration& c, std::size_t t, std::uint64_t seed) {
    if (config_fingerprint(c) % 3 == 0) throw ObjectiveFailure("simulated crash");
    return base.evaluate(c, t, seed);
  };
  auto c = small_config(2);
  c.generations = 4;
  const auto r = run_search(space_3l(), flaky, c);
  std::size_t failed = 0;
  for (const auto& t : r.trials) {
    if (config_fingerprint(t.config) % 3 == 0) {
      EXPECT_TRUE(t.failed);
      EXPECT_EQ(t.rewards.size(), 1u);  // never scheduled again
      EXPECT_EQ(t.rewards[0], kFailedReward);
      failed += t.rewards.size();
    } else {
      EXPECT_FALSE(t.failed);
    }
  }
  EXPECT_EQ(r.failed_evaluations, failed);
  EXPECT_TRUE(std::isfinite(r.best_reward));
}

TEST(Engine, RetriesRecoverTransientFailures) {
  const auto base = noisy_surrogate();
  std::map<std::pair<std::uint64_t, std::size_t>, int> attempts;
  std::mutex mu;
  Objective transient;
  transient.evaluate = [&](const AnchorConfiguration& c, std::size_t t, std::uint64_t seed) {
    {
      std::lock_guard lock(mu);
      if (attempts[{config_fingerprint(c), t}]++ == 0) throw ObjectiveFailure("first attempt fails");
    }
    return base.evaluate(c, t, seed);
  };
  auto c = small_config(4);
  c.max_retries = 1;
  const auto r = run_search(space_3l(), transient, c);
  EXPECT_EQ(r.failed_evaluations, 0u);
  c.max_retries = 0;
  attempts.clear();
  const auto all_failed = run_search(space_3l(), transient, c);
  EXPECT_EQ(all_failed.failed_evaluations, all_failed.total_budget);
  EXPECT_FALSE(std::isfinite(all_failed.best_reward));
}

TEST(Engine, WorkersDoNotChangeResults) {
  auto c = small_config(8);
  const auto a = run_search(space_3l(), noisy_surrogate(), c);
  c.workers = 4;
  const auto b = run_search(space_3l(), noisy_surrogate(), c);
  expect_same(a, b);
}

TEST(Engine, IdenticalSeedsGiveIdenticalLogs) {
  const auto p1 = temp_log("det1"), p2 = temp_log("det2");
  const auto a = run_search(space_3l(), noisy_surrogate(), small_config(6), {p1, false, "surrogate:test"});
  const auto b = run_search(space_3l(), noisy_surrogate(), small_config(6), {p2, false, "surrogate:test"});
  expect_same(a, b);
  EXPECT_EQ(log_determinism_hash(p1), log_determinism_hash(p2));
  const auto p3 = temp_log("det3");
  run_search(space_3l(), noisy_surrogate(), small_config(7), {p3, false, "surrogate:test"});
  EXPECT_NE(log_determinism_hash(p1), log_determinism_hash(p3));
}

TEST(Engine, LogHasOnePullRecordPerBudgetUnit) {
  const auto p = temp_log("records");
  const auto r = run_search(space_3l(), noisy_surrogate(), small_config(), {p, false, "surrogate:test"});
  const auto log = read_trial_log(p);
  EXPECT_EQ(log.header["schema"], kLogSchema);
  EXPECT_EQ(log.header["config_hash"], r.config_hash);
  std::size_t pulls = 0, trials = 0;
  for (const auto& rec : log.records) {
    if (rec["type"] == "pull") {
      ++pulls;
      for (const char* key : {"trial_id", "generation", "round", "config_ref", "budget_index", "reward", "seed",
                              "checksum", "ts"}) {
        EXPECT_TRUE(rec.contains(key)) << key;
      }
    }
    if (rec["type"] == "trial") ++trials;
  }
  EXPECT_EQ(pulls, r.total_budget);
  EXPECT_EQ(trials, r.trials.size());
}

TEST(Engine, ResumeCompletedLogReplaysEverything) {
  const auto p = temp_log("complete");
  const auto a = run_search(space_3l(), noisy_surrogate(), small_config(), {p, false, "surrogate:test"});
  const auto size = fs::file_size(p);
  Objective never;
  never.evaluate = [](const AnchorConfiguration&, std::size_t, std::uint64_t) -> double {
    ADD_FAILURE() << "objective called during full replay";
    return 0.0;
  };
  const auto b = resume(p, space_3l(), never, small_config(), "surrogate:test");
  expect_same(a, b);
  EXPECT_EQ(b.new_evaluations, 0u);
  EXPECT_EQ(fs::file_size(p), size);
}

TEST(Engine, ResumeEmptyOrMissingLogRunsFully) {
  const auto full = run_search(space_3l(), noisy_surrogate(), small_config());
  const auto p = temp_log("empty");
  const auto a = resume(p, space_3l(), noisy_surrogate(), small_config(), "surrogate:test");
  expect_same(full, a);
  EXPECT_EQ(a.new_evaluations, a.total_budget);
  std::ofstream(p, std::ios::trunc).close();
  const auto b = resume(p, space_3l(), noisy_surrogate(), small_config(), "surrogate:test");
  expect_same(full, b);
}

TEST(Engine, KillAndResumeMidGenerationReproducesRun) {
  const auto ref_log = temp_log("ref");
  const auto full = run_search(space_3l(), noisy_surrogate(), small_config(9), {ref_log, false, "surrogate:test"});
  const auto lines = read_lines(ref_log);
  for (std::size_t cut : {std::size_t{1}, lines.size() / 3, lines.size() / 2, lines.size() - 2}) {
    const auto p = temp_log("cut");
    // Keep a torn half-line at the end, as a crash mid-write would.
    write_lines(p, lines, cut, lines[cut].substr(0, lines[cut].size() / 2));
    const auto r = resume(p, space_3l(), noisy_surrogate(), small_config(9), "surrogate:test");
    expect_same(full, r);
    if (cut > 1) EXPECT_LT(r.new_evaluations, full.total_budget);
    EXPECT_EQ(log_determinism_hash(p), log_determinism_hash(ref_log)) << "cut at line " << cut;
  }
}

TEST(Engine, ResumeRejectsDifferentConfiguration) {
  const auto p = temp_log("mismatch");
  run_search(space_3l(), noisy_surrogate(), small_config(), {p, false, "surrogate:test"});
  auto other = small_config();
  other.generations = 4;
  EXPECT_THROW(resume(p, space_3l(), noisy_surrogate(), other, "surrogate:test"), ConfigMismatch);
  EXPECT_THROW(resume(p, space_3l(), noisy_surrogate(), small_config(), "surrogate:other"), ConfigMismatch);
}

TEST(Engine, TamperedRewardNamesTheLine) {
  const auto p = temp_log("tamper");
  run_search(space_3l(), noisy_surrogate(), small_config(), {p, false, "surrogate:test"});
  auto lines = read_lines(p);
  std::size_t target = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find("\"type\":\"pull\"") != std::string::npos) {
      auto rec = json::parse(lines[i]);
      rec["reward"] = rec["reward"].get<double>() + 0.25;
      lines[i] = rec.dump();
      target = i + 1;
      break;
    }
  }
  ASSERT_GT(target, 0u);
  write_lines(p, lines, lines.size());
  try {
    resume(p, space_3l(), noisy_surrogate(), small_config(), "surrogate:test");
    FAIL() << "expected CorruptLog";
  } catch (const CorruptLog& e) {
    EXPECT_EQ(e.line(), target);
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(target)), std::string::npos);
  }
}
