#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aabo/error.hpp"
#include "aabo/random.hpp"

namespace aabo {

// Reward history of one arm (configuration). Rewards are larger-is-better;
// -infinity marks a failed evaluation.
class Arm {
 public:
  Arm() = default;
  explicit Arm(std::vector<double> rewards) {
    for (double r : rewards) append(r);
  }

  void append(double reward) {
    rewards_.push_back(reward);
    const bool failed = std::isinf(reward) && reward < 0.0;
    prefix_.push_back(prefix_.back() + (failed ? 0.0 : reward));
    failures_.push_back(failures_.back() + (failed ? 1 : 0));
  }

  std::size_t pulls() const { return rewards_.size(); }
  const std::vector<double>& rewards() const { return rewards_; }
  bool failed() const { return failures_.back() > 0; }

  // Mean of rewards j..j+len-1, 1-indexed.
  double window(std::size_t j, std::size_t len) const {
    if (j < 1 || len < 1 || j + len - 1 > rewards_.size()) {
      throw InvalidInput("reward window [" + std::to_string(j) + ", " +
                         std::to_string(j + len - 1) + "] outside 1.." +
                         std::to_string(rewards_.size()));
    }
    if (failures_[j + len - 1] != failures_[j - 1]) return -std::numeric_limits<double>::infinity();
    return (prefix_[j + len - 1] - prefix_[j - 1]) / static_cast<double>(len);
  }

  double mean() const { return rewards_.empty() ? 0.0 : window(1, rewards_.size()); }

  // Smallest mean over all windows of the given length.
  double min_window(std::size_t len) const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j + len - 1 <= rewards_.size(); ++j) m = std::min(m, window(j, len));
    return m;
  }

 private:
  std::vector<double> rewards_;
  std::vector<double> prefix_{0.0};
  std::vector<std::size_t> failures_{0};
};

// Arithmetic mean of rewards[j..j+len-1], 1-indexed.
inline double window_mean(std::span<const double> rewards, std::size_t j, std::size_t len) {
  if (j < 1 || len < 1 || j + len - 1 > rewards.size()) {
    throw InvalidInput("reward window out of range");
  }
  double s = 0.0;
  for (std::size_t v = j - 1; v < j + len - 1; ++v) s += rewards[v];
  return s / static_cast<double>(len);
}

// c_n = sqrt(log n) for n >= 2, else 0.
inline double comparison_threshold(std::size_t n) {
  return n < 2 ? 0.0 : std::sqrt(std::log(static_cast<double>(n)));
}

namespace detail {

inline bool better_given(std::size_t n_k, double mean_k, std::size_t n_leader,
                         const std::function<double()>& leader_min_window, double c_n) {
  if (!(n_k < n_leader)) return false;
  if (static_cast<double>(n_k) < c_n) return true;
  if (n_k == 0) return false;
  return mean_k >= leader_min_window();
}

}  // namespace detail

// The challenger earns a budget if it has fewer pulls than the leader and
// either fewer than c_n pulls, or a full-history mean at least as large as
// some same-length window of the leader's rewards.
inline bool is_better(const Arm& challenger, const Arm& leader, double c_n) {
  const std::size_t n_k = challenger.pulls();
  return detail::better_given(
      n_k, n_k ? challenger.mean() : 0.0, leader.pulls(),
      [&] { return leader.min_window(n_k); }, c_n);
}

struct SchedulerState {
  std::vector<Arm> arms;
  std::size_t round = 0;        // rounds planned so far
  std::size_t total_evals = 0;  // n = sum of pulls
  std::size_t horizon = 0;      // N

  double c_n() const { return comparison_threshold(total_evals); }
};

// Arm with the most pulls; ties go to the larger mean, then the lower index.
// Failed arms lead only when every arm has failed.
inline std::size_t elect_leader(const SchedulerState& state) {
  if (state.arms.empty()) throw InvalidInput("no arms");
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < state.arms.size(); ++k) {
    const auto& a = state.arms[k];
    if (a.failed()) continue;
    if (!best) {
      best = k;
      continue;
    }
    const auto& b = state.arms[*best];
    if (a.pulls() > b.pulls() || (a.pulls() == b.pulls() && a.mean() > b.mean())) best = k;
  }
  return best.value_or(0);
}

// Arms to evaluate in a round r >= 2: every non-leader that is better than the
// leader (in index order), else the leader alone. Failed arms never qualify.
inline std::vector<std::size_t> plan_round(const SchedulerState& state) {
  const std::size_t leader = elect_leader(state);
  const double c_n = state.c_n();
  std::vector<std::size_t> plan;
  for (std::size_t k = 0; k < state.arms.size(); ++k) {
    if (k == leader || state.arms[k].failed()) continue;
    if (is_better(state.arms[k], state.arms[leader], c_n)) plan.push_back(k);
  }
  if (plan.empty()) plan.push_back(leader);
  return plan;
}

// Keeps a uniformly random subset of `remaining` entries, in plan order.
inline std::vector<std::size_t> truncate_to_horizon(std::vector<std::size_t> plan,
                                                    std::size_t remaining, std::uint64_t seed) {
  if (plan.size() <= remaining) return plan;
  Rng rng = make_rng(seed);
  std::vector<std::size_t> idx(plan.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < remaining; ++i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(i),
                                                        static_cast<std::int64_t>(idx.size()) - 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(remaining);
  std::sort(idx.begin(), idx.end());
  std::vector<std::size_t> out;
  out.reserve(remaining);
  for (std::size_t i : idx) out.push_back(plan[i]);
  return out;
}

// Round-by-round driver for sub-sample mean comparisons. Callers alternate
// next_round() with one report() per planned arm, in plan order.
class SmcScheduler {
 public:
  SmcScheduler(std::size_t num_arms, std::size_t horizon, std::uint64_t seed)
      : seed_(seed), min_windows_(num_arms) {
    if (num_arms < 2) throw InvalidInput("sub-sampling needs at least two arms");
    if (horizon < num_arms) throw InvalidInput("horizon must be at least the number of arms");
    state_.arms.resize(num_arms);
    state_.horizon = horizon;
  }

  bool done() const { return state_.total_evals >= state_.horizon; }
  const SchedulerState& state() const { return state_; }
  std::size_t round() const { return state_.round; }
  // Leader of the current round; none during round 1.
  std::optional<std::size_t> leader() const { return leader_; }
  // n at the start of each round r >= 2, indexed by r - 2.
  const std::vector<std::size_t>& round_start_totals() const { return round_starts_; }

  std::vector<std::size_t> next_round() {
    if (pending_ != 0) throw InvalidInput("previous round has unreported evaluations");
    if (done()) return {};
    ++state_.round;
    std::vector<std::size_t> plan;
    if (state_.round == 1) {
      for (std::size_t k = 0; k < state_.arms.size(); ++k) plan.push_back(k);
    } else {
      round_starts_.push_back(state_.total_evals);
      plan = plan_cached();
    }
    plan = truncate_to_horizon(std::move(plan), state_.horizon - state_.total_evals,
                               derive_seed(seed_, {state_.round}));
    pending_ = plan.size();
    return plan;
  }

  void report(std::size_t arm, double reward) {
    if (pending_ == 0) throw InvalidInput("no evaluation pending");
    if (arm >= state_.arms.size()) throw InvalidInput("arm index out of range");
    auto& a = state_.arms[arm];
    a.append(reward);
    ++state_.total_evals;
    --pending_;
    for (auto& [len, value] : min_windows_[arm]) {
      if (len <= a.pulls()) value = std::min(value, a.window(a.pulls() - len + 1, len));
    }
  }

 private:
  // plan_round() with the leader's minimum windows maintained incrementally.
  std::vector<std::size_t> plan_cached() {
    const std::size_t lead = elect_leader(state_);
    leader_ = lead;
    const Arm& la = state_.arms[lead];
    const double c_n = state_.c_n();
    auto& cache = min_windows_[lead];
    std::vector<std::pair<std::size_t, double>> used;
    std::vector<std::size_t> plan;
    for (std::size_t k = 0; k < state_.arms.size(); ++k) {
      const Arm& ck = state_.arms[k];
      if (k == lead || ck.failed()) continue;
      const std::size_t n_k = ck.pulls();
      auto lookup = [&]() {
        for (const auto& e : cache) {
          if (e.first == n_k) {
            used.push_back(e);
            return e.second;
          }
        }
        const double v = la.min_window(n_k);
        used.emplace_back(n_k, v);
        return v;
      };
      if (detail::better_given(n_k, n_k ? ck.mean() : 0.0, la.pulls(), lookup, c_n)) plan.push_back(k);
    }
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    cache = std::move(used);
    if (plan.empty()) plan.push_back(lead);
    return plan;
  }

  SchedulerState state_;
  std::uint64_t seed_;
  std::size_t pending_ = 0;
  std::optional<std::size_t> leader_;
  std::vector<std::size_t> round_starts_;
  std::vector<std::vector<std::pair<std::size_t, double>>> min_windows_;
};

struct PullRecord {
  std::size_t round = 0;
  std::size_t arm = 0;
  double reward = 0.0;
  std::size_t n_k = 0;  // arm's pulls including this one
  std::optional<std::size_t> leader;
};

struct PolicyRun {
  std::vector<std::size_t> trace;  // arm pulled at t = 1..N
  std::vector<PullRecord> pulls;
  SchedulerState state;
  std::vector<std::size_t> round_start_totals;
  std::optional<std::string> failure;  // set when the oracle threw; trace holds the prefix
};

// Reward source: (arm index, 1-based budget index of that arm) -> reward.
using RewardOracle = std::function<double(std::size_t arm, std::size_t budget_index)>;

inline PolicyRun run_policy(const RewardOracle& oracle, std::size_t num_arms, std::size_t horizon,
                            std::uint64_t seed) {
  SmcScheduler sched(num_arms, horizon, seed);
  PolicyRun run;
  run.trace.reserve(horizon);
  while (!sched.done()) {
    const auto plan = sched.next_round();
    for (std::size_t arm : plan) {
      double reward;
      try {
        reward = oracle(arm, sched.state().arms[arm].pulls() + 1);
      } catch (const std::exception& e) {
        run.failure = e.what();
        run.state = sched.state();
        run.round_start_totals = sched.round_start_totals();
        return run;
      }
      sched.report(arm, reward);
      run.trace.push_back(arm);
      run.pulls.push_back({sched.round(), arm, reward, sched.state().arms[arm].pulls(), sched.leader()});
    }
  }
  run.state = sched.state();
  run.round_start_totals = sched.round_start_totals();
  return run;
}

// Cumulative regret: sum over t of (max mu - mu of the arm pulled at t).
inline double regret(std::span<const std::size_t> trace, std::span<const double> mus) {
  if (mus.empty()) throw InvalidInput("no arm means");
  const double best = *std::max_element(mus.begin(), mus.end());
  double r = 0.0;
  for (std::size_t arm : trace) {
    if (arm >= mus.size()) throw InvalidInput("trace references arm " + std::to_string(arm) +
                                              " but only " + std::to_string(mus.size()) + " means given");
    r += best - mus[arm];
  }
  return r;
}

}  // namespace aabo
