#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "aabo/error.hpp"
#include "aabo/random.hpp"
#include "aabo/serialization.hpp"
#include "aabo/smc.hpp"

namespace aabo {

enum class RewardDist { gaussian, bernoulli };

struct ArmSpec {
  RewardDist dist = RewardDist::gaussian;
  double mu = 0.0;
  double sigma = 1.0;  // gaussian only
};

namespace detail {

inline double parse_real(std::string_view s, const std::string& what) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InvalidInput(what + ": \"" + std::string(s) + "\" is not a number");
  }
  return v;
}

inline void check_arm(const ArmSpec& a, const std::string& where) {
  if (a.dist == RewardDist::bernoulli && (a.mu < 0.0 || a.mu > 1.0)) {
    throw InvalidInput(where + ": bernoulli mean must lie in [0, 1]");
  }
  if (a.dist == RewardDist::gaussian && !(a.sigma > 0.0)) throw InvalidInput(where + ": sigma must be > 0");
}

inline RewardDist dist_from_string(const std::string& s, const std::string& where) {
  if (s == "gaussian") return RewardDist::gaussian;
  if (s == "bernoulli") return RewardDist::bernoulli;
  throw InvalidInput(where + ": unknown distribution \"" + s + "\"");
}

}  // namespace detail

// "gaussian:0,0.3,0.6" (unit variance), "bernoulli:0.2,0.5", or a path to a
// JSON file {"arms":[{"dist":"gaussian","mu":0.3,"sigma":1.0}, ...]}.
inline std::vector<ArmSpec> parse_arm_spec(const std::string& spec) {
  std::vector<ArmSpec> arms;
  const auto colon = spec.find(':');
  if (colon != std::string::npos && (spec.starts_with("gaussian:") || spec.starts_with("bernoulli:"))) {
    const RewardDist dist = detail::dist_from_string(spec.substr(0, colon), "arm spec");
    std::string_view rest(spec);
    rest.remove_prefix(colon + 1);
    std::size_t i = 0;
    while (true) {
      const auto comma = rest.find(',');
      ArmSpec a;
      a.dist = dist;
      a.mu = detail::parse_real(rest.substr(0, comma), "arm spec entry " + std::to_string(i));
      detail::check_arm(a, "arm spec entry " + std::to_string(i));
      arms.push_back(a);
      ++i;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  } else {
    const json doc = parse_json_text(read_text_file(spec), spec);
    if (!doc.is_object() || !doc.contains("arms") || !doc["arms"].is_array()) {
      throw InvalidInput(spec + ": expected an object with an \"arms\" array");
    }
    for (std::size_t i = 0; i < doc["arms"].size(); ++i) {
      const auto& e = doc["arms"][i];
      const std::string where = spec + ": arms[" + std::to_string(i) + "]";
      if (!e.is_object() || !e.contains("mu") || !e["mu"].is_number()) throw InvalidInput(where + ": missing mu");
      ArmSpec a;
      a.dist = detail::dist_from_string(e.value("dist", "gaussian"), where);
      a.mu = e["mu"].get<double>();
      if (e.contains("sigma")) {
        if (!e["sigma"].is_number()) throw InvalidInput(where + ": sigma must be a number");
        a.sigma = e["sigma"].get<double>();
      }
      detail::check_arm(a, where);
      arms.push_back(a);
    }
  }
  if (arms.empty()) throw InvalidInput("arm spec defines no arms");
  return arms;
}

enum class BanditPolicy { smc, random, halving };

inline BanditPolicy bandit_policy_from_string(const std::string& s) {
  if (s == "smc") return BanditPolicy::smc;
  if (s == "random") return BanditPolicy::random;
  if (s == "halving") return BanditPolicy::halving;
  throw InvalidInput("unknown policy \"" + s + "\"");
}

// Per-arm reward streams; the j-th pull of an arm sees the same draw under every policy.
class BanditEnvironment {
 public:
  BanditEnvironment(std::vector<ArmSpec> arms, std::uint64_t seed) : arms_(std::move(arms)) {
    for (std::size_t k = 0; k < arms_.size(); ++k) rngs_.push_back(make_rng(derive_seed(seed, {0, k})));
  }

  double pull(std::size_t arm) {
    const auto& a = arms_.at(arm);
    Rng& rng = rngs_[arm];
    if (a.dist == RewardDist::bernoulli) return uniform01(rng) < a.mu ? 1.0 : 0.0;
    return normal(rng, a.mu, a.sigma);
  }

 private:
  std::vector<ArmSpec> arms_;
  std::vector<Rng> rngs_;
};

// Sequential halving with a fixed horizon: ceil(log2 K) phases, each survivor
// gets an equal share of the phase budget, the better half (by mean) survives.
// Leftover budget goes to the last survivor.
inline std::vector<std::size_t> sequential_halving_trace(BanditEnvironment& env, std::size_t num_arms,
                                                         std::size_t horizon) {
  std::vector<std::size_t> trace;
  std::vector<std::size_t> alive(num_arms);
  for (std::size_t k = 0; k < num_arms; ++k) alive[k] = k;
  std::vector<double> sum(num_arms, 0.0);
  std::vector<std::size_t> count(num_arms, 0);
  const auto phases = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(num_arms, 2)))));
  for (std::size_t p = 0; p < phases && alive.size() > 1; ++p) {
    const std::size_t per_arm = std::max<std::size_t>(1, horizon / (alive.size() * phases));
    for (std::size_t k : alive) {
      for (std::size_t i = 0; i < per_arm && trace.size() < horizon; ++i) {
        sum[k] += env.pull(k);
        ++count[k];
        trace.push_back(k);
      }
    }
    std::stable_sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) {
      const double ma = count[a] ? sum[a] / count[a] : 0.0;
      const double mb = count[b] ? sum[b] / count[b] : 0.0;
      return ma > mb;
    });
    alive.resize((alive.size() + 1) / 2);
  }
  while (trace.size() < horizon) {
    env.pull(alive.front());
    trace.push_back(alive.front());
  }
  return trace;
}

// Arm pulled at each of the horizon steps of one simulated run.
inline std::vector<std::size_t> simulate_trace(const std::vector<ArmSpec>& arms, BanditPolicy policy,
                                               std::size_t horizon, std::uint64_t seed) {
  if (arms.empty()) throw InvalidInput("no arms");
  if (arms.size() == 1) return std::vector<std::size_t>(horizon, 0);
  BanditEnvironment env(arms, seed);
  switch (policy) {
    case BanditPolicy::smc: {
      if (horizon < arms.size()) throw InvalidInput("horizon must be at least the number of arms");
      return run_policy([&](std::size_t arm, std::size_t) { return env.pull(arm); }, arms.size(), horizon,
                        derive_seed(seed, {1}))
          .trace;
    }
    case BanditPolicy::random: {
      Rng rng = make_rng(derive_seed(seed, {1}));
      std::vector<std::size_t> trace(horizon);
      for (auto& a : trace) {
        a = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(arms.size()) - 1));
        env.pull(a);
      }
      return trace;
    }
    case BanditPolicy::halving:
      return sequential_halving_trace(env, arms.size(), horizon);
  }
  return {};
}

struct RegretCurve {
  std::vector<double> regret_mean;    // index t-1
  std::vector<double> regret_stderr;  // sample standard deviation / sqrt(seeds); 0 for one seed
  std::vector<double> best_arm_pull_frac;
  std::vector<std::vector<double>> per_seed;  // cumulative regret per seed, when requested
};

inline RegretCurve simulate_regret(const std::vector<ArmSpec>& arms, BanditPolicy policy, std::size_t horizon,
                                   std::size_t seeds, std::uint64_t base_seed, bool keep_per_seed = false) {
  if (seeds < 1) throw InvalidInput("seeds must be >= 1");
  std::vector<double> mus;
  for (const auto& a : arms) mus.push_back(a.mu);
  const auto best_arm = static_cast<std::size_t>(std::max_element(mus.begin(), mus.end()) - mus.begin());
  const double best_mu = mus[best_arm];
  std::vector<double> sum(horizon, 0.0), sumsq(horizon, 0.0), frac(horizon, 0.0);
  RegretCurve curve;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto trace = simulate_trace(arms, policy, horizon, derive_seed(base_seed, {s}));
    double r = 0.0;
    std::size_t best_pulls = 0;
    std::vector<double> run(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
      r += best_mu - mus[trace[t]];
      if (mus[trace[t]] == best_mu) ++best_pulls;
      run[t] = r;
      sum[t] += r;
      sumsq[t] += r * r;
      frac[t] += static_cast<double>(best_pulls) / static_cast<double>(t + 1);
    }
    if (keep_per_seed) curve.per_seed.push_back(std::move(run));
  }
  const auto n = static_cast<double>(seeds);
  for (std::size_t t = 0; t < horizon; ++t) {
    const double mean = sum[t] / n;
    double se = 0.0;
    if (seeds > 1) se = std::sqrt(std::max(0.0, (sumsq[t] - n * mean * mean) / (n - 1.0)) / n);
    curve.regret_mean.push_back(mean);
    curve.regret_stderr.push_back(se);
    curve.best_arm_pull_frac.push_back(frac[t] / n);
  }
  return curve;
}

inline constexpr const char* kRegretCsvHeader = "t,regret_mean,regret_stderr,best_arm_pull_frac";

inline std::string regret_csv(const RegretCurve& c) {
  std::string out = std::string(kRegretCsvHeader) + "\n";
  char buf[128];
  for (std::size_t t = 0; t < c.regret_mean.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g\n", t + 1, c.regret_mean[t], c.regret_stderr[t],
                  c.best_arm_pull_frac[t]);
    out += buf;
  }
  return out;
}

// Long format: seed,t,cumulative_regret.
inline std::string per_seed_csv(const RegretCurve& c) {
  std::string out = "seed,t,cumulative_regret\n";
  char buf[96];
  for (std::size_t s = 0; s < c.per_seed.size(); ++s) {
    for (std::size_t t = 0; t < c.per_seed[s].size(); ++t) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.12g\n", s, t + 1, c.per_seed[s][t]);
      out += buf;
    }
  }
  return out;
}

}  // namespace aabo
