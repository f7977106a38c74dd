#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aabo/search_types.hpp"
#include "aabo/serialization.hpp"
#include "aabo/trial_log.hpp"

namespace aabo {

inline constexpr const char* kReportSchema = "aabo-report/1";

struct CurvePoint {
  std::size_t budget = 0;  // budget units spent so far, 1-based
  std::size_t generation = 0;
  std::size_t trial_id = 0;
  std::optional<double> reward;  // empty for a failed evaluation
  std::optional<double> best_so_far;
  std::optional<double> cumulative_regret;
};

struct GenerationRow {
  std::size_t generation = 0;
  std::size_t pulls = 0;
  std::optional<double> generation_best;
  std::optional<double> incumbent;
  std::optional<std::size_t> incumbent_trial;
};

struct ArmRow {
  std::size_t generation = 0;
  std::size_t trial_id = 0;
  std::string proposer;
  std::size_t budgets = 0;
  std::optional<double> best_reward;
};

struct LogSummary {
  std::vector<CurvePoint> curve;
  std::vector<GenerationRow> generations;
  std::vector<ArmRow> arms;
  bool has_regret = false;  // every trial carries a known mean
};

// Summarizes a trial log. A missing or empty log gives an empty summary.
inline LogSummary summarize_log(const LogContents& log) {
  LogSummary s;
  std::map<std::size_t, ArmRow> arms;
  std::map<std::size_t, std::optional<double>> mus;
  std::map<std::size_t, double> best_mu;  // per generation
  struct Pull {
    std::size_t trial, generation;
    std::optional<double> reward;
  };
  std::vector<Pull> pulls;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& rec = log.records[i];
    try {
      const std::string type = rec.at("type");
      if (type == "trial") {
        ArmRow row;
        row.trial_id = rec.at("trial_id").get<std::size_t>();
        row.generation = rec.at("generation").get<std::size_t>();
        row.proposer = rec.at("proposer").get<std::string>();
        arms[row.trial_id] = row;
        std::optional<double> mu;
        if (rec.contains("mu")) {
          mu = rec["mu"].get<double>();
          auto [it, fresh] = best_mu.emplace(row.generation, *mu);
          if (!fresh) it->second = std::max(it->second, *mu);
        }
        mus[row.trial_id] = mu;
      } else if (type == "pull") {
        Pull p{rec.at("trial_id").get<std::size_t>(), rec.at("generation").get<std::size_t>(), std::nullopt};
        if (!rec.at("reward").is_null()) p.reward = rec["reward"].get<double>();
        if (!arms.count(p.trial)) throw CorruptLog(i + 2, "pull references unknown trial " + std::to_string(p.trial));
        pulls.push_back(p);
      }
    } catch (const json::exception& e) {
      throw CorruptLog(i + 2, std::string("malformed record: ") + e.what());
    }
  }
  s.has_regret = !mus.empty() && std::all_of(mus.begin(), mus.end(), [](const auto& e) { return e.second.has_value(); });

  std::optional<double> best;
  std::optional<std::size_t> best_trial;
  double regret = 0.0;
  std::map<std::size_t, GenerationRow> gens;
  for (std::size_t b = 0; b < pulls.size(); ++b) {
    const auto& p = pulls[b];
    auto& arm = arms[p.trial];
    ++arm.budgets;
    auto& g = gens[p.generation];
    g.generation = p.generation;
    ++g.pulls;
    if (p.reward) {
      if (!arm.best_reward || *p.reward > *arm.best_reward) arm.best_reward = p.reward;
      if (!g.generation_best || *p.reward > *g.generation_best) g.generation_best = p.reward;
      if (!best || *p.reward > *best) {
        best = p.reward;
        best_trial = p.trial;
      }
    }
    g.incumbent = best;
    g.incumbent_trial = best_trial;
    CurvePoint pt{b + 1, p.generation, p.trial, p.reward, best, std::nullopt};
    if (s.has_regret) {
      regret += best_mu[p.generation] - *mus[p.trial];
      pt.cumulative_regret = regret;
    }
    s.curve.push_back(pt);
  }
  for (auto& [id, g] : gens) s.generations.push_back(g);
  for (auto& [id, a] : arms) s.arms.push_back(a);
  return s;
}

inline LogSummary summarize_log(const std::filesystem::path& path) { return summarize_log(read_trial_log(path)); }

namespace detail {

inline std::string fmt_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

template <class T>
std::string fmt_optional(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>) {
    return fmt_number(*v);
  } else {
    return std::to_string(*v);
  }
}

template <class T>
json json_optional(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail

// Three sections, each introduced by a "# name" line followed by a header row.
// Missing values are empty cells; cumulative_regret appears only for logs
// whose trials carry known means.
inline std::string report_csv(const LogSummary& s) {
  using detail::fmt_optional;
  std::string out = "# budget_curve\n";
  out += s.has_regret ? "budget,generation,trial_id,reward,best_so_far,cumulative_regret\n"
                      : "budget,generation,trial_id,reward,best_so_far\n";
  for (const auto& p : s.curve) {
    out += std::to_string(p.budget) + "," + std::to_string(p.generation) + "," + std::to_string(p.trial_id) + "," +
           fmt_optional(p.reward) + "," + fmt_optional(p.best_so_far);
    if (s.has_regret) out += "," + fmt_optional(p.cumulative_regret);
    out += "\n";
  }
  out += "# generations\ngeneration,pulls,generation_best,incumbent,incumbent_trial_id\n";
  for (const auto& g : s.generations) {
    out += std::to_string(g.generation) + "," + std::to_string(g.pulls) + "," + fmt_optional(g.generation_best) +
           "," + fmt_optional(g.incumbent) + "," + fmt_optional(g.incumbent_trial) + "\n";
  }
  out += "# arms\ngeneration,trial_id,proposer,budgets,best_reward\n";
  for (const auto& a : s.arms) {
    out += std::to_string(a.generation) + "," + std::to_string(a.trial_id) + "," + a.proposer + "," +
           std::to_string(a.budgets) + "," + fmt_optional(a.best_reward) + "\n";
  }
  return out;
}

inline json report_json(const LogSummary& s) {
  using detail::json_optional;
  json curve = json::array();
  for (const auto& p : s.curve) {
    json j = {{"budget", p.budget},
              {"generation", p.generation},
              {"trial_id", p.trial_id},
              {"reward", json_optional(p.reward)},
              {"best_so_far", json_optional(p.best_so_far)}};
    if (s.has_regret) j["cumulative_regret"] = json_optional(p.cumulative_regret);
    curve.push_back(std::move(j));
  }
  json gens = json::array();
  for (const auto& g : s.generations) {
    gens.push_back({{"generation", g.generation},
                    {"pulls", g.pulls},
                    {"generation_best", json_optional(g.generation_best)},
                    {"incumbent", json_optional(g.incumbent)},
                    {"incumbent_trial_id", json_optional(g.incumbent_trial)}});
  }
  json arms = json::array();
  for (const auto& a : s.arms) {
    arms.push_back({{"generation", a.generation},
                    {"trial_id", a.trial_id},
                    {"proposer", a.proposer},
                    {"budgets", a.budgets},
                    {"best_reward", json_optional(a.best_reward)}});
  }
  return {{"schema", kReportSchema}, {"budget_curve", curve}, {"generations", gens}, {"arms", arms}};
}

}  // namespace aabo
