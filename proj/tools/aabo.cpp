// aabo: anchor search spaces, anchor configuration search, bandit simulations
// and trial-log reports from the command line.
//
// Exit codes: 0 success, 1 usage error, 2 unreadable or malformed input
// (including a corrupt trial log), 3 infeasible search space, 4 objective
// failure after retries, 5 trial log written by a different configuration.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aabo.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kInfeasible = 3, kObjective = 4, kMismatch = 5 };

struct UsageError : aabo::Error {
  using aabo::Error::Error;
};

struct SpaceBuildArgs {
  std::string annotations, out;
  int levels = 5;
  double max_width = 1333.0, max_height = 1333.0;
  aabo::SpaceBuildParams params;
  std::uint64_t seed = 0;
};

struct SearchArgs {
  std::string space, objective, log;
  bool resume = false;
  aabo::EngineConfig engine;
  double base_scale = 32.0;
  double timeout_s = 60.0;
};

struct BanditArgs {
  std::string arms, policy = "smc", out, per_seed_out;
  std::size_t horizon = 1000, seeds = 10;
  std::uint64_t seed = 0;
};

struct ReportArgs {
  std::string log, format = "csv";
  std::uint64_t seed = 0;
};

fs::path resolve_relative(const fs::path& base_file, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base_file.parent_path() / path;
}

int run_space_build(const SpaceBuildArgs& a) {
  const auto coco = aabo::load_coco(a.annotations);
  const aabo::GlobalLimits limits{a.max_width, a.max_height};
  const auto space = aabo::build_space(coco.boxes, a.levels, limits, a.params);
  aabo::write_text_file(a.out, aabo::dump_document(aabo::to_json(space)));
  const auto counts = aabo::level_box_counts(coco.boxes, a.levels, limits, a.params);
  std::printf("boxes %zu (skipped %zu degenerate) from %zu images\n", coco.boxes.size(), coco.skipped_degenerate,
              coco.image_count);
  std::printf("%-5s %-6s %-6s %-7s %-19s %-19s\n", "level", "stride", "boxes", "anchors", "scale", "ratio");
  for (std::size_t l = 0; l < space.levels.size(); ++l) {
    const auto& lv = space.levels[l];
    std::printf("%-5zu %-6d %-6zu %d..%-4d %8.4g..%-9.4g %8.4g..%-9.4g\n", l, lv.stride, counts[l],
                lv.anchor_count.lo, lv.anchor_count.hi, lv.scale_range.lo, lv.scale_range.hi, lv.ratio_range.lo,
                lv.ratio_range.hi);
  }
  std::printf("wrote %s\n", a.out.c_str());
  return kOk;
}

// "coverage:annotations.json", "surrogate:params.json" or "cmd:shell command".
aabo::Objective make_objective(const std::string& spec, const aabo::SearchSpace& space, const SearchArgs& a) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw UsageError("objective spec must look like kind:argument, got \"" + spec + "\"");
  const std::string kind = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  if (arg.empty()) throw UsageError("objective spec \"" + spec + "\" has an empty argument");
  const auto assigner = aabo::assigner_for(space, a.base_scale);
  if (kind == "coverage") return aabo::make_coverage_objective(aabo::load_coco(arg).boxes, assigner);
  if (kind == "surrogate") {
    // {"annotations": "boxes.json", "sigma": .., "tau_ref": .., "tau_min": .., "tau_max": .., "cover_iou": ..}
    const fs::path params_path(arg);
    const auto doc = aabo::parse_json_text(aabo::read_text_file(params_path), arg);
    if (!doc.is_object() || !doc.contains("annotations") || !doc["annotations"].is_string()) {
      throw aabo::InvalidInput(arg + ": missing string field \"annotations\"");
    }
    aabo::CoverageSurrogateShape shape;
    auto number = [&](const char* key, double& field) {
      if (!doc.contains(key)) return;
      if (!doc[key].is_number()) throw aabo::InvalidInput(arg + ": \"" + key + "\" must be a number");
      field = doc[key].get<double>();
    };
    number("sigma", shape.sigma);
    number("tau_ref", shape.tau_ref);
    number("tau_min", shape.tau_min);
    number("tau_max", shape.tau_max);
    number("cover_iou", shape.cover_iou);
    const auto boxes = aabo::load_coco(resolve_relative(params_path, doc["annotations"])).boxes;
    return aabo::make_surrogate_objective(aabo::coverage_surrogate(boxes, assigner, shape));
  }
  if (kind == "cmd") {
    aabo::ExternalCommandOptions opts;
    opts.timeout = std::chrono::milliseconds(static_cast<long long>(a.timeout_s * 1000.0));
    opts.max_concurrency = static_cast<int>(a.engine.workers);
    return aabo::make_external_objective(arg, opts);
  }
  throw UsageError("unknown objective kind \"" + kind + "\" (expected coverage, surrogate or cmd)");
}

int run_search(const SearchArgs& a) {
  try {
    aabo::validate(a.engine);
  } catch (const aabo::InvalidInput& e) {
    throw UsageError(e.what());
  }
  const auto space = aabo::load_space(a.space);
  const auto objective = make_objective(a.objective, space, a);
  aabo::RunOptions options{a.log, a.resume, a.objective};
  aabo::log::info("search: pool " + std::to_string(a.engine.pool_size) + ", budgets " +
                  std::to_string(a.engine.budgets_per_generation) + ", generations " +
                  std::to_string(a.engine.generations) + ", seed " + std::to_string(a.engine.seed));
  const auto result = aabo::run_search(space, objective, a.engine, options);
  for (const auto& g : result.generations) {
    aabo::log::info("generation " + std::to_string(g.generation) + ": best " + std::to_string(g.generation_best) +
                    ", incumbent " + std::to_string(g.incumbent));
  }
  std::printf("evaluations: %zu budget units, %zu new, %zu failed\n", result.total_budget, result.new_evaluations,
              result.failed_evaluations);
  if (result.best_trial) {
    std::printf("incumbent trial %zu reward %.12g\n", *result.best_trial, result.best_reward);
    std::fputs(aabo::dump_document(aabo::to_json(result.best_config)).c_str(), stdout);
  } else {
    std::printf("no successful evaluation\n");
  }
  if (result.failed_evaluations > 0) {
    aabo::log::error(std::to_string(result.failed_evaluations) + " evaluation(s) failed after retries");
    return kObjective;
  }
  return kOk;
}

int run_bandit(const BanditArgs& a) {
  const auto arms = aabo::parse_arm_spec(a.arms);
  const auto policy = aabo::bandit_policy_from_string(a.policy);
  if (a.horizon < 1) throw UsageError("--horizon must be >= 1");
  if (policy == aabo::BanditPolicy::smc && arms.size() > 1 && a.horizon < arms.size()) {
    throw UsageError("--horizon must be at least the number of arms for smc");
  }
  const auto curve = aabo::simulate_regret(arms, policy, a.horizon, a.seeds, a.seed, !a.per_seed_out.empty());
  aabo::write_text_file(a.out, aabo::regret_csv(curve));
  if (!a.per_seed_out.empty()) aabo::write_text_file(a.per_seed_out, aabo::per_seed_csv(curve));
  std::printf("%s, %zu arms, horizon %zu, %zu seeds: regret %.6g +- %.3g, best-arm pull fraction %.4f\n",
              a.policy.c_str(), arms.size(), a.horizon, a.seeds, curve.regret_mean.back(),
              curve.regret_stderr.back(), curve.best_arm_pull_frac.back());
  std::printf("wrote %s\n", a.out.c_str());
  return kOk;
}

int run_report(const ReportArgs& a) {
  if (!fs::exists(a.log)) throw aabo::InvalidInput("no such trial log: " + a.log);
  const auto summary = aabo::summarize_log(fs::path(a.log));
  if (a.format == "json") {
    std::fputs(aabo::dump_document(aabo::report_json(summary)).c_str(), stdout);
  } else {
    std::fputs(aabo::report_csv(summary).c_str(), stdout);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchor configuration search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "aabo 0.1.0");

  SpaceBuildArgs sb;
  auto* space_cmd = app.add_subcommand("space-build", "Build a per-level anchor search space from COCO annotations");
  space_cmd->add_option("--annotations", sb.annotations, "COCO-style annotation file")->required();
  space_cmd->add_option("--levels", sb.levels, "Number of pyramid levels")->check(CLI::Range(1, 16));
  space_cmd->add_option("--max-width", sb.max_width, "Maximum anchor width in pixels")->check(CLI::PositiveNumber);
  space_cmd->add_option("--max-height", sb.max_height, "Maximum anchor height in pixels")->check(CLI::PositiveNumber);
  space_cmd->add_option("--out", sb.out, "Output space file")->required();
  space_cmd->add_option("--quantile-lo", sb.params.quantile_lo, "Lower quantile of per-level box statistics")
      ->check(CLI::Range(0.0, 1.0));
  space_cmd->add_option("--quantile-hi", sb.params.quantile_hi, "Upper quantile of per-level box statistics")
      ->check(CLI::Range(0.0, 1.0));
  space_cmd->add_option("--padding", sb.params.padding, "Log-width padding factor")->check(CLI::Range(1.0, 100.0));
  space_cmd->add_option("--base-scale", sb.params.base_scale, "Box scale assigned to the first level")
      ->check(CLI::PositiveNumber);
  space_cmd->add_option("--base-stride", sb.params.base_stride, "Stride of the first level")
      ->check(CLI::Range(1, 1 << 16));
  space_cmd->add_option("--seed", sb.seed, "Accepted for uniformity; space building is deterministic");

  SearchArgs sr;
  auto* search_cmd = app.add_subcommand("search-run", "Search anchor configurations");
  search_cmd->add_option("--space", sr.space, "Space file")->required();
  search_cmd->add_option("--objective", sr.objective, "coverage:PATH | surrogate:PATH | cmd:COMMAND")->required();
  search_cmd->add_option("--pool", sr.engine.pool_size, "Configurations per generation");
  search_cmd->add_option("--budgets", sr.engine.budgets_per_generation, "Budget units per generation");
  search_cmd->add_option("--generations", sr.engine.generations, "Number of generations");
  search_cmd->add_option("--seed", sr.engine.seed, "Random seed");
  search_cmd->add_option("--log", sr.log, "Trial log (JSONL)");
  search_cmd->add_flag("--resume", sr.resume, "Replay and continue the trial log")->needs("--log");
  search_cmd->add_option("--workers", sr.engine.workers, "Concurrent evaluations within a round");
  search_cmd->add_option("--gamma", sr.engine.gamma, "Fraction of observations in the good density");
  search_cmd->add_option("--candidates", sr.engine.n_candidates, "Candidates scored per proposal");
  search_cmd->add_option("--min-points", sr.engine.min_points, "Observations needed before the model is used (0: auto)");
  search_cmd->add_option("--carryover", sr.engine.carryover_count, "Best configurations carried into each generation");
  search_cmd->add_option("--retries", sr.engine.max_retries, "Extra attempts after a failed evaluation");
  search_cmd->add_option("--timeout", sr.timeout_s, "Seconds per external command evaluation")
      ->check(CLI::PositiveNumber);
  search_cmd->add_option("--base-scale", sr.base_scale, "Box scale assigned to the first level")
      ->check(CLI::PositiveNumber);

  BanditArgs bs;
  auto* bandit_cmd = app.add_subcommand("bandit-sim", "Simulate budget allocation policies on a bandit");
  bandit_cmd->add_option("--arms", bs.arms, "gaussian:MU,... | bernoulli:P,... | arms JSON file")->required();
  bandit_cmd->add_option("--policy", bs.policy, "Allocation policy")->check(CLI::IsMember({"smc", "random", "halving"}));
  bandit_cmd->add_option("--horizon", bs.horizon, "Pulls per run");
  bandit_cmd->add_option("--seeds", bs.seeds, "Independent runs")->check(CLI::PositiveNumber);
  bandit_cmd->add_option("--seed", bs.seed, "Base random seed");
  bandit_cmd->add_option("--out", bs.out, "Regret curve CSV")->required();
  bandit_cmd->add_option("--per-seed-out", bs.per_seed_out, "Per-seed cumulative regret CSV");

  ReportArgs rp;
  auto* report_cmd = app.add_subcommand("report", "Summarize a trial log");
  report_cmd->add_option("--log", rp.log, "Trial log (JSONL)")->required();
  report_cmd->add_option("--format", rp.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  report_cmd->add_option("--seed", rp.seed, "Accepted for uniformity; reports are deterministic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*space_cmd) return run_space_build(sb);
    if (*search_cmd) return run_search(sr);
    if (*bandit_cmd) return run_bandit(bs);
    if (*report_cmd) return run_report(rp);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const aabo::ConfigMismatch& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kMismatch;
  } catch (const aabo::InfeasibleSpace& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInfeasible;
  } catch (const aabo::InfeasibleScale& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInfeasible;
  } catch (const aabo::ObjectiveFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kObjective;
  } catch (const aabo::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInput;
  }
  return kUsage;
}
