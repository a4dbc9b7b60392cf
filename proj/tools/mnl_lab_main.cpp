// Command-line experiment harness: run seed sweeps, audit completed runs,
// and grid-search the schedule constants.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mnl_lab/config.hpp"
#include "mnl_lab/experiment.hpp"
#include "mnl_lab/kernels.hpp"

namespace {

struct CommonOpts {
  std::vector<std::string> overrides;
  std::string seed_range;
  std::string out_dir;
  int threads = 0;
};

// "a..b" inclusive.
std::vector<std::uint64_t> parse_seed_range(const std::string& range) {
  const auto pos = range.find("..");
  if (pos == std::string::npos)
    throw mnl_lab::ConfigError("--seed-range expects a..b, got: " + range);
  const long a = std::stol(range.substr(0, pos));
  const long b = std::stol(range.substr(pos + 2));
  if (a < 0 || b < a)
    throw mnl_lab::ConfigError("--seed-range must satisfy 0 <= a <= b");
  std::vector<std::uint64_t> seeds;
  for (long s = a; s <= b; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  return seeds;
}

mnl_lab::ExperimentConfig load_config(const std::string& path,
                                      const CommonOpts& opts) {
  mnl_lab::ExperimentConfig cfg = mnl_lab::parse_config_file(path);
  if (!opts.overrides.empty()) {
    nlohmann::json doc = cfg.echo;
    for (const auto& assignment : opts.overrides)
      mnl_lab::apply_override(doc, assignment);
    cfg = mnl_lab::parse_config_json(doc);
  }
  if (!opts.seed_range.empty()) cfg.seeds = parse_seed_range(opts.seed_range);
  if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
  if (opts.threads > 0) cfg.threads = opts.threads;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--set", opts.overrides,
                  "Override a config key, e.g. --set environment.horizon=200");
  cmd->add_option("--seed-range", opts.seed_range,
                  "Replace the seed list with an inclusive range a..b");
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--threads", opts.threads,
                  "Worker threads (default: MNL_LAB_THREADS, then hardware)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MNL bandit experiment harness"};
  app.require_subcommand(1);

  std::string run_config, audit_config, audit_dir, grid_config;
  CommonOpts run_opts, audit_opts, grid_opts;

  CLI::App* run_cmd =
      app.add_subcommand("run", "Run every (policy, seed) pair of a config");
  run_cmd->add_option("config", run_config, "Config file (.json or TOML-like)")
      ->required();
  add_common(run_cmd, run_opts);

  CLI::App* audit_cmd = app.add_subcommand(
      "audit", "Audit completed traces: lemma checks and Gram-state health");
  audit_cmd->add_option("config", audit_config, "Config file")->required();
  audit_cmd->add_option("trace_dir", audit_dir, "Directory with traces")
      ->required();
  add_common(audit_cmd, audit_opts);

  CLI::App* grid_cmd = app.add_subcommand(
      "grid", "Grid-search c_lambda x c_beta for the onl-mnl policy");
  grid_cmd->add_option("config", grid_config, "Config file")->required();
  add_common(grid_cmd, grid_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const auto cfg = load_config(run_config, run_opts);
      std::fprintf(stderr, "kernels: %s\n",
                   std::string(mnl_lab::kern::isa_name(
                       mnl_lab::kern::active_isa())).c_str());
      const auto agg = mnl_lab::run_experiment(cfg);
      for (const auto& curve : agg.curves)
        std::printf("%-16s final regret %10.3f +- %.3f  (%.2fs/run)\n",
                    curve.policy.c_str(), curve.final_mean, curve.final_std,
                    curve.wall_mean);
      std::printf("wrote %s/aggregate.csv and regret.svg\n",
                  cfg.output_dir.c_str());
      return 0;
    }
    if (audit_cmd->parsed()) {
      auto cfg = load_config(audit_config, audit_opts);
      const std::string out =
          audit_opts.out_dir.empty() ? audit_dir : audit_opts.out_dir;
      const bool ok = mnl_lab::run_audit(cfg, audit_dir, out);
      std::printf("audit: %s (report in %s/audit.md)\n",
                  ok ? "PASS" : "FAIL", out.c_str());
      return ok ? 0 : 1;
    }
    if (grid_cmd->parsed()) {
      const auto cfg = load_config(grid_config, grid_opts);
      const auto grid = mnl_lab::grid_search(cfg);
      for (const auto& p : grid.table)
        std::printf("c_lambda=%-8g c_beta=%-8g mean final regret %.3f\n",
                    p.c_lambda, p.c_beta, p.mean_final_regret);
      std::printf("best: c_lambda=%g c_beta=%g (%.3f); table in %s/grid.csv\n",
                  grid.best.c_lambda, grid.best.c_beta,
                  grid.best.mean_final_regret, cfg.output_dir.c_str());
      return 0;
    }
  } catch (const mnl_lab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
