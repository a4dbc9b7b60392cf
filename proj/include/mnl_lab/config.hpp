#pragma once

// Declarative experiment configuration: JSON or a TOML-style dialect, with
// dotted-path CLI overrides. Unknown keys are rejected before any run
// starts.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mnl_lab/policies.hpp"
#include "mnl_lab/simulator.hpp"

namespace mnl_lab {

struct PolicySpec {
  std::string name;
  nlohmann::json params;  // validated per policy
};

struct AuditSettings {
  bool enabled = true;
  std::vector<int> dims = {1, 2, 3};
  Vec caps = {0.5, 1.0, 3.0};
  int pairs = 10000;
};

struct GridSettings {
  Vec c_lambda = {1e-3, 1e-2, 1e-1, 1.0};
  Vec c_beta = {1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
};

struct ExperimentConfig {
  // environment
  std::string env_type = "realizable";  // realizable|misspecified|feature_file
  ContextSource context_source = ContextSource::gaussian;
  int n_items = 100;
  int capacity = 5;
  int dim = 3;
  int horizon = 1000;
  int truth_hidden = 3;
  bool enforce_unit_ball = false;
  std::string revenues_mode = "uniform";
  Vec revenues_array;
  std::string feature_file;
  std::string truth_checkpoint;

  std::vector<PolicySpec> policies;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  int threads = 0;  // 0: MNL_LAB_THREADS env, then hardware concurrency

  AuditSettings audit;
  GridSettings grid;

  nlohmann::json echo;  // the validated raw document
};

// Parses .json or the TOML-style dialect (chosen by content sniffing).
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_json(const nlohmann::json& doc);

// Minimal TOML dialect: [section], [[array-of-tables]], key = value with
// strings, numbers, booleans and flat arrays.
nlohmann::json toml_lite_to_json(const std::string& text);

// Applies one `--set dotted.path=value` override onto a raw document.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Builds the environment for one seed (truth parameters derive from it).
Environment make_environment(const ExperimentConfig& cfg, std::uint64_t seed);

// Instantiates a policy for one run. init_rng seeds parameter inits.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec,
                                    const ExperimentConfig& cfg,
                                    const Environment& env, Rng init_rng);

// Resolved worker count: explicit > env MNL_LAB_THREADS > hardware.
int resolve_threads(int configured);

}  // namespace mnl_lab
