#pragma once

// Synthetic environments, the episode loop, and regret accounting.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mnl_lab/core.hpp"
#include "mnl_lab/policies.hpp"
#include "mnl_lab/utility.hpp"

namespace mnl_lab {

enum class ContextSource { gaussian, uniform_box, feature_file };

struct Environment {
  ContextSource source = ContextSource::gaussian;
  int n_items = 100;
  int capacity = 5;
  int dim = 3;
  int horizon = 1000;
  std::shared_ptr<const UtilityModel> truth_model;
  Vec truth_params;
  RevenueVector revenues = RevenueVector::uniform(100);
  bool enforce_unit_ball = false;
  std::vector<Vec> feature_rows;  // backing pool for feature_file
  std::uint64_t seed = 0;

  double true_utility(std::span<const double> x) const {
    return truth_model->value(truth_params, x);
  }
};

// Two-layer sigmoid truth with i.i.d. Unif[-1,1] parameter entries.
Environment make_realizable_env(int dim, int m_hidden, std::uint64_t seed,
                                int n_items = 100, int capacity = 5,
                                int horizon = 1000,
                                ContextSource source = ContextSource::gaussian);

// Cosine ground truth outside the estimator class. truth_scale sets the
// norm of the direction w* (and with it how many cosine periods the context
// distribution sweeps).
Environment make_misspecified_env(int dim, std::uint64_t seed,
                                  int n_items = 100, int capacity = 5,
                                  int horizon = 1000,
                                  ContextSource source =
                                      ContextSource::gaussian,
                                  double truth_scale = 0.4);

struct FeatureTable {
  std::vector<Vec> rows;
  int dim = 0;
};

// CSV with header `id,f0,...,f{d-1}` and an optional trailing `label`.
FeatureTable load_feature_file(const std::string& path);

// Fresh context draw for round t (redrawn every round in both phases).
ContextSet draw_context(const Environment& env, int round, Rng& rng);

struct RoundLog {
  int round;
  double regret_inst;
  double regret_cum;
  std::vector<int> assortment;
  int chosen;  // -1 = outside option
  double beta;
  double optimism_frac;
  double max_grad_norm;
  bool explored;
};

struct RunTrace {
  std::string policy_name;
  std::uint64_t seed = 0;
  std::vector<RoundLog> rounds;
  std::vector<GramLogRow> gram;
  double wall_seconds = 0.0;
  // Schedule echo for audits; zero/NaN for policies without a Gram state.
  double lambda = 0.0;
  int d_w = 0;
  int t0 = 0;

  double final_regret() const {
    return rounds.empty() ? 0.0 : rounds.back().regret_cum;
  }
  double cum_regret_at(int round) const;
};

// Protocol: per round draw X_t, let the policy choose, sample the user's
// choice from the true MNL distribution, feed the record back, and account
// regret against the exact oracle assortment.
RunTrace run_episode(const Environment& env, Policy& policy,
                     std::uint64_t seed);

}  // namespace mnl_lab
