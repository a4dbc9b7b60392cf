#pragma once

// Executable checks of the theory-level properties: reverse Lipschitzness,
// pilot-estimator convergence scaling, and optimism rates. Ships as library
// code so the audit command can reuse it.

#include <string>
#include <vector>

#include "mnl_lab/core.hpp"
#include "mnl_lab/estimation.hpp"
#include "mnl_lab/simulator.hpp"

namespace mnl_lab {

struct LemmaCheckResult {
  std::string lemma_id;
  bool pass = true;
  double min_margin = 0.0;  // min over instances of lhs - rhs (>= 0 passes)
  Vec worst_witness;        // flattened witness of the minimal margin
  int n_instances = 0;
  double kappa0 = 0.0;      // constant used (reverse-Lipschitz check)
};

// Verifies ||h(a) - h(b)|| >= kappa0 ||a - b|| on n_pairs random pairs in
// the ball of radius cap, with kappa0 from reverse_lipschitz_constant.
// kappa0_override > 0 replaces the estimated constant (checker sanity).
LemmaCheckResult check_reverse_lipschitz(int dim, double cap, int n_pairs,
                                         Rng& rng,
                                         double kappa0_override = -1.0);

struct PilotConvergenceSpec {
  int dim = 3;
  int hidden = 3;  // truth and estimator share the class
  int n_items = 20;
  int capacity = 5;
  std::vector<int> t0_grid = {250, 500};
  int n_seeds = 10;
  int eval_samples = 10000;
  bool linear_class = false;
  ContextSource source = ContextSource::gaussian;
  OptimizerConfig opt;  // budget for the ERM approximation
  std::uint64_t base_seed = 7;
};

struct PilotConvergenceRow {
  int t0;
  double median_function_error;
  double mean_function_error;
  std::vector<double> per_seed_error;
};

// For each t0 in the grid: run t0 uniform rounds against a known truth, fit
// the pilot, and estimate E_{X,S}[ sum_{i in S} (f_what(x_i) - f*(x_i))^2 ]
// on fresh samples. Function-space error stands in for the (symmetry-laden)
// parameter distance.
std::vector<PilotConvergenceRow> check_pilot_convergence(
    const PilotConvergenceSpec& spec);

// Expected squared utility error of params vs the environment truth,
// estimated over n fresh (X, S) draws.
double function_error(const Environment& env, const UtilityModel& model,
                      const Vec& params, int n_samples, Rng& rng);

struct OptimismSummary {
  double fraction = 0.0;  // share of (t, i in S_t) with score >= true utility
  long total_items = 0;
  int rounds = 0;
};

// Aggregates the per-round optimism fractions recorded in traces.
OptimismSummary check_optimism_rate(const std::vector<RunTrace>& traces);

}  // namespace mnl_lab
