#pragma once

// Experiment execution: seed sweeps over a parallel pool, trace/aggregate
// CSV emission, SVG regret plots, the lemma-audit report, and grid search
// over the schedule constants.

#include <string>
#include <vector>

#include "mnl_lab/config.hpp"
#include "mnl_lab/simulator.hpp"

namespace mnl_lab {

struct AggregateCurve {
  std::string policy;
  Vec mean;  // length T, cumulative regret
  Vec stddev;
  double final_mean = 0.0;
  double final_std = 0.0;
  double wall_mean = 0.0;
};

struct AggregateResult {
  int horizon = 0;
  std::vector<AggregateCurve> curves;
  std::vector<RunTrace> traces;  // all (policy, seed) runs
};

// Mean curve is the exact arithmetic mean of per-seed curves; std is the
// population standard deviation.
AggregateResult aggregate_traces(std::vector<RunTrace> traces, int horizon,
                                 const std::vector<std::string>& policy_order);

// Runs every (policy, seed) pair on a worker pool (results are independent
// of the worker count), writes trace_<policy>_<seed>.csv (+ sidecar JSON,
// + gram_<policy>_<seed>.csv when present), aggregate.csv and regret.svg.
AggregateResult run_experiment(const ExperimentConfig& cfg);

// Variant that keeps everything in memory (no files). Used by tests and by
// the grid search.
AggregateResult run_experiment_in_memory(const ExperimentConfig& cfg);

// Audits completed traces in trace_dir: elliptical potential, Gram drift
// and eigenvalue floors, reverse-Lipschitz fuzzing, optimism summary.
// Writes audit.md and audit.json into out_dir; returns true when every
// pass/fail check passed.
bool run_audit(const ExperimentConfig& cfg, const std::string& trace_dir,
               const std::string& out_dir);

struct GridPoint {
  double c_lambda;
  double c_beta;
  double mean_final_regret;
};

struct GridResult {
  std::vector<GridPoint> table;
  GridPoint best;
};

// Evaluates mean final regret of the first onl-mnl policy over the grid of
// (c_lambda, c_beta); writes grid.csv into the output dir.
GridResult grid_search(const ExperimentConfig& cfg);

// ---- file helpers (also used by tests) ----

void write_trace_csv(const std::string& path, const RunTrace& trace);
void write_gram_csv(const std::string& path, const RunTrace& trace);
void write_trace_sidecar(const std::string& path, const RunTrace& trace,
                         const ExperimentConfig& cfg);
void write_aggregate_csv(const std::string& path, const AggregateResult& agg);
void write_regret_svg(const std::string& path, const AggregateResult& agg);

RunTrace read_trace_csv(const std::string& path);

}  // namespace mnl_lab
