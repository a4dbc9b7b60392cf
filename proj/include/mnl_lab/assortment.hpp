#pragma once

// Expected-reward maximization over assortments of size <= K: exact brute
// force for small N, the top-K shortcut for uniform revenue (exact, since
// the uniform-revenue reward V/(1+V) is increasing in the total weight),
// and a revenue-ordered heuristic for general revenue at large N.

#include <span>

#include "mnl_lab/core.hpp"

namespace mnl_lab {

enum class SolverMethod { brute_force, top_k_uniform, revenue_ordered };

struct AssortmentSolver {
  SolverMethod method = SolverMethod::top_k_uniform;
  int brute_force_limit = 20;
};

struct SolveResult {
  Assortment assortment;
  double value;
  bool certified;  // true when the result is a proven argmax
};

// Utilities are length-N (one per item). Ties break toward smaller indices.
SolveResult best_assortment(std::span<const double> utilities,
                            const RevenueVector& revenues, int capacity,
                            const AssortmentSolver& solver);

// Exact optimum for regret accounting: top-K when revenues are uniform,
// brute force otherwise (throws BruteForceLimitExceeded beyond the limit).
double oracle_optimal_reward(std::span<const double> true_utilities,
                             const RevenueVector& revenues, int capacity,
                             int brute_force_limit = 20);

// Production solver choice for a given instance.
AssortmentSolver pick_solver(const RevenueVector& revenues, int n_items);

}  // namespace mnl_lab
