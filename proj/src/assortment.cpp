#include "mnl_lab/assortment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mnl_lab/mnl.hpp"

namespace mnl_lab {

namespace {

double subset_reward(const std::vector<int>& subset,
                     std::span<const double> utilities,
                     const RevenueVector& revenues) {
  Vec u(subset.size()), r(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    u[i] = utilities[subset[i]];
    r[i] = revenues[subset[i]];
  }
  return expected_reward(u, r);
}

// Indices ordered by key descending, ties toward smaller index.
std::vector<int> order_desc(std::span<const double> key) {
  std::vector<int> idx(key.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return key[a] > key[b]; });
  return idx;
}

SolveResult top_k_by_utility(std::span<const double> utilities,
                             const RevenueVector& revenues, int capacity,
                             bool certified) {
  const int n = static_cast<int>(utilities.size());
  const int k = std::min(capacity, n);
  auto order = order_desc(utilities);
  std::vector<int> pick(order.begin(), order.begin() + k);
  const double value = subset_reward(pick, utilities, revenues);
  return {make_assortment(std::move(pick), capacity, n), value, certified};
}

SolveResult solve_brute_force(std::span<const double> utilities,
                              const RevenueVector& revenues, int capacity,
                              int limit) {
  const int n = static_cast<int>(utilities.size());
  if (n > limit)
    throw BruteForceLimitExceeded("brute force limited to N <= " +
                                  std::to_string(limit));
  std::vector<int> best;
  double best_value = -1.0;
  std::vector<int> comb;
  for (int k = 1; k <= std::min(capacity, n); ++k) {
    comb.resize(k);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
      const double value = subset_reward(comb, utilities, revenues);
      if (value > best_value) {
        best_value = value;
        best = comb;
      }
      // next lexicographic k-combination of [0, n)
      int i = k - 1;
      while (i >= 0 && comb[i] == n - k + i) --i;
      if (i < 0) break;
      ++comb[i];
      for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
  }
  return {make_assortment(std::move(best), capacity, n), best_value, true};
}

SolveResult solve_revenue_ordered(std::span<const double> utilities,
                                  const RevenueVector& revenues,
                                  int capacity) {
  const int n = static_cast<int>(utilities.size());
  std::vector<int> best;
  double best_value = -1.0;
  auto consider = [&](std::vector<int> subset) {
    const double value = subset_reward(subset, utilities, revenues);
    if (value > best_value) {
      best_value = value;
      best = std::move(subset);
    }
  };
  // Revenue-sorted prefixes, each intersected with the top utilities.
  const auto by_rev = order_desc(revenues.values());
  for (int p = 1; p <= n; ++p) {
    std::vector<int> prefix(by_rev.begin(), by_rev.begin() + p);
    std::stable_sort(prefix.begin(), prefix.end(), [&](int a, int b) {
      return utilities[a] > utilities[b];
    });
    const int k = std::min(capacity, p);
    consider(std::vector<int>(prefix.begin(), prefix.begin() + k));
  }
  // Top-K by utility and by r * exp(u).
  const auto by_u = order_desc(utilities);
  consider(std::vector<int>(by_u.begin(),
                            by_u.begin() + std::min(capacity, n)));
  Vec weighted(n);
  for (int i = 0; i < n; ++i)
    weighted[i] = revenues[i] * std::exp(std::min(utilities[i], 700.0));
  const auto by_w = order_desc(weighted);
  consider(std::vector<int>(by_w.begin(),
                            by_w.begin() + std::min(capacity, n)));
  return {make_assortment(std::move(best), capacity, n), best_value, false};
}

}  // namespace

SolveResult best_assortment(std::span<const double> utilities,
                            const RevenueVector& revenues, int capacity,
                            const AssortmentSolver& solver) {
  const int n = static_cast<int>(utilities.size());
  if (n < 1 || revenues.size() != n)
    throw LengthMismatch("best_assortment: utilities vs revenues length");
  if (capacity < 1 || capacity > n)
    throw InvalidK("best_assortment requires 1 <= K <= N");
  for (const double u : utilities)
    if (!std::isfinite(u)) throw NonFiniteUtility("non-finite utility");
  switch (solver.method) {
    case SolverMethod::brute_force:
      return solve_brute_force(utilities, revenues, capacity,
                               solver.brute_force_limit);
    case SolverMethod::top_k_uniform:
      if (!revenues.is_uniform())
        throw MethodRevenueMismatch(
            "top_k_uniform requires uniform revenues");
      return top_k_by_utility(utilities, revenues, capacity, true);
    case SolverMethod::revenue_ordered:
      return solve_revenue_ordered(utilities, revenues, capacity);
  }
  throw ConfigError("unknown solver method");
}

double oracle_optimal_reward(std::span<const double> true_utilities,
                             const RevenueVector& revenues, int capacity,
                             int brute_force_limit) {
  if (revenues.is_uniform()) {
    return top_k_by_utility(true_utilities, revenues, capacity, true).value;
  }
  return solve_brute_force(true_utilities, revenues, capacity,
                           brute_force_limit)
      .value;
}

AssortmentSolver pick_solver(const RevenueVector& revenues, int n_items) {
  AssortmentSolver solver;
  if (revenues.is_uniform()) {
    solver.method = SolverMethod::top_k_uniform;
  } else if (n_items <= solver.brute_force_limit) {
    solver.method = SolverMethod::brute_force;
  } else {
    solver.method = SolverMethod::revenue_ordered;
  }
  return solver;
}

}  // namespace mnl_lab
