#pragma once

// MNL choice probabilities, sampling, expected reward, and the
// reverse-Lipschitz diagnostic. Pure functions throughout; utilities are
// shifted by max(0, max_i u_i) before exponentiation so values up to +-700
// stay stable (the outside option participates with utility 0).

#include <optional>
#include <span>

#include "mnl_lab/core.hpp"

namespace mnl_lab {

struct ChoiceDistribution {
  double p_outside;
  Vec p_items;  // aligned with the assortment's item order
};

// p_i = exp(u_i) / (1 + sum_j exp(u_j)); p_outside = 1 / (1 + sum exp(u_j)).
ChoiceDistribution choice_probabilities(std::span<const double> utilities);

// Single multinomial draw; nullopt means the outside option.
std::optional<int> sample_choice(const ChoiceDistribution& dist, Rng& rng);

// sum_i exp(u_i) r_i / (1 + sum_j exp(u_j))
double expected_reward(std::span<const double> utilities,
                       std::span<const double> revenues);

// Property-test oracle for the reward gap bound:
// |R(u, r) - R(v, r)| <= max_i |u_i - v_i| whenever |r_i| <= 1.
bool reward_gap_bound_check(std::span<const double> u,
                            std::span<const double> v,
                            std::span<const double> revenues);

// Conservative estimate of kappa_0 = min_{||a|| <= C} min_i h_i(a)(1 - sum_j
// h_j(a)) by grid search over the ball (grid points outside the ball are
// radially projected onto the sphere, so the boundary is covered).
double reverse_lipschitz_constant(int dim, double utility_cap,
                                  int grid_resolution);

// h(a) for the reverse-Lipschitz map: h_i = exp(a_i)/(1 + sum_j exp(a_j)).
Vec mnl_probability_map(std::span<const double> a);

}  // namespace mnl_lab
