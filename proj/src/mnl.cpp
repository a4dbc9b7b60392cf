#include "mnl_lab/mnl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mnl_lab {

namespace {

void check_finite(std::span<const double> utilities) {
  for (const double u : utilities)
    if (!std::isfinite(u)) throw NonFiniteUtility("non-finite utility");
}

// Returns (shift, denom) with denom = exp(-shift) + sum_i exp(u_i - shift),
// shift = max(0, max_i u_i).
std::pair<double, double> shifted_denominator(std::span<const double> u) {
  double shift = 0.0;
  for (const double v : u) shift = std::max(shift, v);
  double denom = std::exp(-shift);
  for (const double v : u) denom += std::exp(v - shift);
  return {shift, denom};
}

}  // namespace

ChoiceDistribution choice_probabilities(std::span<const double> utilities) {
  check_finite(utilities);
  const auto [shift, denom] = shifted_denominator(utilities);
  ChoiceDistribution dist;
  dist.p_outside = std::exp(-shift) / denom;
  dist.p_items.resize(utilities.size());
  for (std::size_t i = 0; i < utilities.size(); ++i)
    dist.p_items[i] = std::exp(utilities[i] - shift) / denom;
  return dist;
}

std::optional<int> sample_choice(const ChoiceDistribution& dist, Rng& rng) {
  double u = rng.uniform01();
  if (u < dist.p_outside) return std::nullopt;
  u -= dist.p_outside;
  for (std::size_t i = 0; i < dist.p_items.size(); ++i) {
    if (u < dist.p_items[i]) return static_cast<int>(i);
    u -= dist.p_items[i];
  }
  // Rounding pushed u past the total mass; charge the last item.
  return dist.p_items.empty()
             ? std::nullopt
             : std::make_optional(static_cast<int>(dist.p_items.size()) - 1);
}

double expected_reward(std::span<const double> utilities,
                       std::span<const double> revenues) {
  if (utilities.size() != revenues.size())
    throw LengthMismatch("expected_reward: utilities vs revenues length");
  check_finite(utilities);
  const auto [shift, denom] = shifted_denominator(utilities);
  double num = 0.0;
  for (std::size_t i = 0; i < utilities.size(); ++i)
    num += std::exp(utilities[i] - shift) * revenues[i];
  return num / denom;
}

bool reward_gap_bound_check(std::span<const double> u,
                            std::span<const double> v,
                            std::span<const double> revenues) {
  if (u.size() != v.size() || u.size() != revenues.size())
    throw LengthMismatch("reward_gap_bound_check: length mismatch");
  double max_gap = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    max_gap = std::max(max_gap, std::abs(u[i] - v[i]));
  const double lhs =
      std::abs(expected_reward(u, revenues) - expected_reward(v, revenues));
  return lhs <= max_gap + 1e-12;
}

Vec mnl_probability_map(std::span<const double> a) {
  return choice_probabilities(a).p_items;
}

namespace {

// min_i h_i(a) (1 - sum_j h_j(a)) at one point.
double curvature_at(std::span<const double> a) {
  const auto dist = choice_probabilities(a);
  double min_h = std::numeric_limits<double>::infinity();
  for (const double h : dist.p_items) min_h = std::min(min_h, h);
  return min_h * dist.p_outside;
}

}  // namespace

double reverse_lipschitz_constant(int dim, double utility_cap,
                                  int grid_resolution) {
  if (dim < 1) throw DimensionMismatch("dim must be >= 1");
  if (utility_cap < 0.0) throw NonFiniteUtility("cap must be >= 0");
  if (utility_cap == 0.0) {
    Vec origin(dim, 0.0);
    return curvature_at(origin);
  }
  const int res = std::max(grid_resolution, 3) | 1;  // odd, so 0 and +-C hit
  Vec point(dim);
  std::vector<int> idx(dim, 0);
  double best = std::numeric_limits<double>::infinity();
  const double cap_sq = utility_cap * utility_cap;
  while (true) {
    double norm_sq = 0.0;
    for (int k = 0; k < dim; ++k) {
      point[k] = -utility_cap +
                 2.0 * utility_cap * double(idx[k]) / double(res - 1);
      norm_sq += point[k] * point[k];
    }
    if (norm_sq > cap_sq && norm_sq > 0.0) {
      // Project cube points outside the ball onto the sphere.
      const double scale = utility_cap / std::sqrt(norm_sq);
      for (double& v : point) v *= scale;
    }
    best = std::min(best, curvature_at(point));
    int k = 0;
    for (; k < dim; ++k) {
      if (++idx[k] < res) break;
      idx[k] = 0;
    }
    if (k == dim) break;
  }
  return best;
}

}  // namespace mnl_lab
