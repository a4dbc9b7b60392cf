#include "mnl_lab/core.hpp"

#include <algorithm>
#include <cmath>

#include "mnl_lab/kernels.hpp"

namespace mnl_lab {

ContextSet::ContextSet(int n_items, int dim, Vec flat, int round_index,
                       bool enforce_unit_ball)
    : n_items_(n_items), dim_(dim), round_index_(round_index),
      flat_(std::move(flat)) {
  if (n_items_ < 1 || dim_ < 1)
    throw DimensionMismatch("ContextSet requires N >= 1 and d >= 1");
  if (flat_.size() != static_cast<std::size_t>(n_items_) * dim_)
    throw DimensionMismatch("ContextSet: flat buffer is not N*d");
  for (const double v : flat_)
    if (!std::isfinite(v))
      throw NonFiniteUtility("ContextSet: non-finite feature");
  if (enforce_unit_ball) {
    for (int i = 0; i < n_items_; ++i) {
      const auto x = item(i);
      if (std::sqrt(kern::sumsq(x.data(), x.size())) > 1.0 + 1e-9)
        throw IndexOutOfRange("ContextSet: feature norm exceeds unit ball");
    }
  }
}

Assortment make_assortment(std::vector<int> indices, int capacity,
                           int n_items) {
  if (indices.empty()) throw EmptyAssortment("assortment must be non-empty");
  if (capacity < 1) throw InvalidK("capacity must be positive");
  std::sort(indices.begin(), indices.end());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= n_items)
      throw IndexOutOfRange("assortment index " + std::to_string(indices[i]) +
                            " outside [0," + std::to_string(n_items) + ")");
    if (i > 0 && indices[i] == indices[i - 1])
      throw DuplicateIndex("duplicate assortment index " +
                           std::to_string(indices[i]));
  }
  if (static_cast<int>(indices.size()) > capacity)
    throw CapacityExceeded("assortment size " +
                           std::to_string(indices.size()) + " exceeds K=" +
                           std::to_string(capacity));
  return Assortment(std::move(indices), capacity);
}

std::vector<double> assortment_size_weights(int n_items, int capacity) {
  const int kmax = std::min(capacity, n_items);
  std::vector<double> weights(kmax);
  double binom = 1.0;  // C(N, 0)
  for (int k = 1; k <= kmax; ++k) {
    binom *= double(n_items - k + 1) / double(k);
    weights[k - 1] = binom;
  }
  return weights;
}

Assortment uniform_assortment_sample(int n_items, int capacity, Rng& rng) {
  if (n_items < 1) throw IndexOutOfRange("n_items must be >= 1");
  if (capacity < 1) throw InvalidK("capacity must be >= 1");
  const auto weights = assortment_size_weights(n_items, capacity);
  double total = 0.0;
  for (const double w : weights) total += w;
  double u = rng.uniform01() * total;
  int size = static_cast<int>(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (u < weights[k]) {
      size = static_cast<int>(k) + 1;
      break;
    }
    u -= weights[k];
  }
  // Floyd's algorithm: uniform size-subset without materializing [N].
  std::vector<int> picked;
  picked.reserve(size);
  for (int j = n_items - size; j < n_items; ++j) {
    const int t = static_cast<int>(rng.uniform_int(j + 1));
    if (std::find(picked.begin(), picked.end(), t) == picked.end())
      picked.push_back(t);
    else
      picked.push_back(j);
  }
  return make_assortment(std::move(picked), capacity, n_items);
}

RevenueVector::RevenueVector(Vec revenues) : revenues_(std::move(revenues)) {
  if (revenues_.empty()) throw LengthMismatch("revenues must be non-empty");
  for (const double r : revenues_)
    if (!(r >= 0.0 && r <= 1.0))
      throw IndexOutOfRange("revenue outside [0,1]");
  uniform_ = std::all_of(revenues_.begin(), revenues_.end(),
                         [&](double r) { return r == revenues_[0]; });
}

RevenueVector RevenueVector::uniform(int n_items, double value) {
  return RevenueVector(Vec(n_items, value));
}

ChoiceRecord::ChoiceRecord(ContextSet ctx, Assortment s,
                           std::optional<int> pick)
    : context(std::move(ctx)), assortment(std::move(s)), chosen(pick) {
  if (chosen.has_value()) {
    const auto& items = assortment.items();
    if (std::find(items.begin(), items.end(), *chosen) == items.end())
      throw IndexOutOfRange("chosen item not in assortment");
  }
}

int ChoiceRecord::chosen_position() const {
  if (!chosen.has_value()) return -1;
  const auto& items = assortment.items();
  const auto it = std::find(items.begin(), items.end(), *chosen);
  return static_cast<int>(it - items.begin());
}

std::vector<int> ChoiceRecord::one_hot() const {
  std::vector<int> y(assortment.size() + 1, 0);
  y[chosen_position() + 1] = 1;
  return y;
}

}  // namespace mnl_lab
