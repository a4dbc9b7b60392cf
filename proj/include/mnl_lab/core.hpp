#pragma once

// Domain types shared across the library: item contexts, assortments,
// choice feedback, revenues, parameter vectors. All immutable value types.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mnl_lab/rng.hpp"

namespace mnl_lab {

using Vec = std::vector<double>;

// ---- error taxonomy ----

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define MNL_LAB_ERROR(NAME)                    \
  struct NAME : Error {                        \
    using Error::Error;                        \
  }

MNL_LAB_ERROR(EmptyAssortment);
MNL_LAB_ERROR(DuplicateIndex);
MNL_LAB_ERROR(IndexOutOfRange);
MNL_LAB_ERROR(CapacityExceeded);
MNL_LAB_ERROR(DimensionMismatch);
MNL_LAB_ERROR(LengthMismatch);
MNL_LAB_ERROR(NonFiniteUtility);
MNL_LAB_ERROR(MissingAnchor);
MNL_LAB_ERROR(EmptyDataset);
MNL_LAB_ERROR(ScheduleOutOfRange);
MNL_LAB_ERROR(InvalidK);
MNL_LAB_ERROR(MethodRevenueMismatch);
MNL_LAB_ERROR(BruteForceLimitExceeded);
MNL_LAB_ERROR(MalformedCsv);
MNL_LAB_ERROR(ConfigError);
MNL_LAB_ERROR(ConfigMismatch);
MNL_LAB_ERROR(IoError);
MNL_LAB_ERROR(MissingDiagnostics);

#undef MNL_LAB_ERROR

// ---- contexts ----

// Per-round feature matrix: N items, each a length-d feature vector.
class ContextSet {
 public:
  ContextSet(int n_items, int dim, Vec flat, int round_index = 0,
             bool enforce_unit_ball = false);

  int n_items() const { return n_items_; }
  int dim() const { return dim_; }
  int round_index() const { return round_index_; }

  std::span<const double> item(int i) const {
    return {flat_.data() + static_cast<std::size_t>(i) * dim_,
            static_cast<std::size_t>(dim_)};
  }
  const Vec& flat() const { return flat_; }

 private:
  int n_items_;
  int dim_;
  int round_index_;
  Vec flat_;
};

// ---- assortments ----

// Sorted, distinct item indices; 1 <= size <= capacity.
class Assortment {
 public:
  const std::vector<int>& items() const { return items_; }
  int size() const { return static_cast<int>(items_.size()); }
  int capacity() const { return capacity_; }

  bool operator==(const Assortment& other) const {
    return items_ == other.items_;
  }

  friend Assortment make_assortment(std::vector<int> indices, int capacity,
                                    int n_items);

 private:
  Assortment(std::vector<int> items, int capacity)
      : items_(std::move(items)), capacity_(capacity) {}
  std::vector<int> items_;
  int capacity_ = 0;
};

// Canonicalizes (sorts) and validates. Throws EmptyAssortment,
// DuplicateIndex, IndexOutOfRange, CapacityExceeded.
Assortment make_assortment(std::vector<int> indices, int capacity,
                           int n_items);

// Uniform draw from { S subset of [N] : 1 <= |S| <= K }: pick the size k
// with probability C(N,k) / sum_j C(N,j), then a uniform k-subset.
Assortment uniform_assortment_sample(int n_items, int capacity, Rng& rng);

// Number of assortments of each size 1..K, as doubles (N choose k).
std::vector<double> assortment_size_weights(int n_items, int capacity);

// ---- revenues ----

// Per-item revenue in [0,1]; the outside option earns 0 by convention.
class RevenueVector {
 public:
  explicit RevenueVector(Vec revenues);
  static RevenueVector uniform(int n_items, double value = 1.0);

  int size() const { return static_cast<int>(revenues_.size()); }
  double operator[](int i) const { return revenues_[i]; }
  const Vec& values() const { return revenues_; }
  bool is_uniform() const { return uniform_; }

 private:
  Vec revenues_;
  bool uniform_ = false;
};

// ---- choice feedback ----

// One round of feedback. `chosen` is nullopt for the outside option,
// otherwise an item index that must belong to the assortment.
struct ChoiceRecord {
  ContextSet context;
  Assortment assortment;
  std::optional<int> chosen;

  ChoiceRecord(ContextSet ctx, Assortment s, std::optional<int> pick);

  // Position of the chosen item within the assortment, or -1 for outside.
  int chosen_position() const;

  // One-hot vector over {outside} + assortment, outside first.
  std::vector<int> one_hot() const;
};

}  // namespace mnl_lab
