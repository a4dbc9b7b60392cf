#pragma once

// Likelihood losses and their analytic gradients, plus Adam-based
// minimization with best-iterate tracking and warm starts.

#include <functional>
#include <limits>
#include <span>
#include <string>

#include "mnl_lab/core.hpp"
#include "mnl_lab/utility.hpp"

namespace mnl_lab {

struct OptimizerConfig {
  double learning_rate = 1e-4;
  int iterations = 2000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool warm_start = true;
  int per_round_iterations = 50;
  // Projection of the learned parameter onto a Euclidean ball after each
  // step; non-finite radius disables (the default, matching unconstrained
  // training).
  double projection_radius = std::numeric_limits<double>::infinity();
  int restarts = 1;
  double restart_scale = 1.0;  // restart inits drawn Unif[-scale, scale]
};

// Negative log-likelihood of observed choices under the exact MNL model,
// summed over stored rounds.
class PilotLoss {
 public:
  explicit PilotLoss(const UtilityModel& model) : model_(&model) {}

  void add_record(const ChoiceRecord& rec);
  int n_records() const { return static_cast<int>(chosen_pos_.size()); }

  // Returns the loss value; writes the gradient (zeroed first) into grad.
  double value_and_grad(std::span<const double> w,
                        std::span<double> grad) const;
  double value(std::span<const double> w) const;

  const UtilityModel& model() const { return *model_; }

 private:
  const UtilityModel* model_;
  // One flattened entry per offered item, grouped by round.
  std::vector<Vec> features_;     // per round: K_s * d
  std::vector<int> sizes_;        // K_s
  std::vector<int> chosen_pos_;   // -1 = outside
};

// Phase-II regularized loss: exact MNL likelihood of a linearized model.
// Each stored round carries frozen anchors, so utilities are affine in w:
//   u_i(w) = base_i + g_i . w,   base_i = f_s(x_i) - g_i . w_s.
class LinearizedLoss {
 public:
  LinearizedLoss(int d_w, double lambda, Vec center);

  // bases: K values; grads: K x d_w row-major; chosen_pos: -1 = outside.
  void add_round(std::span<const double> bases, const double* grads, int k,
                 int chosen_pos);

  double value_and_grad(std::span<const double> w,
                        std::span<double> grad) const;
  double value(std::span<const double> w) const;

  int n_rounds() const { return static_cast<int>(sizes_.size()); }
  double lambda() const { return lambda_; }
  const Vec& center() const { return center_; }
  int param_dim() const { return d_w_; }

 private:
  int d_w_;
  double lambda_;
  Vec center_;
  Vec bases_;
  Vec grads_;
  std::vector<int> sizes_;
  std::vector<int> chosen_pos_;
};

// value_and_grad callback: writes gradient, returns loss.
using LossFn =
    std::function<double(std::span<const double>, std::span<double>)>;

struct FitResult {
  Vec w;
  double loss;
};

// Adam with bias correction; keeps the best iterate by loss value, so the
// result never has higher loss than the initialization.
FitResult minimize_adam(const LossFn& f, Vec init, int iterations,
                        const OptimizerConfig& cfg);

// Phase-I pilot fit over cfg.iterations (optionally multi-restart; restarts
// redraw the init entries uniformly from [-1, 1] using rng).
Vec fit_pilot(const PilotLoss& loss, const Vec& init,
              const OptimizerConfig& cfg, Rng& rng);

// Per-round warm-started refit over cfg.per_round_iterations.
Vec fit_round(const LinearizedLoss& loss, const Vec& warm,
              const OptimizerConfig& cfg);

// ---- checkpointing ----

struct AdamMoments {
  Vec m;
  Vec v;
  int t = 0;
};

struct Checkpoint {
  int round = 0;
  Vec w_hat;
  Vec w_pilot;
  AdamMoments moments;
};

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mnl_lab
