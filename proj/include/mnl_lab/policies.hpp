#pragma once

// Bandit policies behind one interface: the two-phase optimistic policy for
// non-linear utilities, plus epsilon-greedy, linear UCB and linear TS
// baselines, a uniform sampler, and a truth-aware oracle.

#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "mnl_lab/assortment.hpp"
#include "mnl_lab/confidence.hpp"
#include "mnl_lab/core.hpp"
#include "mnl_lab/estimation.hpp"
#include "mnl_lab/utility.hpp"

namespace mnl_lab {

// Per-decision diagnostics surfaced to the run loop.
struct DecisionDiag {
  double beta = std::numeric_limits<double>::quiet_NaN();
  double max_maha_sq = std::numeric_limits<double>::quiet_NaN();
  double max_grad_norm = std::numeric_limits<double>::quiet_NaN();
  Vec offered_scores;  // score used for selection, per offered item
  bool explored = false;
};

// One audit row of the Gram-state log.
struct GramLogRow {
  int round;
  double min_eig;
  double inv_drift;
  double beta;
  double lhs_potential;
  double rhs_potential;
};

class Policy {
 public:
  explicit Policy(int capacity) : capacity_(capacity) {}
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  virtual Assortment choose(const ContextSet& ctx, const RevenueVector& rev,
                            Rng& rng) = 0;
  virtual void update(const ChoiceRecord& rec) = 0;

  int capacity() const { return capacity_; }
  const DecisionDiag& last_diag() const { return diag_; }
  virtual const std::vector<GramLogRow>* gram_log() const { return nullptr; }

 protected:
  int capacity_;
  DecisionDiag diag_;
};

// ---- two-phase optimistic policy ----

struct OnlMnlConfig {
  int hidden = 3;
  double kappa = 0.1;
  double mu = 1.0;
  double c_lambda = 1e-2;
  double c_beta = 1e-2;
  Schedule::BetaMode beta_mode = Schedule::BetaMode::linear_in_t;
  int t0 = -1;  // -1: schedule default ceil(kappa^{-3/2} d_w sqrt(T))
  int refit_every = 1;
  OptimizerConfig pilot_opt;  // iterations/learning_rate defaults apply
  OptimizerConfig round_opt;
  double param_cap = 1.0;
  double feature_cap = 1.0;
  double c_h_override = -1.0;  // >= 0 replaces the model bound
  double init_scale = 1.0;
  int gram_audit_every = 100;
};

class OnlMnlPolicy final : public Policy {
 public:
  // init_rng seeds the parameter initialization and pilot-fit restarts.
  OnlMnlPolicy(std::shared_ptr<const UtilityModel> model, OnlMnlConfig cfg,
               int horizon, int capacity, Rng init_rng);

  std::string name() const override { return "onl-mnl"; }
  Assortment choose(const ContextSet& ctx, const RevenueVector& rev,
                    Rng& rng) override;
  void update(const ChoiceRecord& rec) override;
  const std::vector<GramLogRow>* gram_log() const override {
    return &gram_log_;
  }

  const Schedule& schedule() const { return schedule_; }
  bool in_phase_two() const { return phase_two_; }
  const Vec& w_hat() const { return w_hat_; }
  const Vec& w_pilot() const { return w_pilot_; }
  const GramState* gram() const { return gram_ ? &*gram_ : nullptr; }
  const LinearizedLoss* linearized_loss() const {
    return loss_ ? &*loss_ : nullptr;
  }
  double c_h() const { return c_h_; }
  int round() const { return round_; }

 private:
  void transition_to_phase_two();

  std::shared_ptr<const UtilityModel> model_;
  OnlMnlConfig cfg_;
  Schedule schedule_;
  Rng init_rng_;
  double c_h_ = 0.0;

  int round_ = 0;  // index of the round currently being played
  bool phase_two_ = false;
  std::vector<ChoiceRecord> pilot_records_;
  Vec w_pilot_;
  Vec w_hat_;
  std::optional<GramState> gram_;
  std::optional<LinearizedLoss> loss_;

  // Anchors computed in choose() for every item of the current round.
  Vec cache_values_;
  Vec cache_grads_;
  int cache_round_ = -1;

  std::vector<GramLogRow> gram_log_;
  double running_max_grad_norm_ = 0.0;
  double potential_lhs_ = 0.0;
  double last_min_eig_ = 0.0;
  double last_drift_ = 0.0;
};

// ---- epsilon-greedy with epoch doubling ----

struct EpsGreedyConfig {
  int hidden = 3;
  double epsilon0 = 0.1;
  double decay = 0.995;
  double floor = 0.001;
  OptimizerConfig opt;  // Adam, defaults lr 1e-4 x 2000 iterations
  double init_scale = 1.0;
};

class EpsGreedyPolicy final : public Policy {
 public:
  EpsGreedyPolicy(std::shared_ptr<const UtilityModel> model,
                  EpsGreedyConfig cfg, int capacity, Rng init_rng);

  std::string name() const override { return "eps-greedy-mnl"; }
  Assortment choose(const ContextSet& ctx, const RevenueVector& rev,
                    Rng& rng) override;
  void update(const ChoiceRecord& rec) override;

  double epsilon() const { return epsilon_; }
  int epoch() const { return epoch_; }
  const Vec& params() const { return w_; }
  // Inject parameters (e.g. the truth, when the class matches it).
  void set_params(Vec w) { w_ = std::move(w); }

 private:
  std::shared_ptr<const UtilityModel> model_;
  EpsGreedyConfig cfg_;
  Rng init_rng_;
  Vec w_;
  double epsilon_;
  int epoch_ = 1;
  int round_ = 0;
  std::vector<ChoiceRecord> epoch_records_;
};

// ---- linear-utility baselines ----

// The cited baselines scale their exploration with sqrt(d log t); alpha and
// ts_scale multiply that standard radius.
struct LinearBaselineConfig {
  double alpha = 1.0;     // UCB bonus: alpha * sqrt(d log(t+1)) * ||x||_inv
  double ts_scale = 1.0;  // TS noise: ts_scale * sqrt(d log(t+1)) * A^{-1/2} z
  double ridge = 1.0;     // design-matrix regularizer
  int newton_steps = 5;
  int refit_every = 1;
};

class LinearMnlPolicy final : public Policy {
 public:
  enum class Mode { ucb, thompson };

  LinearMnlPolicy(Mode mode, int dim, LinearBaselineConfig cfg, int capacity);

  std::string name() const override {
    return mode_ == Mode::ucb ? "ucb-mnl" : "ts-mnl";
  }
  Assortment choose(const ContextSet& ctx, const RevenueVector& rev,
                    Rng& rng) override;
  void update(const ChoiceRecord& rec) override;

  const Vec& mle() const { return w_; }

 private:
  // NLL value/gradient and Gauss Hessian of the linear-MNL likelihood over
  // all stored rounds, plus the ridge term.
  double objective(const Vec& w, Vec* grad, Vec* hessian) const;
  void refit();

  Mode mode_;
  int dim_;
  LinearBaselineConfig cfg_;
  Vec w_;
  GramState design_;
  int round_ = 0;
  // Flat per-round storage: features (K_s x d), sizes, chosen positions.
  std::vector<Vec> features_;
  std::vector<int> sizes_;
  std::vector<int> chosen_pos_;
};

// ---- trivial policies ----

class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(int capacity) : Policy(capacity) {}
  std::string name() const override { return "uniform"; }
  Assortment choose(const ContextSet& ctx, const RevenueVector& rev,
                    Rng& rng) override;
  void update(const ChoiceRecord&) override {}
};

// Truth-aware; plays the oracle assortment every round. Zero regret by
// construction, used for harness validation.
class OraclePolicy final : public Policy {
 public:
  OraclePolicy(std::shared_ptr<const UtilityModel> truth, Vec truth_params,
               int capacity);

  std::string name() const override { return "oracle"; }
  Assortment choose(const ContextSet& ctx, const RevenueVector& rev,
                    Rng& rng) override;
  void update(const ChoiceRecord&) override {}

 private:
  std::shared_ptr<const UtilityModel> truth_;
  Vec params_;
};

}  // namespace mnl_lab
