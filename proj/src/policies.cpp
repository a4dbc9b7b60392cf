#include "mnl_lab/policies.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mnl_lab/kernels.hpp"
#include "mnl_lab/mnl.hpp"

namespace mnl_lab {

namespace {

Vec random_init(int d_w, double scale, Rng& rng) {
  Vec w(d_w);
  for (double& v : w) v = rng.uniform(-scale, scale);
  return w;
}

Vec scores_for(const Assortment& s, std::span<const double> all_scores) {
  Vec out;
  out.reserve(s.size());
  for (const int i : s.items()) out.push_back(all_scores[i]);
  return out;
}

}  // namespace

// ---- OnlMnlPolicy ----

OnlMnlPolicy::OnlMnlPolicy(std::shared_ptr<const UtilityModel> model,
                           OnlMnlConfig cfg, int horizon, int capacity,
                           Rng init_rng)
    : Policy(capacity), model_(std::move(model)), cfg_(cfg),
      init_rng_(init_rng) {
  schedule_.horizon = horizon;
  schedule_.d_w = model_->param_dim();
  schedule_.kappa = cfg_.kappa;
  schedule_.mu = cfg_.mu;
  schedule_.c_lambda = cfg_.c_lambda;
  schedule_.c_beta = cfg_.c_beta;
  schedule_.beta_mode = cfg_.beta_mode;
  schedule_.t0 =
      cfg_.t0 >= 0 ? cfg_.t0
                   : std::min(horizon - 1,
                              Schedule::default_t0(cfg_.kappa, schedule_.d_w,
                                                   horizon));
  schedule_.validate();
  c_h_ = cfg_.c_h_override >= 0.0
             ? cfg_.c_h_override
             : model_->bound_constants(cfg_.param_cap, cfg_.feature_cap).c_h;
  w_hat_ = random_init(schedule_.d_w, cfg_.init_scale, init_rng_);
}

Assortment OnlMnlPolicy::choose(const ContextSet& ctx,
                                const RevenueVector& rev, Rng& rng) {
  ++round_;
  diag_ = DecisionDiag{};
  const int n = ctx.n_items();
  if (!phase_two_) {
    diag_.explored = true;
    return uniform_assortment_sample(n, capacity_, rng);
  }
  const int d_w = schedule_.d_w;
  cache_values_.resize(n);
  cache_grads_.resize(static_cast<std::size_t>(n) * d_w);
  Vec z(n);
  const double beta = schedule_.beta(round_);
  const double slack = beta * c_h_ / schedule_.lambda();
  for (int i = 0; i < n; ++i) {
    std::span<double> g{
        cache_grads_.data() + static_cast<std::size_t>(i) * d_w,
        static_cast<std::size_t>(d_w)};
    cache_values_[i] = model_->value_and_grad(w_hat_, ctx.item(i), g);
    z[i] = cache_values_[i] +
           std::sqrt(beta) * gram_->mahalanobis_inv_norm(g) + slack;
  }
  cache_round_ = round_;
  auto res = best_assortment(z, rev, capacity_, pick_solver(rev, n));
  diag_.beta = beta;
  diag_.offered_scores = scores_for(res.assortment, z);
  double max_maha_sq = 0.0, max_grad = 0.0;
  for (const int i : res.assortment.items()) {
    const std::span<const double> g{
        cache_grads_.data() + static_cast<std::size_t>(i) * d_w,
        static_cast<std::size_t>(d_w)};
    const double m = gram_->mahalanobis_inv_norm(g);
    max_maha_sq = std::max(max_maha_sq, m * m);
    max_grad = std::max(max_grad, std::sqrt(kern::sumsq(g.data(), d_w)));
  }
  diag_.max_maha_sq = max_maha_sq;
  diag_.max_grad_norm = max_grad;
  return res.assortment;
}

void OnlMnlPolicy::transition_to_phase_two() {
  PilotLoss pilot(*model_);
  for (const auto& rec : pilot_records_) pilot.add_record(rec);
  const Vec init = random_init(schedule_.d_w, cfg_.init_scale, init_rng_);
  OptimizerConfig pilot_cfg = cfg_.pilot_opt;
  pilot_cfg.restart_scale = cfg_.init_scale;
  w_pilot_ = fit_pilot(pilot, init, pilot_cfg, init_rng_);
  w_hat_ = w_pilot_;
  gram_.emplace(schedule_.d_w, schedule_.lambda(), cfg_.gram_audit_every);
  loss_.emplace(schedule_.d_w, schedule_.lambda(), w_pilot_);
  phase_two_ = true;
  pilot_records_.clear();
  pilot_records_.shrink_to_fit();
}

void OnlMnlPolicy::update(const ChoiceRecord& rec) {
  if (!phase_two_) {
    pilot_records_.push_back(rec);
    if (round_ == schedule_.t0) transition_to_phase_two();
    return;
  }
  if (cache_round_ != round_)
    throw ConfigMismatch("update without a matching choose");
  const int d_w = schedule_.d_w;
  const int k = rec.assortment.size();
  Vec bases(k);
  Vec grads(static_cast<std::size_t>(k) * d_w);
  int pos = 0;
  for (const int item : rec.assortment.items()) {
    const double* g =
        cache_grads_.data() + static_cast<std::size_t>(item) * d_w;
    std::memcpy(grads.data() + static_cast<std::size_t>(pos) * d_w, g,
                sizeof(double) * d_w);
    bases[pos] = cache_values_[item] - kern::dot(g, w_hat_.data(), d_w);
    ++pos;
  }
  loss_->add_round(bases, grads.data(), k, rec.chosen_position());
  gram_->update_batch(grads.data(), k);

  running_max_grad_norm_ =
      std::max(running_max_grad_norm_, diag_.max_grad_norm);
  potential_lhs_ += std::min(1.0, diag_.max_maha_sq);
  const bool audit_now =
      gram_log_.empty() ||
      (round_ - schedule_.t0) % cfg_.gram_audit_every == 0 ||
      round_ == schedule_.horizon;
  if (audit_now) {
    last_drift_ = gram_->inverse_drift();
    last_min_eig_ = gram_->min_eigenvalue();
  }
  const double cg = running_max_grad_norm_;
  const double rhs =
      2.0 * schedule_.d_w *
      std::log1p(double(round_ + 1) * cg * cg /
                 (schedule_.d_w * schedule_.lambda()));
  gram_log_.push_back({round_, last_min_eig_, last_drift_,
                       schedule_.beta(round_), potential_lhs_, rhs});

  if ((round_ - schedule_.t0) % cfg_.refit_every == 0)
    w_hat_ = fit_round(*loss_, w_hat_, cfg_.round_opt);
}

// ---- EpsGreedyPolicy ----

EpsGreedyPolicy::EpsGreedyPolicy(std::shared_ptr<const UtilityModel> model,
                                 EpsGreedyConfig cfg, int capacity,
                                 Rng init_rng)
    : Policy(capacity), model_(std::move(model)), cfg_(cfg),
      init_rng_(init_rng), epsilon_(cfg.epsilon0) {
  w_ = random_init(model_->param_dim(), cfg_.init_scale, init_rng_);
}

Assortment EpsGreedyPolicy::choose(const ContextSet& ctx,
                                   const RevenueVector& rev, Rng& rng) {
  ++round_;
  diag_ = DecisionDiag{};
  const int n = ctx.n_items();
  if (rng.uniform01() < epsilon_) {
    diag_.explored = true;
    return uniform_assortment_sample(n, capacity_, rng);
  }
  Vec u(n);
  for (int i = 0; i < n; ++i) u[i] = model_->value(w_, ctx.item(i));
  auto res = best_assortment(u, rev, capacity_, pick_solver(rev, n));
  diag_.offered_scores = scores_for(res.assortment, u);
  return res.assortment;
}

void EpsGreedyPolicy::update(const ChoiceRecord& rec) {
  epoch_records_.push_back(rec);
  epsilon_ = std::max(cfg_.floor, epsilon_ * cfg_.decay);
  // Epoch k covers rounds [2^{k-1}, 2^k - 1]; refit after its last round on
  // the records of that epoch only.
  if (round_ == (1 << epoch_) - 1) {
    PilotLoss loss(*model_);
    for (const auto& r : epoch_records_) loss.add_record(r);
    OptimizerConfig cfg = cfg_.opt;
    cfg.restarts = 1;
    w_ = fit_pilot(loss, w_, cfg, init_rng_);
    epoch_records_.clear();
    ++epoch_;
  }
}

// ---- LinearMnlPolicy ----

LinearMnlPolicy::LinearMnlPolicy(Mode mode, int dim, LinearBaselineConfig cfg,
                                 int capacity)
    : Policy(capacity), mode_(mode), dim_(dim), cfg_(cfg), w_(dim, 0.0),
      design_(dim, cfg.ridge) {}

Assortment LinearMnlPolicy::choose(const ContextSet& ctx,
                                   const RevenueVector& rev, Rng& rng) {
  ++round_;
  diag_ = DecisionDiag{};
  const int n = ctx.n_items();
  Vec u(n);
  const double radius =
      std::sqrt(dim_ * std::log(double(round_ + 1)));
  if (mode_ == Mode::ucb) {
    for (int i = 0; i < n; ++i) {
      const auto x = ctx.item(i);
      u[i] = kern::dot(w_.data(), x.data(), dim_) +
             cfg_.alpha * radius * design_.mahalanobis_inv_norm(x);
    }
  } else {
    // Perturbed parameter: w + scale * radius * L z with L L^T = A^{-1}.
    const Vec l = cholesky_lower(design_.v_inv(), dim_);
    Vec z(dim_);
    for (double& v : z) v = rng.normal();
    Vec w_tilde = w_;
    for (int i = 0; i < dim_; ++i) {
      double s = 0.0;
      for (int j = 0; j <= i; ++j)
        s += l[static_cast<std::size_t>(i) * dim_ + j] * z[j];
      w_tilde[i] += cfg_.ts_scale * radius * s;
    }
    for (int i = 0; i < n; ++i)
      u[i] = kern::dot(w_tilde.data(), ctx.item(i).data(), dim_);
  }
  auto res = best_assortment(u, rev, capacity_, pick_solver(rev, n));
  diag_.offered_scores = scores_for(res.assortment, u);
  return res.assortment;
}

double LinearMnlPolicy::objective(const Vec& w, Vec* grad,
                                  Vec* hessian) const {
  const int d = dim_;
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  if (hessian) std::fill(hessian->begin(), hessian->end(), 0.0);
  double total = 0.0;
  Vec u, mean_x(d);
  for (std::size_t r = 0; r < sizes_.size(); ++r) {
    const int k = sizes_[r];
    u.resize(k);
    for (int i = 0; i < k; ++i)
      u[i] = kern::dot(w.data(),
                       features_[r].data() + static_cast<std::size_t>(i) * d,
                       d);
    double shift = 0.0;
    for (const double v : u) shift = std::max(shift, v);
    double denom = std::exp(-shift);
    for (const double v : u) denom += std::exp(v - shift);
    const int chosen = chosen_pos_[r];
    total += shift + std::log(denom) - (chosen >= 0 ? u[chosen] : 0.0);
    if (!grad && !hessian) continue;
    std::fill(mean_x.begin(), mean_x.end(), 0.0);
    for (int i = 0; i < k; ++i) {
      const double p = std::exp(u[i] - shift) / denom;
      const double* x = features_[r].data() + static_cast<std::size_t>(i) * d;
      if (grad)
        kern::axpy(p - (chosen == i ? 1.0 : 0.0), x, grad->data(), d);
      if (hessian) {
        kern::rank1_update(hessian->data(), x, p, d);
        kern::axpy(p, x, mean_x.data(), d);
      }
    }
    if (hessian) kern::rank1_update(hessian->data(), mean_x.data(), -1.0, d);
  }
  total += 0.5 * cfg_.ridge * kern::sumsq(w.data(), d);
  if (grad) kern::axpy(cfg_.ridge, w.data(), grad->data(), d);
  if (hessian)
    for (int i = 0; i < d; ++i)
      (*hessian)[static_cast<std::size_t>(i) * d + i] += cfg_.ridge;
  return total;
}

void LinearMnlPolicy::refit() {
  const int d = dim_;
  Vec grad(d), hess(static_cast<std::size_t>(d) * d);
  for (int step = 0; step < cfg_.newton_steps; ++step) {
    const double value = objective(w_, &grad, &hess);
    Vec delta = spd_solve(hess, grad, d);
    double scale = 1.0;
    Vec trial(d);
    bool improved = false;
    for (int halve = 0; halve < 12; ++halve) {
      for (int i = 0; i < d; ++i) trial[i] = w_[i] - scale * delta[i];
      if (objective(trial, nullptr, nullptr) <= value) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
    double move = 0.0;
    for (int i = 0; i < d; ++i) {
      move = std::max(move, std::abs(w_[i] - trial[i]));
      w_[i] = trial[i];
    }
    if (move < 1e-10) break;
  }
}

void LinearMnlPolicy::update(const ChoiceRecord& rec) {
  const int k = rec.assortment.size();
  Vec feats(static_cast<std::size_t>(k) * dim_);
  int pos = 0;
  for (const int item : rec.assortment.items()) {
    const auto x = rec.context.item(item);
    std::memcpy(feats.data() + static_cast<std::size_t>(pos) * dim_, x.data(),
                sizeof(double) * dim_);
    ++pos;
  }
  design_.update_batch(feats.data(), k);
  features_.push_back(std::move(feats));
  sizes_.push_back(k);
  chosen_pos_.push_back(rec.chosen_position());
  if (round_ % cfg_.refit_every == 0) refit();
}

// ---- UniformPolicy / OraclePolicy ----

Assortment UniformPolicy::choose(const ContextSet& ctx,
                                 const RevenueVector& rev, Rng& rng) {
  diag_ = DecisionDiag{};
  diag_.explored = true;
  return uniform_assortment_sample(ctx.n_items(), capacity_, rng);
}

OraclePolicy::OraclePolicy(std::shared_ptr<const UtilityModel> truth,
                           Vec truth_params, int capacity)
    : Policy(capacity), truth_(std::move(truth)),
      params_(std::move(truth_params)) {}

Assortment OraclePolicy::choose(const ContextSet& ctx,
                                const RevenueVector& rev, Rng& rng) {
  diag_ = DecisionDiag{};
  const int n = ctx.n_items();
  Vec u(n);
  for (int i = 0; i < n; ++i) u[i] = truth_->value(params_, ctx.item(i));
  auto res = best_assortment(u, rev, capacity_, pick_solver(rev, n));
  diag_.offered_scores = scores_for(res.assortment, u);
  return res.assortment;
}

}  // namespace mnl_lab
