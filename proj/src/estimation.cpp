#include "mnl_lab/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mnl_lab/kernels.hpp"

namespace mnl_lab {

namespace {

// Stable NLL contribution of one round given item utilities u (outside has
// utility 0): shift + log(exp(-shift) + sum exp(u - shift)) - u_chosen.
double round_nll(std::span<const double> u, int chosen_pos, Vec* probs) {
  double shift = 0.0;
  for (const double v : u) shift = std::max(shift, v);
  double denom = std::exp(-shift);
  for (const double v : u) denom += std::exp(v - shift);
  if (probs) {
    probs->resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      (*probs)[i] = std::exp(u[i] - shift) / denom;
  }
  const double u_chosen = chosen_pos >= 0 ? u[chosen_pos] : 0.0;
  return shift + std::log(denom) - u_chosen;
}

void project_ball(Vec& w, double radius) {
  if (!std::isfinite(radius)) return;
  const double norm = std::sqrt(kern::sumsq(w.data(), w.size()));
  if (norm > radius && norm > 0.0) {
    const double scale = radius / norm;
    for (double& v : w) v *= scale;
  }
}

}  // namespace

// ---- PilotLoss ----

void PilotLoss::add_record(const ChoiceRecord& rec) {
  const int d = model_->input_dim();
  if (rec.context.dim() != d)
    throw DimensionMismatch("record dim does not match model input dim");
  Vec flat(static_cast<std::size_t>(rec.assortment.size()) * d);
  int pos = 0;
  for (const int item : rec.assortment.items()) {
    const auto x = rec.context.item(item);
    std::memcpy(flat.data() + static_cast<std::size_t>(pos) * d, x.data(),
                sizeof(double) * d);
    ++pos;
  }
  features_.push_back(std::move(flat));
  sizes_.push_back(rec.assortment.size());
  chosen_pos_.push_back(rec.chosen_position());
}

double PilotLoss::value_and_grad(std::span<const double> w,
                                 std::span<double> grad) const {
  const int d_w = model_->param_dim();
  if (static_cast<int>(w.size()) != d_w ||
      static_cast<int>(grad.size()) != d_w)
    throw DimensionMismatch("pilot loss: parameter length mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  const int d = model_->input_dim();
  double total = 0.0;
  Vec u, probs;
  Vec item_grads;
  for (std::size_t r = 0; r < sizes_.size(); ++r) {
    const int k = sizes_[r];
    u.resize(k);
    item_grads.resize(static_cast<std::size_t>(k) * d_w);
    for (int i = 0; i < k; ++i) {
      const std::span<const double> x{
          features_[r].data() + static_cast<std::size_t>(i) * d,
          static_cast<std::size_t>(d)};
      u[i] = model_->value_and_grad(
          w, x, {item_grads.data() + static_cast<std::size_t>(i) * d_w,
                 static_cast<std::size_t>(d_w)});
    }
    total += round_nll(u, chosen_pos_[r], &probs);
    for (int i = 0; i < k; ++i) {
      const double coef = probs[i] - (chosen_pos_[r] == i ? 1.0 : 0.0);
      kern::axpy(coef, item_grads.data() + static_cast<std::size_t>(i) * d_w,
                 grad.data(), d_w);
    }
  }
  return total;
}

double PilotLoss::value(std::span<const double> w) const {
  if (static_cast<int>(w.size()) != model_->param_dim())
    throw DimensionMismatch("pilot loss: parameter length mismatch");
  const int d = model_->input_dim();
  double total = 0.0;
  Vec u;
  for (std::size_t r = 0; r < sizes_.size(); ++r) {
    const int k = sizes_[r];
    u.resize(k);
    for (int i = 0; i < k; ++i) {
      const std::span<const double> x{
          features_[r].data() + static_cast<std::size_t>(i) * d,
          static_cast<std::size_t>(d)};
      u[i] = model_->value(w, x);
    }
    total += round_nll(u, chosen_pos_[r], nullptr);
  }
  return total;
}

// ---- LinearizedLoss ----

LinearizedLoss::LinearizedLoss(int d_w, double lambda, Vec center)
    : d_w_(d_w), lambda_(lambda), center_(std::move(center)) {
  if (static_cast<int>(center_.size()) != d_w_)
    throw DimensionMismatch("linearized loss: center length != d_w");
  if (!(lambda_ > 0.0)) throw ConfigError("lambda must be positive");
}

void LinearizedLoss::add_round(std::span<const double> bases,
                               const double* grads, int k, int chosen_pos) {
  if (static_cast<int>(bases.size()) != k || grads == nullptr)
    throw MissingAnchor("anchor block incomplete");
  if (chosen_pos < -1 || chosen_pos >= k)
    throw IndexOutOfRange("chosen position outside round");
  bases_.insert(bases_.end(), bases.begin(), bases.end());
  grads_.insert(grads_.end(), grads,
                grads + static_cast<std::size_t>(k) * d_w_);
  sizes_.push_back(k);
  chosen_pos_.push_back(chosen_pos);
}

double LinearizedLoss::value_and_grad(std::span<const double> w,
                                      std::span<double> grad) const {
  if (static_cast<int>(w.size()) != d_w_ ||
      static_cast<int>(grad.size()) != d_w_)
    throw DimensionMismatch("linearized loss: parameter length mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  Vec u, probs;
  std::size_t offset = 0;
  for (std::size_t r = 0; r < sizes_.size(); ++r) {
    const int k = sizes_[r];
    u.resize(k);
    for (int i = 0; i < k; ++i)
      u[i] = bases_[offset + i] +
             kern::dot(grads_.data() + (offset + i) * d_w_, w.data(), d_w_);
    total += round_nll(u, chosen_pos_[r], &probs);
    for (int i = 0; i < k; ++i) {
      const double coef = probs[i] - (chosen_pos_[r] == i ? 1.0 : 0.0);
      kern::axpy(coef, grads_.data() + (offset + i) * d_w_, grad.data(),
                 d_w_);
    }
    offset += k;
  }
  // Ridge toward the pilot center.
  for (int j = 0; j < d_w_; ++j) {
    const double diff = w[j] - center_[j];
    total += 0.5 * lambda_ * diff * diff;
    grad[j] += lambda_ * diff;
  }
  return total;
}

double LinearizedLoss::value(std::span<const double> w) const {
  if (static_cast<int>(w.size()) != d_w_)
    throw DimensionMismatch("linearized loss: parameter length mismatch");
  double total = 0.0;
  Vec u;
  std::size_t offset = 0;
  for (std::size_t r = 0; r < sizes_.size(); ++r) {
    const int k = sizes_[r];
    u.resize(k);
    for (int i = 0; i < k; ++i)
      u[i] = bases_[offset + i] +
             kern::dot(grads_.data() + (offset + i) * d_w_, w.data(), d_w_);
    total += round_nll(u, chosen_pos_[r], nullptr);
    offset += k;
  }
  for (int j = 0; j < d_w_; ++j) {
    const double diff = w[j] - center_[j];
    total += 0.5 * lambda_ * diff * diff;
  }
  return total;
}

// ---- optimization ----

FitResult minimize_adam(const LossFn& f, Vec init, int iterations,
                        const OptimizerConfig& cfg) {
  const std::size_t n = init.size();
  Vec w = std::move(init);
  Vec g(n, 0.0), mom1(n, 0.0), mom2(n, 0.0);
  Vec best_w = w;
  double best_loss = f(w, g);
  for (int it = 1; it <= iterations; ++it) {
    const double c1 = 1.0 - std::pow(cfg.beta1, it);
    const double c2 = 1.0 - std::pow(cfg.beta2, it);
    kern::adam_step(w.data(), mom1.data(), mom2.data(), g.data(), n,
                    cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, c1,
                    c2);
    project_ball(w, cfg.projection_radius);
    const double loss = f(w, g);
    if (loss < best_loss) {
      best_loss = loss;
      best_w = w;
    }
  }
  return {std::move(best_w), best_loss};
}

Vec fit_pilot(const PilotLoss& loss, const Vec& init,
              const OptimizerConfig& cfg, Rng& rng) {
  if (loss.n_records() == 0) throw EmptyDataset("pilot fit needs records");
  const LossFn f = [&loss](std::span<const double> w, std::span<double> g) {
    return loss.value_and_grad(w, g);
  };
  FitResult best = minimize_adam(f, init, cfg.iterations, cfg);
  for (int r = 1; r < cfg.restarts; ++r) {
    Vec start(init.size());
    for (double& v : start) v = rng.uniform(-cfg.restart_scale, cfg.restart_scale);
    FitResult res = minimize_adam(f, std::move(start), cfg.iterations, cfg);
    if (res.loss < best.loss) best = std::move(res);
  }
  return std::move(best.w);
}

Vec fit_round(const LinearizedLoss& loss, const Vec& warm,
              const OptimizerConfig& cfg) {
  const LossFn f = [&loss](std::span<const double> w, std::span<double> g) {
    return loss.value_and_grad(w, g);
  };
  FitResult res = minimize_adam(f, warm, cfg.per_round_iterations, cfg);
  return std::move(res.w);
}

// ---- checkpointing ----

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  nlohmann::json j = {
      {"round", cp.round},
      {"w_hat", cp.w_hat},
      {"w_pilot", cp.w_pilot},
      {"optimizer_moments",
       {{"m", cp.moments.m}, {"v", cp.moments.v}, {"t", cp.moments.t}}}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  in >> j;
  Checkpoint cp;
  cp.round = j.at("round").get<int>();
  cp.w_hat = j.at("w_hat").get<Vec>();
  cp.w_pilot = j.at("w_pilot").get<Vec>();
  const auto& m = j.at("optimizer_moments");
  cp.moments.m = m.at("m").get<Vec>();
  cp.moments.v = m.at("v").get<Vec>();
  cp.moments.t = m.at("t").get<int>();
  return cp;
}

}  // namespace mnl_lab
