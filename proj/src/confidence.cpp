#include "mnl_lab/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mnl_lab/kernels.hpp"

namespace mnl_lab {

// ---- dense SPD helpers ----

Vec cholesky_lower(const Vec& m, int dim) {
  Vec l(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = m[static_cast<std::size_t>(i) * dim + j];
      for (int k = 0; k < j; ++k)
        sum -= l[static_cast<std::size_t>(i) * dim + k] *
               l[static_cast<std::size_t>(j) * dim + k];
      if (i == j) {
        if (sum <= 0.0)
          throw Error("cholesky: matrix not positive definite");
        l[static_cast<std::size_t>(i) * dim + j] = std::sqrt(sum);
      } else {
        l[static_cast<std::size_t>(i) * dim + j] =
            sum / l[static_cast<std::size_t>(j) * dim + j];
      }
    }
  }
  return l;
}

Vec spd_solve(const Vec& a, const Vec& b, int dim) {
  const Vec l = cholesky_lower(a, dim);
  Vec y(dim);
  for (int i = 0; i < dim; ++i) {
    double sum = b[i];
    for (int k = 0; k < i; ++k)
      sum -= l[static_cast<std::size_t>(i) * dim + k] * y[k];
    y[i] = sum / l[static_cast<std::size_t>(i) * dim + i];
  }
  Vec x(dim);
  for (int i = dim - 1; i >= 0; --i) {
    double sum = y[i];
    for (int k = i + 1; k < dim; ++k)
      sum -= l[static_cast<std::size_t>(k) * dim + i] * x[k];
    x[i] = sum / l[static_cast<std::size_t>(i) * dim + i];
  }
  return x;
}

Vec spd_inverse(const Vec& m, int dim) {
  const Vec l = cholesky_lower(m, dim);
  // Invert L in place (forward substitution), then V^-1 = L^-T L^-1.
  Vec linv(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) {
    linv[static_cast<std::size_t>(i) * dim + i] =
        1.0 / l[static_cast<std::size_t>(i) * dim + i];
    for (int j = 0; j < i; ++j) {
      double sum = 0.0;
      for (int k = j; k < i; ++k)
        sum += l[static_cast<std::size_t>(i) * dim + k] *
               linv[static_cast<std::size_t>(k) * dim + j];
      linv[static_cast<std::size_t>(i) * dim + j] =
          -sum / l[static_cast<std::size_t>(i) * dim + i];
    }
  }
  Vec out(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j) {
      double sum = 0.0;
      for (int k = i; k < dim; ++k)
        sum += linv[static_cast<std::size_t>(k) * dim + i] *
               linv[static_cast<std::size_t>(k) * dim + j];
      out[static_cast<std::size_t>(i) * dim + j] = sum;
      out[static_cast<std::size_t>(j) * dim + i] = sum;
    }
  return out;
}

// ---- GramState ----

GramState::GramState(int dim, double lambda, int refresh_interval)
    : dim_(dim), lambda_(lambda), refresh_interval_(refresh_interval),
      v_(static_cast<std::size_t>(dim) * dim, 0.0),
      v_inv_(static_cast<std::size_t>(dim) * dim, 0.0), scratch_(dim) {
  if (dim < 1) throw DimensionMismatch("GramState dim must be >= 1");
  if (!(lambda > 0.0)) throw ConfigError("GramState lambda must be positive");
  for (int i = 0; i < dim; ++i) {
    v_[static_cast<std::size_t>(i) * dim + i] = lambda;
    v_inv_[static_cast<std::size_t>(i) * dim + i] = 1.0 / lambda;
  }
}

void GramState::update(std::span<const double> g) {
  if (static_cast<int>(g.size()) != dim_)
    throw DimensionMismatch("GramState update: gradient length mismatch");
  kern::rank1_update(v_.data(), g.data(), 1.0, dim_);
  // Sherman-Morrison: V_inv -= (V_inv g)(V_inv g)^T / (1 + g^T V_inv g).
  kern::matvec(v_inv_.data(), g.data(), scratch_.data(), dim_, dim_);
  const double s = 1.0 + kern::dot(g.data(), scratch_.data(), dim_);
  kern::rank1_update(v_inv_.data(), scratch_.data(), -1.0 / s, dim_);
  ++update_count_;
}

void GramState::update_batch(const double* grads, int k) {
  for (int i = 0; i < k; ++i)
    update({grads + static_cast<std::size_t>(i) * dim_,
            static_cast<std::size_t>(dim_)});
  if (k > 0 && ++batches_since_refresh_ >= refresh_interval_) {
    refresh_inverse();
    batches_since_refresh_ = 0;
  }
}

double GramState::mahalanobis_inv_norm(std::span<const double> g) const {
  if (static_cast<int>(g.size()) != dim_)
    throw DimensionMismatch("mahalanobis: gradient length mismatch");
  if (scratch_.size() != static_cast<std::size_t>(dim_))
    scratch_.resize(dim_);
  const double q =
      kern::quadform(v_inv_.data(), g.data(), scratch_.data(), dim_);
  return std::sqrt(std::max(q, 0.0));
}

double GramState::inverse_drift() const {
  double worst = 0.0;
  Vec row(dim_);
  for (int i = 0; i < dim_; ++i) {
    kern::matvec(v_inv_.data(), v_.data() + static_cast<std::size_t>(i) * dim_,
                 row.data(), dim_, dim_);
    for (int j = 0; j < dim_; ++j) {
      const double expect = i == j ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(row[j] - expect));
    }
  }
  return worst;
}

double GramState::refresh_inverse() {
  const double drift = inverse_drift();
  v_inv_ = spd_inverse(v_, dim_);
  return drift;
}

double GramState::min_eigenvalue() const {
  // Power iteration on V_inv; min eig of V = 1 / max eig of V_inv.
  Vec x(dim_, 1.0 / std::sqrt(double(dim_)));
  Vec y(dim_);
  double eig = 0.0;
  for (int it = 0; it < 200; ++it) {
    kern::matvec(v_inv_.data(), x.data(), y.data(), dim_, dim_);
    const double norm = std::sqrt(kern::sumsq(y.data(), dim_));
    if (norm == 0.0) break;
    for (int i = 0; i < dim_; ++i) x[i] = y[i] / norm;
    const double next = norm;
    if (it > 10 && std::abs(next - eig) <= 1e-14 * std::abs(next)) {
      eig = next;
      break;
    }
    eig = next;
  }
  return eig > 0.0 ? 1.0 / eig : 0.0;
}

// ---- Schedule ----

double Schedule::lambda() const {
  return c_lambda * std::pow(kappa, -2.5) * d_w * std::sqrt(double(horizon));
}

double Schedule::beta(int t) const {
  if (beta_mode == BetaMode::constant)
    return c_beta * std::pow(mu, -2.0) * std::pow(kappa, -4.0) * d_w;
  return c_beta * std::pow(kappa, -4.0) * d_w * double(t) / double(horizon);
}

int Schedule::default_t0(double kappa, int d_w, int horizon) {
  return static_cast<int>(
      std::ceil(std::pow(kappa, -1.5) * d_w * std::sqrt(double(horizon))));
}

void Schedule::validate() const {
  if (horizon < 1 || d_w < 1) throw ConfigError("schedule: T and d_w >= 1");
  if (!(kappa > 0.0 && kappa <= 0.25))
    throw ConfigError("schedule: kappa must lie in (0, 1/4]");
  if (!(mu > 0.0)) throw ConfigError("schedule: mu must be positive");
  if (!(lambda() > 0.0)) throw ConfigError("schedule: lambda must be positive");
  // c_beta = 0 is the degenerate greedy collapse; negatives are invalid.
  if (!(beta(horizon) >= 0.0) || !(beta(1) >= 0.0))
    throw ConfigError("schedule: beta_t must be non-negative");
  if (t0 < 0 || t0 >= horizon)
    throw ConfigError("schedule: t0 must lie in [0, T)");
}

double optimistic_utility(const GramState& state, const Schedule& schedule,
                          int t, double f_hat, std::span<const double> g,
                          double c_h) {
  if (t <= schedule.t0 || t > schedule.horizon)
    throw ScheduleOutOfRange("optimistic utility defined for t0 < t <= T");
  const double beta = schedule.beta(t);
  return f_hat + std::sqrt(beta) * state.mahalanobis_inv_norm(g) +
         beta * c_h / schedule.lambda();
}

PotentialCheck elliptical_potential_series(std::span<const double> max_maha_sq,
                                           const Schedule& schedule,
                                           double c_g) {
  PotentialCheck out;
  const double lambda = schedule.lambda();
  const double d_w = schedule.d_w;
  out.lhs.reserve(max_maha_sq.size());
  out.rhs.reserve(max_maha_sq.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < max_maha_sq.size(); ++n) {
    acc += std::min(1.0, max_maha_sq[n]);
    // Prefix covers s = t0+1 .. t0+n+1, so the bound is evaluated at
    // t = t0 + n + 2.
    const int t = schedule.t0 + static_cast<int>(n) + 2;
    const double bound =
        2.0 * d_w * std::log1p(double(t) * c_g * c_g / (d_w * lambda));
    out.lhs.push_back(acc);
    out.rhs.push_back(bound);
    if (out.pass && acc > bound + 1e-12) {
      out.pass = false;
      out.first_violation_round = t;
    }
  }
  return out;
}

bool elliptical_potential_check(std::span<const double> max_maha_sq,
                                const Schedule& schedule, double c_g) {
  return elliptical_potential_series(max_maha_sq, schedule, c_g).pass;
}

}  // namespace mnl_lab
