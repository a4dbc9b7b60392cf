#pragma once

// Gram matrix maintenance with an incrementally updated inverse, the
// lambda / beta_t / t0 schedules, Mahalanobis norms, optimistic utilities,
// and the elliptical-potential audit.

#include <span>
#include <vector>

#include "mnl_lab/core.hpp"

namespace mnl_lab {

// V = lambda I + sum of gradient outer products; V_inv kept in sync by
// Sherman-Morrison rank-1 corrections with a periodic direct re-inversion
// to bound numerical drift.
class GramState {
 public:
  GramState(int dim, double lambda, int refresh_interval = 100);

  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  int update_count() const { return update_count_; }
  const Vec& v() const { return v_; }
  const Vec& v_inv() const { return v_inv_; }

  // One rank-1 correction: V += g g^T.
  void update(std::span<const double> g);

  // One round's worth of corrections: k gradients, row-major k x dim.
  // Triggers the periodic re-inversion.
  void update_batch(const double* grads, int k);

  // sqrt(g^T V_inv g)
  double mahalanobis_inv_norm(std::span<const double> g) const;

  // ||V * V_inv - I||_max
  double inverse_drift() const;

  // Recompute V_inv from V by Cholesky; returns the drift just before.
  double refresh_inverse();

  // Smallest eigenvalue of V via power iteration on V_inv.
  double min_eigenvalue() const;

 private:
  int dim_;
  double lambda_;
  int refresh_interval_;
  int update_count_ = 0;
  int batches_since_refresh_ = 0;
  Vec v_;
  Vec v_inv_;
  mutable Vec scratch_;
};

// Parameter schedules. The practical (grid-searched) forms:
//   lambda  = c_lambda * kappa^{-5/2} * d_w * sqrt(T)
//   beta_t  = c_beta   * kappa^{-4}   * d_w * t / T        (default)
// and the constant alternative beta_t = c_beta * mu^{-2} kappa^{-4} d_w.
struct Schedule {
  enum class BetaMode { linear_in_t, constant };

  int horizon = 1000;
  int t0 = 0;
  int d_w = 1;
  double kappa = 0.1;
  double mu = 1.0;
  double c_lambda = 1e-2;
  double c_beta = 1e-2;
  BetaMode beta_mode = BetaMode::linear_in_t;

  double lambda() const;
  double beta(int t) const;

  // ceil(kappa^{-3/2} d_w sqrt(T))
  static int default_t0(double kappa, int d_w, int horizon);

  // Throws ConfigError when any derived quantity is non-positive.
  void validate() const;
};

// z = f_hat + sqrt(beta_t) ||g||_{V^{-1}} + beta_t C_h / lambda.
// Requires t > t0 (Phase II); throws ScheduleOutOfRange otherwise.
double optimistic_utility(const GramState& state, const Schedule& schedule,
                          int t, double f_hat, std::span<const double> g,
                          double c_h);

struct PotentialCheck {
  bool pass = true;
  int first_violation_round = -1;  // absolute round index, -1 when passing
  Vec lhs;                         // running sum of min(1, m_s)
  Vec rhs;                         // bound evaluated at the prefix end
};

// Audits the elliptical-potential bound on a recorded run: for a trace of
// per-round values m_s = max_{i in S_s} ||g_si||^2_{V_s^{-1}} (s = t0+1, ...)
// checks for every prefix ending at s = t-1 that
//   sum min(1, m_s)  <=  2 d_w log(1 + t C_g^2 / (d_w lambda)).
PotentialCheck elliptical_potential_series(std::span<const double> max_maha_sq,
                                           const Schedule& schedule,
                                           double c_g);

bool elliptical_potential_check(std::span<const double> max_maha_sq,
                                const Schedule& schedule, double c_g);

// ---- small dense helpers shared with the linear baselines ----

// Inverse of a symmetric positive definite row-major matrix via Cholesky.
Vec spd_inverse(const Vec& m, int dim);

// Solve A x = b for SPD row-major A.
Vec spd_solve(const Vec& a, const Vec& b, int dim);

// Lower-triangular Cholesky factor (row-major) of an SPD matrix.
Vec cholesky_lower(const Vec& m, int dim);

}  // namespace mnl_lab
