#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mnl_lab/confidence.hpp"
#include "mnl_lab/kernels.hpp"

using namespace mnl_lab;

namespace {

Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

// Independent inverse oracle: Gauss-Jordan with partial pivoting (the
// implementation under test uses Cholesky + Sherman-Morrison).
Vec gauss_jordan_inverse(Vec a, int n) {
  Vec inv(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[static_cast<std::size_t>(r) * n + col]) >
          std::abs(a[static_cast<std::size_t>(pivot) * n + col]))
        pivot = r;
    for (int c = 0; c < n; ++c) {
      std::swap(a[static_cast<std::size_t>(col) * n + c],
                a[static_cast<std::size_t>(pivot) * n + c]);
      std::swap(inv[static_cast<std::size_t>(col) * n + c],
                inv[static_cast<std::size_t>(pivot) * n + c]);
    }
    const double diag = a[static_cast<std::size_t>(col) * n + col];
    for (int c = 0; c < n; ++c) {
      a[static_cast<std::size_t>(col) * n + c] /= diag;
      inv[static_cast<std::size_t>(col) * n + c] /= diag;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a[static_cast<std::size_t>(r) * n + col];
      if (factor == 0.0) continue;
      for (int c = 0; c < n; ++c) {
        a[static_cast<std::size_t>(r) * n + c] -=
            factor * a[static_cast<std::size_t>(col) * n + c];
        inv[static_cast<std::size_t>(r) * n + c] -=
            factor * inv[static_cast<std::size_t>(col) * n + c];
      }
    }
  }
  return inv;
}

Schedule schedule_with(int horizon, int t0, int d_w, double c_lambda,
                       double c_beta,
                       Schedule::BetaMode mode = Schedule::BetaMode::linear_in_t) {
  Schedule s;
  s.horizon = horizon;
  s.t0 = t0;
  s.d_w = d_w;
  s.c_lambda = c_lambda;
  s.c_beta = c_beta;
  s.beta_mode = mode;
  return s;
}

// c_lambda that makes Schedule::lambda() equal a target value.
double c_lambda_for(double lambda, double kappa, int d_w, int horizon) {
  return lambda /
         (std::pow(kappa, -2.5) * d_w * std::sqrt(double(horizon)));
}

}  // namespace

TEST_CASE("gram state: empty update leaves state unchanged") {
  GramState state(3, 2.0);
  const Vec v_before = state.v();
  state.update_batch(nullptr, 0);
  CHECK(state.v() == v_before);
  CHECK(state.update_count() == 0);
}

TEST_CASE("gram state: single e1 update has the closed-form inverse") {
  GramState state(2, 1.0);
  const Vec e1 = {1.0, 0.0};
  state.update(e1);
  CHECK(state.v()[0] == doctest::Approx(2.0));
  CHECK(state.v()[3] == doctest::Approx(1.0));
  CHECK(state.v()[1] == doctest::Approx(0.0));
  CHECK(state.v_inv()[0] == doctest::Approx(0.5));
  CHECK(state.v_inv()[3] == doctest::Approx(1.0));
}

TEST_CASE("sherman-morrison tracks the direct inverse over 50 updates") {
  Rng rng(88);
  const int d = 12;
  GramState state(d, 0.5);
  for (int i = 0; i < 50; ++i) {
    const Vec g = random_vec(d, rng);
    state.update(g);
  }
  const Vec oracle = gauss_jordan_inverse(state.v(), d);
  double worst = 0.0;
  for (std::size_t i = 0; i < oracle.size(); ++i)
    worst = std::max(worst, std::abs(oracle[i] - state.v_inv()[i]));
  CHECK(worst <= 1e-8);
}

TEST_CASE("inverse drift stays below 1e-8 over 1000 updates at d_w = 64") {
  Rng rng(99);
  const int d = 64;
  GramState state(d, 1.0);  // refresh every 100 rounds (default)
  for (int round = 0; round < 200; ++round) {
    Vec grads(static_cast<std::size_t>(5) * d);
    for (double& v : grads) v = rng.uniform(-1.0, 1.0);
    state.update_batch(grads.data(), 5);
  }
  CHECK(state.update_count() == 1000);
  CHECK(state.inverse_drift() <= 1e-8);
  const Vec oracle = gauss_jordan_inverse(state.v(), d);
  double worst = 0.0;
  for (std::size_t i = 0; i < oracle.size(); ++i)
    worst = std::max(worst, std::abs(oracle[i] - state.v_inv()[i]));
  CHECK(worst <= 1e-8);
}

TEST_CASE("mahalanobis norm: closed forms and solve oracle") {
  GramState state(3, 4.0);
  CHECK(state.mahalanobis_inv_norm(Vec{0.0, 0.0, 0.0}) ==
        doctest::Approx(0.0));
  // V = 4I: ||e1||_{V^-1} = 1/2.
  CHECK(state.mahalanobis_inv_norm(Vec{1.0, 0.0, 0.0}) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(state.mahalanobis_inv_norm(Vec{1.0}), DimensionMismatch);

  Rng rng(17);
  const int d = 9;
  GramState random_state(d, 1.5);
  for (int i = 0; i < 30; ++i) random_state.update(random_vec(d, rng));
  for (int trial = 0; trial < 50; ++trial) {
    const Vec g = random_vec(d, rng);
    const Vec x = spd_solve(random_state.v(), g, d);  // V x = g
    const double expect = std::sqrt(kern::dot(g.data(), x.data(), d));
    CHECK(random_state.mahalanobis_inv_norm(g) ==
          doctest::Approx(expect).epsilon(1e-10));
    // Upper bound ||g|| / sqrt(lambda).
    CHECK(random_state.mahalanobis_inv_norm(g) <=
          std::sqrt(kern::sumsq(g.data(), d) / 1.5) + 1e-12);
  }
}

TEST_CASE("min eigenvalue: identity case and growth under updates") {
  GramState state(5, 3.0);
  CHECK(state.min_eigenvalue() == doctest::Approx(3.0).epsilon(1e-9));
  Rng rng(3);
  for (int i = 0; i < 20; ++i) state.update(random_vec(5, rng));
  CHECK(state.min_eigenvalue() >= 3.0 * (1.0 - 1e-9));
}

TEST_CASE("schedule formulas match their definitions") {
  Schedule s = schedule_with(1000, 50, 16, 1e-3, 1e-4);
  s.kappa = 0.1;
  s.mu = 1.0;
  CHECK(s.lambda() ==
        doctest::Approx(1e-3 * std::pow(0.1, -2.5) * 16.0 *
                        std::sqrt(1000.0)));
  CHECK(s.beta(500) ==
        doctest::Approx(1e-4 * std::pow(0.1, -4.0) * 16.0 * 0.5));
  for (int t = 2; t <= 1000; ++t) CHECK(s.beta(t) >= s.beta(t - 1));

  Schedule c = schedule_with(1000, 50, 16, 1e-3, 1e-4,
                             Schedule::BetaMode::constant);
  c.mu = 2.0;
  CHECK(c.beta(100) == doctest::Approx(c.beta(900)));
  CHECK(c.beta(100) ==
        doctest::Approx(1e-4 * 0.25 * std::pow(0.1, -4.0) * 16.0));

  CHECK(Schedule::default_t0(0.1, 16, 1000) ==
        static_cast<int>(std::ceil(std::pow(0.1, -1.5) * 16.0 *
                                   std::sqrt(1000.0))));
  CHECK(s.lambda() > 0.0);
  CHECK(s.beta(1000) > 0.0);

  Schedule bad = s;
  bad.kappa = 0.3;  // outside (0, 1/4]
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.t0 = 1000;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("optimistic utility: beta = 0 collapses to the point estimate") {
  GramState state(2, 1.0);
  Schedule s = schedule_with(100, 10, 2, 1.0, 0.0);
  CHECK(optimistic_utility(state, s, 11, 1.25, Vec{1.0, 0.0}, 5.0) ==
        doctest::Approx(1.25));
  CHECK_THROWS_AS(optimistic_utility(state, s, 10, 0.0, Vec{1.0, 0.0}, 0.0),
                  ScheduleOutOfRange);
}

TEST_CASE("optimistic utility: closed-form with V = 4I, beta = 4, C_h = 0") {
  const int horizon = 100, d_w = 2;
  Schedule s = schedule_with(horizon, 10, d_w,
                             c_lambda_for(4.0, 0.1, d_w, horizon),
                             /*c_beta=*/0.0, Schedule::BetaMode::constant);
  // constant beta = c_beta mu^-2 kappa^-4 d_w = 4  =>  c_beta = 2e-4.
  s.c_beta = 4.0 / (std::pow(s.kappa, -4.0) * d_w);
  CHECK(s.lambda() == doctest::Approx(4.0));
  CHECK(s.beta(50) == doctest::Approx(4.0));
  GramState state(d_w, s.lambda());
  const double z =
      optimistic_utility(state, s, 50, 0.75, Vec{1.0, 0.0}, 0.0);
  CHECK(z == doctest::Approx(0.75 + 2.0 * 0.5));
  // z >= f_hat holds unconditionally.
  CHECK(z >= 0.75);
}

TEST_CASE("elliptical potential: empty trace, synthetic run, fault injection") {
  Schedule s = schedule_with(1000, 50, 8, 1e-2, 1e-3);
  CHECK(elliptical_potential_check(Vec{}, s, 2.0));

  // A synthetic run: m_s computed from an actual Gram recursion obeys the
  // lemma for any C_g that dominates the gradient norms.
  Rng rng(7);
  GramState state(8, s.lambda());
  Vec trace;
  double c_g = 0.0;
  for (int round = 0; round < 400; ++round) {
    Vec grads(static_cast<std::size_t>(3) * 8);
    for (double& v : grads) v = rng.uniform(-1.5, 1.5);
    double max_m = 0.0;
    for (int i = 0; i < 3; ++i) {
      const std::span<const double> g{grads.data() + i * 8, 8};
      const double m = state.mahalanobis_inv_norm(g);
      max_m = std::max(max_m, m * m);
      c_g = std::max(c_g, std::sqrt(kern::sumsq(g.data(), 8)));
    }
    trace.push_back(max_m);
    state.update_batch(grads.data(), 3);
  }
  const auto series = elliptical_potential_series(trace, s, c_g);
  CHECK(series.pass);
  CHECK(series.lhs.size() == trace.size());

  // Checker sanity: an impossible trace must be flagged.
  Vec adversarial(400, 1.0);  // every round saturates min{1, .}
  const auto bad = elliptical_potential_series(adversarial, s, c_g);
  CHECK_FALSE(bad.pass);
  CHECK(bad.first_violation_round > s.t0);
}

TEST_CASE("refresh_inverse reports and repairs drift") {
  Rng rng(31);
  GramState state(6, 1.0, /*refresh_interval=*/1000000);
  for (int i = 0; i < 500; ++i) state.update(random_vec(6, rng, 2.0));
  const double drift_before = state.inverse_drift();
  const double reported = state.refresh_inverse();
  CHECK(reported == doctest::Approx(drift_before));
  CHECK(state.inverse_drift() <= drift_before + 1e-15);
}
