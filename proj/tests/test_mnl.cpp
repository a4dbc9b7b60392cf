#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mnl_lab/mnl.hpp"

using namespace mnl_lab;

TEST_CASE("choice probabilities: closed forms") {
  const auto empty = choice_probabilities(Vec{});
  CHECK(empty.p_outside == doctest::Approx(1.0));
  CHECK(empty.p_items.empty());

  const auto single = choice_probabilities(Vec{0.0});
  CHECK(single.p_outside == doctest::Approx(0.5));
  CHECK(single.p_items[0] == doctest::Approx(0.5));

  const auto trio =
      choice_probabilities(Vec{std::log(1.0), std::log(2.0), std::log(3.0)});
  CHECK(trio.p_outside == doctest::Approx(1.0 / 7.0));
  CHECK(trio.p_items[0] == doctest::Approx(1.0 / 7.0));
  CHECK(trio.p_items[1] == doctest::Approx(2.0 / 7.0));
  CHECK(trio.p_items[2] == doctest::Approx(3.0 / 7.0));
}

TEST_CASE("choice probabilities normalize under extreme utilities") {
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(6));
    Vec u(k);
    for (double& v : u) v = rng.uniform(-700.0, 700.0);
    const auto dist = choice_probabilities(u);
    double total = dist.p_outside;
    for (const double p : dist.p_items) {
      total += p;
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(
      choice_probabilities(Vec{std::numeric_limits<double>::infinity()}),
      NonFiniteUtility);
}

TEST_CASE("sample_choice: degenerate and Monte Carlo") {
  ChoiceDistribution all_outside{1.0, {}};
  Rng rng(5);
  for (int i = 0; i < 100; ++i)
    CHECK_FALSE(sample_choice(all_outside, rng).has_value());

  const auto half = choice_probabilities(Vec{0.0});
  int hits = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    if (sample_choice(half, rng).has_value()) ++hits;
  CHECK(double(hits) / draws == doctest::Approx(0.5).epsilon(0.02));

  const auto three_quarters = choice_probabilities(Vec{std::log(3.0)});
  hits = 0;
  for (int i = 0; i < draws; ++i)
    if (sample_choice(three_quarters, rng).has_value()) ++hits;
  CHECK(double(hits) / draws == doctest::Approx(0.75).epsilon(0.0134));
}

TEST_CASE("expected reward: closed forms") {
  CHECK(expected_reward(Vec{1.0, -2.0}, Vec{0.0, 0.0}) ==
        doctest::Approx(0.0));
  CHECK(expected_reward(Vec{0.0}, Vec{1.0}) == doctest::Approx(0.5));
  CHECK(expected_reward(Vec{std::log(2.0), std::log(3.0)}, Vec{1.0, 0.5}) ==
        doctest::Approx(3.5 / 6.0));
  CHECK_THROWS_AS(expected_reward(Vec{0.0}, Vec{1.0, 1.0}), LengthMismatch);
}

TEST_CASE("raising one utility never lowers uniform-revenue reward") {
  Rng rng(13);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(5));
    Vec u(k);
    for (double& v : u) v = rng.uniform(-3.0, 3.0);
    const Vec r(k, 1.0);
    const double before = expected_reward(u, r);
    Vec raised = u;
    const int j = static_cast<int>(rng.uniform_int(k));
    raised[j] += rng.uniform01() * 2.0;
    CHECK(expected_reward(raised, r) >= before - 1e-12);
  }
}

TEST_CASE("reward gap bound: examples and fuzzing") {
  CHECK(reward_gap_bound_check(Vec{1.0, 2.0}, Vec{1.0, 2.0}, Vec{1.0, 0.3}));
  // |sigma(1) - sigma(0)| ~= 0.2311 <= 1
  CHECK(reward_gap_bound_check(Vec{1.0}, Vec{0.0}, Vec{1.0}));
  Rng rng(21);
  for (int trial = 0; trial < 100000; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(6));
    Vec u(k), v(k), r(k);
    for (int i = 0; i < k; ++i) {
      u[i] = rng.uniform(-3.0, 3.0);
      v[i] = rng.uniform(-3.0, 3.0);
      r[i] = rng.uniform01();
    }
    CHECK(reward_gap_bound_check(u, v, r));
  }
}

TEST_CASE("reverse Lipschitz constant: 1-d closed forms") {
  // C = 0: only a = 0, h = 1/2, kappa0 = (1/2)(1/2).
  CHECK(reverse_lipschitz_constant(1, 0.0, 101) == doctest::Approx(0.25));
  // C = ln 3: minimized at the endpoints, value 3/16.
  CHECK(reverse_lipschitz_constant(1, std::log(3.0), 2001) ==
        doctest::Approx(3.0 / 16.0).epsilon(1e-6));
}

TEST_CASE("reverse Lipschitz property holds with the grid constant") {
  for (const int dim : {1, 2}) {
    for (const double cap : {0.5, 1.0}) {
      const double kappa0 =
          reverse_lipschitz_constant(dim, cap, dim == 1 ? 2001 : 201);
      CHECK(kappa0 > 0.0);
      Rng rng(1000 + dim);
      for (int trial = 0; trial < 100000; ++trial) {
        Vec a(dim), b(dim);
        double na = 0.0, nb = 0.0;
        for (int j = 0; j < dim; ++j) {
          a[j] = rng.uniform(-cap, cap);
          b[j] = rng.uniform(-cap, cap);
          na += a[j] * a[j];
          nb += b[j] * b[j];
        }
        if (na > cap * cap || nb > cap * cap) continue;
        const Vec ha = mnl_probability_map(a);
        const Vec hb = mnl_probability_map(b);
        double dh = 0.0, dab = 0.0;
        for (int j = 0; j < dim; ++j) {
          dh += (ha[j] - hb[j]) * (ha[j] - hb[j]);
          dab += (a[j] - b[j]) * (a[j] - b[j]);
        }
        CHECK(std::sqrt(dh) >= kappa0 * std::sqrt(dab) - 1e-12);
      }
    }
  }
}
