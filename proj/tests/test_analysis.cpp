#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mnl_lab/analysis.hpp"
#include "mnl_lab/mnl.hpp"
#include "mnl_lab/policies.hpp"

using namespace mnl_lab;

TEST_CASE("reverse-Lipschitz check passes in 1-d and is deterministic") {
  Rng rng_a(42), rng_b(42);
  const auto a = check_reverse_lipschitz(1, 1.0, 10000, rng_a);
  CHECK(a.pass);
  CHECK(a.min_margin >= 0.0);
  CHECK(a.kappa0 > 0.0);
  CHECK(a.n_instances == 10000);
  const auto b = check_reverse_lipschitz(1, 1.0, 10000, rng_b);
  CHECK(a.min_margin == b.min_margin);
  CHECK(a.worst_witness == b.worst_witness);
}

TEST_CASE("reverse-Lipschitz check passes across dims and caps") {
  for (const int dim : {1, 2, 3}) {
    for (const double cap : {0.5, 3.0}) {
      Rng rng(100 + dim);
      const auto res = check_reverse_lipschitz(dim, cap, 3000, rng);
      CHECK(res.pass);
    }
  }
}

TEST_CASE("inflating kappa0 by 10x makes the checker fail") {
  Rng rng(7);
  const double kappa0 = reverse_lipschitz_constant(2, 1.0, 201);
  Rng rng2(7);
  const auto res = check_reverse_lipschitz(2, 1.0, 20000, rng2,
                                           10.0 * kappa0);
  CHECK_FALSE(res.pass);
  CHECK(res.min_margin < 0.0);
  CHECK(res.worst_witness.size() == 4);
}

TEST_CASE("pilot convergence: error decays when t0 doubles (net class)") {
  PilotConvergenceSpec spec;
  spec.dim = 2;
  spec.hidden = 2;
  spec.n_items = 10;
  spec.capacity = 3;
  spec.t0_grid = {60, 120, 240};
  spec.n_seeds = 6;
  spec.eval_samples = 1500;
  spec.opt.learning_rate = 1e-2;
  spec.opt.iterations = 1200;
  const auto rows = check_pilot_convergence(spec);
  REQUIRE(rows.size() == 3);
  MESSAGE("median errors: ", rows[0].median_function_error, " ",
          rows[1].median_function_error, " ", rows[2].median_function_error);
  // Soft scaling property: doubling t0 should cut the median error.
  CHECK(rows[1].median_function_error <=
        0.75 * rows[0].median_function_error);
  CHECK(rows[2].median_function_error <=
        0.75 * rows[1].median_function_error);
}

TEST_CASE("pilot convergence: linear class decays as well") {
  PilotConvergenceSpec spec;
  spec.dim = 3;
  spec.linear_class = true;
  spec.n_items = 10;
  spec.capacity = 3;
  spec.t0_grid = {50, 100};
  spec.n_seeds = 6;
  spec.eval_samples = 1500;
  spec.opt.learning_rate = 1e-2;
  spec.opt.iterations = 1200;
  const auto rows = check_pilot_convergence(spec);
  CHECK(rows[1].median_function_error <=
        0.75 * rows[0].median_function_error);
}

TEST_CASE("truth-initialized pilot fit has near-zero function error") {
  // Realizable sanity: fitting from the truth cannot drift far.
  const std::uint64_t seed = 5;
  Environment env = make_realizable_env(2, 2, seed, 10, 3, 100);
  TwoLayerSigmoidNet model(2, 2);
  Rng root(seed);
  Rng ctx_rng = root.stream("contexts");
  Rng choice_rng = root.stream("choices");
  Rng policy_rng = root.stream("policy");
  PilotLoss loss(model);
  for (int t = 1; t <= 100; ++t) {
    const ContextSet ctx = draw_context(env, t, ctx_rng);
    const Assortment s = uniform_assortment_sample(10, 3, policy_rng);
    Vec u(s.size());
    for (int i = 0; i < s.size(); ++i)
      u[i] = env.true_utility(ctx.item(s.items()[i]));
    const auto pick = sample_choice(choice_probabilities(u), choice_rng);
    std::optional<int> chosen;
    if (pick.has_value()) chosen = s.items()[*pick];
    loss.add_record(ChoiceRecord(ctx, s, chosen));
  }
  // The truth itself is the exact zero-error baseline.
  Rng eval_rng(2);
  CHECK(function_error(env, model, env.truth_params, 2000, eval_rng) ==
        doctest::Approx(0.0));
  OptimizerConfig opt;
  opt.learning_rate = 1e-3;
  opt.iterations = 500;
  Rng fit_rng(1);
  const Vec fitted = fit_pilot(loss, env.truth_params, opt, fit_rng);
  // Never worse than the truth on the training objective, and no worse in
  // function space than a random-init fit of the same budget.
  CHECK(loss.value(fitted) <= loss.value(env.truth_params) + 1e-12);
  Vec rnd(model.param_dim());
  Rng init_rng(9);
  for (double& v : rnd) v = init_rng.uniform(-1.0, 1.0);
  const Vec from_random = fit_pilot(loss, rnd, opt, fit_rng);
  Rng eval_a(2), eval_b(2);
  const double err_truth = function_error(env, model, fitted, 2000, eval_a);
  const double err_random =
      function_error(env, model, from_random, 2000, eval_b);
  MESSAGE("truth-init err=", err_truth, " random-init err=", err_random);
  CHECK(err_truth <= err_random + 1e-9);
}

TEST_CASE("optimism rate: huge beta dominates, aggregation is exact") {
  // Huge beta makes every optimistic score exceed the truth.
  auto model = std::make_shared<TwoLayerSigmoidNet>(2, 2);
  OnlMnlConfig cfg;
  cfg.hidden = 2;
  cfg.t0 = 5;
  cfg.c_beta = 1e6;
  cfg.pilot_opt.iterations = 100;
  cfg.pilot_opt.learning_rate = 1e-2;
  cfg.round_opt.per_round_iterations = 10;
  Environment env = make_realizable_env(2, 2, 31, 8, 3, 60);
  OnlMnlPolicy policy(model, cfg, 60, 3, Rng(31).stream("init"));
  const RunTrace trace = run_episode(env, policy, 31);
  const auto summary = check_optimism_rate({trace});
  CHECK(summary.rounds == 55);  // phase-II rounds only
  CHECK(summary.fraction == doctest::Approx(1.0));

  // Aggregation mechanics on a synthetic pair of traces.
  RunTrace t1, t2;
  RoundLog r1{};
  r1.assortment = {0, 1};
  r1.optimism_frac = 1.0;
  RoundLog r2{};
  r2.assortment = {0, 1, 2, 3};
  r2.optimism_frac = 0.5;
  t1.rounds = {r1};
  t2.rounds = {r2};
  const auto s = check_optimism_rate({t1, t2});
  CHECK(s.total_items == 6);
  CHECK(s.fraction == doctest::Approx(4.0 / 6.0));
}
