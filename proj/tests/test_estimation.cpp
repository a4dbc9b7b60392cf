#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mnl_lab/estimation.hpp"
#include "mnl_lab/kernels.hpp"
#include "mnl_lab/mnl.hpp"

using namespace mnl_lab;

namespace {

Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

ContextSet random_context(int n, int d, Rng& rng, double scale = 1.0) {
  Vec flat(static_cast<std::size_t>(n) * d);
  for (double& v : flat) v = rng.uniform(-scale, scale);
  return ContextSet(n, d, std::move(flat));
}

// Synthetic choice data from a known truth.
PilotLoss make_synthetic_pilot(const UtilityModel& model, const Vec& truth,
                               int rounds, int n, int k, Rng& rng,
                               std::vector<ChoiceRecord>* records = nullptr) {
  PilotLoss loss(model);
  for (int t = 0; t < rounds; ++t) {
    ContextSet ctx = random_context(n, model.input_dim(), rng);
    Assortment s = uniform_assortment_sample(n, k, rng);
    Vec u(s.size());
    for (int i = 0; i < s.size(); ++i)
      u[i] = model.value(truth, ctx.item(s.items()[i]));
    const auto pick = sample_choice(choice_probabilities(u), rng);
    std::optional<int> chosen;
    if (pick.has_value()) chosen = s.items()[*pick];
    ChoiceRecord rec(ctx, s, chosen);
    if (records) records->push_back(rec);
    loss.add_record(rec);
  }
  return loss;
}

void check_loss_grad_fd(const std::function<double(const Vec&, Vec*)>& f,
                        const Vec& w, double rel_tol = 1e-4) {
  Vec g(w.size());
  f(w, &g);
  for (std::size_t j = 0; j < w.size(); ++j) {
    Vec hi = w, lo = w;
    hi[j] += 1e-5;
    lo[j] -= 1e-5;
    const double fd = (f(hi, nullptr) - f(lo, nullptr)) / 2e-5;
    const double scale = std::max({std::abs(fd), std::abs(g[j]), 1e-6});
    CHECK(std::abs(g[j] - fd) / scale <= rel_tol);
  }
}

}  // namespace

TEST_CASE("pilot loss: empty record list") {
  LinearUtility lin(3);
  PilotLoss loss(lin);
  Vec g(3, 42.0);
  CHECK(loss.value_and_grad(Vec(3, 0.5), g) == doctest::Approx(0.0));
  for (const double v : g) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("pilot loss: single record, outside chosen, w = 0") {
  LinearUtility lin(2);
  PilotLoss loss(lin);
  ContextSet ctx(1, 2, {0.7, -0.1});
  loss.add_record(
      ChoiceRecord(ctx, make_assortment({0}, 1, 1), std::nullopt));
  // p(outside) = 1/2 at w = 0, so NLL = ln 2.
  CHECK(loss.value(Vec(2, 0.0)) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("pilot loss gradient matches finite differences") {
  Rng rng(11);
  TwoLayerSigmoidNet net(3, 2);
  const Vec truth = random_vec(net.param_dim(), rng);
  PilotLoss loss = make_synthetic_pilot(net, truth, 12, 8, 3, rng);
  auto f = [&](const Vec& w, Vec* g) {
    if (!g) return loss.value(w);
    return loss.value_and_grad(w, *g);
  };
  for (int trial = 0; trial < 5; ++trial)
    check_loss_grad_fd(f, random_vec(net.param_dim(), rng));
}

TEST_CASE("linearized loss: pure regularizer") {
  LinearizedLoss loss(3, 2.0, Vec(3, 0.0));
  Vec w = {1.0, 0.0, 0.0};
  Vec g(3);
  CHECK(loss.value_and_grad(w, g) == doctest::Approx(1.0));
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(0.0));
  CHECK(g[2] == doctest::Approx(0.0));
}

TEST_CASE("linearized loss at the anchor point reproduces exact MNL") {
  Rng rng(23);
  TwoLayerSigmoidNet net(3, 2);
  const int d_w = net.param_dim();
  const Vec w_s = random_vec(d_w, rng);
  ContextSet ctx = random_context(4, 3, rng);
  const auto s = make_assortment({0, 2, 3}, 3, 4);

  // Anchors at w_s.
  const int k = s.size();
  Vec bases(k), grads(static_cast<std::size_t>(k) * d_w), u_exact(k);
  for (int i = 0; i < k; ++i) {
    std::span<double> g{grads.data() + static_cast<std::size_t>(i) * d_w,
                        static_cast<std::size_t>(d_w)};
    u_exact[i] = net.value_and_grad(w_s, ctx.item(s.items()[i]), g);
    bases[i] = u_exact[i] - kern::dot(g.data(), w_s.data(), d_w);
  }
  const double lambda = 1.0;
  LinearizedLoss loss(d_w, lambda, w_s);
  loss.add_round(bases, grads.data(), k, 1);

  // At w = w_s the linearized utilities equal the exact ones, so the loss
  // is the exact NLL plus a zero ridge.
  double shift = 0.0;
  for (const double v : u_exact) shift = std::max(shift, v);
  double denom = std::exp(-shift);
  for (const double v : u_exact) denom += std::exp(v - shift);
  const double expect = shift + std::log(denom) - u_exact[1];
  CHECK(loss.value(w_s) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("linearized loss gradient matches finite differences") {
  Rng rng(37);
  TwoLayerSigmoidNet net(2, 2);
  const int d_w = net.param_dim();
  const Vec center = random_vec(d_w, rng);
  LinearizedLoss loss(d_w, 0.7, center);
  for (int round = 0; round < 10; ++round) {
    const Vec w_s = random_vec(d_w, rng);
    ContextSet ctx = random_context(5, 2, rng);
    const int k = 1 + static_cast<int>(rng.uniform_int(4));
    Assortment s = uniform_assortment_sample(5, k, rng);
    Vec bases(s.size()), grads(static_cast<std::size_t>(s.size()) * d_w);
    for (int i = 0; i < s.size(); ++i) {
      std::span<double> g{grads.data() + static_cast<std::size_t>(i) * d_w,
                          static_cast<std::size_t>(d_w)};
      const double f = net.value_and_grad(w_s, ctx.item(s.items()[i]), g);
      bases[i] = f - kern::dot(g.data(), w_s.data(), d_w);
    }
    const int chosen =
        static_cast<int>(rng.uniform_int(s.size() + 1)) - 1;  // may be -1
    loss.add_round(bases, grads.data(), s.size(), chosen);
  }
  auto f = [&](const Vec& w, Vec* g) {
    if (!g) return loss.value(w);
    return loss.value_and_grad(w, *g);
  };
  for (int trial = 0; trial < 5; ++trial)
    check_loss_grad_fd(f, random_vec(d_w, rng));
}

TEST_CASE("linearized loss rejects malformed anchor blocks") {
  LinearizedLoss loss(3, 1.0, Vec(3, 0.0));
  Vec bases = {0.0, 0.0};
  CHECK_THROWS_AS(loss.add_round(bases, nullptr, 2, 0), MissingAnchor);
  CHECK_THROWS_AS(loss.value(Vec(2, 0.0)), DimensionMismatch);
}

TEST_CASE("fit_pilot: ERM beats the truth on its own training set") {
  Rng rng(101);
  LinearUtility lin(4);
  const Vec truth = random_vec(4, rng);
  PilotLoss loss = make_synthetic_pilot(lin, truth, 500, 20, 5, rng);
  OptimizerConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.iterations = 4000;
  const Vec out = fit_pilot(loss, Vec(4, 0.0), cfg, rng);
  const double nll_out = loss.value(out);
  const double nll_truth = loss.value(truth);
  CHECK(nll_out <= nll_truth + 0.05 * 500);
  CHECK(nll_out <= loss.value(Vec(4, 0.0)));  // never worse than init
}

TEST_CASE("fit_pilot initialized at the truth never increases the loss") {
  Rng rng(103);
  LinearUtility lin(3);
  const Vec truth = random_vec(3, rng);
  PilotLoss loss = make_synthetic_pilot(lin, truth, 60, 10, 3, rng);
  OptimizerConfig cfg;
  cfg.iterations = 500;
  const Vec out = fit_pilot(loss, truth, cfg, rng);
  CHECK(loss.value(out) <= loss.value(truth) + 1e-12);
}

TEST_CASE("fit_pilot is deterministic given seed and config") {
  Rng data_rng(7);
  TwoLayerSigmoidNet net(2, 2);
  const Vec truth = random_vec(net.param_dim(), data_rng);
  PilotLoss loss = make_synthetic_pilot(net, truth, 40, 8, 3, data_rng);
  OptimizerConfig cfg;
  cfg.iterations = 300;
  cfg.restarts = 3;
  Rng opt_rng_a(55), opt_rng_b(55);
  const Vec init = random_vec(net.param_dim(), data_rng);
  const Vec a = fit_pilot(loss, init, cfg, opt_rng_a);
  const Vec b = fit_pilot(loss, init, cfg, opt_rng_b);
  CHECK(a == b);
  CHECK_THROWS_AS(fit_pilot(PilotLoss(net), init, cfg, opt_rng_a),
                  EmptyDataset);
}

TEST_CASE("fit_round: zero records converge to the regularization center") {
  LinearizedLoss loss(6, 2.0, Vec(6, 0.3));
  OptimizerConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.per_round_iterations = 2000;
  const Vec out = fit_round(loss, Vec(6, -0.7), cfg);
  for (const double v : out) CHECK(std::abs(v - 0.3) <= 1e-6);
}

TEST_CASE("fit_round: convex linear case reaches near-stationarity") {
  Rng rng(211);
  LinearUtility lin(3);
  const int d_w = 3;
  LinearizedLoss loss(d_w, 0.5, Vec(d_w, 0.0));
  for (int round = 0; round < 30; ++round) {
    ContextSet ctx = random_context(6, 3, rng);
    Assortment s = uniform_assortment_sample(6, 3, rng);
    const Vec w_s = random_vec(d_w, rng);
    Vec bases(s.size()), grads(static_cast<std::size_t>(s.size()) * d_w);
    for (int i = 0; i < s.size(); ++i) {
      std::span<double> g{grads.data() + static_cast<std::size_t>(i) * d_w,
                          static_cast<std::size_t>(d_w)};
      const double f = lin.value_and_grad(w_s, ctx.item(s.items()[i]), g);
      bases[i] = f - kern::dot(g.data(), w_s.data(), d_w);
    }
    loss.add_round(bases, grads.data(), s.size(),
                   static_cast<int>(rng.uniform_int(s.size() + 1)) - 1);
  }
  OptimizerConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.per_round_iterations = 5000;
  const Vec out = fit_round(loss, Vec(d_w, 0.5), cfg);
  Vec g(d_w);
  loss.value_and_grad(out, g);
  CHECK(std::sqrt(kern::sumsq(g.data(), d_w)) <= 1e-3);
}

TEST_CASE("fit_round never returns a worse point than its warm start") {
  Rng rng(301);
  LinearizedLoss loss(4, 1.0, Vec(4, 0.0));
  OptimizerConfig cfg;
  cfg.per_round_iterations = 3;  // tiny budget
  for (int trial = 0; trial < 20; ++trial) {
    const Vec warm = random_vec(4, rng);
    const Vec out = fit_round(loss, warm, cfg);
    CHECK(loss.value(out) <= loss.value(warm) + 1e-12);
  }
}

TEST_CASE("warm start reaches the same loss in fewer effective iterations") {
  Rng rng(401);
  LinearUtility lin(3);
  const Vec truth = random_vec(3, rng);
  LinearizedLoss loss(3, 0.5, Vec(3, 0.0));
  for (int round = 0; round < 40; ++round) {
    ContextSet ctx = random_context(8, 3, rng);
    Assortment s = uniform_assortment_sample(8, 3, rng);
    Vec u(s.size());
    for (int i = 0; i < s.size(); ++i)
      u[i] = lin.value(truth, ctx.item(s.items()[i]));
    const auto pick = sample_choice(choice_probabilities(u), rng);
    Vec bases(s.size()), grads(static_cast<std::size_t>(s.size()) * 3);
    for (int i = 0; i < s.size(); ++i) {
      std::span<double> g{grads.data() + static_cast<std::size_t>(i) * 3, 3};
      const double f = lin.value_and_grad(truth, ctx.item(s.items()[i]), g);
      bases[i] = f - kern::dot(g.data(), truth.data(), 3);
    }
    loss.add_round(bases, grads.data(), s.size(),
                   pick.has_value() ? *pick : -1);
  }
  OptimizerConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.per_round_iterations = 200;
  // Warm: continue from a previous short fit. Cold: from a far corner.
  const Vec stage1 = fit_round(loss, Vec(3, 0.0), cfg);
  const Vec warm_out = fit_round(loss, stage1, cfg);
  const Vec cold_out = fit_round(loss, Vec(3, 2.0), cfg);
  const double warm_loss = loss.value(warm_out);
  const double cold_loss = loss.value(cold_out);
  MESSAGE("warm=", warm_loss, " cold=", cold_loss);
  CHECK(warm_loss <= cold_loss + 1e-9);
}

TEST_CASE("linear-anchor loss is convex along sampled segments") {
  Rng rng(501);
  LinearUtility lin(3);
  LinearizedLoss loss(3, 0.3, Vec(3, 0.0));
  for (int round = 0; round < 15; ++round) {
    ContextSet ctx = random_context(5, 3, rng);
    Assortment s = uniform_assortment_sample(5, 2, rng);
    const Vec w_s = random_vec(3, rng);
    Vec bases(s.size()), grads(static_cast<std::size_t>(s.size()) * 3);
    for (int i = 0; i < s.size(); ++i) {
      std::span<double> g{grads.data() + static_cast<std::size_t>(i) * 3, 3};
      const double f = lin.value_and_grad(w_s, ctx.item(s.items()[i]), g);
      bases[i] = f - kern::dot(g.data(), w_s.data(), 3);
    }
    loss.add_round(bases, grads.data(), s.size(),
                   static_cast<int>(rng.uniform_int(s.size() + 1)) - 1);
  }
  for (int trial = 0; trial < 500; ++trial) {
    const Vec a = random_vec(3, rng, 2.0);
    const Vec b = random_vec(3, rng, 2.0);
    Vec mid(3);
    for (int j = 0; j < 3; ++j) mid[j] = 0.5 * (a[j] + b[j]);
    CHECK(loss.value(mid) <=
          0.5 * (loss.value(a) + loss.value(b)) + 1e-10);
  }
}

TEST_CASE("projection flag keeps iterates inside the ball") {
  LinearizedLoss loss(4, 1.0, Vec{3.0, 3.0, 3.0, 3.0});
  OptimizerConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.per_round_iterations = 400;
  cfg.projection_radius = 1.0;
  const Vec out = fit_round(loss, Vec(4, 0.0), cfg);
  CHECK(std::sqrt(kern::sumsq(out.data(), 4)) <= 1.0 + 1e-12);
}

TEST_CASE("checkpoints round-trip through json") {
  namespace fs = std::filesystem;
  Checkpoint cp;
  cp.round = 137;
  cp.w_hat = {0.25, -1.5};
  cp.w_pilot = {0.5, 0.5};
  cp.moments.m = {1e-3, -2e-3};
  cp.moments.v = {4e-6, 9e-6};
  cp.moments.t = 88;
  const auto dir = fs::temp_directory_path() / "mnl_lab_estimation_test";
  fs::create_directories(dir);
  const std::string path = (dir / "ck.json").string();
  save_checkpoint(path, cp);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.round == cp.round);
  CHECK(back.w_hat == cp.w_hat);
  CHECK(back.w_pilot == cp.w_pilot);
  CHECK(back.moments.m == cp.moments.m);
  CHECK(back.moments.v == cp.moments.v);
  CHECK(back.moments.t == cp.moments.t);
  fs::remove_all(dir);
}
