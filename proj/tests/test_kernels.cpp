#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mnl_lab/kernels.hpp"
#include "mnl_lab/rng.hpp"

using namespace mnl_lab;
using Vec = std::vector<double>;

namespace {

Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

struct IsaGuard {
  kern::Isa saved = kern::active_isa();
  ~IsaGuard() { kern::force_isa(saved); }
};

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

}  // namespace

TEST_CASE("scalar dot/axpy/matvec basics") {
  kern::force_isa(kern::Isa::scalar);
  const Vec a = {1.0, 2.0, 3.0};
  const Vec b = {4.0, -5.0, 6.0};
  CHECK(kern::dot(a.data(), b.data(), 3) == doctest::Approx(12.0));

  Vec y = {1.0, 1.0, 1.0};
  kern::axpy(2.0, a.data(), y.data(), 3);
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[2] == doctest::Approx(7.0));

  const Vec m = {1.0, 0.0, 0.0, 2.0};  // diag(1,2)
  Vec out(2);
  kern::matvec(m.data(), a.data(), out.data(), 2, 2);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(4.0));
}

TEST_CASE("rank1_update and quadform agree with direct formulas") {
  kern::force_isa(kern::Isa::scalar);
  Rng rng(11);
  const std::size_t n = 7;
  const Vec g = random_vec(n, rng);
  Vec m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 2.0;
  kern::rank1_update(m.data(), g.data(), 1.5, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double expect = (i == j ? 2.0 : 0.0) + 1.5 * g[i] * g[j];
      CHECK(m[i * n + j] == doctest::Approx(expect).epsilon(1e-14));
    }
  Vec scratch(n);
  const Vec x = random_vec(n, rng);
  double direct = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) direct += x[i] * m[i * n + j] * x[j];
  CHECK(kern::quadform(m.data(), x.data(), scratch.data(), n) ==
        doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("avx2 variants match the scalar reference") {
  if (!avx2_available()) return;
  IsaGuard guard;
  Rng rng(42);
  for (const std::size_t n : {1u, 3u, 4u, 5u, 8u, 17u, 64u, 129u}) {
    const Vec a = random_vec(n, rng, 3.0);
    const Vec b = random_vec(n, rng, 3.0);

    kern::force_isa(kern::Isa::scalar);
    const double dot_s = kern::dot(a.data(), b.data(), n);
    kern::force_isa(kern::Isa::avx2);
    const double dot_v = kern::dot(a.data(), b.data(), n);
    CHECK(dot_v == doctest::Approx(dot_s).epsilon(1e-13));

    Vec ys = b, yv = b;
    kern::force_isa(kern::Isa::scalar);
    kern::axpy(0.7, a.data(), ys.data(), n);
    kern::force_isa(kern::Isa::avx2);
    kern::axpy(0.7, a.data(), yv.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(yv[i] == doctest::Approx(ys[i]).epsilon(1e-14));

    Vec ms(n * n, 0.0), mv(n * n, 0.0);
    kern::force_isa(kern::Isa::scalar);
    kern::rank1_update(ms.data(), a.data(), -0.3, n);
    kern::force_isa(kern::Isa::avx2);
    kern::rank1_update(mv.data(), a.data(), -0.3, n);
    for (std::size_t i = 0; i < n * n; ++i)
      CHECK(mv[i] == doctest::Approx(ms[i]).epsilon(1e-14));
  }
}

TEST_CASE("adam_step is elementwise-identical across ISAs") {
  if (!avx2_available()) return;
  IsaGuard guard;
  Rng rng(7);
  const std::size_t n = 37;
  const Vec g = random_vec(n, rng);
  Vec ws = random_vec(n, rng), m1s(n, 0.0), m2s(n, 0.0);
  Vec wv = ws, m1v(n, 0.0), m2v(n, 0.0);
  for (int t = 1; t <= 5; ++t) {
    const double c1 = 1.0 - std::pow(0.9, t);
    const double c2 = 1.0 - std::pow(0.999, t);
    kern::force_isa(kern::Isa::scalar);
    kern::adam_step(ws.data(), m1s.data(), m2s.data(), g.data(), n, 1e-3, 0.9,
                    0.999, 1e-8, c1, c2);
    kern::force_isa(kern::Isa::avx2);
    kern::adam_step(wv.data(), m1v.data(), m2v.data(), g.data(), n, 1e-3, 0.9,
                    0.999, 1e-8, c1, c2);
  }
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(wv[i] == ws[i]);  // no reductions, so bitwise equal
    CHECK(m1v[i] == m1s[i]);
    CHECK(m2v[i] == m2s[i]);
  }
}

TEST_CASE("adam_step matches a hand-rolled reference update") {
  kern::force_isa(kern::Isa::scalar);
  Vec w = {1.0}, m1 = {0.0}, m2 = {0.0};
  const Vec g = {0.5};
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  kern::adam_step(w.data(), m1.data(), m2.data(), g.data(), 1, lr, b1, b2,
                  eps, 1.0 - b1, 1.0 - b2);
  // First step: mhat = g, vhat = g^2, so w -= lr * g / (|g| + eps).
  CHECK(w[0] == doctest::Approx(1.0 - 0.1 * (0.5 / (0.5 + eps))));
}
