// AVX2 kernel variants. This translation unit is the only one compiled with
// -mavx2; entry happens solely through the dispatch table after a runtime
// CPU check. Multiplies and adds are kept separate (no FMA contraction) so
// results stay close to the scalar reference.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace mnl_lab::kern::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  double out = hsum(acc);
  for (; i < n; ++i) out += a[i] * b[i];
  return out;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const double* m, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(m + r * cols, x, cols);
}

void rank1_update(double* m, const double* g, double alpha, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) {
    const double gr = alpha * g[r];
    double* row = m + r * n;
    const __m256d vgr = _mm256_set1_pd(gr);
    std::size_t c = 0;
    for (; c + 4 <= n; c += 4) {
      const __m256d vg = _mm256_loadu_pd(g + c);
      const __m256d vrow = _mm256_loadu_pd(row + c);
      _mm256_storeu_pd(row + c, _mm256_add_pd(vrow, _mm256_mul_pd(vgr, vg)));
    }
    for (; c < n; ++c) row[c] += gr * g[c];
  }
}

void adam_step(double* w, double* mom1, double* mom2, const double* g,
               std::size_t n, double lr, double beta1, double beta2,
               double eps, double c1, double c2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vomb1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d vomb2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d m1 = _mm256_loadu_pd(mom1 + i);
    __m256d m2 = _mm256_loadu_pd(mom2 + i);
    m1 = _mm256_add_pd(_mm256_mul_pd(vb1, m1), _mm256_mul_pd(vomb1, vg));
    m2 = _mm256_add_pd(_mm256_mul_pd(vb2, m2),
                       _mm256_mul_pd(vomb2, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(mom1 + i, m1);
    _mm256_storeu_pd(mom2 + i, m2);
    const __m256d mhat = _mm256_div_pd(m1, vc1);
    const __m256d vhat = _mm256_div_pd(m2, vc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
  }
  for (; i < n; ++i) {
    mom1[i] = beta1 * mom1[i] + (1.0 - beta1) * g[i];
    mom2[i] = beta2 * mom2[i] + (1.0 - beta2) * (g[i] * g[i]);
    const double mhat = mom1[i] / c1;
    const double vhat = mom2[i] / c2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double sumsq(const double* a, std::size_t n) { return dot(a, a, n); }

}  // namespace mnl_lab::kern::avx2

#endif  // x86_64
