#include "mnl_lab/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <string>

namespace mnl_lab::kern {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const double* m, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(m + r * cols, x, cols);
}

void rank1_update(double* m, const double* g, double alpha, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) {
    const double gr = alpha * g[r];
    double* row = m + r * n;
    for (std::size_t c = 0; c < n; ++c) row[c] += gr * g[c];
  }
}

void adam_step(double* w, double* mom1, double* mom2, const double* g,
               std::size_t n, double lr, double beta1, double beta2,
               double eps, double c1, double c2) {
  for (std::size_t i = 0; i < n; ++i) {
    mom1[i] = beta1 * mom1[i] + (1.0 - beta1) * g[i];
    mom2[i] = beta2 * mom2[i] + (1.0 - beta2) * (g[i] * g[i]);
    const double mhat = mom1[i] / c1;
    const double vhat = mom2[i] / c2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double sumsq(const double* a, std::size_t n) { return dot(a, a, n); }

}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define MNL_LAB_HAVE_AVX2_TU 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void matvec(const double* m, const double* x, double* y, std::size_t rows,
            std::size_t cols);
void rank1_update(double* m, const double* g, double alpha, std::size_t n);
void adam_step(double* w, double* mom1, double* mom2, const double* g,
               std::size_t n, double lr, double beta1, double beta2,
               double eps, double c1, double c2);
double sumsq(const double* a, std::size_t n);
}  // namespace avx2
#else
#define MNL_LAB_HAVE_AVX2_TU 0
#endif

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*matvec)(const double*, const double*, double*, std::size_t,
                 std::size_t);
  void (*rank1_update)(double*, const double*, double, std::size_t);
  void (*adam_step)(double*, double*, double*, const double*, std::size_t,
                    double, double, double, double, double, double);
  double (*sumsq)(const double*, std::size_t);
};

constexpr Table kScalarTable = {scalar::dot,          scalar::axpy,
                                scalar::matvec,       scalar::rank1_update,
                                scalar::adam_step,    scalar::sumsq};

#if MNL_LAB_HAVE_AVX2_TU
constexpr Table kAvx2Table = {avx2::dot,          avx2::axpy,
                              avx2::matvec,       avx2::rank1_update,
                              avx2::adam_step,    avx2::sumsq};
#endif

bool cpu_has_avx2() {
#if MNL_LAB_HAVE_AVX2_TU
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa g_isa = Isa::scalar;
const Table* g_table = &kScalarTable;
std::once_flag g_init_flag;

void select(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      g_table = &kScalarTable;
      break;
    case Isa::avx2:
#if MNL_LAB_HAVE_AVX2_TU
      g_table = &kAvx2Table;
      break;
#else
      throw std::runtime_error("avx2 kernels not built for this target");
#endif
  }
  g_isa = isa;
}

void init_from_env() {
  const char* env = std::getenv("MNL_LAB_SIMD");
  std::string mode = env ? env : "auto";
  if (mode == "scalar") {
    select(Isa::scalar);
  } else if (mode == "avx2") {
    if (!cpu_has_avx2())
      throw std::runtime_error("MNL_LAB_SIMD=avx2 but CPU lacks AVX2");
    select(Isa::avx2);
  } else {
    select(cpu_has_avx2() ? Isa::avx2 : Isa::scalar);
  }
}

const Table& table() {
  std::call_once(g_init_flag, init_from_env);
  return *g_table;
}

}  // namespace

Isa active_isa() {
  std::call_once(g_init_flag, init_from_env);
  return g_isa;
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

void force_isa(Isa isa) {
  std::call_once(g_init_flag, init_from_env);
  if (isa == Isa::avx2 && !cpu_has_avx2())
    throw std::runtime_error("avx2 unavailable on this CPU");
  select(isa);
}

double dot(const double* a, const double* b, std::size_t n) {
  return table().dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  table().axpy(alpha, x, y, n);
}

void matvec(const double* m, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  table().matvec(m, x, y, rows, cols);
}

void rank1_update(double* m, const double* g, double alpha, std::size_t n) {
  table().rank1_update(m, g, alpha, n);
}

void adam_step(double* w, double* mom1, double* mom2, const double* g,
               std::size_t n, double lr, double beta1, double beta2,
               double eps, double c1, double c2) {
  table().adam_step(w, mom1, mom2, g, n, lr, beta1, beta2, eps, c1, c2);
}

double sumsq(const double* a, std::size_t n) { return table().sumsq(a, n); }

double quadform(const double* m, const double* g, double* scratch,
                std::size_t n) {
  matvec(m, g, scratch, n, n);
  return dot(g, scratch, n);
}

}  // namespace mnl_lab::kern
