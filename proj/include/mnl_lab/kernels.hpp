#pragma once

// Arithmetic kernels behind the numeric core: scalar reference
// implementations plus AVX2 variants selected at runtime. Every SIMD
// variant is equivalence-tested against its scalar reference.
//
// Selection order: MNL_LAB_SIMD env var ("scalar" | "avx2" | "auto"),
// then CPU detection, then scalar fallback.

#include <cstddef>
#include <string_view>

namespace mnl_lab::kern {

enum class Isa { scalar, avx2 };

// ISA chosen for this process. Resolved once on first use.
Isa active_isa();
std::string_view isa_name(Isa isa);

// Test hook: override the dispatch tables. Throws if the requested ISA is
// unavailable on this machine.
void force_isa(Isa isa);

// v . w
double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y = M x, M row-major (rows x cols)
void matvec(const double* m, const double* x, double* y, std::size_t rows,
            std::size_t cols);

// M += alpha * g g^T, M row-major symmetric (n x n), full update
void rank1_update(double* m, const double* g, double alpha, std::size_t n);

// One bias-corrected update step over n coordinates:
//   mom1 = b1*mom1 + (1-b1)*g;  mom2 = b2*mom2 + (1-b2)*g^2
//   w   -= lr * (mom1/c1) / (sqrt(mom2/c2) + eps)
// where c1, c2 are the bias corrections 1-b1^t, 1-b2^t (precomputed by the
// caller). Elementwise, so scalar and SIMD paths agree bit for bit.
void adam_step(double* w, double* mom1, double* mom2, const double* g,
               std::size_t n, double lr, double beta1, double beta2,
               double eps, double c1, double c2);

double sumsq(const double* a, std::size_t n);

// g^T M g for symmetric row-major M; scratch must hold n doubles.
double quadform(const double* m, const double* g, double* scratch,
                std::size_t n);

}  // namespace mnl_lab::kern
