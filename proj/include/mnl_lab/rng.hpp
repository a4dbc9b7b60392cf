#pragma once

// Counter-based random streams. One root seed derives independent named
// streams, so adding a draw to one consumer never perturbs another. Output
// is the SplitMix64 permutation of (key + i * golden), which makes a stream
// a pure function of (key, counter) and keeps replay deterministic across
// compilers and platforms.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mnl_lab {

class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  // Derive an independent child stream.
  Rng stream(std::string_view name) const {
    return Rng(mix(key_ ^ (fnv1a(name) | 1)));
  }
  Rng stream(std::uint64_t salt) const {
    return Rng(mix(key_ ^ (salt * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull)));
  }

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ull;
    return mix(key_ + counter_);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Unbiased integer in [0, n). n must be >= 1.
  std::uint64_t uniform_int(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    std::uint64_t lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ull;
    }
    return h;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mnl_lab
