#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

#include "greybox/common.hpp"

namespace greybox {

/// splitmix64 stream with hand-rolled distributions, so seeded runs replay
/// exactly regardless of standard-library internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Uniform integer in [0, n), unbiased. n must be positive.
  std::uint64_t next_below(std::uint64_t n) {
    std::uint64_t reject_below = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= reject_below) return r % n;
    }
  }

  /// Standard normal via Box-Muller.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_unit();  // (0, 1]
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  bool next_bool(double p_true) { return next_unit() < p_true; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = next_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    shuffle(p);
    return p;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Decorrelated sub-seed for a named purpose, so one global seed drives
/// every stage without stream overlap.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose) {
  Rng r(base ^ fnv1a(purpose));
  return r.next_u64();
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose, std::uint64_t index) {
  Rng r(base ^ fnv1a(purpose) ^ (0x9e3779b97f4a7c15ull * (index + 1)));
  return r.next_u64();
}

}  // namespace greybox
