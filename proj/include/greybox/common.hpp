#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace greybox {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration; the CLI maps this to exit code 2.
struct config_error : error {
  using error::error;
};

struct io_error : error {
  using error::error;
};

// FNV-1a 64-bit. Used for schema fingerprints, config hashes and artifact
// digests; not cryptographic.
inline constexpr std::uint64_t kFnvInit = 0xcbf29ce484222325ull;

constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvInit) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h = kFnvInit);
std::uint64_t fnv1a_double(double v, std::uint64_t h = kFnvInit);
std::string hex64(std::uint64_t v);

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Caps worker threads for parallel sections. 0 = hardware concurrency.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs fn(i) for every i in [0, n). Scheduling order is unspecified, so
/// callers must write results into index-addressed slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace greybox
