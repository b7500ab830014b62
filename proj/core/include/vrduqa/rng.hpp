#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vrduqa {

/// Seeded generator with a portable bounded-integer draw.
///
/// std::uniform_int_distribution is implementation-defined, so generated
/// datasets would differ between standard libraries; mt19937_64 output is
/// fully specified, and the draw below uses plain rejection sampling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();

 private:
  std::mt19937_64 engine_;
};

/// Mixes a user seed with a string key (question id, provider name...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

/// Deterministic [0, 1) value from a hex digest; used by the mock providers.
double unit_from_hex(std::string_view hex_digest);

}  // namespace vrduqa
