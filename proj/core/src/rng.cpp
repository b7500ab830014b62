#include "vrduqa/rng.hpp"

#include <limits>
#include <string>

#include "vrduqa/hashing.hpp"

namespace vrduqa {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  // Largest multiple of n representable; draws at or above it are rejected.
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % n + 1) % n;
  std::uint64_t x = engine_();
  while (x > limit) x = engine_();
  return x % n;
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
  return splitmix64(seed ^ splitmix64(fnv1a64(key)));
}

double unit_from_hex(std::string_view hex_digest) {
  // First 13 hex digits = 52 bits.
  std::uint64_t v = std::stoull(std::string(hex_digest.substr(0, 13)), nullptr, 16);
  return static_cast<double>(v) * 0x1.0p-52;
}

}  // namespace vrduqa
