#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace icnf {

/// Seeded random source. All stochastic steps in the library draw from one of
/// these so runs are reproducible from (config, seed).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::uint64_t next() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// 64-bit FNV-1a. Used for stable sub-seeds and config hashes.
constexpr std::uint64_t fnv1a(std::string_view text,
                              std::uint64_t hash = 1469598103934665603ULL) {
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

/// Mixes a base seed with a stream label into an independent sub-seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = fnv1a(stream, 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL));
  // splitmix64 finaliser
  h ^= h >> 30;
  h *= 0xBF58476D1CE4E5B9ULL;
  h ^= h >> 27;
  h *= 0x94D049BB133111EBULL;
  h ^= h >> 31;
  return h;
}

}  // namespace icnf
