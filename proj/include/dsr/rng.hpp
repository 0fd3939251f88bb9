#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dsr {

/// Seeded random stream with platform-independent sampling helpers.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// std::*_distribution adaptors are not, so all sampling goes through the
/// helpers below to keep trajectories bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(Mix(seed)), seed_material_(Mix(seed)) {}

  std::uint64_t NextU64() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t UniformInt(std::uint64_t n) {
    // Reject the 2^64 mod n lowest outputs so x % n is exactly uniform.
    const std::uint64_t threshold = (std::uint64_t{0} - n) % n;
    std::uint64_t x = engine_();
    while (x < threshold) x = engine_();
    return x % n;
  }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t UniformRange(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(UniformInt(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double Uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }

  bool Bernoulli(double p) { return Uniform01() < p; }

  /// Derives an independent child stream keyed by name. The parent is not
  /// advanced, so adding a new fork never shifts existing streams.
  Rng Fork(std::string_view name) const { return Rng(seed_material_ ^ Hash(name)); }

  static std::uint64_t Mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t Hash(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return Mix(h);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_material_;
};

}  // namespace dsr
