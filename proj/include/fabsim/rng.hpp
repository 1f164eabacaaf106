#pragma once

#include <cstdint>

namespace fabsim {

/// Deterministic, platform-independent random stream (xoshiro256**,
/// seeded through splitmix64). std::random distributions are
/// implementation-defined, so everything that must reproduce
/// bit-identically across builds draws from this instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform index in [0, n). n must be > 0.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Derive an independent stream from the original seed and a stream id.
  /// Forking is order-independent: it depends only on (seed, stream).
  Rng derive(std::uint64_t stream) const {
    std::uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL + stream);
    std::uint64_t a = splitmix64(x);
    std::uint64_t b = splitmix64(x);
    return Rng(a ^ rotl(b, 23) ^ stream);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace fabsim
