#pragma once

#include <cstdint>
#include <random>

namespace smcs {

/// splitmix64 finalizer; good avalanche, used to derive child stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ull));
}

/// A self-contained random stream: engine plus Gaussian state, value type.
///
/// Streams are derived, never shared: `fork(tag)` produces an independent
/// child keyed on (seed, tag) without touching the parent state, so
/// per-particle / per-bridge streams can be created in any order (or in
/// parallel) and still reproduce bitwise.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed, 0x5eedu)) {}

  /// Child stream keyed on this stream's identity and `tag`.
  RngStream fork(std::uint64_t tag) const { return RngStream(mix64(seed_, tag)); }

  double normal() { return normal_(engine_); }

  /// Uniform draw on [0, 1).
  double uniform() { return uniform_(engine_); }

  std::uint64_t next_u64() { return engine_(); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace smcs
