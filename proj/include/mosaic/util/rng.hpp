#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mosaic {

// Seeded stream used everywhere determinism matters. The engine is
// std::mt19937_64, whose output sequence and single-integer seeding are fixed
// by the C++ standard, so out-of-process workers in other languages can
// reproduce it bit-exactly. Bounded draws use rejection sampling on the raw
// 64-bit output instead of std::uniform_int_distribution, whose algorithm is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). Rejects raw values below 2^64 mod bound.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// 313 words: the 312 engine state words followed by the position index.
  std::vector<std::uint64_t> state_words() const;
  /// Throws std::invalid_argument if the words do not form a valid state.
  static Rng from_state_words(const std::vector<std::uint64_t>& words);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent child seed from (base, stream, index). Results are
/// masked to 53 bits so they survive JSON consumers that use doubles.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

inline constexpr std::uint64_t kMaxSeed = (std::uint64_t{1} << 53) - 1;

// Stream tags for derive_seed.
inline constexpr std::uint64_t kEnvSeedStream = 1;
inline constexpr std::uint64_t kWorkerSeedStream = 2;
inline constexpr std::uint64_t kFallbackSeedStream = 3;

}  // namespace mosaic
