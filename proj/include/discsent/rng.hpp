#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

namespace discsent {

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Maps 64 random bits to [0, 1) with 53 bits of precision.
constexpr double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// SplitMix64 generator. Identical seeds give identical streams on every platform.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGamma;
    return mix64(state_);
  }

  /// Uniform in [0, n) by rejection; n must be positive.
  constexpr std::uint64_t next_below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  constexpr bool next_bit() noexcept { return (next() >> 63) != 0; }

  constexpr double next_unit() noexcept { return unit_interval(next()); }

  /// Uniform in [lo, hi).
  constexpr double next_uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_unit(); }

  /// Independent child stream; the parent advances by one draw.
  constexpr SplitMix64 fork() noexcept { return SplitMix64(next()); }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Seed for one paragraph's extraction stream, a pure function of its identity.
constexpr std::uint64_t paragraph_seed(std::uint64_t seed, std::string_view doc_id,
                                       std::uint64_t paragraph_index) noexcept {
  return mix64(mix64(seed) ^ mix64(fnv1a64(doc_id)) ^ mix64(paragraph_index + SplitMix64::kGamma));
}

/// In-place Fisher-Yates shuffle.
template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, SplitMix64& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.next_below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace discsent
