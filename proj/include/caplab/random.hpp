#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace caplab {

// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream key from a parent seed and a list of tags
// (epoch, sample index, purpose code, ...). Order of tags matters.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t key = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t tag : tags) key = mix64(key ^ mix64(tag + 0x9e3779b97f4a7c15ULL));
  return key;
}

// Counter-based generator: the i-th draw is a pure function of (key, i), so
// any element of a stream can be produced without generating its prefix.
// The sequential interface below simply walks the counter.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr std::uint64_t at(std::uint64_t key, std::uint64_t index) noexcept {
    return mix64(key + (index + 1) * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on [0, 1) with 53 random bits.
  static constexpr double unit_at(std::uint64_t key, std::uint64_t index) noexcept {
    return static_cast<double>(at(key, index) >> 11) * 0x1.0p-53;
  }

  std::uint64_t next_u64() noexcept { return at(key_, counter_++); }
  double next_unit() noexcept { return unit_at(key_, counter_++); }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_unit(); }

  // Standard normal via Box-Muller; consumes two draws per call.
  double normal() noexcept {
    const double u1 = 1.0 - next_unit();  // (0, 1]
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Tags for derive_seed so that distinct uses of one global seed never collide.
namespace seed_tag {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t shuffle = 2;
inline constexpr std::uint64_t particles = 3;
inline constexpr std::uint64_t train_attack = 4;
inline constexpr std::uint64_t probe = 5;
inline constexpr std::uint64_t data = 6;
inline constexpr std::uint64_t split = 7;
inline constexpr std::uint64_t eval_attack = 8;
inline constexpr std::uint64_t eval_polytope = 9;
}  // namespace seed_tag

}  // namespace caplab
