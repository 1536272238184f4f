#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace rfim {

// SplitMix64 output finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Counter-based splittable stream.
///
/// A stream is identified by a 64-bit key; the n-th output is a pure
/// function of (key, n). `split(id)` derives an independent child key, so a
/// value drawn for (master seed, replication, site) never depends on how the
/// work was scheduled. The key is exposed so that a single replication can be
/// reproduced from its recorded seed.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }

  [[nodiscard]] constexpr CounterRng split(std::uint64_t id) const noexcept {
    return CounterRng(mix64(key_ ^ mix64(id + 0x632be59bd9b4e019ull)));
  }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ull);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = (*this)();
      const unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  // Standard normal via Box-Muller (cosine branch only, so each call consumes
  // exactly two outputs).
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Purpose tags used when several independent fields are drawn inside one
// replication (X and its copy X', Z and Z', subset choices, ...).
namespace stream {
inline constexpr std::uint64_t primary = 0;
inline constexpr std::uint64_t copy = 1;
inline constexpr std::uint64_t subset = 2;
inline constexpr std::uint64_t site_choice = 3;
}  // namespace stream

}  // namespace rfim
