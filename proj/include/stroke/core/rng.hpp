#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace stroke {

// SplitMix64: 64-bit-state PRNG (Steele, Lea & Flood 2014). Pinned here so
// shuffles, phantom noise and weight init reproduce bit-for-bit across
// implementations; see the format notes in the README.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in (0, 1]; never returns 0 so it is safe under log().
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; pairs are cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Uniform integer in [0, n). Modulo draw, documented as part of the
  // pinned shuffle algorithm.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Derives an independent stream seed, e.g. per case or per fold.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  return rng.next_u64();
}

}  // namespace stroke
