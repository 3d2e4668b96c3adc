#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace dfl {

namespace detail {
__extension__ typedef unsigned __int128 u128;
}

/// SplitMix64 finalizer. Used for stateless, order-independent draws.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ull));
}

/// Uniform integer in [0, n) from a hash of (seed, a, b); no hidden state.
inline std::uint64_t hashed_below(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                  std::uint64_t n) noexcept {
  const std::uint64_t h = mix64(mix64(seed ^ mix64(a)) + mix64(b ^ 0xd1b54a32d192ed03ull));
  return static_cast<std::uint64_t>((static_cast<detail::u128>(h) * n) >> 64);
}

/// Seeded generator whose draws are identical on every platform.
///
/// std::normal_distribution and friends are implementation-defined, so the
/// transforms here are spelled out on top of the (standardized) mt19937_64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n), unbiased (Lemire's rejection method).
  std::uint64_t below(std::uint64_t n) {
    detail::u128 m = static_cast<detail::u128>(engine_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<detail::u128>(engine_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dfl
