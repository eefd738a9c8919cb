#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace mpf {

/**
 * splitmix64: tiny counter-based generator with a fixed output sequence for
 * any given seed. Used everywhere reproducibility matters, because the
 * standard library distributions are not portable across implementations.
 */
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
  std::uint64_t state_;
};

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

/// Combines two seeds through one splitmix round; order-sensitive.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b | 1ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Per-record seed, independent of the order records are produced in.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view question_id,
                                 std::string_view mode) noexcept {
  return mix_seed(mix_seed(root, fnv1a64(question_id)), fnv1a64(mode));
}

/// Uniform draw from the n-simplex (symmetric unit-concentration Dirichlet),
/// via normalized exponentials.
inline std::vector<double> dirichlet_uniform(std::size_t n, SplitMix64& rng) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // 1 - u lies in (0, 1], so the log is finite.
    w[i] = -std::log(1.0 - rng.next_double());
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace mpf
