#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace btp {

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(a + 0x9E3779B97F4A7C15ull * (b + 1));
}

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Minimal deterministic generator (splitmix64 stream). The standard
// distributions are not bit-portable across implementations, so all
// randomness in the library goes through this.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    return mix64(z);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1]
  double next_double_open() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  std::uint64_t next_below(std::uint64_t n) { return n ? next() % n : 0; }

  // Box-Muller; two uniforms per draw keeps the stream stateless.
  double next_gaussian(double mu, double sigma) {
    double u1 = next_double_open();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mu + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace btp
