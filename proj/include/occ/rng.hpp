#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "occ/errors.hpp"

namespace occ {

// splitmix64 finalizer. Used to derive independent stream seeds from
// (seed, tag, tag, ...) tuples so that parallel and serial runs agree.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c);
}

// FNV-1a. std::hash is implementation-defined, so anything that feeds seeds
// or fingerprints hashes strings with this instead.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// All randomness in the project flows through this wrapper. mt19937_64 output
// is pinned by the standard; the helpers below avoid std::*_distribution,
// whose sequences are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    if (n == 0) throw DomainError("Rng::index: n must be positive");
    return static_cast<std::size_t>(gen_() % n);
  }

  bool chance(double p) { return uniform() < p; }

  // Knuth's product-of-uniforms sampler; exact and fast for the small rates
  // the traffic model uses.
  int poisson(double lambda) {
    if (lambda < 0) throw DomainError("Rng::poisson: negative rate");
    if (lambda == 0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[index(v.size())];
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace occ
