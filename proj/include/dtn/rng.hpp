#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace dtn {

// Deterministic random source. mt19937_64 output is pinned by the standard,
// but the std distributions are not (libstdc++ and libc++ disagree), so the
// transforms below are written out by hand. Identical seeds must produce
// identical streams on every platform or recorded experiments stop being
// reproducible.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform in [0, 1): top 53 bits of the raw draw.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Standard normal via Box-Muller; draws are consumed in pairs and the
  // spare is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n) by rejection, so the result is exactly uniform
  // and platform-independent.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

  bool coin() { return (gen_() >> 63) != 0; }

  // Fisher-Yates, back to front.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Deterministic permutation of 0..n-1; seed 0 is reserved for the identity.
inline std::vector<std::size_t> permutation(std::size_t n,
                                            std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (seed != 0) {
    Rng rng(seed);
    rng.shuffle(idx);
  }
  return idx;
}

}  // namespace dtn
