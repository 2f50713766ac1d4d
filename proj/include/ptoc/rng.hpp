#ifndef PTOC_RNG_HPP_
#define PTOC_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ptoc/types.hpp"

namespace ptoc {

// Deterministic random stream. mt19937_64 output is fixed by the standard;
// all distributions are derived here by hand so sequences are identical
// across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  Vec uniform_vec(const Vec& lo, const Vec& hi) {
    Vec out(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      out[i] = uniform(lo[i], hi[i]);
    }
    return out;
  }

  // Box-Muller; one normal per call, two uniforms consumed.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) {  // avoid log(0)
      u1 = uniform01();
      u2 = uniform01();
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vec normal_vec(int n) {
    Vec out(n);
    for (int i = 0; i < n; ++i) out[i] = normal();
    return out;
  }

  // Uniform draw on the unit sphere in R^n. For n = 1 this is +-1.
  Vec unit_sphere(int n) {
    if (n == 1) {
      Vec v(1);
      v[0] = uniform01() < 0.5 ? -1.0 : 1.0;
      return v;
    }
    Vec v = normal_vec(n);
    double norm = v.norm();
    while (norm < 1e-12) {
      v = normal_vec(n);
      norm = v.norm();
    }
    return v / norm;
  }

  // Unbiased integer in [0, n) via rejection sampling.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Fisher-Yates, deterministic across platforms.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// splitmix64; used to derive independent sub-seeds from a master seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ptoc

#endif  // PTOC_RNG_HPP_
