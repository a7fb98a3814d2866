#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Self-contained random source.  Results must be reproducible bit for bit
// from a seed across builds, so no std distribution objects are used; the
// integer-to-double conversions below are fully specified.

namespace finsler {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // splitmix64 step
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform on [0,1), 53 random bits
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // standard normal, Box-Muller; second deviate cached
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::vector<double> unit_vector(int n) {
    std::vector<double> v(n);
    for (;;) {
      double s = 0;
      for (int i = 0; i < n; i++) {
        v[i] = gaussian();
        s += v[i] * v[i];
      }
      if (s > 1e-12) {
        s = 1.0 / std::sqrt(s);
        for (int i = 0; i < n; i++) v[i] *= s;
        return v;
      }
    }
  }

  // Independent child stream keyed by tag.  Advances this stream once and
  // folds the tag through the same mixer, so forks with distinct tags are
  // decorrelated and the parent remains reproducible.
  Rng fork(std::uint64_t tag) {
    std::uint64_t z = next_u64() ^ (tag * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    return Rng(z ^ (z >> 27));
  }

 private:
  std::uint64_t state_;
  double spare_ = 0;
  bool have_spare_ = false;
};

}  // namespace finsler
