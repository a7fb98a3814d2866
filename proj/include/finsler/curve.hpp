#pragma once

#include <cmath>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/linalg.hpp"
#include "finsler/metric.hpp"

// Discretely sampled curves in a chart.  Parameters must be strictly
// increasing; velocities are optional and are reconstructed by finite
// differences when absent (five-point stencils on uniform grids, otherwise
// three-point non-uniform formulas).

namespace finsler {

struct SampledCurve {
  std::vector<double> s;
  std::vector<Point> points;
  std::vector<Vec> velocities;  // may be empty

  size_t size() const { return s.size(); }
};

inline void require_valid_curve(const SampledCurve& c, int dim) {
  if (c.s.size() < 8) throw InputError("sampled curve needs at least 8 samples");
  if (c.points.size() != c.s.size()) throw InputError("sampled curve: points/parameters mismatch");
  if (!c.velocities.empty() && c.velocities.size() != c.s.size())
    throw InputError("sampled curve: velocities/parameters mismatch");
  for (size_t k = 0; k < c.s.size(); k++) {
    if (k && !(c.s[k] > c.s[k - 1]))
      throw InputError("sampled curve: parameters must be strictly increasing");
    if (int(c.points[k].size()) != dim) throw InputError("sampled curve: point dimension mismatch");
    if (!c.velocities.empty() && int(c.velocities[k].size()) != dim)
      throw InputError("sampled curve: velocity dimension mismatch");
  }
}

namespace detail {

inline bool uniform_grid(const std::vector<double>& s, double& h) {
  h = (s.back() - s.front()) / double(s.size() - 1);
  for (size_t k = 1; k < s.size(); k++)
    if (std::abs(s[k] - s[k - 1] - h) > 1e-9 * std::max(1.0, std::abs(h))) return false;
  return true;
}

}  // namespace detail

// d/ds of vector-valued samples f(s).  Fourth order on uniform grids,
// second order otherwise.
inline std::vector<Vec> sampled_derivative(const std::vector<double>& s,
                                           const std::vector<Vec>& f) {
  size_t n = s.size();
  if (n < 5) throw InputError("sampled_derivative needs at least 5 samples");
  int dim = int(f.front().size());
  std::vector<Vec> d(n, Vec(dim, 0.0));
  double h;
  if (detail::uniform_grid(s, h)) {
    auto at = [&](size_t k, int c) { return f[k][c]; };
    for (int c = 0; c < dim; c++) {
      d[0][c] = (-25 * at(0, c) + 48 * at(1, c) - 36 * at(2, c) + 16 * at(3, c) - 3 * at(4, c)) / (12 * h);
      d[1][c] = (-3 * at(0, c) - 10 * at(1, c) + 18 * at(2, c) - 6 * at(3, c) + at(4, c)) / (12 * h);
      for (size_t k = 2; k + 2 < n; k++)
        d[k][c] = (at(k - 2, c) - 8 * at(k - 1, c) + 8 * at(k + 1, c) - at(k + 2, c)) / (12 * h);
      d[n - 2][c] = (3 * at(n - 1, c) + 10 * at(n - 2, c) - 18 * at(n - 3, c) + 6 * at(n - 4, c) - at(n - 5, c)) / (12 * h);
      d[n - 1][c] = (25 * at(n - 1, c) - 48 * at(n - 2, c) + 36 * at(n - 3, c) - 16 * at(n - 4, c) + 3 * at(n - 5, c)) / (12 * h);
    }
    return d;
  }
  for (size_t k = 0; k < n; k++) {
    size_t a = k == 0 ? 0 : k - 1;
    if (a + 2 >= n) a = n - 3;
    double h1 = s[a + 1] - s[a], h2 = s[a + 2] - s[a + 1];
    double t = s[k];
    // derivative of the quadratic through (s[a..a+2], f[a..a+2]) at t
    double s0 = s[a], s1 = s[a + 1], s2 = s[a + 2];
    double w0 = (2 * t - s1 - s2) / ((s0 - s1) * (s0 - s2));
    double w1 = (2 * t - s0 - s2) / ((s1 - s0) * (s1 - s2));
    double w2 = (2 * t - s0 - s1) / ((s2 - s0) * (s2 - s1));
    (void)h1;
    (void)h2;
    for (int c = 0; c < dim; c++) d[k][c] = w0 * f[a][c] + w1 * f[a + 1][c] + w2 * f[a + 2][c];
  }
  return d;
}

// Velocities of a sampled curve: supplied ones if present, else numerical.
inline std::vector<Vec> curve_velocities(const SampledCurve& c) {
  if (!c.velocities.empty()) return c.velocities;
  return sampled_derivative(c.s, c.points);
}

}  // namespace finsler
