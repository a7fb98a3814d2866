#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "finsler/geodesic.hpp"

// Boundary-value geodesics by shooting: damped Newton on
// S(X) = Exp_y(X) - z with finite-difference Jacobian columns, plus a
// seeded multistart layer that perturbs the chart-segment initial guess
// to hunt for additional solutions (long-way geodesics, conjugate-point
// neighborhoods).  All randomness flows from the seed in the options.

namespace finsler {

struct ShootOptions {
  double shoot_tol = 1e-9;  // endpoint hit tolerance, chart units
  int max_iterations = 60;
  int multistart = 8;
  bool multistart_always = false;  // probe every start even after a hit
  double step = 5e-3;              // integrator step during shooting
  double drift_tol = 1e-6;
  uint64_t seed = 0x5eed;
};

struct ShootingResult {
  Vec X;  // initial velocity: Exp_y(X) = z
  int iterations = 0;
  double residual = 0;  // final endpoint error, chart units
  bool converged = false;
  GeodesicSolution geodesic;
  double length = 0;  // = F(y, X) by constancy of F along the flow
};

namespace detail {

inline IntegrationOptions shoot_integration(const ShootOptions& o) {
  IntegrationOptions io;
  io.step = o.step;
  io.drift_tol = o.drift_tol;
  return io;
}

// endpoint error of the candidate X, infinity when the chart is left
inline double shoot_residual(const Metric& m, const Point& y, const Point& z, const Vec& X,
                             const IntegrationOptions& io, Point* endpoint = nullptr) {
  try {
    Point p = exp_map(m, y, X, io);
    if (endpoint) *endpoint = p;
    double e2 = 0;
    for (size_t i = 0; i < p.size(); i++) e2 += (p[i] - z[i]) * (p[i] - z[i]);
    return std::sqrt(e2);
  } catch (const DomainExitError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const IntegrationError&) {
    return std::numeric_limits<double>::infinity();
  }
}

// single damped Newton run from one initial guess
inline std::optional<ShootingResult> shoot_attempt(const Metric& m, const Point& y, const Point& z,
                                                   Vec X, const ShootOptions& opts,
                                                   double* best_residual) {
  const int n = m.dim();
  IntegrationOptions io = shoot_integration(opts);

  // a guess that immediately leaves the chart is shrunk toward 0_y
  double err = shoot_residual(m, y, z, X, io);
  for (int s = 0; s < 40 && !std::isfinite(err); s++) {
    for (double& c : X) c *= 0.5;
    err = shoot_residual(m, y, z, X, io);
  }
  if (!std::isfinite(err)) return std::nullopt;

  int it = 0;
  for (; it < opts.max_iterations && err > opts.shoot_tol; it++) {
    if (best_residual) *best_residual = std::min(*best_residual, err);
    Point p;
    shoot_residual(m, y, z, X, io, &p);
    Mat J(n, n);
    try {
      for (int j = 0; j < n; j++) {
        Vec e(n, 0.0);
        e[j] = 1.0;
        Vec col = d_exp(m, y, X, e, io);
        for (int i = 0; i < n; i++) J(i, j) = col[i];
      }
    } catch (const Error&) {
      return std::nullopt;
    }
    Vec R(n);
    for (int i = 0; i < n; i++) R[i] = z[i] - p[i];
    Vec delta;
    try {
      delta = lu_solve(J, R);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int back = 0; back < 21; back++, lambda *= 0.5) {
      Vec Xt(n);
      for (int i = 0; i < n; i++) Xt[i] = X[i] + lambda * delta[i];
      double errt = shoot_residual(m, y, z, Xt, io);
      if (errt < err * (1.0 - 1e-4 * lambda)) {
        X = Xt;
        err = errt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (best_residual) *best_residual = std::min(*best_residual, err);
  if (err > opts.shoot_tol) return std::nullopt;

  ShootingResult res;
  res.X = X;
  res.iterations = it;
  res.residual = err;
  res.converged = true;
  res.geodesic = integrate_geodesic(m, {y, X}, 1.0, io);
  res.length = m.eval_F(y, X);
  return res;
}

}  // namespace detail

// All converged shooting solutions found by the multistart search,
// deduplicated and sorted by length (shortest first).
inline std::vector<ShootingResult> connect_all(const Metric& m, const Point& y, const Point& z,
                                               const ShootOptions& opts = {}) {
  m.require_in_domain(y);
  m.require_in_domain(z);
  const int n = m.dim();

  Vec T(n);
  double t2 = 0;
  for (int i = 0; i < n; i++) {
    T[i] = z[i] - y[i];
    t2 += T[i] * T[i];
  }
  if (std::sqrt(t2) < 1e-13 * (1.0 + norm2(y))) {
    ShootingResult trivial;
    trivial.X = Vec(n, 0.0);
    trivial.converged = true;
    return {trivial};
  }

  // chart-segment Simpson estimate of the length fixes the guess scale
  Point mid(n);
  for (int i = 0; i < n; i++) mid[i] = 0.5 * (y[i] + z[i]);
  double Fy = m.eval_F(y, T);
  double L = (Fy + 4.0 * m.eval_F(mid, T) + m.eval_F(z, T)) / 6.0;
  Vec X0(n);
  for (int i = 0; i < n; i++) X0[i] = T[i] * (L / Fy);
  double x0n = norm2(X0);

  Rng rng(opts.seed);
  std::vector<ShootingResult> found;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int k = 0; k < std::max(1, opts.multistart); k++) {
    Vec Xk = X0;
    if (k > 0) {
      Rng r = rng.fork(k);
      double scale = std::exp(r.uniform(std::log(0.5), std::log(8.0)));
      Vec u = r.unit_vector(n);
      double a = r.uniform(0.0, 1.0);
      double mixn = 0;
      for (int i = 0; i < n; i++) {
        Xk[i] = (1.0 - a) * X0[i] / x0n + a * u[i];
        mixn += Xk[i] * Xk[i];
      }
      mixn = std::sqrt(mixn);
      if (mixn < 1e-9) continue;
      for (int i = 0; i < n; i++) Xk[i] *= scale * x0n / mixn;
    }
    auto res = detail::shoot_attempt(m, y, z, Xk, opts, &best_residual);
    if (res) {
      bool dup = false;
      for (const ShootingResult& f : found) {
        double d2 = 0;
        for (int i = 0; i < n; i++) d2 += (f.X[i] - res->X[i]) * (f.X[i] - res->X[i]);
        if (std::sqrt(d2) <= 1e-6 * (1.0 + norm2(f.X))) {
          dup = true;
          break;
        }
      }
      if (!dup) found.push_back(std::move(*res));
      if (!opts.multistart_always) break;
    }
  }
  std::sort(found.begin(), found.end(), [](const ShootingResult& a, const ShootingResult& b) {
    if (a.length != b.length) return a.length < b.length;
    return a.X < b.X;
  });
  if (found.empty())
    throw NoGeodesicError("shooting did not converge from any start", best_residual);
  return found;
}

// Best (shortest) geodesic from y to z.
inline ShootingResult connect(const Metric& m, const Point& y, const Point& z,
                              const ShootOptions& opts = {}) {
  return connect_all(m, y, z, opts).front();
}

// Finslerian distance: length of the minimizing converged geodesic.
// Directed: distance(y, z) need not equal distance(z, y).
inline double distance(const Metric& m, const Point& y, const Point& z,
                       const ShootOptions& opts = {}) {
  ShootOptions o = opts;
  o.multistart_always = true;
  return connect_all(m, y, z, o).front().length;
}

}  // namespace finsler
