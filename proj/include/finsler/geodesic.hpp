#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "finsler/connection.hpp"
#include "finsler/curve.hpp"

// Geodesic integration and the exponential map.
//
// The flow is xdd = -2 G(x, xd), integrated by classic fixed-step RK4.  F is
// a first integral of the flow, so its relative drift along the numerical
// trajectory is tracked as a quality signal: drift beyond 100x the tolerance
// aborts the run.  Leaving the chart domain is not an error of the
// integrator; the solution reports it and exp_map turns it into an
// exception carrying the exit state.

namespace finsler {

struct IntegrationOptions {
  double step = 1e-2;       // target step; the actual step divides t_end evenly
  double drift_tol = 1e-6;  // relative F-conservation tolerance
  int max_steps = 1000000;
  // replacement right-hand side (e.g. perturbed sprays); null = spray of m
  std::function<Vec(const Metric&, const TangentVector&)> spray_override;
};

enum class GeodesicStatus { ok, domain_exit, quality_failure };

struct GeodesicSolution {
  std::vector<double> t;
  std::vector<Point> x;
  std::vector<Vec> v;
  std::vector<double> F;
  GeodesicStatus status = GeodesicStatus::ok;
  std::string status_detail;
  double exit_time = 0;  // meaningful when status != ok
  double max_drift = 0;  // max relative F drift over accepted samples
  double step_used = 0;
  int steps = 0;

  const Point& end_x() const { return x.back(); }
  const Vec& end_v() const { return v.back(); }

  SampledCurve to_curve() const {
    SampledCurve c;
    c.s = t;
    c.points = x;
    c.velocities = v;
    return c;
  }
};

inline GeodesicSolution integrate_geodesic(const Metric& m, const TangentVector& init,
                                           double t_end, const IntegrationOptions& opts = {}) {
  m.require_in_domain(init.x);
  m.require_fiber(init.x, init.y);
  // negative t_end integrates the flow backward in time
  if (t_end == 0 || !std::isfinite(t_end)) throw InputError("integration time must be nonzero");
  if (!(opts.step > 0)) throw InputError("integration step must be positive");
  double want = std::abs(t_end) / opts.step;
  if (want > double(opts.max_steps)) throw InputError("integration would exceed the step limit");
  int N = std::max(1, int(std::llround(want)));
  double h = t_end / N;

  const int n = m.dim();
  auto rhs_accel = [&](const Point& x, const Vec& v) -> Vec {
    Vec G = opts.spray_override ? opts.spray_override(m, {x, v}) : spray(m, {x, v});
    for (double& c : G) c *= -2.0;
    return G;
  };

  GeodesicSolution sol;
  sol.step_used = h;
  Point x = init.x;
  Vec v = init.y;
  double F0 = m.eval_F(x, v);
  sol.t.push_back(0);
  sol.x.push_back(x);
  sol.v.push_back(v);
  sol.F.push_back(F0);

  Point xs(n);
  Vec vs(n);
  for (int k = 0; k < N; k++) {
    double tk = k * h;
    try {
      Vec a1 = rhs_accel(x, v);
      for (int i = 0; i < n; i++) {
        xs[i] = x[i] + 0.5 * h * v[i];
        vs[i] = v[i] + 0.5 * h * a1[i];
      }
      Vec k2x = vs;
      Vec a2 = rhs_accel(xs, vs);
      for (int i = 0; i < n; i++) {
        xs[i] = x[i] + 0.5 * h * k2x[i];
        vs[i] = v[i] + 0.5 * h * a2[i];
      }
      Vec k3x = vs;
      Vec a3 = rhs_accel(xs, vs);
      for (int i = 0; i < n; i++) {
        xs[i] = x[i] + h * k3x[i];
        vs[i] = v[i] + h * a3[i];
      }
      Vec k4x = vs;
      Vec a4 = rhs_accel(xs, vs);
      for (int i = 0; i < n; i++) {
        x[i] += h / 6.0 * (v[i] + 2 * k2x[i] + 2 * k3x[i] + k4x[i]);
        v[i] += h / 6.0 * (a1[i] + 2 * a2[i] + 2 * a3[i] + a4[i]);
      }
    } catch (const DomainError& e) {
      sol.status = GeodesicStatus::domain_exit;
      sol.status_detail = e.what();
      sol.exit_time = tk;
      return sol;
    } catch (const EvalError& e) {
      sol.status = GeodesicStatus::domain_exit;
      sol.status_detail = e.what();
      sol.exit_time = tk;
      return sol;
    } catch (const ZeroSectionError& e) {
      sol.status = GeodesicStatus::quality_failure;
      sol.status_detail = e.what();
      sol.exit_time = tk;
      return sol;
    }

    bool finite = true;
    for (int i = 0; i < n; i++)
      if (!std::isfinite(x[i]) || !std::isfinite(v[i])) finite = false;
    if (!finite) {
      sol.status = GeodesicStatus::quality_failure;
      sol.status_detail = "state became non-finite";
      sol.exit_time = tk + h;
      return sol;
    }
    if (!m.domain().contains(x)) {
      sol.status = GeodesicStatus::domain_exit;
      sol.status_detail = "trajectory left the chart domain";
      sol.exit_time = tk + h;
      return sol;
    }
    double Fk = m.norm<double>(std::span<const double>(x), std::span<const double>(v));
    double drift = std::abs(Fk - F0) / F0;
    sol.max_drift = std::max(sol.max_drift, drift);
    if (drift > 100.0 * opts.drift_tol) {
      sol.status = GeodesicStatus::quality_failure;
      sol.status_detail = "norm drift exceeded 100x the tolerance";
      sol.exit_time = tk + h;
      return sol;
    }
    sol.t.push_back(tk + h);
    sol.x.push_back(x);
    sol.v.push_back(v);
    sol.F.push_back(Fk);
    sol.steps++;
  }
  sol.t.back() = t_end;  // kill accumulated roundoff in the final stamp
  return sol;
}

// Exp_x(X): endpoint of the unit-time geodesic with initial data (x, X).
inline Point exp_map(const Metric& m, const Point& x, const Vec& X,
                     const IntegrationOptions& opts = {}) {
  m.require_in_domain(x);
  if (int(X.size()) != m.dim()) throw InputError("tangent vector has wrong dimension");
  if (norm2(X) < m.y_min_tol(x)) return x;
  GeodesicSolution sol = integrate_geodesic(m, {x, X}, 1.0, opts);
  if (sol.status == GeodesicStatus::domain_exit)
    throw DomainExitError("geodesic left the chart domain: " + sol.status_detail,
                          sol.end_x(), sol.exit_time);
  if (sol.status != GeodesicStatus::ok)
    throw IntegrationError("geodesic integration failed: " + sol.status_detail);
  return sol.end_x();
}

// Directional derivative of Exp_x at X in direction V, by central
// differences through the integrator (the default production path).
inline Vec d_exp(const Metric& m, const Point& x, const Vec& X, const Vec& V,
                 const IntegrationOptions& opts = {}) {
  if (int(V.size()) != m.dim()) throw InputError("variation vector has wrong dimension");
  double nv = norm2(V);
  if (nv == 0) return Vec(m.dim(), 0.0);
  double h = 1e-5 * (1.0 + norm2(X)) / nv;
  Vec Xp(X), Xm(X);
  for (int i = 0; i < m.dim(); i++) {
    Xp[i] += h * V[i];
    Xm[i] -= h * V[i];
  }
  Point pp = exp_map(m, x, Xp, opts);
  Point pm = exp_map(m, x, Xm, opts);
  Vec out(m.dim());
  for (int i = 0; i < m.dim(); i++) out[i] = (pp[i] - pm[i]) / (2 * h);
  return out;
}

// Same derivative from the linearized flow (Jacobi-style), as an
// independent cross-check: integrate the state and its first variation.
inline Vec d_exp_variational(const Metric& m, const Point& x, const Vec& X, const Vec& V,
                             const IntegrationOptions& opts = {}) {
  m.require_in_domain(x);
  m.require_fiber(x, X);
  if (int(V.size()) != m.dim()) throw InputError("variation vector has wrong dimension");
  const int n = m.dim();
  double want = 1.0 / opts.step;
  if (want > double(opts.max_steps)) throw InputError("integration would exceed the step limit");
  int N = std::max(1, int(std::llround(want)));
  double h = 1.0 / N;

  using J1 = Jet<1, double>;
  // state: x, v and their first variation dx, dv
  auto accel = [&](const std::vector<double>& s, std::vector<double>& ds) {
    // ds = d/dt state; s = [x, v, dx, dv]
    std::vector<J1> xj(n), vj(n), G;
    for (int i = 0; i < n; i++) {
      xj[i] = J1(s[i]);
      xj[i].c[1] = s[2 * n + i];
      vj[i] = J1(s[n + i]);
      vj[i].c[1] = s[3 * n + i];
    }
    detail::spray_T<J1>(m, std::span<const J1>(xj), std::span<const J1>(vj), G);
    for (int i = 0; i < n; i++) {
      ds[i] = s[n + i];
      ds[n + i] = -2.0 * G[i].c[0];
      ds[2 * n + i] = s[3 * n + i];
      ds[3 * n + i] = -2.0 * G[i].c[1];
    }
  };

  std::vector<double> s(4 * n, 0.0);
  for (int i = 0; i < n; i++) {
    s[i] = x[i];
    s[n + i] = X[i];
    s[3 * n + i] = V[i];  // vary the initial velocity; dx(0) = 0
  }
  std::vector<double> k1(4 * n), k2(4 * n), k3(4 * n), k4(4 * n), tmp(4 * n);
  for (int k = 0; k < N; k++) {
    accel(s, k1);
    for (size_t i = 0; i < s.size(); i++) tmp[i] = s[i] + 0.5 * h * k1[i];
    accel(tmp, k2);
    for (size_t i = 0; i < s.size(); i++) tmp[i] = s[i] + 0.5 * h * k2[i];
    accel(tmp, k3);
    for (size_t i = 0; i < s.size(); i++) tmp[i] = s[i] + h * k3[i];
    accel(tmp, k4);
    for (size_t i = 0; i < s.size(); i++)
      s[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    Point xc(s.begin(), s.begin() + n);
    if (!m.domain().contains(xc))
      throw DomainExitError("geodesic left the chart domain", xc, (k + 1) * h);
  }
  return Vec(s.begin() + 2 * n, s.begin() + 3 * n);
}

// -- curve length -----------------------------------------------------------

struct LengthResult {
  double length = 0;
  int zero_velocity_samples = 0;
};

namespace detail {

// integral over [a,b] of the quadratic through (s0,f0),(s1,f1),(s2,f2)
inline double quad_integral(double s0, double s1, double s2, double f0, double f1, double f2,
                            double a, double b) {
  auto pq = [&](double p, double q) {
    auto anti = [&](double t) { return t * t * t / 3 - (p + q) * t * t / 2 + p * q * t; };
    return anti(b) - anti(a);
  };
  return f0 * pq(s1, s2) / ((s0 - s1) * (s0 - s2)) + f1 * pq(s0, s2) / ((s1 - s0) * (s1 - s2)) +
         f2 * pq(s0, s1) / ((s2 - s0) * (s2 - s1));
}

}  // namespace detail

// Directed length of a sampled curve by composite Simpson quadrature of
// F(c, cd).  Samples where the velocity vanishes contribute zero and are
// counted for the caller to surface as a warning.
inline LengthResult curve_length(const Metric& m, const SampledCurve& c) {
  require_valid_curve(c, m.dim());
  std::vector<Vec> vel = curve_velocities(c);
  size_t n = c.size();
  std::vector<double> f(n);
  LengthResult out;
  for (size_t k = 0; k < n; k++) {
    m.require_in_domain(c.points[k]);
    if (norm2(vel[k]) < m.y_min_tol(c.points[k])) {
      f[k] = 0.0;
      out.zero_velocity_samples++;
    } else {
      f[k] = m.eval_F(c.points[k], vel[k]);
    }
  }
  size_t k = 0;
  while (k + 2 < n) {
    out.length += detail::quad_integral(c.s[k], c.s[k + 1], c.s[k + 2], f[k], f[k + 1], f[k + 2],
                                        c.s[k], c.s[k + 2]);
    k += 2;
  }
  if (k + 1 < n)  // odd interval count: quadratic through the last three
    out.length += detail::quad_integral(c.s[n - 3], c.s[n - 2], c.s[n - 1], f[n - 3], f[n - 2],
                                        f[n - 1], c.s[n - 2], c.s[n - 1]);
  return out;
}

enum class ImageVia { resample, chain_rule };

// Length of s -> Exp_x(b(s)) for a sampled tangent-space curve b.  The
// default maps the samples through exp and differentiates the image
// numerically; the chain-rule route pushes tangent velocities through
// d_exp instead and exists as a cross-check.
inline LengthResult image_length(const Metric& m, const Point& x, const SampledCurve& b,
                                 const IntegrationOptions& opts = {},
                                 ImageVia via = ImageVia::resample) {
  require_valid_curve(b, m.dim());
  size_t n = b.size();
  SampledCurve img;
  img.s = b.s;
  img.points.resize(n);
  for (size_t k = 0; k < n; k++) img.points[k] = exp_map(m, x, b.points[k], opts);
  if (via == ImageVia::chain_rule) {
    std::vector<Vec> bdot = curve_velocities(b);
    img.velocities.resize(n);
    for (size_t k = 0; k < n; k++) {
      if (norm2(b.points[k]) < m.y_min_tol(x)) {
        // at the tip the map is the identity on velocities
        img.velocities[k] = bdot[k];
      } else {
        img.velocities[k] = d_exp(m, x, b.points[k], bdot[k], opts);
      }
    }
  }
  return curve_length(m, img);
}

// Affine geodesics have constant speed; rescaling the parameter by it
// yields the unit-speed representative.
inline SampledCurve unit_speed_curve(const GeodesicSolution& sol) {
  SampledCurve c = sol.to_curve();
  double F0 = sol.F.front();
  for (double& s : c.s) s *= F0;
  for (Vec& v : c.velocities)
    for (double& ci : v) ci /= F0;
  return c;
}

}  // namespace finsler
