#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "finsler/shooting.hpp"

// Convex-neighbourhood radius estimation.  The radii are existence
// quantities; what is computed here is a falsification search on a finite
// grid: a candidate radius epsilon passes when seeded point pairs drawn
// from the exp-image of the epsilon-ball all connect by a unique short
// geodesic staying inside the working ball of radius eta = 3 epsilon, and
// the differential of exp keeps full rank up to radius epsilon.  Reported
// radii are certified by testing only, never proven.

namespace finsler {

struct ConvexityOptions {
  ShootOptions shoot;  // probe solver; dialed cheaper than standalone connect
  double rank_tol = 0.05;
  double eta_factor = 3.0;
  double containment_margin = 0.05;
  int rank_flags = 8;
  uint64_t seed = 0xc09e;

  ConvexityOptions() {
    shoot.multistart = 6;
    shoot.step = 1e-2;
  }
};

struct RadiusDiagnostics {
  double radius = 0;
  bool pass = false;
  int pairs_tested = 0;
  int nonconverged = 0;
  int containment_fail = 0;
  int multiple_solutions = 0;
  int rank_fail = 0;
  int sampling_fail = 0;
  double min_rank_sigma = 0;
};

struct ConvexityReport {
  Point x;
  double epsilon = 0;  // largest all-pass grid radius, 0 when none pass
  double eta = 0;
  double epsilon_tilde = 0;  // always epsilon / 3
  double eta_factor = 3.0;
  int samples_per_radius = 0;
  std::vector<RadiusDiagnostics> radii;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["x"] = x;
    j["epsilon"] = epsilon;
    j["eta"] = eta;
    j["epsilon_tilde"] = epsilon_tilde;
    j["eta_factor"] = eta_factor;
    j["samples_per_radius"] = samples_per_radius;
    auto& arr = j["radii"] = nlohmann::ordered_json::array();
    for (const RadiusDiagnostics& d : radii) {
      nlohmann::ordered_json r;
      r["radius"] = d.radius;
      r["pass"] = d.pass;
      r["pairs_tested"] = d.pairs_tested;
      r["nonconverged"] = d.nonconverged;
      r["containment_fail"] = d.containment_fail;
      r["multiple_solutions"] = d.multiple_solutions;
      r["rank_fail"] = d.rank_fail;
      r["sampling_fail"] = d.sampling_fail;
      r["min_rank_sigma"] = d.min_rank_sigma;
      arr.push_back(std::move(r));
    }
    return j;
  }
};

// "a:b:step" (inclusive endpoints up to roundoff) or a single radius
inline std::vector<double> parse_radius_grid(const std::string& spec) {
  std::vector<double> out;
  size_t c1 = spec.find(':');
  try {
    if (c1 == std::string::npos) {
      out.push_back(std::stod(spec));
    } else {
      size_t c2 = spec.find(':', c1 + 1);
      if (c2 == std::string::npos) throw InputError("grid must be start:stop:step");
      double a = std::stod(spec.substr(0, c1));
      double b = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
      double h = std::stod(spec.substr(c2 + 1));
      if (!(h > 0) || !(a > 0) || b < a) throw InputError("grid must be positive ascending");
      for (double r = a; r <= b + 1e-12; r += h) out.push_back(r);
    }
  } catch (const std::invalid_argument&) {
    throw InputError("could not parse radius grid '" + spec + "'");
  } catch (const std::out_of_range&) {
    throw InputError("could not parse radius grid '" + spec + "'");
  }
  for (double r : out)
    if (!(r > 0)) throw InputError("grid radii must be positive");
  return out;
}

struct EigenBounds {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0;
};

// eigenvalue range of g over seeded flags in a chart ball; the bounds
// feed the chart-to-F distance conversion used by the containment proxy
inline EigenBounds sampled_g_bounds(const Metric& m, const Point& center, double chart_radius,
                                    Rng& rng, int samples = 16) {
  EigenBounds b;
  const int n = m.dim();
  for (int k = 0; k < samples; k++) {
    Point p(n);
    double r = chart_radius;
    for (int tries = 0; tries < 50; tries++, r *= 0.8) {
      Vec u = rng.unit_vector(n);
      double s = r * std::pow(rng.uniform(), 1.0 / n);
      for (int i = 0; i < n; i++) p[i] = center[i] + s * u[i];
      if (m.domain().contains(p)) break;
    }
    if (!m.domain().contains(p)) continue;
    try {
      FundamentalTensor ft = fundamental_tensor(m, {p, rng.unit_vector(n)});
      Vec ev = sym_eigenvalues(ft.g);
      b.lo = std::min(b.lo, ev.front());
      b.hi = std::max(b.hi, ev.back());
    } catch (const Error&) {
    }
  }
  if (!(b.hi > 0)) throw NumericalError("could not sample metric eigenvalue bounds");
  return b;
}

// Minimum singular value of D Exp_x at X, measured between the g-inner
// products at the flag (x, X) and at the terminal flag of the geodesic.
// Radial directions score 1 by the Gauss lemma; on the round sphere the
// transverse value is |sin(rho)| / rho at F-radius rho.
inline double exp_rank_sigma_min(const Metric& m, const Point& x, const Vec& X,
                                 const IntegrationOptions& io = {}) {
  const int n = m.dim();
  GeodesicSolution sol = integrate_geodesic(m, {x, X}, 1.0, io);
  if (sol.status == GeodesicStatus::domain_exit)
    throw DomainExitError("rank probe left the chart domain", sol.end_x(), sol.exit_time);
  if (sol.status != GeodesicStatus::ok)
    throw IntegrationError("rank probe integration failed: " + sol.status_detail);
  FundamentalTensor gx = fundamental_tensor(m, {x, X});
  FundamentalTensor gp = fundamental_tensor(m, {sol.end_x(), sol.end_v()});
  Mat J(n, n);
  for (int j = 0; j < n; j++) {
    Vec e(n, 0.0);
    e[j] = 1.0;
    Vec col = d_exp(m, x, X, e, io);
    for (int i = 0; i < n; i++) J(i, j) = col[i];
  }
  Mat Lx = cholesky(gx.g);
  Mat Lp = cholesky(gp.g);
  Mat A = matmul(transpose(Lp), J);  // want M with M Lx^T = A
  Mat At = transpose(A);
  Mat Mt(n, n);
  for (int j = 0; j < n; j++) {
    Vec col(n);
    for (int i = 0; i < n; i++) col[i] = At(i, j);
    Vec sol_col = tri_lower_solve(Lx, col);
    for (int i = 0; i < n; i++) Mt(i, j) = sol_col[i];
  }
  return min_singular_value(transpose(Mt));
}

namespace detail {

// point on the exp-image sphere of F-radius r around x, direction w
inline Point exp_indicatrix_point(const Metric& m, const Point& x, const Vec& w, double r,
                                  const IntegrationOptions& io) {
  Vec X = w;
  double Fw = m.eval_F(x, w);
  for (double& c : X) c *= r / Fw;
  return exp_map(m, x, X, io);
}

}  // namespace detail

inline ConvexityReport estimate_convexity_radii(const Metric& m, const Point& x,
                                                const std::vector<double>& grid,
                                                int samples_per_radius,
                                                const ConvexityOptions& opts = {}) {
  m.require_in_domain(x);
  if (grid.empty()) throw InputError("radius grid is empty");
  for (size_t i = 0; i + 1 < grid.size(); i++)
    if (grid[i + 1] <= grid[i]) throw InputError("radius grid must be strictly ascending");
  if (samples_per_radius < 1) throw InputError("need at least one sample per radius");

  const int n = m.dim();
  IntegrationOptions io = detail::shoot_integration(opts.shoot);
  Rng master(opts.seed);
  ConvexityReport rep;
  rep.x = x;
  rep.eta_factor = opts.eta_factor;
  rep.samples_per_radius = samples_per_radius;

  for (size_t ri = 0; ri < grid.size(); ri++) {
    double eps = grid[ri];
    double eta = opts.eta_factor * eps;
    RadiusDiagnostics d;
    d.radius = eps;
    d.min_rank_sigma = std::numeric_limits<double>::infinity();
    Rng rng = master.fork(1000 + ri);

    // rank health of D Exp on a deterministic radius ladder up to eps
    for (int k = 0; k < opts.rank_flags; k++) {
      double rho = eps * double(k + 1) / opts.rank_flags;
      Vec w = rng.unit_vector(n);
      Vec X = w;
      double Fw = m.eval_F(x, w);
      for (double& c : X) c *= rho / Fw;
      try {
        double sigma = exp_rank_sigma_min(m, x, X, io);
        d.min_rank_sigma = std::min(d.min_rank_sigma, sigma);
        if (sigma < opts.rank_tol) d.rank_fail++;
      } catch (const Error&) {
        d.sampling_fail++;
      }
    }

    bool radius_ok = d.rank_fail == 0 && d.sampling_fail == 0;

    // chart conversion factor for the containment proxy
    double conv_hi = std::numeric_limits<double>::infinity();
    if (radius_ok) {
      try {
        Rng brng = rng.fork(77);
        // generous chart region: the eps-image plus slack toward eta
        EigenBounds eb = sampled_g_bounds(m, x, 0.1 + eps, brng);
        conv_hi = std::sqrt(eb.hi);
      } catch (const Error&) {
        // fall back to the arc-length bound alone
      }
    }

    for (int pi = 0; radius_ok && pi < samples_per_radius; pi++) {
      Rng prng = rng.fork(10 + pi);
      d.pairs_tested++;
      Point y, z;
      try {
        double r1 = eps * std::pow(prng.uniform(), 1.0 / n);
        double r2 = eps * std::pow(prng.uniform(), 1.0 / n);
        y = detail::exp_indicatrix_point(m, x, prng.unit_vector(n), r1, io);
        z = detail::exp_indicatrix_point(m, x, prng.unit_vector(n), r2, io);
      } catch (const Error&) {
        d.sampling_fail++;
        radius_ok = false;
        break;
      }
      double sep = 0;
      for (int i = 0; i < n; i++) sep += (z[i] - y[i]) * (z[i] - y[i]);
      if (std::sqrt(sep) < 1e-10) continue;

      ShootOptions sp = opts.shoot;
      sp.multistart_always = true;
      sp.seed = prng.fork(991).next_u64();
      std::vector<ShootingResult> results;
      try {
        results = connect_all(m, y, z, sp);
      } catch (const NoGeodesicError&) {
        d.nonconverged++;
        radius_ok = false;
        break;
      }

      // every geodesic from y of length below eta stays in B_eta(y) by the
      // arc-length bound; the chart proxy tightens the margin check
      const ShootingResult& best = results.front();
      bool contained = best.length < eta;
      if (contained) {
        double F0 = best.length;
        for (size_t k = 0; k < best.geodesic.x.size(); k++) {
          double chart = 0;
          for (int i = 0; i < n; i++) {
            double dxi = best.geodesic.x[k][i] - y[i];
            chart += dxi * dxi;
          }
          double proxy = std::min(best.geodesic.t[k] * F0, conv_hi * std::sqrt(chart));
          if (proxy > eta * (1.0 + opts.containment_margin)) contained = false;
        }
      }
      if (!contained) {
        d.containment_fail++;
        radius_ok = false;
        break;
      }

      int short_ones = 0;
      for (const ShootingResult& r : results)
        if (r.length < eta) short_ones++;
      if (short_ones > 1) {
        d.multiple_solutions++;
        radius_ok = false;
        break;
      }
    }

    d.pass = radius_ok && d.nonconverged == 0 && d.containment_fail == 0 &&
             d.multiple_solutions == 0 && d.rank_fail == 0 && d.sampling_fail == 0;
    if (!std::isfinite(d.min_rank_sigma)) d.min_rank_sigma = 0;
    rep.radii.push_back(d);
    if (d.pass) rep.epsilon = eps;
  }

  rep.eta = opts.eta_factor * rep.epsilon;
  rep.epsilon_tilde = rep.epsilon / 3.0;
  return rep;
}

struct EscapeFinding {
  Vec X;
  double length = 0;
  double max_distance_from_start = 0;
  bool escaped = false;
};

// Alternative (non-minimizing) geodesics between y and z must leave the
// closed eta-ball around y.  Probes interior samples of each extra
// geodesic with full distance solves.
inline std::vector<EscapeFinding> check_uniqueness_escape(const Metric& m, const Point& y,
                                                          const Point& z, double eta,
                                                          const ShootOptions& opts = {}) {
  ShootOptions o = opts;
  o.multistart_always = true;
  std::vector<ShootingResult> all;
  try {
    all = connect_all(m, y, z, o);
  } catch (const NoGeodesicError&) {
    return {};
  }
  std::vector<EscapeFinding> out;
  ShootOptions probe = opts;
  probe.multistart_always = true;
  probe.multistart = std::min(probe.multistart, 4);
  for (size_t k = 1; k < all.size(); k++) {
    const GeodesicSolution& g = all[k].geodesic;
    EscapeFinding f;
    f.X = all[k].X;
    f.length = all[k].length;
    const int n_probe = 5;
    for (int j = 1; j <= n_probe; j++) {
      size_t idx = j * (g.x.size() - 1) / (n_probe + 1);
      try {
        f.max_distance_from_start =
            std::max(f.max_distance_from_start, distance(m, y, g.x[idx], probe));
      } catch (const NoGeodesicError&) {
        // unreachable probe point: certainly outside the working ball
        f.max_distance_from_start = std::numeric_limits<double>::infinity();
      }
    }
    f.escaped = f.max_distance_from_start > eta;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace finsler
