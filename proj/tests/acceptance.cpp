#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>
#include <sys/wait.h>

#include "finsler/verify.hpp"

// Acceptance gate: thirteen criteria, one pass/fail line each, nonzero
// exit on any failure.  Each criterion carries its own runtime budget and
// fails if it exceeds it.  argv[1] is the CLI binary, used by the
// determinism criterion.

using namespace finsler;

namespace {

std::string g_cli_path;

struct Outcome {
  bool pass = true;
  std::string note;

  void fail(const std::string& n) {
    pass = false;
    if (note.empty()) note = n;
  }
};

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

// -- 1: metric algebra ------------------------------------------------------

Outcome metric_algebra() {
  Outcome out;
  std::vector<ZooEntry> zoo = standard_zoo();
  Rng master(42);
  for (size_t mi = 0; mi < zoo.size(); mi++) {
    Metric m = load_metric(zoo[mi].spec);
    Rng mr = master.fork(mi);
    for (int k = 0; k < 100; k++) {
      Rng fr = mr.fork(k);
      TangentVector flag = sample_region_flag(m, zoo[mi].region, fr);
      double lambda = fr.uniform(0.3, 3.0);
      Vec ly = flag.y;
      for (double& c : ly) c *= lambda;

      double F = m.eval_F(flag.x, flag.y);
      double Fl = m.eval_F(flag.x, ly);
      if (rel_err(Fl, lambda * F) > 1e-9)
        out.fail(zoo[mi].id + ": F 1-homogeneity " + std::to_string(rel_err(Fl, lambda * F)));

      FundamentalTensor t0 = fundamental_tensor(m, flag);
      FundamentalTensor t1 = fundamental_tensor(m, {flag.x, ly});
      double gd = 0, gs = 0;
      for (int i = 0; i < m.dim(); i++)
        for (int j = 0; j < m.dim(); j++) {
          gd = std::max(gd, std::abs(t1.g(i, j) - t0.g(i, j)));
          gs = std::max(gs, std::abs(t0.g(i, j)));
        }
      if (gd / std::max(1.0, gs) > 1e-7)
        out.fail(zoo[mi].id + ": g 0-homogeneity " + std::to_string(gd));

      double q = g_inner(t0, flag.y, flag.y);
      if (rel_err(q, F * F) > 1e-6)
        out.fail(zoo[mi].id + ": y^T g y vs F^2 " + std::to_string(rel_err(q, F * F)));

      Vec ev = sym_eigenvalues(t0.g);
      if (ev.front() <= 0) out.fail(zoo[mi].id + ": g not positive definite");
    }
  }
  return out;
}

// -- 2, 5, 6, 7, 12: proposition checks at full sample counts ---------------

Outcome suite_check(const std::string& name) {
  Outcome out;
  VerifyOptions opts;
  std::vector<ZooEntry> zoo = standard_zoo();
  Rng master(42);
  for (size_t mi = 0; mi < zoo.size(); mi++) {
    Metric m = load_metric(zoo[mi].spec);
    Rng mr = master.fork(1000 + mi);
    CheckReport rep;
    if (name == "energy_conservation")
      rep = check_energy_conservation(m, zoo[mi].id, zoo[mi].region, opts, mr.fork(1));
    else if (name == "gauss_lemma")
      rep = check_gauss_lemma(m, zoo[mi].id, zoo[mi].region, opts, mr.fork(2));
    else if (name == "radial_minimality")
      rep = check_radial_minimality(m, zoo[mi].id, zoo[mi].region, opts, mr.fork(3));
    else if (name == "fundamental_inequality")
      rep = check_fundamental_inequality(m, zoo[mi].id, zoo[mi].region, opts, mr.fork(4));
    else
      rep = check_connection_family_invariance(m, zoo[mi].id, zoo[mi].region, opts, mr.fork(6));
    if (!rep.pass)
      out.fail(zoo[mi].id + ": residual " + std::to_string(rep.max_residual) + " vs " +
               std::to_string(rep.tolerance) + ", witness " + rep.witness.dump());
  }
  return out;
}

// -- 3: Chern-coefficient consistency ---------------------------------------

double conformal_phi(const Metric& m, const Point& x) {
  Vec e1(m.dim(), 0.0);
  e1[0] = 1.0;
  return m.eval_F(x, e1);  // conformal metrics: F = phi(x) |y|
}

Outcome chern_consistency() {
  Outcome out;
  std::vector<ZooEntry> zoo = standard_zoo();
  Rng master(7);
  for (size_t mi = 0; mi < zoo.size(); mi++) {
    Metric m = load_metric(zoo[mi].spec);
    Rng mr = master.fork(mi);
    for (int k = 0; k < 50; k++) {
      Rng fr = mr.fork(k);
      TangentVector flag = sample_region_flag(m, zoo[mi].region, fr);
      ConnectionCoefficients cc = chern_coefficients(m, flag);
      Vec gyy = connection_contract(cc, flag.y, flag.y);
      Vec G = spray(m, flag);
      double scale = 1.0;
      for (int i = 0; i < m.dim(); i++) scale = std::max(scale, std::abs(2 * G[i]));
      for (int i = 0; i < m.dim(); i++)
        if (std::abs(gyy[i] - 2 * G[i]) / scale > 1e-6)
          out.fail(zoo[mi].id + ": contraction mismatch " +
                   std::to_string(std::abs(gyy[i] - 2 * G[i])));
    }
  }

  // Riemannian reduction: conformal-flat Christoffel symbols
  // gamma^i_jk = d_ij lk + d_ik lj - d_jk li with li = dphi/dx_i / phi
  for (const char* id : {"poincare_disk", "stereographic_sphere"}) {
    ZooEntry e = zoo_entry(id);
    Metric m = load_metric(e.spec);
    Rng mr = master.fork(std::string(id) == "poincare_disk" ? 100 : 200);
    for (int k = 0; k < 10; k++) {
      Rng fr = mr.fork(k);
      TangentVector flag = sample_region_flag(m, e.region, fr);
      const Point& x = flag.x;
      int n = m.dim();
      double phi = conformal_phi(m, x);
      Vec l(n);
      double h = 1e-6;
      for (int i = 0; i < n; i++) {
        Point xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        l[i] = (conformal_phi(m, xp) - conformal_phi(m, xm)) / (2 * h * phi);
      }
      ConnectionCoefficients cc = chern_coefficients(m, flag);
      for (int i = 0; i < n; i++)
        for (int j = 0; j < n; j++)
          for (int kk = 0; kk < n; kk++) {
            double want = (i == j ? l[kk] : 0.0) + (i == kk ? l[j] : 0.0) - (j == kk ? l[i] : 0.0);
            if (std::abs(cc.gamma[i](j, kk) - want) > 1e-6)
              out.fail(std::string(id) + ": Christoffel mismatch " +
                       std::to_string(std::abs(cc.gamma[i](j, kk) - want)));
          }
    }
  }
  return out;
}

// -- 4: exponential-map oracles ---------------------------------------------

Outcome exp_oracles() {
  Outcome out;
  Metric disk = zoo_metric("poincare_disk");
  IntegrationOptions fine;
  fine.step = 1e-3;
  for (Vec X : {Vec{0.5, 0.0}, Vec{0.3, 0.4}, Vec{-0.2, 0.55}}) {
    Point end = exp_map(disk, {0.0, 0.0}, X, fine);
    double r = norm2(X);
    double err = 0;
    for (int i = 0; i < 2; i++)
      err = std::max(err, std::abs(end[i] - std::tanh(r) * X[i] / r));
    if (err > 1e-8) out.fail("disk exp oracle error " + std::to_string(err));
  }

  Metric randers = zoo_metric("randers_flat");
  IntegrationOptions io;
  io.step = 1e-2;
  for (Vec X : {Vec{0.7, -0.3}, Vec{-0.4, 0.9}}) {
    Point x0 = {0.25, -0.5};
    Point end = exp_map(randers, x0, X, io);
    double err = 0;
    for (int i = 0; i < 2; i++) err = std::max(err, std::abs(end[i] - (x0[i] + X[i])));
    if (err > 1e-12) out.fail("flat randers exp error " + std::to_string(err));
  }

  // fourth-order convergence under step halving
  Vec X{0.5, 0.3};
  double r = norm2(X);
  Point want = {std::tanh(r) * X[0] / r, std::tanh(r) * X[1] / r};
  auto exp_err = [&](double h) {
    IntegrationOptions o;
    o.step = h;
    Point got = exp_map(disk, {0.0, 0.0}, X, o);
    return std::max(std::abs(got[0] - want[0]), std::abs(got[1] - want[1]));
  };
  double ratio = exp_err(0.05) / exp_err(0.025);
  if (!(ratio >= 10.0 && ratio <= 24.0))
    out.fail("RK4 halving ratio " + std::to_string(ratio) + " outside [10, 24]");
  return out;
}

// -- 8: distance oracles ----------------------------------------------------

Point sample_box_point(const Metric& m, Rng& rng, double radius) {
  Point x(m.dim());
  do {
    for (int i = 0; i < m.dim(); i++) x[i] = rng.uniform(-radius, radius);
  } while (!m.domain().contains(x));
  return x;
}

Outcome distance_oracles() {
  Outcome out;
  ShootOptions so;
  so.step = 1e-2;
  so.multistart = 2;

  double d = distance(zoo_metric("poincare_disk"), {0.0, 0.0}, {0.5, 0.0}, so);
  if (std::abs(d - std::log(3.0)) > 1e-6) out.fail("disk ln 3 oracle: " + std::to_string(d));

  d = distance(zoo_metric("stereographic_sphere"), {0.0, 0.0}, {1.0, 0.0}, so);
  if (std::abs(d - M_PI / 2) > 1e-6) out.fail("sphere pi/2 oracle: " + std::to_string(d));

  Metric randers = zoo_metric("randers_flat");
  d = distance(randers, {0.0, 0.0}, {1.0, 0.0}, so);
  if (std::abs(d - 1.5) > 1e-9) out.fail("randers forward oracle: " + std::to_string(d));
  d = distance(randers, {1.0, 0.0}, {0.0, 0.0}, so);
  if (std::abs(d - 0.5) > 1e-9) out.fail("randers reverse oracle: " + std::to_string(d));

  std::vector<ZooEntry> zoo = standard_zoo();
  Rng master(11);
  for (size_t mi = 0; mi < zoo.size(); mi++) {
    Metric m = load_metric(zoo[mi].spec);
    Rng mr = master.fork(mi);
    for (int k = 0; k < 50; k++) {
      Rng fr = mr.fork(k);
      double rad = 0.6 * zoo[mi].region.x_radius;
      Point a = sample_box_point(m, fr, rad);
      Point b = sample_box_point(m, fr, rad);
      Point c = sample_box_point(m, fr, rad);
      try {
        double ac = distance(m, a, c, so);
        double ab = distance(m, a, b, so);
        double bc = distance(m, b, c, so);
        if (ac > ab + bc + 1e-7)
          out.fail(zoo[mi].id + ": triangle violation " + std::to_string(ac - ab - bc));
      } catch (const Error& e) {
        out.fail(zoo[mi].id + ": distance solve failed: " + e.what());
      }
    }
  }
  return out;
}

// -- 9: connectivity --------------------------------------------------------

Outcome connectivity() {
  Outcome out;
  ShootOptions so;  // default shoot_tol 1e-9
  for (const char* id : {"poincare_disk", "stereographic_sphere"}) {
    ZooEntry e = zoo_entry(id);
    Metric m = load_metric(e.spec);
    Rng mr = Rng(17).fork(std::string(id) == "poincare_disk" ? 1 : 2);
    for (int k = 0; k < 100; k++) {
      Rng fr = mr.fork(k);
      Point y = sample_box_point(m, fr, e.region.x_radius);
      Point z = sample_box_point(m, fr, e.region.x_radius);
      try {
        ShootingResult r = connect(m, y, z, so);
        if (!r.converged || r.residual > 1e-9)
          out.fail(std::string(id) + ": pair " + std::to_string(k) + " residual " +
                   std::to_string(r.residual));
      } catch (const Error& ex) {
        out.fail(std::string(id) + ": pair " + std::to_string(k) + " failed: " + ex.what());
      }
    }
  }
  return out;
}

// -- 10: convexity radii ----------------------------------------------------

Outcome convexity_radii() {
  Outcome out;
  ConvexityOptions co;
  ConvexityReport er = estimate_convexity_radii(zoo_metric("euclidean"), {0.0, 0.0},
                                               parse_radius_grid("0.25:1.0:0.25"), 6, co);
  if (er.epsilon != 1.0) out.fail("euclidean epsilon " + std::to_string(er.epsilon));
  if (er.epsilon_tilde != er.epsilon / 3.0) out.fail("euclidean epsilon_tilde not epsilon/3");

  ConvexityReport sr = estimate_convexity_radii(zoo_metric("stereographic_sphere"), {0.0, 0.0},
                                               parse_radius_grid("0.5:3.5:0.75"), 5, co);
  if (!(sr.epsilon > 0 && sr.epsilon < M_PI))
    out.fail("sphere epsilon " + std::to_string(sr.epsilon));
  if (sr.epsilon_tilde != sr.epsilon / 3.0) out.fail("sphere epsilon_tilde not epsilon/3");
  return out;
}

// -- 11: quadratic growth ---------------------------------------------------

Outcome quadratic_growth() {
  Outcome out;
  VerifyOptions opts;
  ZooEntry eu = zoo_entry("euclidean");
  CheckReport rep = check_quadratic_growth(load_metric(eu.spec), eu.id, eu.region, opts, Rng(5),
                                           eu.region.ball_epsilon, 0.4 / eu.region.ball_epsilon);
  if (!rep.pass) out.fail("euclidean: " + rep.witness.dump());

  for (const char* id : {"poincare_disk", "stereographic_sphere"}) {
    ZooEntry e = zoo_entry(id);
    CheckReport r = check_quadratic_growth(load_metric(e.spec), e.id, e.region, opts, Rng(6),
                                           e.region.ball_epsilon, opts.growth_mu);
    if (!r.pass || !(double(r.witness["fitted_mu"]) > 0))
      out.fail(std::string(id) + ": " + r.witness.dump());
  }
  return out;
}

// -- 13: CLI determinism ----------------------------------------------------

bool capture(const std::string& cmd, std::string& out, int& code) {
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return false;
  char buf[4096];
  size_t got;
  out.clear();
  while ((got = fread(buf, 1, sizeof(buf), p)) > 0) out.append(buf, got);
  int st = pclose(p);
  code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return true;
}

Outcome cli_determinism() {
  Outcome out;
  if (g_cli_path.empty()) {
    out.fail("cli path not provided (argv[1])");
    return out;
  }
  std::string cmd = g_cli_path + " verify --seed 42 2>/dev/null";
  std::string a, b;
  int ca = -1, cb = -1;
  if (!capture(cmd, a, ca) || !capture(cmd, b, cb)) {
    out.fail("could not run the CLI");
    return out;
  }
  if (ca != 0 || cb != 0)
    out.fail("verify exit codes " + std::to_string(ca) + ", " + std::to_string(cb));
  if (a != b) out.fail("reports differ between runs");
  if (a.find("\"all_pass\": true") == std::string::npos) out.fail("suite did not pass");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = argv[1];

  struct Criterion {
    int id;
    const char* label;
    double budget_s;
    std::function<Outcome()> fn;
  };
  std::vector<Criterion> criteria = {
      {1, "metric algebra", 10, metric_algebra},
      {2, "energy conservation", 20, [] { return suite_check("energy_conservation"); }},
      {3, "Chern-coefficient consistency", 20, chern_consistency},
      {4, "exponential-map oracles", 20, exp_oracles},
      {5, "Gauss lemma", 30, [] { return suite_check("gauss_lemma"); }},
      {6, "radial minimality", 30, [] { return suite_check("radial_minimality"); }},
      {7, "fundamental inequality", 10, [] { return suite_check("fundamental_inequality"); }},
      {8, "distance oracles", 60, distance_oracles},
      {9, "connectivity", 60, connectivity},
      {10, "convexity radii", 60, convexity_radii},
      {11, "quadratic growth", 30, quadratic_growth},
      {12, "connection-family invariance", 20,
       [] { return suite_check("connection_family_invariance"); }},
      {13, "determinism", 60, cli_determinism},
  };

  int failures = 0;
  double total = 0;
  for (const Criterion& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    total += dt;
    if (dt > c.budget_s) o.fail("over budget");
    std::printf("[%s] %2d. %s (%.2f s, budget %.0f s)%s%s\n", o.pass ? "PASS" : "FAIL", c.id,
                c.label, dt, c.budget_s, o.note.empty() ? "" : ": ", o.note.c_str());
    std::fflush(stdout);
    if (!o.pass) failures++;
  }
  std::printf("%d/13 criteria passed, total %.1f s\n", 13 - failures, total);
  return failures;
}
