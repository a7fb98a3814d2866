#pragma once

#include <span>
#include <vector>

#include "finsler/curve.hpp"
#include "finsler/tensor.hpp"

// Geodesic spray and the induced connection data.
//
// With E = F^2, the spray coefficients solve
//   G^i = 1/4 g^{il} ( y^k d2E/dy^l dx^k - dE/dx^l ),
// geodesics satisfy xdd = -2 G(x, xd).  The nonlinear connection is
// P^i_j = dG^i/dy^j, and the degree-one connection coefficients come from
// horizontal derivatives of g:
//   gamma^i_jk = 1/2 g^{im} ( D_j g_mk + D_k g_mj - D_m g_jk ),
//   D_j = d/dx^j - P^h_j d/dy^h.
// Everything here is exact forward-mode differentiation; the tests compare
// against closed forms and finite differences.

namespace finsler {

namespace detail {

// Spray over any scalar, so the same code yields dG/dy via one jet level.
template<class B>
void spray_T(const Metric& m, std::span<const B> x, std::span<const B> y, std::vector<B>& G) {
  int n = m.dim();
  std::vector<B> g;
  fundamental_tensor_T<B>(m, x, y, g);

  std::vector<B> rhs(n), el(n, B(0.0));
  for (int l = 0; l < n; l++) {
    el[l] = B(1.0);
    // w_l = y^k d2E/dy_l dx_k as one bidirectional derivative (dir2 = x along y)
    Jet<2, B> w = energy_dir2<B>(m, x, y, nullptr, el.data(), y.data(), nullptr);
    Jet<1, B> u = energy_dir1<B>(m, x, y, el.data(), nullptr);
    rhs[l] = (w.c[3] - u.c[1]) * 0.25;
    el[l] = B(0.0);
  }
  solve_linear(n, g, rhs);
  G = std::move(rhs);
}

}  // namespace detail

// Spray coefficients G at a flag.
inline Vec spray(const Metric& m, const TangentVector& v) {
  m.require_in_domain(v.x);
  m.require_fiber(v.x, v.y);
  std::vector<double> G;
  detail::spray_T<double>(m, std::span<const double>(v.x), std::span<const double>(v.y), G);
  for (double c : G)
    if (!std::isfinite(c)) throw NumericalError("spray evaluated non-finite");
  return G;
}

struct SprayData {
  Vec G;  // spray coefficients
  Mat P;  // P(i,j) = dG_i/dy_j
};

inline SprayData spray_with_connection(const Metric& m, const TangentVector& v) {
  m.require_in_domain(v.x);
  m.require_fiber(v.x, v.y);
  int n = m.dim();
  SprayData out;
  out.G = spray(m, v);
  out.P = Mat(n, n);
  using J1 = Jet<1, double>;
  std::vector<J1> x(n), y(n), G;
  for (int j = 0; j < n; j++) {
    for (int i = 0; i < n; i++) {
      x[i] = J1(v.x[i]);
      y[i] = J1(v.y[i]);
    }
    y[j].c[1] = 1.0;
    detail::spray_T<J1>(m, std::span<const J1>(x), std::span<const J1>(y), G);
    for (int i = 0; i < n; i++) out.P(i, j) = G[i].c[1];
  }
  return out;
}

struct ConnectionCoefficients {
  std::vector<Mat> gamma;  // gamma[i](j,k), symmetrized in (j,k)
  double symmetry_defect;  // worst raw (j,k) asymmetry before symmetrizing
};

inline ConnectionCoefficients chern_coefficients(const Metric& m, const TangentVector& v) {
  int n = m.dim();
  FundamentalTensor t = fundamental_tensor(m, v);
  SprayData sp = spray_with_connection(m, v);
  std::vector<Mat> dgx = g_base_partials(m, v);
  std::vector<Mat> dgy = g_fiber_partials(m, v);

  // horizontal derivative D_j g_ab
  std::vector<Mat> D(n, Mat(n, n));
  for (int j = 0; j < n; j++)
    for (int a = 0; a < n; a++)
      for (int b = 0; b < n; b++) {
        double s = dgx[j](a, b);
        for (int h = 0; h < n; h++) s -= sp.P(h, j) * dgy[h](a, b);
        D[j](a, b) = s;
      }

  ConnectionCoefficients out;
  out.gamma.assign(n, Mat(n, n));
  out.symmetry_defect = 0;
  std::vector<Mat> raw(n, Mat(n, n));
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++)
      for (int k = 0; k < n; k++) {
        double s = 0;
        for (int mm = 0; mm < n; mm++)
          s += t.g_inv(i, mm) * (D[j](mm, k) + D[k](mm, j) - D[mm](j, k));
        raw[i](j, k) = 0.5 * s;
      }
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++)
      for (int k = 0; k < n; k++) {
        out.symmetry_defect = std::max(out.symmetry_defect, std::abs(raw[i](j, k) - raw[i](k, j)));
        out.gamma[i](j, k) = 0.5 * (raw[i](j, k) + raw[i](k, j));
      }
  return out;
}

// gamma contracted with a pair of vectors at the defining flag.
inline Vec connection_contract(const ConnectionCoefficients& c, const Vec& u, const Vec& w) {
  int n = int(c.gamma.size());
  Vec out(n, 0.0);
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++)
      for (int k = 0; k < n; k++) out[i] += c.gamma[i](j, k) * u[j] * w[k];
  return out;
}

// -- path condition ---------------------------------------------------------

struct PathConditionReport {
  double max_residual;  // max_k | cdd_k + gamma(cd_k, cd_k) |
  double tolerance;
  bool geodesic;
  int samples;
};

// Does the sampled curve satisfy the geodesic equation of the connection?
// Accelerations are reconstructed by finite differences from the curve's
// velocity samples, so the attainable residual floor scales with the
// sampling step squared.
inline PathConditionReport check_path_condition(const Metric& m, const SampledCurve& c,
                                                double tol = 1e-3) {
  require_valid_curve(c, m.dim());
  std::vector<Vec> vel = curve_velocities(c);
  std::vector<Vec> acc = sampled_derivative(c.s, vel);
  PathConditionReport rep{0.0, tol, true, 0};
  // endpoints carry one-sided stencil noise; judge interior samples
  for (size_t k = 2; k + 2 < c.size(); k++) {
    m.require_in_domain(c.points[k]);
    if (norm2(vel[k]) < m.y_min_tol(c.points[k]))
      throw ZeroSectionError("path condition undefined where the curve stalls");
    ConnectionCoefficients cc = chern_coefficients(m, {c.points[k], vel[k]});
    Vec corr = connection_contract(cc, vel[k], vel[k]);
    double r2 = 0;
    for (int i = 0; i < m.dim(); i++) {
      double ri = acc[k][i] + corr[i];
      r2 += ri * ri;
    }
    rep.max_residual = std::max(rep.max_residual, std::sqrt(r2));
    rep.samples++;
  }
  rep.geodesic = rep.max_residual <= tol;
  return rep;
}

// -- admissible spray perturbations -----------------------------------------
//
// Nbar^i_jk = h_jk V^i with h the angular metric h_jk = g_jk - l_j l_k and
// V the g-transverse part of a seed vector.  Such a term is symmetric,
// annihilates the flag vector, and so never moves geodesics; the
// inadmissible control delta_jk V^i does.

struct PerturbationData {
  Vec V;   // transverse direction actually used
  Vec l;   // l_i = dF/dy_i at the flag
  Mat h;   // angular metric at the flag
};

inline PerturbationData make_admissible_perturbation(const Metric& m, const TangentVector& v,
                                                     const Vec& seed) {
  int n = m.dim();
  if (int(seed.size()) != n) throw InputError("perturbation seed has wrong dimension");
  FundamentalTensor t = fundamental_tensor(m, v);
  double F = m.eval_F(v.x, v.y);
  PerturbationData out;
  Vec gy = matvec(t.g, v.y);
  out.l = gy;
  for (double& c : out.l) c /= F;
  out.h = Mat(n, n);
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++) out.h(i, j) = t.g(i, j) - out.l[i] * out.l[j];
  double coef = dot(gy, seed) / (F * F);
  out.V = seed;
  for (int i = 0; i < n; i++) out.V[i] -= coef * v.y[i];
  if (norm2(out.V) < 1e-12 * std::max(1.0, norm2(seed)))
    throw InputError("perturbation seed is parallel to the flag vector");
  return out;
}

enum class PerturbationMode { admissible, inadmissible_control };

struct SprayPerturbation {
  Vec seed;
  PerturbationMode mode = PerturbationMode::admissible;
};

// G + 1/2 Nbar(y, y), with Nbar rebuilt at each flag from the fixed seed.
inline Vec spray_perturbed(const Metric& m, const TangentVector& v, const SprayPerturbation& p) {
  Vec G = spray(m, v);
  PerturbationData d = make_admissible_perturbation(m, v, p.seed);
  double q;
  if (p.mode == PerturbationMode::admissible) {
    q = dot(v.y, matvec(d.h, v.y));  // h(y,y), identically zero
  } else {
    q = dot(v.y, v.y);  // delta_jk y^j y^k
  }
  for (int i = 0; i < m.dim(); i++) G[i] += 0.5 * q * d.V[i];
  return G;
}

}  // namespace finsler
