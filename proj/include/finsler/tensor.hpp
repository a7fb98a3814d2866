#pragma once

#include <span>
#include <vector>

#include "finsler/jet.hpp"
#include "finsler/linalg.hpp"
#include "finsler/metric.hpp"

// Derivatives of the energy E = F^2 and the fundamental tensor
//   g_ij(x,y) = 1/2 d2(F^2)/dy_i dy_j.
// Partials come from truncated Taylor scalars and are exact; the *_fd
// variants recompute them by central differences and exist as an
// independent cross-check, not as the production path.

namespace finsler {

// One partial-derivative request: with respect to x[index] or y[index].
struct PartialSpec {
  bool base;  // true: x, false: y
  int index;
};

namespace detail {

// E = F^2 with up to two seeded perturbation directions, generic over the
// base scalar so the whole computation can itself be differentiated.
// Null direction pointers mean an unseeded slot.
template<class B>
Jet<2, B> energy_dir2(const Metric& m, std::span<const B> x, std::span<const B> y,
                      const B* dx1, const B* dy1, const B* dx2, const B* dy2) {
  using J = Jet<2, B>;
  int n = m.dim();
  std::vector<J> xt(n), yt(n);
  for (int i = 0; i < n; i++) {
    xt[i] = J(x[i]);
    yt[i] = J(y[i]);
    if (dx1) xt[i].c[1] = dx1[i];
    if (dy1) yt[i].c[1] = dy1[i];
    if (dx2) xt[i].c[2] = dx2[i];
    if (dy2) yt[i].c[2] = dy2[i];
  }
  J F = m.norm<J>(std::span<const J>(xt), std::span<const J>(yt));
  return F * F;
}

template<class B>
Jet<1, B> energy_dir1(const Metric& m, std::span<const B> x, std::span<const B> y,
                      const B* dx, const B* dy) {
  using J = Jet<1, B>;
  int n = m.dim();
  std::vector<J> xt(n), yt(n);
  for (int i = 0; i < n; i++) {
    xt[i] = J(x[i]);
    yt[i] = J(y[i]);
    if (dx) xt[i].c[1] = dx[i];
    if (dy) yt[i].c[1] = dy[i];
  }
  J F = m.norm<J>(std::span<const J>(xt), std::span<const J>(yt));
  return F * F;
}

// Fundamental tensor over any scalar: g[i*n+j] = 1/2 d2E/dy_i dy_j.
template<class B>
void fundamental_tensor_T(const Metric& m, std::span<const B> x, std::span<const B> y,
                          std::vector<B>& g) {
  int n = m.dim();
  g.assign(size_t(n) * n, B(0.0));
  std::vector<B> ei(n, B(0.0)), ej(n, B(0.0));
  for (int i = 0; i < n; i++) {
    ei[i] = B(1.0);
    for (int j = i; j < n; j++) {
      ej[j] = B(1.0);
      Jet<2, B> e = energy_dir2<B>(m, x, y, nullptr, ei.data(), nullptr, ej.data());
      B gij = e.c[3] * 0.5;
      g[size_t(i) * n + j] = gij;
      g[size_t(j) * n + i] = gij;
      ej[j] = B(0.0);
    }
    ei[i] = B(0.0);
  }
}

}  // namespace detail

// Exact partial of F^2 at a flag; 1 or 2 derivative requests.
inline double energy_partial(const Metric& m, const TangentVector& v,
                             std::span<const PartialSpec> parts) {
  m.require_in_domain(v.x);
  m.require_fiber(v.x, v.y);
  int n = m.dim();
  for (const PartialSpec& p : parts)
    if (p.index < 0 || p.index >= n) throw InputError("partial index out of range");
  std::span<const double> x(v.x), y(v.y);
  if (parts.size() == 1) {
    Vec e(n, 0.0);
    e[parts[0].index] = 1.0;
    auto r = detail::energy_dir1<double>(m, x, y, parts[0].base ? e.data() : nullptr,
                                         parts[0].base ? nullptr : e.data());
    return r.c[1];
  }
  if (parts.size() == 2) {
    Vec e1(n, 0.0), e2(n, 0.0);
    e1[parts[0].index] = 1.0;
    e2[parts[1].index] = 1.0;
    auto r = detail::energy_dir2<double>(m, x, y, parts[0].base ? e1.data() : nullptr,
                                         parts[0].base ? nullptr : e1.data(),
                                         parts[1].base ? e2.data() : nullptr,
                                         parts[1].base ? nullptr : e2.data());
    return r.c[3];
  }
  throw InputError("energy_partial supports one or two derivative requests");
}

inline double energy_partial(const Metric& m, const TangentVector& v,
                             std::initializer_list<PartialSpec> parts) {
  return energy_partial(m, v, std::span<const PartialSpec>(parts.begin(), parts.size()));
}

// Central-difference version of the same partials (independent oracle).
inline double energy_partial_fd(const Metric& m, const TangentVector& v,
                                std::span<const PartialSpec> parts, double step = 1e-5) {
  m.require_in_domain(v.x);
  m.require_fiber(v.x, v.y);
  auto E = [&](const Point& x, const Vec& y) {
    double F = m.norm<double>(std::span<const double>(x), std::span<const double>(y));
    return F * F;
  };
  auto shift = [&](int which, double h) {
    TangentVector w = v;
    (parts[which].base ? w.x : w.y)[parts[which].index] += h;
    return w;
  };
  if (parts.size() == 1) {
    TangentVector p = shift(0, step), q = shift(0, -step);
    return (E(p.x, p.y) - E(q.x, q.y)) / (2 * step);
  }
  if (parts.size() == 2) {
    TangentVector pp = shift(0, step), pm = shift(0, step), mp = shift(0, -step), mm = shift(0, -step);
    (parts[1].base ? pp.x : pp.y)[parts[1].index] += step;
    (parts[1].base ? pm.x : pm.y)[parts[1].index] -= step;
    (parts[1].base ? mp.x : mp.y)[parts[1].index] += step;
    (parts[1].base ? mm.x : mm.y)[parts[1].index] -= step;
    return (E(pp.x, pp.y) - E(pm.x, pm.y) - E(mp.x, mp.y) + E(mm.x, mm.y)) / (4 * step * step);
  }
  throw InputError("energy_partial_fd supports one or two derivative requests");
}

inline double energy_partial_fd(const Metric& m, const TangentVector& v,
                                std::initializer_list<PartialSpec> parts, double step = 1e-5) {
  return energy_partial_fd(m, v, std::span<const PartialSpec>(parts.begin(), parts.size()), step);
}

struct FundamentalTensor {
  Mat g;
  Mat g_inv;
  double condition;  // spectral condition number of g
};

inline FundamentalTensor fundamental_tensor(const Metric& m, const TangentVector& v) {
  m.require_in_domain(v.x);
  m.require_fiber(v.x, v.y);
  int n = m.dim();
  std::vector<double> gflat;
  detail::fundamental_tensor_T<double>(m, std::span<const double>(v.x), std::span<const double>(v.y), gflat);
  FundamentalTensor t;
  t.g = Mat(n, n);
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++) {
      double gij = gflat[size_t(i) * n + j];
      if (!std::isfinite(gij)) throw NumericalError("fundamental tensor evaluated non-finite");
      t.g(i, j) = gij;
    }
  Vec ev = sym_eigenvalues(t.g);
  double scale = std::max(std::abs(ev.front()), std::abs(ev.back()));
  if (!(ev.front() > 1e-12 * scale))
    throw ConvexityError("fundamental tensor is not positive definite at this flag");
  t.condition = ev.back() / ev.front();
  t.g_inv = Mat(n, n);
  for (int j = 0; j < n; j++) {
    Vec e(n, 0.0);
    e[j] = 1.0;
    Vec col = lu_solve(t.g, e);
    for (int i = 0; i < n; i++) t.g_inv(i, j) = col[i];
  }
  return t;
}

// g-inner product of u and w at the flag's fundamental tensor.
inline double g_inner(const FundamentalTensor& t, const Vec& u, const Vec& w) {
  return dot(u, matvec(t.g, w));
}

// Partials of g_ij with respect to the chart coordinates:
// result[k](i,j) = dg_ij/dx_k.  Exact, via one nesting level.
inline std::vector<Mat> g_base_partials(const Metric& m, const TangentVector& v) {
  m.require_in_domain(v.x);
  m.require_fiber(v.x, v.y);
  int n = m.dim();
  using J1 = Jet<1, double>;
  std::vector<Mat> out(n, Mat(n, n));
  std::vector<J1> x(n), y(n), g;
  for (int k = 0; k < n; k++) {
    for (int i = 0; i < n; i++) {
      x[i] = J1(v.x[i]);
      y[i] = J1(v.y[i]);
    }
    x[k].c[1] = 1.0;
    detail::fundamental_tensor_T<J1>(m, std::span<const J1>(x), std::span<const J1>(y), g);
    for (int i = 0; i < n; i++)
      for (int j = 0; j < n; j++) out[k](i, j) = g[size_t(i) * n + j].c[1];
  }
  return out;
}

// Partials of g_ij with respect to the fiber coordinates:
// result[k](i,j) = dg_ij/dy_k.
inline std::vector<Mat> g_fiber_partials(const Metric& m, const TangentVector& v) {
  m.require_in_domain(v.x);
  m.require_fiber(v.x, v.y);
  int n = m.dim();
  using J1 = Jet<1, double>;
  std::vector<Mat> out(n, Mat(n, n));
  std::vector<J1> x(n), y(n), g;
  for (int k = 0; k < n; k++) {
    for (int i = 0; i < n; i++) {
      x[i] = J1(v.x[i]);
      y[i] = J1(v.y[i]);
    }
    y[k].c[1] = 1.0;
    detail::fundamental_tensor_T<J1>(m, std::span<const J1>(x), std::span<const J1>(y), g);
    for (int i = 0; i < n; i++)
      for (int j = 0; j < n; j++) out[k](i, j) = g[size_t(i) * n + j].c[1];
  }
  return out;
}

// Strong-convexity sampling: the fundamental tensor must be positive
// definite along random flags and along every coordinate axis (axis flags
// catch norms whose Hessian degenerates there, e.g. quartic-sum norms).
inline void validate_convexity(const Metric& m, std::uint64_t seed = 0xc0981u) {
  Rng rng(seed);
  int n = m.dim();
  for (int s = 0; s < 4; s++) {
    Point x = m.sample_domain_point(rng);
    std::vector<Vec> dirs;
    for (int i = 0; i < n; i++) {
      Vec e(n, 0.0);
      e[i] = 1.0;
      dirs.push_back(e);
      e[i] = -1.0;
      dirs.push_back(e);
    }
    for (int k = 0; k < 4; k++) dirs.push_back(rng.unit_vector(n));
    for (const Vec& y : dirs) {
      FundamentalTensor t = fundamental_tensor(m, {x, y});  // throws if not PD
      double qf = g_inner(t, y, y);
      double F = m.eval_F(x, y);
      if (std::abs(qf - F * F) > 1e-6 * std::max(1.0, F * F))
        throw ConvexityError("y^T g y disagrees with F^2; norm is not 1-homogeneous");
    }
  }
}

// Full load path: construct from JSON, then run the curvature-level check.
inline Metric load_metric(const nlohmann::json& spec) {
  Metric m = Metric::from_json(spec);
  validate_convexity(m);
  return m;
}

}  // namespace finsler
