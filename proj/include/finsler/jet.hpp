#pragma once

#include <array>
#include <cmath>
#include <type_traits>

// Truncated Taylor scalars for forward-mode differentiation.
//
// Jet<N,B> tracks a value together with all mixed first-order partials with
// respect to N independent perturbation parameters.  Coefficient c[mask] is
// the derivative with respect to the parameter set encoded by mask, e.g. for
// N=2: c[0] value, c[1] d/du1, c[2] d/du2, c[3] d2/du1du2.  Products follow
// subset convolution:
//   (a*b)[m] = sum over s subset of m of a[s]*b[m\s]
// Each parameter is nilpotent of order 2, so a chain rule through f needs
// f, f', ..., f^(N) only.  Nesting the base type (B itself a Jet) raises the
// attainable order: Jet<2, Jet<1>> gives exact third derivatives.

namespace finsler {

template<int N, class B = double>
struct Jet {
  static_assert(N >= 1 && N <= 3);
  static constexpr int ncoef = 1 << N;

  std::array<B, ncoef> c{};

  Jet() = default;
  Jet(const B& v) { c[0] = v; }
  template<class BB = B, class = std::enable_if_t<!std::is_same_v<BB, double>>>
  Jet(double v) { c[0] = B(v); }

  const B& value() const { return c[0]; }

  Jet& operator+=(const Jet& o) {
    for (int m = 0; m < ncoef; m++) c[m] += o.c[m];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int m = 0; m < ncoef; m++) c[m] -= o.c[m];
    return *this;
  }
  Jet& operator*=(const Jet& o) { *this = *this * o; return *this; }
  Jet& operator/=(const Jet& o) { *this = *this / o; return *this; }

  friend Jet operator-(const Jet& a) {
    Jet r;
    for (int m = 0; m < ncoef; m++) r.c[m] = -a.c[m];
    return r;
  }
  friend Jet operator+(const Jet& a, const Jet& b) { Jet r = a; r += b; return r; }
  friend Jet operator-(const Jet& a, const Jet& b) { Jet r = a; r -= b; return r; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int m = 0; m < ncoef; m++) {
      B acc = a.c[0] * b.c[m];
      for (int s = m; s != 0; s = (s - 1) & m) acc += a.c[s] * b.c[m ^ s];
      r.c[m] = acc;
    }
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * inverse(b); }
};

// -- scalar mixing ----------------------------------------------------------

template<class S, class B>
inline constexpr bool jet_scalar_v = std::is_arithmetic_v<S> || std::is_same_v<S, B>;

template<int N, class B, class S, class = std::enable_if_t<jet_scalar_v<S, B>>>
Jet<N, B> operator*(const Jet<N, B>& a, const S& s) {
  Jet<N, B> r;
  B f(s);
  for (int m = 0; m < Jet<N, B>::ncoef; m++) r.c[m] = a.c[m] * f;
  return r;
}
template<int N, class B, class S, class = std::enable_if_t<jet_scalar_v<S, B>>>
Jet<N, B> operator*(const S& s, const Jet<N, B>& a) { return a * s; }

template<int N, class B, class S, class = std::enable_if_t<jet_scalar_v<S, B>>>
Jet<N, B> operator/(const Jet<N, B>& a, const S& s) {
  if constexpr (std::is_arithmetic_v<S>) return a * (1.0 / static_cast<double>(s));
  else return a * (B(1) / s);
}
template<int N, class B, class S, class = std::enable_if_t<jet_scalar_v<S, B>>>
Jet<N, B> operator/(const S& s, const Jet<N, B>& a) { return Jet<N, B>(B(s)) / a; }

template<int N, class B, class S, class = std::enable_if_t<jet_scalar_v<S, B>>>
Jet<N, B> operator+(const Jet<N, B>& a, const S& s) { Jet<N, B> r = a; r.c[0] += B(s); return r; }
template<int N, class B, class S, class = std::enable_if_t<jet_scalar_v<S, B>>>
Jet<N, B> operator+(const S& s, const Jet<N, B>& a) { return a + s; }
template<int N, class B, class S, class = std::enable_if_t<jet_scalar_v<S, B>>>
Jet<N, B> operator-(const Jet<N, B>& a, const S& s) { Jet<N, B> r = a; r.c[0] -= B(s); return r; }
template<int N, class B, class S, class = std::enable_if_t<jet_scalar_v<S, B>>>
Jet<N, B> operator-(const S& s, const Jet<N, B>& a) { return -(a - s); }

// -- value access -----------------------------------------------------------

inline double value_of(double x) { return x; }
template<int N, class B> double value_of(const Jet<N, B>& j) { return value_of(j.c[0]); }

// Independent variable: value v, unit seed on perturbation direction dir.
template<int N, class B>
Jet<N, B> jet_var(const B& v, int dir) {
  Jet<N, B> j(v);
  j.c[1 << dir] = B(1);
  return j;
}
template<int N, class B>
Jet<N, B> jet_var(const B& v, int dir, const B& seed) {
  Jet<N, B> j(v);
  j.c[1 << dir] = seed;
  return j;
}

// -- composition ------------------------------------------------------------

// f(u) from raw derivatives d[k] = f^(k)(u0) evaluated at u0 = u.c[0]:
//   f(u0 + delta) = sum_k d[k]/k! delta^k,   delta^(N+1) = 0.
template<int N, class B>
Jet<N, B> taylor_compose(const Jet<N, B>& u, const std::array<B, N + 1>& d) {
  Jet<N, B> delta = u;
  delta.c[0] = B(0);
  Jet<N, B> r(d[0]);
  Jet<N, B> p(B(1));
  double invfact = 1.0;
  for (int k = 1; k <= N; k++) {
    p = p * delta;
    invfact /= k;
    r += p * (d[k] * invfact);
  }
  return r;
}

// -- elementary functions ---------------------------------------------------
//
// Derivative tables recurse into B, so nested jets stay exact.

inline double inverse(double x) { return 1.0 / x; }

template<int N, class B>
Jet<N, B> inverse(const Jet<N, B>& u) {
  std::array<B, N + 1> d;
  d[0] = B(1) / u.c[0];
  for (int k = 1; k <= N; k++) d[k] = d[k - 1] * (-double(k)) / u.c[0];
  return taylor_compose(u, d);
}

template<int N, class B>
Jet<N, B> sqrt(const Jet<N, B>& u) {
  using std::sqrt;
  std::array<B, N + 1> d;
  d[0] = sqrt(u.c[0]);
  for (int k = 1; k <= N; k++) d[k] = d[k - 1] * (1.5 - double(k)) / u.c[0];
  return taylor_compose(u, d);
}

template<int N, class B>
Jet<N, B> exp(const Jet<N, B>& u) {
  using std::exp;
  std::array<B, N + 1> d;
  d[0] = exp(u.c[0]);
  for (int k = 1; k <= N; k++) d[k] = d[0];
  return taylor_compose(u, d);
}

template<int N, class B>
Jet<N, B> log(const Jet<N, B>& u) {
  using std::log;
  std::array<B, N + 1> d;
  d[0] = log(u.c[0]);
  if constexpr (N >= 1) d[1] = B(1) / u.c[0];
  for (int k = 2; k <= N; k++) d[k] = d[k - 1] * (-double(k - 1)) / u.c[0];
  return taylor_compose(u, d);
}

template<int N, class B>
Jet<N, B> sin(const Jet<N, B>& u) {
  using std::cos;
  using std::sin;
  const B s = sin(u.c[0]), c = cos(u.c[0]);
  const B cycle[4] = {s, c, -s, -c};
  std::array<B, N + 1> d;
  for (int k = 0; k <= N; k++) d[k] = cycle[k % 4];
  return taylor_compose(u, d);
}

template<int N, class B>
Jet<N, B> cos(const Jet<N, B>& u) {
  using std::cos;
  using std::sin;
  const B s = sin(u.c[0]), c = cos(u.c[0]);
  const B cycle[4] = {c, -s, -c, s};
  std::array<B, N + 1> d;
  for (int k = 0; k <= N; k++) d[k] = cycle[k % 4];
  return taylor_compose(u, d);
}

template<int N, class B>
Jet<N, B> tanh(const Jet<N, B>& u) {
  using std::tanh;
  const B t = tanh(u.c[0]);
  const B w = B(1) - t * t;
  std::array<B, N + 1> d;
  d[0] = t;
  if constexpr (N >= 1) d[1] = w;
  if constexpr (N >= 2) d[2] = w * t * (-2.0);
  if constexpr (N >= 3) d[3] = w * (t * t * 6.0 - 2.0);
  return taylor_compose(u, d);
}

// Real exponent; requires a positive base value.
template<int N, class B>
Jet<N, B> pow(const Jet<N, B>& u, double p) {
  using std::pow;
  std::array<B, N + 1> d;
  d[0] = pow(u.c[0], p);
  for (int k = 1; k <= N; k++) d[k] = d[k - 1] * (p - double(k - 1)) / u.c[0];
  return taylor_compose(u, d);
}

// Integer exponent via repeated squaring; sound for any base value.
inline double ipow(double x, long long e) {
  if (e < 0) return 1.0 / ipow(x, -e);
  double r = 1.0, b = x;
  for (; e > 0; e >>= 1) {
    if (e & 1) r *= b;
    b *= b;
  }
  return r;
}

template<int N, class B>
Jet<N, B> ipow(const Jet<N, B>& x, long long e) {
  if (e < 0) return inverse(ipow(x, -e));
  Jet<N, B> r(B(1)), b = x;
  for (; e > 0; e >>= 1) {
    if (e & 1) r = r * b;
    b = b * b;
  }
  return r;
}

}  // namespace finsler
