#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"

// Small dense linear algebra for chart dimensions (n is typically 2..8).
// The solver is templated on the scalar so it can run on jets; pivoting
// compares the underlying double values.

namespace finsler {

using Vec = std::vector<double>;

class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(size_t(rows) * cols, 0.0) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; i++) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return a_[size_t(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[size_t(i) * cols_ + j]; }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

inline Vec matvec(const Mat& m, const Vec& x) {
  Vec y(m.rows(), 0.0);
  for (int i = 0; i < m.rows(); i++)
    for (int j = 0; j < m.cols(); j++) y[i] += m(i, j) * x[j];
  return y;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); i++)
    for (int k = 0; k < a.cols(); k++) {
      double aik = a(i, k);
      for (int j = 0; j < b.cols(); j++) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); i++)
    for (int j = 0; j < a.cols(); j++) t(j, i) = a(i, j);
  return t;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); i++) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

// Solve A x = b in place by Gaussian elimination with partial pivoting.
// A is row-major n*n, overwritten; b becomes the solution.
template<class T>
void solve_linear(int n, std::vector<T>& A, std::vector<T>& b) {
  for (int col = 0; col < n; col++) {
    int piv = col;
    double best = std::abs(value_of(A[size_t(col) * n + col]));
    for (int r = col + 1; r < n; r++) {
      double v = std::abs(value_of(A[size_t(r) * n + col]));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (!(best > 0) || !std::isfinite(best))
      throw NumericalError("linear system is singular");
    if (piv != col) {
      for (int j = col; j < n; j++) std::swap(A[size_t(piv) * n + j], A[size_t(col) * n + j]);
      std::swap(b[piv], b[col]);
    }
    for (int r = col + 1; r < n; r++) {
      T f = A[size_t(r) * n + col] / A[size_t(col) * n + col];
      for (int j = col + 1; j < n; j++)
        A[size_t(r) * n + j] -= f * A[size_t(col) * n + j];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; r--) {
    T acc = b[r];
    for (int j = r + 1; j < n; j++) acc -= A[size_t(r) * n + j] * b[j];
    b[r] = acc / A[size_t(r) * n + r];
  }
}

inline Vec lu_solve(const Mat& a, const Vec& b) {
  int n = a.rows();
  if (a.cols() != n || int(b.size()) != n) throw InputError("lu_solve: shape mismatch");
  std::vector<double> A(size_t(n) * n);
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++) A[size_t(i) * n + j] = a(i, j);
  Vec x = b;
  solve_linear(n, A, x);
  return x;
}

// Cholesky factor L (lower triangular, A = L L^T); throws ConvexityError
// if A is not positive definite.
inline Mat cholesky(const Mat& a) {
  int n = a.rows();
  Mat L(n, n);
  for (int i = 0; i < n; i++) {
    for (int j = 0; j <= i; j++) {
      double s = a(i, j);
      for (int k = 0; k < j; k++) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (!(s > 0)) throw ConvexityError("matrix is not positive definite");
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  return L;
}

inline Vec tri_lower_solve(const Mat& L, const Vec& b) {
  int n = L.rows();
  Vec x(n);
  for (int i = 0; i < n; i++) {
    double s = b[i];
    for (int k = 0; k < i; k++) s -= L(i, k) * x[k];
    x[i] = s / L(i, i);
  }
  return x;
}

inline Vec tri_upper_solve(const Mat& U, const Vec& b) {
  int n = U.rows();
  Vec x(n);
  for (int i = n - 1; i >= 0; i--) {
    double s = b[i];
    for (int k = i + 1; k < n; k++) s -= U(i, k) * x[k];
    x[i] = s / U(i, i);
  }
  return x;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline Vec sym_eigenvalues(const Mat& a0) {
  int n = a0.rows();
  Mat a = a0;
  double scale = 0;
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++) scale = std::max(scale, std::abs(a(i, j)));
  if (scale == 0) return Vec(n, 0.0);
  for (int sweep = 0; sweep < 100; sweep++) {
    double off = 0;
    for (int i = 0; i < n; i++)
      for (int j = i + 1; j < n; j++) off = std::max(off, std::abs(a(i, j)));
    if (off <= 1e-15 * scale) break;
    for (int p = 0; p < n; p++)
      for (int q = p + 1; q < n; q++) {
        if (std::abs(a(p, q)) <= 1e-18 * scale) continue;
        double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; k++) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; k++) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  Vec ev(n);
  for (int i = 0; i < n; i++) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

inline double min_singular_value(const Mat& a) {
  Mat ata = matmul(transpose(a), a);
  Vec ev = sym_eigenvalues(ata);
  return std::sqrt(std::max(0.0, ev.front()));
}

// lambda_max / lambda_min for a symmetric positive definite matrix;
// +inf if the smallest eigenvalue is not positive.
inline double sym_condition(const Mat& a) {
  Vec ev = sym_eigenvalues(a);
  if (!(ev.front() > 0)) return std::numeric_limits<double>::infinity();
  return ev.back() / ev.front();
}

}  // namespace finsler
