#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/expr.hpp"
#include "finsler/linalg.hpp"
#include "finsler/rng.hpp"

#include "json.hpp"

// Minkowski-norm metrics F(x,y) on a single chart: positively 1-homogeneous
// in the fiber coordinate y, smooth and positive away from the zero section.
// Four kinds are supported:
//   euclidean             F = |y|
//   riemannian_conformal  F = phi(x) |y|, phi a chart-only expression
//   randers               F = sqrt(y^T A y) + b.y, constant A, b
//   expression            F given as an expression in x1..xn, y1..yn
//
// Construction from JSON validates cheap algebraic properties (homogeneity
// by sampling, positivity, Randers drift |b|_A < 1).  The curvature-level
// check (positive definite fundamental tensor) needs second derivatives and
// lives with the tensor code; load_metric() runs both.

namespace finsler {

using Point = std::vector<double>;

// A flag: base point x with fiber vector y attached.
struct TangentVector {
  Point x;
  Vec y;
};

struct Domain {
  enum class Kind { full, ball };
  Kind kind = Kind::full;
  double radius = 0;

  static Domain ball(double r) { return {Kind::ball, r}; }

  bool contains(const Point& p) const {
    if (kind == Kind::full) return true;
    return norm2(p) < radius;
  }
  // distance from p to the domain boundary (+inf when unbounded)
  double boundary_margin(const Point& p) const {
    if (kind == Kind::full) return std::numeric_limits<double>::infinity();
    return radius - norm2(p);
  }
};

enum class MetricKind { euclidean, riemannian_conformal, randers, expression };

class Metric {
 public:
  static Metric euclidean(int n) {
    Metric m;
    m.kind_ = MetricKind::euclidean;
    m.dim_ = check_dim(n);
    m.name_ = "euclidean";
    return m;
  }

  static Metric conformal(int n, const std::string& factor, Domain dom = {}) {
    Metric m;
    m.kind_ = MetricKind::riemannian_conformal;
    m.dim_ = check_dim(n);
    m.domain_ = dom;
    m.factor_ = std::make_shared<const Expression>(
        Expression::parse(factor, n, /*allow_fiber=*/false));
    m.name_ = "riemannian_conformal";
    m.check_factor_positive();
    return m;
  }

  static Metric randers(const Mat& alpha, const Vec& beta, Domain dom = {}) {
    int n = int(beta.size());
    Metric m;
    m.kind_ = MetricKind::randers;
    m.dim_ = check_dim(n);
    m.domain_ = dom;
    m.name_ = "randers";
    if (alpha.rows() != n || alpha.cols() != n)
      throw InputError("randers: alpha must be n x n with n = len(beta)");
    for (int i = 0; i < n; i++)
      for (int j = 0; j < n; j++)
        if (std::abs(alpha(i, j) - alpha(j, i)) > 1e-12)
          throw InputError("randers: alpha must be symmetric");
    Vec ev = sym_eigenvalues(alpha);
    if (!(ev.front() > 0)) throw ConvexityError("randers: alpha is not positive definite");
    // |b|_A = sqrt(b^T A^-1 b) must stay below 1 for F to be a norm
    Vec ai_b = lu_solve(alpha, beta);
    double drift = std::sqrt(dot(beta, ai_b));
    if (!(drift < 1.0))
      throw ConvexityError("randers: |beta|_alpha = " + std::to_string(drift) + " >= 1");
    m.alpha_ = alpha;
    m.beta_ = beta;
    return m;
  }

  static Metric expression(int n, const std::string& F, Domain dom = {}) {
    Metric m;
    m.kind_ = MetricKind::expression;
    m.dim_ = check_dim(n);
    m.domain_ = dom;
    m.name_ = "expression";
    m.expr_ = std::make_shared<const Expression>(Expression::parse(F, n));
    if (!m.expr_->uses_fiber())
      throw ConvexityError("expression metric does not depend on the fiber coordinates");
    m.check_homogeneous();
    return m;
  }

  static Metric from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InputError("metric spec must be a JSON object");
    std::string kind = field<std::string>(j, "kind");
    int n;  // "n" is accepted as an alias for "dim"
    if (j.contains("dim")) n = field<int>(j, "dim");
    else if (j.contains("n")) n = field<int>(j, "n");
    else throw InputError("metric spec is missing 'dim'");
    Domain dom = domain_from_json(j);
    Metric m;
    if (kind == "euclidean") {
      m = euclidean(n);
      m.domain_ = dom;
    } else if (kind == "riemannian_conformal") {
      m = conformal(n, field<std::string>(j, "factor"), dom);
    } else if (kind == "randers") {
      auto ja = j.find("alpha");
      auto jb = j.find("beta");
      if (ja == j.end() || jb == j.end())
        throw InputError("randers metric needs 'alpha' and 'beta'");
      Mat alpha(n, n);
      if (!ja->is_array() || int(ja->size()) != n)
        throw InputError("randers: alpha must be an n x n array");
      for (int i = 0; i < n; i++) {
        if (!(*ja)[i].is_array() || int((*ja)[i].size()) != n)
          throw InputError("randers: alpha must be an n x n array");
        for (int k = 0; k < n; k++) alpha(i, k) = number_at((*ja)[i][k], "alpha");
      }
      Vec beta(n);
      if (!jb->is_array() || int(jb->size()) != n)
        throw InputError("randers: beta must have length n");
      for (int i = 0; i < n; i++) beta[i] = number_at((*jb)[i], "beta");
      m = randers(alpha, beta, dom);
    } else if (kind == "expression") {
      m = expression(n, field<std::string>(j, "F"), dom);
    } else {
      throw InputError("unknown metric kind '" + kind + "'");
    }
    if (j.contains("name")) m.name_ = field<std::string>(j, "name");
    return m;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = kind_name();
    j["dim"] = dim_;
    j["name"] = name_;
    if (domain_.kind == Domain::Kind::ball)
      j["domain"] = {{"type", "ball"}, {"radius", domain_.radius}};
    switch (kind_) {
      case MetricKind::euclidean: break;
      case MetricKind::riemannian_conformal: j["factor"] = factor_->pretty(); break;
      case MetricKind::randers: {
        nlohmann::json a = nlohmann::json::array();
        for (int i = 0; i < dim_; i++) {
          nlohmann::json row = nlohmann::json::array();
          for (int k = 0; k < dim_; k++) row.push_back(alpha_(i, k));
          a.push_back(row);
        }
        j["alpha"] = a;
        j["beta"] = beta_;
        break;
      }
      case MetricKind::expression: j["F"] = expr_->pretty(); break;
    }
    return j;
  }

  MetricKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Domain& domain() const { return domain_; }
  const std::string& name() const { return name_; }
  void set_name(const std::string& s) { name_ = s; }

  const char* kind_name() const {
    switch (kind_) {
      case MetricKind::euclidean: return "euclidean";
      case MetricKind::riemannian_conformal: return "riemannian_conformal";
      case MetricKind::randers: return "randers";
      case MetricKind::expression: return "expression";
    }
    return "";
  }

  // Raw norm on any scalar type; no domain or zero-section guards.
  template<class T>
  T norm(std::span<const T> x, std::span<const T> y) const {
    using std::sqrt;
    switch (kind_) {
      case MetricKind::euclidean:
        return sqrt(sdot(y, y));
      case MetricKind::riemannian_conformal:
        return factor_->eval<T>(x, std::span<const T>()) * sqrt(sdot(y, y));
      case MetricKind::randers: {
        T q(0.0);
        for (int i = 0; i < dim_; i++) {
          T row(0.0);
          for (int k = 0; k < dim_; k++) row += y[k] * alpha_(i, k);
          q += y[i] * row;
        }
        T lin(0.0);
        for (int i = 0; i < dim_; i++) lin += y[i] * beta_[i];
        return sqrt(q) + lin;
      }
      case MetricKind::expression:
        return expr_->eval<T>(x, y);
    }
    throw NumericalError("corrupt metric kind");
  }

  // Fiber magnitudes below this are treated as the zero section.
  double y_min_tol(const Point& x) const { return 1e-8 * (1.0 + norm2(x)); }

  void require_in_domain(const Point& x) const {
    if (int(x.size()) != dim_) throw InputError("point has wrong dimension");
    for (double c : x)
      if (!std::isfinite(c)) throw InputError("point has non-finite coordinates");
    if (!domain_.contains(x)) throw DomainError("point outside the chart domain");
  }

  void require_fiber(const Point& x, const Vec& y) const {
    if (int(y.size()) != dim_) throw InputError("fiber vector has wrong dimension");
    if (norm2(y) < y_min_tol(x))
      throw ZeroSectionError("fiber vector too close to the zero section");
  }

  // F with guards; F(x,0) = 0 by homogeneous extension.
  double eval_F(const Point& x, const Vec& y) const {
    require_in_domain(x);
    if (int(y.size()) != dim_) throw InputError("fiber vector has wrong dimension");
    if (norm2(y) == 0.0) return 0.0;
    double F = norm<double>(std::span<const double>(x), std::span<const double>(y));
    if (!std::isfinite(F)) throw NumericalError("norm evaluated non-finite");
    if (!(F > 0)) throw ConvexityError("norm is not positive on a nonzero vector");
    return F;
  }

  double eval_F(const TangentVector& v) const { return eval_F(v.x, v.y); }

  // Point on the indicatrix of radius rho: y = rho u / F(x,u).
  Vec indicatrix_point(const Point& x, const Vec& u, double rho) const {
    require_fiber(x, u);
    double F = eval_F(x, u);
    Vec y(u);
    for (double& c : y) c *= rho / F;
    return y;
  }

  // Sample a chart point well inside the domain (for validation only).
  Point sample_domain_point(Rng& rng) const {
    Point x(dim_);
    if (domain_.kind == Domain::Kind::ball) {
      Vec u = rng.unit_vector(dim_);
      double r = domain_.radius * 0.9 * std::pow(rng.uniform(), 1.0 / dim_);
      for (int i = 0; i < dim_; i++) x[i] = r * u[i];
    } else {
      for (int i = 0; i < dim_; i++) x[i] = rng.uniform(-1.5, 1.5);
    }
    return x;
  }

 private:
  MetricKind kind_ = MetricKind::euclidean;
  int dim_ = 0;
  Domain domain_;
  std::string name_;
  std::shared_ptr<const Expression> factor_;  // riemannian_conformal
  std::shared_ptr<const Expression> expr_;    // expression
  Mat alpha_;
  Vec beta_;

  static int check_dim(int n) {
    if (n < 2 || n > 16) throw InputError("dimension must be between 2 and 16");
    return n;
  }

  template<class T>
  static T sdot(std::span<const T> a, std::span<const T> b) {
    T s(0.0);
    for (size_t i = 0; i < a.size(); i++) s += a[i] * b[i];
    return s;
  }

  template<class V>
  static V field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw InputError(std::string("metric spec is missing '") + key + "'");
    try {
      return it->get<V>();
    } catch (const nlohmann::json::exception&) {
      throw InputError(std::string("metric spec field '") + key + "' has the wrong type");
    }
  }

  static double number_at(const nlohmann::json& j, const char* what) {
    if (!j.is_number()) throw InputError(std::string("randers: ") + what + " entries must be numbers");
    return j.get<double>();
  }

  static Domain domain_from_json(const nlohmann::json& j) {
    auto it = j.find("domain");
    if (it == j.end() || it->is_null()) return {};
    std::string type = field<std::string>(*it, "type");
    if (type == "full") return {};
    if (type == "ball") {
      double r = field<double>(*it, "radius");
      if (!(r > 0)) throw InputError("domain radius must be positive");
      return Domain::ball(r);
    }
    throw InputError("unknown domain type '" + type + "'");
  }

  void check_factor_positive() const {
    Rng rng(0x9a7e1u);
    for (int s = 0; s < 32; s++) {
      Point x = sample_domain_point(rng);
      double phi = factor_->eval<double>(std::span<const double>(x), std::span<const double>());
      if (!std::isfinite(phi) || !(phi > 0))
        throw ConvexityError("conformal factor is not positive on the domain");
    }
  }

  void check_homogeneous() const {
    Rng rng(0x51a9bu);
    for (int s = 0; s < 32; s++) {
      Point x = sample_domain_point(rng);
      Vec y = rng.unit_vector(dim_);
      double sc = rng.uniform(0.4, 2.5);
      for (double& c : y) c *= sc;
      double F;
      try {
        F = norm<double>(std::span<const double>(x), std::span<const double>(y));
      } catch (const EvalError& e) {
        throw ConvexityError(std::string("norm undefined on a sample flag: ") + e.what());
      }
      if (!std::isfinite(F) || !(F > 0))
        throw ConvexityError("norm is not positive on a sample flag");
      for (double lam : {0.5, 2.0, 7.5}) {
        Vec ly(y);
        for (double& c : ly) c *= lam;
        double Fl = norm<double>(std::span<const double>(x), std::span<const double>(ly));
        if (std::abs(Fl - lam * F) > 1e-7 * std::max(1.0, lam * F))
          throw ConvexityError("norm is not positively 1-homogeneous in the fiber");
      }
    }
  }
};

}  // namespace finsler
