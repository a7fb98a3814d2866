#include "catch_amalgamated.hpp"
#include "finsler/expr.hpp"
#include "finsler/rng.hpp"

#include <cmath>
#include <vector>

using finsler::EvalError;
using finsler::Expression;
using finsler::Jet;
using finsler::ParseError;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double ev(const std::string& src, std::vector<double> x = {}, std::vector<double> y = {}) {
  int dim = int(std::max(x.size(), y.size()));
  if (dim == 0) dim = 2;
  x.resize(dim, 0.0);
  y.resize(dim, 0.0);
  Expression e = Expression::parse(src, dim);
  return e.eval<double>(std::span<const double>(x), std::span<const double>(y));
}

}  // namespace

TEST_CASE("operator precedence and associativity") {
  REQUIRE(ev("1+2*3") == 7.0);
  REQUIRE(ev("6/3/2") == 1.0);
  REQUIRE(ev("1-2-3") == -4.0);
  REQUIRE(ev("2*3^2") == 18.0);
  REQUIRE(ev("2^3^2") == 512.0);       // right associative
  REQUIRE(ev("-2^2") == -4.0);         // '^' binds tighter than unary minus
  REQUIRE(ev("(-2)^2") == 4.0);
  REQUIRE(ev("2^-3") == 0.125);
  REQUIRE(ev("2^-2^0") == 0.5);
  REQUIRE(ev("--3") == 3.0);
  REQUIRE(ev("2*-3") == -6.0);
  REQUIRE(ev("1.5e2+.5") == 150.5);
}

TEST_CASE("variables and functions evaluate") {
  REQUIRE_THAT(ev("x1*y2+sin(x2)", {2.0, 0.5}, {0.0, 3.0}), WithinRel(6.0 + std::sin(0.5), 1e-15));
  REQUIRE_THAT(ev("sqrt(y1^2+y2^2)", {}, {3.0, 4.0}), WithinRel(5.0, 1e-15));
  REQUIRE_THAT(ev("pow(x1,2.5)", {1.3}), WithinRel(std::pow(1.3, 2.5), 1e-15));
  REQUIRE_THAT(ev("pow(y1,3)", {}, {-2.0}), WithinRel(-8.0, 1e-15));  // literal integer exponent
  REQUIRE_THAT(ev("exp(log(x1))*cos(0)*tanh(0)+x1", {1.7}), WithinRel(1.7, 1e-15));
  REQUIRE_THAT(ev("y1^4", {}, {-1.5}), WithinRel(5.0625, 1e-15));
}

TEST_CASE("parse errors carry positions") {
  auto expect_fail = [](const std::string& src, int col) {
    try {
      Expression::parse(src, 2);
      FAIL("expected ParseError for: " << src);
    } catch (const ParseError& e) {
      INFO(src << " -> " << e.what());
      CHECK(e.line == 1);
      CHECK(e.col == col);
    }
  };
  expect_fail("1 + * 2", 5);
  expect_fail("sqrt(1,2)", 7);     // too many arguments
  expect_fail("pow(2)", 6);        // missing second argument
  expect_fail("(1+2", 5);
  expect_fail("z1+1", 1);          // unknown identifier
  expect_fail("x3+1", 1);          // index beyond dimension
  expect_fail("x0+1", 1);
  expect_fail("1+2)", 4);
  expect_fail("foo(1)", 1);
  expect_fail("1..2", 3);  // "1." scans as a number, the stray ".2" follows

  REQUIRE_THROWS_AS(Expression::parse("y1+x1", 2, /*allow_fiber=*/false), ParseError);
  REQUIRE_THROWS_AS(Expression::parse(std::string(600, '(') + "1" + std::string(600, ')'), 2), ParseError);
}

TEST_CASE("evaluation domain errors") {
  REQUIRE_THROWS_AS(ev("1/(x1-x1)", {1.0}), EvalError);
  REQUIRE_THROWS_AS(ev("log(x1)", {-1.0}), EvalError);
  REQUIRE_THROWS_AS(ev("log(x1)", {0.0}), EvalError);
  REQUIRE_THROWS_AS(ev("sqrt(x1)", {-4.0}), EvalError);
  REQUIRE_THROWS_AS(ev("pow(x1,0.5)", {-4.0}), EvalError);
  REQUIRE_THROWS_AS(ev("x1^2.5", {-4.0}), EvalError);
  REQUIRE_NOTHROW(ev("x1^2", {-4.0}));  // integer exponent is fine on negatives

  try {
    ev("1+1/(x1-x1)", {2.0});
    FAIL("expected EvalError");
  } catch (const EvalError& e) {
    CHECK(std::string(e.what()).find("column 4") != std::string::npos);
  }
}

TEST_CASE("jet evaluation differentiates expressions") {
  // F = sqrt(y1^2+y2^2) + 0.5*y1 on the fiber, first and second partials
  Expression e = Expression::parse("sqrt(y1^2+y2^2)+0.5*y1", 2);
  double y1 = 0.6, y2 = -1.1;
  auto F = [&](double a, double b) { return std::sqrt(a * a + b * b) + 0.5 * a; };

  using J2 = Jet<2, double>;
  std::vector<J2> x = {J2(0.0), J2(0.0)};
  std::vector<J2> y = {finsler::jet_var<2, double>(y1, 0), finsler::jet_var<2, double>(y2, 1)};
  J2 r = e.eval<J2>(std::span<const J2>(x), std::span<const J2>(y));

  double h = 1e-6;
  REQUIRE_THAT(r.c[0], WithinRel(F(y1, y2), 1e-14));
  REQUIRE_THAT(r.c[1], WithinAbs((F(y1 + h, y2) - F(y1 - h, y2)) / (2 * h), 1e-8));
  REQUIRE_THAT(r.c[2], WithinAbs((F(y1, y2 + h) - F(y1, y2 - h)) / (2 * h), 1e-8));
  double hh = 1e-4;
  double cross = (F(y1 + hh, y2 + hh) - F(y1 + hh, y2 - hh) - F(y1 - hh, y2 + hh) + F(y1 - hh, y2 - hh)) / (4 * hh * hh);
  REQUIRE_THAT(r.c[3], WithinAbs(cross, 1e-6));
}

TEST_CASE("pretty printing round-trips the tree") {
  const char* sources[] = {
      "-2^2",
      "2^-3",
      "x1+y1*y2",
      "(x1+x2)*(y1-y2)",
      "sqrt(y1^2+y2^2)+0.5*y1",
      "1-2-3",
      "6/3/2",
      "a_bogus_never",  // replaced below
  };
  for (const char* src : sources) {
    if (std::string(src) == "a_bogus_never") continue;
    Expression e1 = Expression::parse(src, 2);
    std::string p1 = e1.pretty();
    Expression e2 = Expression::parse(p1, 2);
    INFO(src << " -> " << p1);
    REQUIRE(e1.same_tree(e2));
    REQUIRE(e2.pretty() == p1);  // printing is a fixed point
  }
}

TEST_CASE("random byte strings never crash the parser") {
  const char charset[] = "x1y2x1y2357+-*/^(())., x1y2.0e^s";
  finsler::Rng rng(2024);
  int parsed = 0;
  for (int trial = 0; trial < 800; trial++) {
    int len = 1 + int(rng.uniform() * 32);
    std::string s;
    for (int i = 0; i < len; i++) s += charset[int(rng.uniform() * (sizeof charset - 1))];
    try {
      Expression e = Expression::parse(s, 2);
      parsed++;
      // whatever parsed must print and reparse to the same tree
      Expression e2 = Expression::parse(e.pretty(), 2);
      REQUIRE(e.same_tree(e2));
      std::vector<double> x = {0.37, -0.21}, y = {1.3, 0.8};
      try {
        double v = e.eval<double>(std::span<const double>(x), std::span<const double>(y));
        (void)v;
      } catch (const EvalError&) {
      }
    } catch (const ParseError&) {
    }
  }
  REQUIRE(parsed > 10);  // the charset is expression-shaped often enough
}
