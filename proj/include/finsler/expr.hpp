#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"

// Scalar expressions over chart coordinates x1..xn and fiber coordinates
// y1..yn.  Grammar (whitespace insignificant):
//
//   expression := term (('+'|'-') term)*
//   term       := factor (('*'|'/') factor)*
//   factor     := '-' factor | power
//   power      := primary ('^' factor)?
//   primary    := number | variable | function '(' args ')' | '(' expression ')'
//
// '^' is right associative and binds tighter than unary minus, so -2^2 is
// -(2^2) and 2^-3 is valid.  Functions: sqrt, exp, log, sin, cos, tanh,
// pow(a,b).  A literal integer exponent is evaluated by repeated squaring,
// which keeps y1^2 well defined for negative y1; fractional exponents
// require a positive base at evaluation time.
//
// Parsed expressions are immutable and safe to share across threads.

namespace finsler {

class Expression {
 public:
  enum class Fn { sqrt_fn, exp_fn, log_fn, sin_fn, cos_fn, tanh_fn, pow_fn };

  struct Node {
    enum class Kind { number, base_var, fiber_var, add, sub, mul, div, pow, neg, call };
    Kind kind;
    double num = 0;
    int var = 0;  // 0-based coordinate index
    Fn fn = Fn::sqrt_fn;
    int a = -1, b = -1;
    int pos = 0;  // byte offset in source, for diagnostics
  };

  static Expression parse(const std::string& src, int dim, bool allow_fiber = true) {
    Parser p{src, dim, allow_fiber, {}, 0, 0};
    p.tokenize();
    Expression e;
    e.src_ = src;
    e.dim_ = dim;
    e.root_ = p.parse_expression(e.nodes_, 0);
    if (p.peek().kind != Tok::Kind::end)
      p.fail("unexpected trailing input", p.peek().pos);
    for (const Node& nd : e.nodes_)
      if (nd.kind == Node::Kind::fiber_var) e.uses_fiber_ = true;
    e.mark_constants();
    return e;
  }

  int dim() const { return dim_; }
  const std::string& source() const { return src_; }
  bool uses_fiber() const { return uses_fiber_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  int root() const { return root_; }

  template<class T>
  T eval(std::span<const T> x, std::span<const T> y) const {
    if (int(x.size()) != dim_ || (uses_fiber_ && int(y.size()) != dim_))
      throw InputError("expression evaluated with wrong dimension");
    return eval_node<T>(root_, x, y);
  }

  double eval_d(std::span<const double> x, std::span<const double> y) const {
    return eval<double>(x, y);
  }

  // Canonical text with the fewest parentheses that reparse to the same tree.
  std::string pretty() const {
    std::string out;
    print(root_, 0, out);
    return out;
  }

  bool same_tree(const Expression& o) const {
    return dim_ == o.dim_ && equal_nodes(o, root_, o.root_);
  }

 private:
  std::string src_;
  std::vector<Node> nodes_;
  std::vector<char> is_const_;   // subtree has no variables and evaluates cleanly
  std::vector<double> const_val_;
  int root_ = -1;
  int dim_ = 0;
  bool uses_fiber_ = false;

  // Nodes are appended child-first, so one forward pass settles every
  // subtree.  Constant subtrees let '^' recognize exact integer exponents
  // like the 9 in 2^3^2.
  void mark_constants() {
    size_t n = nodes_.size();
    is_const_.assign(n, 0);
    const_val_.assign(n, 0.0);
    std::vector<double> none;
    for (size_t i = 0; i < n; i++) {
      const Node& nd = nodes_[i];
      bool c = false;
      switch (nd.kind) {
        case Node::Kind::number: c = true; break;
        case Node::Kind::base_var:
        case Node::Kind::fiber_var: c = false; break;
        case Node::Kind::neg: c = is_const_[nd.a]; break;
        case Node::Kind::call:
          c = is_const_[nd.a] && (nd.b < 0 || is_const_[nd.b]);
          break;
        default: c = is_const_[nd.a] && is_const_[nd.b]; break;
      }
      if (c) {
        try {
          const_val_[i] = eval_node<double>(int(i), std::span<const double>(none), std::span<const double>(none));
        } catch (const EvalError&) {
          c = false;  // fails for every input; report it at evaluation time
        }
      }
      is_const_[i] = c;
    }
  }

  // -- tokens ---------------------------------------------------------------

  struct Tok {
    enum class Kind { number, ident, plus, minus, star, slash, caret, lparen, rparen, comma, end };
    Kind kind;
    double num = 0;
    std::string text;
    int pos = 0;
  };

  struct Parser {
    const std::string& src;
    int dim;
    bool allow_fiber;
    std::vector<Tok> toks;
    size_t at;
    int depth;

    [[noreturn]] void fail(const std::string& msg, int pos) const {
      int line = 1, col = 1;
      for (int i = 0; i < pos && i < int(src.size()); i++) {
        if (src[i] == '\n') {
          line++;
          col = 1;
        } else {
          col++;
        }
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, " at line %d, column %d", line, col);
      throw ParseError(msg + buf, line, col);
    }

    void tokenize() {
      size_t i = 0;
      const size_t len = src.size();
      while (i < len) {
        char c = src[i];
        if (std::isspace((unsigned char)c)) {
          i++;
          continue;
        }
        int pos = int(i);
        if (std::isdigit((unsigned char)c) || (c == '.' && i + 1 < len && std::isdigit((unsigned char)src[i + 1]))) {
          size_t j = i;
          while (j < len && std::isdigit((unsigned char)src[j])) j++;
          if (j < len && src[j] == '.') {
            j++;
            while (j < len && std::isdigit((unsigned char)src[j])) j++;
          }
          if (j < len && (src[j] == 'e' || src[j] == 'E')) {
            size_t k = j + 1;
            if (k < len && (src[k] == '+' || src[k] == '-')) k++;
            if (k < len && std::isdigit((unsigned char)src[k])) {
              j = k;
              while (j < len && std::isdigit((unsigned char)src[j])) j++;
            }
          }
          Tok t{Tok::Kind::number, 0, src.substr(i, j - i), pos};
          t.num = std::strtod(t.text.c_str(), nullptr);
          toks.push_back(t);
          i = j;
          continue;
        }
        if (std::isalpha((unsigned char)c) || c == '_') {
          size_t j = i;
          while (j < len && (std::isalnum((unsigned char)src[j]) || src[j] == '_')) j++;
          toks.push_back({Tok::Kind::ident, 0, src.substr(i, j - i), pos});
          i = j;
          continue;
        }
        Tok::Kind k;
        switch (c) {
          case '+': k = Tok::Kind::plus; break;
          case '-': k = Tok::Kind::minus; break;
          case '*': k = Tok::Kind::star; break;
          case '/': k = Tok::Kind::slash; break;
          case '^': k = Tok::Kind::caret; break;
          case '(': k = Tok::Kind::lparen; break;
          case ')': k = Tok::Kind::rparen; break;
          case ',': k = Tok::Kind::comma; break;
          default:
            fail(std::string("unexpected character '") + c + "'", pos);
        }
        toks.push_back({k, 0, std::string(1, c), pos});
        i++;
      }
      toks.push_back({Tok::Kind::end, 0, "", int(len)});
    }

    const Tok& peek() const { return toks[at]; }
    const Tok& take() { return toks[at++]; }
    bool eat(Tok::Kind k) {
      if (toks[at].kind == k) {
        at++;
        return true;
      }
      return false;
    }

    struct DepthGuard {
      Parser& p;
      explicit DepthGuard(Parser& pp) : p(pp) {
        if (++p.depth > 256) p.fail("expression nested too deeply", p.peek().pos);
      }
      ~DepthGuard() { p.depth--; }
    };

    int add_node(std::vector<Node>& ns, Node nd) {
      ns.push_back(nd);
      return int(ns.size()) - 1;
    }

    int parse_expression(std::vector<Node>& ns, int) {
      DepthGuard g(*this);
      int lhs = parse_term(ns);
      for (;;) {
        int pos = peek().pos;
        if (eat(Tok::Kind::plus)) {
          int rhs = parse_term(ns);
          lhs = add_node(ns, {Node::Kind::add, 0, 0, Fn::sqrt_fn, lhs, rhs, pos});
        } else if (eat(Tok::Kind::minus)) {
          int rhs = parse_term(ns);
          lhs = add_node(ns, {Node::Kind::sub, 0, 0, Fn::sqrt_fn, lhs, rhs, pos});
        } else {
          return lhs;
        }
      }
    }

    int parse_term(std::vector<Node>& ns) {
      DepthGuard g(*this);
      int lhs = parse_factor(ns);
      for (;;) {
        int pos = peek().pos;
        if (eat(Tok::Kind::star)) {
          int rhs = parse_factor(ns);
          lhs = add_node(ns, {Node::Kind::mul, 0, 0, Fn::sqrt_fn, lhs, rhs, pos});
        } else if (eat(Tok::Kind::slash)) {
          int rhs = parse_factor(ns);
          lhs = add_node(ns, {Node::Kind::div, 0, 0, Fn::sqrt_fn, lhs, rhs, pos});
        } else {
          return lhs;
        }
      }
    }

    int parse_factor(std::vector<Node>& ns) {
      DepthGuard g(*this);
      if (peek().kind == Tok::Kind::minus) {
        int pos = take().pos;
        int inner = parse_factor(ns);
        if (ns[inner].kind == Node::Kind::number) {  // fold -c into the literal
          ns[inner].num = -ns[inner].num;
          ns[inner].pos = pos;
          return inner;
        }
        return add_node(ns, {Node::Kind::neg, 0, 0, Fn::sqrt_fn, inner, -1, pos});
      }
      return parse_power(ns);
    }

    int parse_power(std::vector<Node>& ns) {
      DepthGuard g(*this);
      int base = parse_primary(ns);
      if (peek().kind == Tok::Kind::caret) {
        int pos = take().pos;
        int e = parse_factor(ns);  // right associative; exponent may be negated
        return add_node(ns, {Node::Kind::pow, 0, 0, Fn::sqrt_fn, base, e, pos});
      }
      return base;
    }

    int parse_primary(std::vector<Node>& ns) {
      DepthGuard g(*this);
      const Tok& t = take();
      switch (t.kind) {
        case Tok::Kind::number:
          return add_node(ns, {Node::Kind::number, t.num, 0, Fn::sqrt_fn, -1, -1, t.pos});
        case Tok::Kind::lparen: {
          int e = parse_expression(ns, 0);
          if (!eat(Tok::Kind::rparen)) fail("expected ')'", peek().pos);
          return e;
        }
        case Tok::Kind::ident:
          return parse_ident(ns, t);
        default:
          fail("expected a number, variable, function, or '('", t.pos);
      }
    }

    int parse_ident(std::vector<Node>& ns, const Tok& t) {
      const std::string& s = t.text;
      if ((s[0] == 'x' || s[0] == 'y') && s.size() > 1 &&
          s.find_first_not_of("0123456789", 1) == std::string::npos) {
        long idx = std::strtol(s.c_str() + 1, nullptr, 10);
        if (idx < 1 || idx > dim) fail("coordinate index out of range for dimension " + std::to_string(dim), t.pos);
        if (s[0] == 'y' && !allow_fiber) fail("fiber coordinate not allowed in this expression", t.pos);
        Node::Kind k = s[0] == 'x' ? Node::Kind::base_var : Node::Kind::fiber_var;
        return add_node(ns, {k, 0, int(idx - 1), Fn::sqrt_fn, -1, -1, t.pos});
      }
      Fn fn;
      int arity;
      if (s == "sqrt") { fn = Fn::sqrt_fn; arity = 1; }
      else if (s == "exp") { fn = Fn::exp_fn; arity = 1; }
      else if (s == "log") { fn = Fn::log_fn; arity = 1; }
      else if (s == "sin") { fn = Fn::sin_fn; arity = 1; }
      else if (s == "cos") { fn = Fn::cos_fn; arity = 1; }
      else if (s == "tanh") { fn = Fn::tanh_fn; arity = 1; }
      else if (s == "pow") { fn = Fn::pow_fn; arity = 2; }
      else fail("unknown identifier '" + s + "'", t.pos);
      if (!eat(Tok::Kind::lparen)) fail("expected '(' after function name", peek().pos);
      int a = parse_expression(ns, 0);
      int b = -1;
      if (arity == 2) {
        if (!eat(Tok::Kind::comma)) fail("expected ',' in two-argument function", peek().pos);
        b = parse_expression(ns, 0);
      }
      if (!eat(Tok::Kind::rparen)) {
        if (peek().kind == Tok::Kind::comma) fail("too many arguments", peek().pos);
        fail("expected ')'", peek().pos);
      }
      return add_node(ns, {Node::Kind::call, 0, 0, fn, a, b, t.pos});
    }
  };

  // -- evaluation -----------------------------------------------------------

  [[noreturn]] void eval_fail(const std::string& msg, int pos) const {
    int line = 1, col = 1;
    for (int i = 0; i < pos && i < int(src_.size()); i++) {
      if (src_[i] == '\n') {
        line++;
        col = 1;
      } else {
        col++;
      }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, " at line %d, column %d", line, col);
    throw EvalError(msg + buf);
  }

  // A constant exponent subtree acts like a literal: integral values take
  // the exact repeated-squaring path, others the real-power path.
  bool constant_exponent(int i, double& v) const {
    if (nodes_[i].kind == Node::Kind::number) {
      v = nodes_[i].num;
      return true;
    }
    if (i < int(is_const_.size()) && is_const_[i]) {
      v = const_val_[i];
      return true;
    }
    return false;
  }

  template<class T>
  T eval_node(int i, std::span<const T> x, std::span<const T> y) const {
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    using std::sqrt;
    using std::tanh;
    const Node& nd = nodes_[i];
    switch (nd.kind) {
      case Node::Kind::number: return T(nd.num);
      case Node::Kind::base_var: return x[nd.var];
      case Node::Kind::fiber_var: return y[nd.var];
      case Node::Kind::add: return eval_node<T>(nd.a, x, y) + eval_node<T>(nd.b, x, y);
      case Node::Kind::sub: return eval_node<T>(nd.a, x, y) - eval_node<T>(nd.b, x, y);
      case Node::Kind::mul: return eval_node<T>(nd.a, x, y) * eval_node<T>(nd.b, x, y);
      case Node::Kind::div: {
        T den = eval_node<T>(nd.b, x, y);
        if (value_of(den) == 0.0) eval_fail("division by zero", nd.pos);
        return eval_node<T>(nd.a, x, y) / den;
      }
      case Node::Kind::neg: return -eval_node<T>(nd.a, x, y);
      case Node::Kind::pow: return eval_pow<T>(nd, x, y);
      case Node::Kind::call:
        switch (nd.fn) {
          case Fn::sqrt_fn: {
            T u = eval_node<T>(nd.a, x, y);
            if (value_of(u) < 0) eval_fail("square root of a negative value", nd.pos);
            return sqrt(u);
          }
          case Fn::exp_fn: return exp(eval_node<T>(nd.a, x, y));
          case Fn::log_fn: {
            T u = eval_node<T>(nd.a, x, y);
            if (!(value_of(u) > 0)) eval_fail("logarithm of a non-positive value", nd.pos);
            return log(u);
          }
          case Fn::sin_fn: return sin(eval_node<T>(nd.a, x, y));
          case Fn::cos_fn: return cos(eval_node<T>(nd.a, x, y));
          case Fn::tanh_fn: return tanh(eval_node<T>(nd.a, x, y));
          case Fn::pow_fn: return eval_pow<T>(nd, x, y);
        }
    }
    throw NumericalError("corrupt expression tree");
  }

  template<class T>
  T eval_pow(const Node& nd, std::span<const T> x, std::span<const T> y) const {
    using std::exp;
    using std::log;
    using std::pow;
    double pv;
    if (constant_exponent(nd.b, pv)) {
      if (std::abs(pv) < 9e15 && std::floor(pv) == pv)
        return ipow(eval_node<T>(nd.a, x, y), (long long)pv);
      T base = eval_node<T>(nd.a, x, y);
      if (!(value_of(base) > 0)) eval_fail("fractional power of a non-positive base", nd.pos);
      return pow(base, pv);
    }
    T base = eval_node<T>(nd.a, x, y);
    T ex = eval_node<T>(nd.b, x, y);
    if (!(value_of(base) > 0)) eval_fail("power of a non-positive base with a non-constant exponent", nd.pos);
    return exp(ex * log(base));
  }

  // -- printing -------------------------------------------------------------
  //
  // Precedence levels: add/sub 1, mul/div 2, unary minus 3, pow 4, atom 5.
  // A child is parenthesized when its level is below the minimum its slot
  // requires; equal-precedence right operands are parenthesized so the
  // printed form reparses to the identical tree.

  static std::string format_number(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; prec++) {
      std::snprintf(buf, sizeof buf, "%.*g", prec, v);
      if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
  }

  int level(int i) const {
    const Node& nd = nodes_[i];
    switch (nd.kind) {
      case Node::Kind::add:
      case Node::Kind::sub: return 1;
      case Node::Kind::mul:
      case Node::Kind::div: return 2;
      case Node::Kind::neg: return 3;
      case Node::Kind::pow: return 4;
      case Node::Kind::number: return nd.num < 0 ? 3 : 5;
      default: return 5;
    }
  }

  void print(int i, int min_level, std::string& out) const {
    const Node& nd = nodes_[i];
    bool parens = level(i) < min_level;
    if (parens) out += '(';
    switch (nd.kind) {
      case Node::Kind::number: out += format_number(nd.num); break;
      case Node::Kind::base_var: out += "x" + std::to_string(nd.var + 1); break;
      case Node::Kind::fiber_var: out += "y" + std::to_string(nd.var + 1); break;
      case Node::Kind::add:
        print(nd.a, 1, out);
        out += '+';
        print(nd.b, 2, out);
        break;
      case Node::Kind::sub:
        print(nd.a, 1, out);
        out += '-';
        print(nd.b, 2, out);
        break;
      case Node::Kind::mul:
        print(nd.a, 2, out);
        out += '*';
        print(nd.b, 3, out);
        break;
      case Node::Kind::div:
        print(nd.a, 2, out);
        out += '/';
        print(nd.b, 3, out);
        break;
      case Node::Kind::neg:
        out += '-';
        print(nd.a, 3, out);
        break;
      case Node::Kind::pow:
        print(nd.a, 5, out);
        out += '^';
        print(nd.b, 3, out);
        break;
      case Node::Kind::call: {
        static const char* names[] = {"sqrt", "exp", "log", "sin", "cos", "tanh", "pow"};
        out += names[int(nd.fn)];
        out += '(';
        print(nd.a, 0, out);
        if (nd.b >= 0) {
          out += ',';
          print(nd.b, 0, out);
        }
        out += ')';
        break;
      }
    }
    if (parens) out += ')';
  }

  bool equal_nodes(const Expression& o, int i, int j) const {
    const Node& a = nodes_[i];
    const Node& b = o.nodes_[j];
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Node::Kind::number: return a.num == b.num;
      case Node::Kind::base_var:
      case Node::Kind::fiber_var: return a.var == b.var;
      case Node::Kind::call:
        if (a.fn != b.fn) return false;
        if ((a.b >= 0) != (b.b >= 0)) return false;
        return equal_nodes(o, a.a, b.a) && (a.b < 0 || equal_nodes(o, a.b, b.b));
      case Node::Kind::neg: return equal_nodes(o, a.a, b.a);
      default:
        return equal_nodes(o, a.a, b.a) && equal_nodes(o, a.b, b.b);
    }
  }
};

}  // namespace finsler
