#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ureg/errors.hpp"

namespace ureg {

// Closed-form scalar expressions in variables x1..xm. Immutable after
// construction; nodes are shared freely and safe to use from many threads.
enum class ExprOp {
  Const,
  Var,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Neg,
  Sqrt,
  Sin,
  Cos,
  Exp,
  Log,
  Tanh,
  Abs,
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprOp op;
  double value = 0.0;  // Const
  int var = 0;         // Var, zero-based
  ExprPtr a, b;
};

// Recognizes exponents that are exact small integers so that x^2 stays
// defined for negative x. Returns true and fills `n` when so.
bool integer_exponent(double e, long long& n);

// --- scalar evaluation kernel for double ----------------------------------
//
// Checked so that double evaluation and jet evaluation agree on domain
// errors instead of silently producing NaN.

inline double ev_add(double a, double b) { return a + b; }
inline double ev_sub(double a, double b) { return a - b; }
inline double ev_mul(double a, double b) { return a * b; }
inline double ev_neg(double a) { return -a; }
inline double ev_div(double a, double b) {
  if (b == 0.0) throw DomainError("division by zero");
  return a / b;
}
inline double ev_sqrt(double a) {
  if (a < 0.0) throw DomainError("sqrt of negative value");
  return std::sqrt(a);
}
inline double ev_log(double a) {
  if (a <= 0.0) throw DomainError("log of non-positive value");
  return std::log(a);
}
inline double ev_sin(double a) { return std::sin(a); }
inline double ev_cos(double a) { return std::cos(a); }
inline double ev_exp(double a) { return std::exp(a); }
inline double ev_tanh(double a) { return std::tanh(a); }
inline double ev_abs(double a) { return std::abs(a); }
inline double ev_pow_const(double a, double e) {
  long long n = 0;
  if (integer_exponent(e, n)) {
    if (a == 0.0 && n < 0) throw DomainError("zero raised to a negative power");
    return std::pow(a, static_cast<double>(n));
  }
  if (a <= 0.0) throw DomainError("non-integer power of a non-positive base");
  return std::pow(a, e);
}
inline double ev_pow(double a, double b) { return ev_pow_const(a, b); }
inline double ev_const_like(double /*proto*/, double v) { return v; }
inline bool ev_finite(double a) { return std::isfinite(a); }

class Expr {
 public:
  Expr() = default;

  static Expr constant(double v);
  static Expr variable(int index);  // zero-based
  // Wraps an existing immutable node tree.
  static Expr from_node(ExprPtr n) { return Expr(std::move(n)); }

  bool valid() const { return node_ != nullptr; }
  const ExprNode& node() const { return *node_; }
  const ExprPtr& node_ptr() const { return node_; }

  // Largest variable index used, or -1 for a constant expression.
  int max_var() const;

  // Structural equality (same tree shape, ops, literals).
  bool same_structure(const Expr& other) const;

  // Substitutes repl[i] for variable i.
  Expr substitute(std::span<const Expr> repl) const;

  std::string str() const;

  // Evaluates over any scalar ring providing the ev_* kernel.
  // `vars` supplies the value of x{i+1} at position i.
  template <class Scalar>
  Scalar eval(std::span<const Scalar> vars) const;

  double eval_d(std::span<const double> vars) const { return eval<double>(vars); }

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& a, const Expr& b);
  friend Expr sqrt(const Expr& a);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr exp(const Expr& a);
  friend Expr log(const Expr& a);
  friend Expr tanh(const Expr& a);
  friend Expr abs(const Expr& a);

 private:
  explicit Expr(ExprPtr n) : node_(std::move(n)) {}
  static Expr make(ExprOp op, Expr a = {}, Expr b = {});
  ExprPtr node_;
};

// Parses `text` over variables x1..xdim. Throws ParseError with a byte offset
// on malformed input, unknown identifiers, or variable indices above dim.
Expr parse_expr(std::string_view text, int dim);

// Symbolic partial derivative with respect to variable `var` (zero-based),
// with light constant folding to keep trees small.
Expr differentiate(const Expr& e, int var);

template <class Scalar>
Scalar eval_node(const ExprNode& n, std::span<const Scalar> vars) {
  switch (n.op) {
    case ExprOp::Const:
      return ev_const_like(vars[0], n.value);
    case ExprOp::Var:
      if (n.var < 0 || n.var >= static_cast<int>(vars.size()))
        throw Error("variable index out of range in evaluation");
      return vars[n.var];
    case ExprOp::Add:
      return ev_add(eval_node(*n.a, vars), eval_node(*n.b, vars));
    case ExprOp::Sub:
      return ev_sub(eval_node(*n.a, vars), eval_node(*n.b, vars));
    case ExprOp::Mul:
      return ev_mul(eval_node(*n.a, vars), eval_node(*n.b, vars));
    case ExprOp::Div:
      return ev_div(eval_node(*n.a, vars), eval_node(*n.b, vars));
    case ExprOp::Pow:
      if (n.b->op == ExprOp::Const)
        return ev_pow_const(eval_node(*n.a, vars), n.b->value);
      return ev_pow(eval_node(*n.a, vars), eval_node(*n.b, vars));
    case ExprOp::Neg:
      return ev_neg(eval_node(*n.a, vars));
    case ExprOp::Sqrt:
      return ev_sqrt(eval_node(*n.a, vars));
    case ExprOp::Sin:
      return ev_sin(eval_node(*n.a, vars));
    case ExprOp::Cos:
      return ev_cos(eval_node(*n.a, vars));
    case ExprOp::Exp:
      return ev_exp(eval_node(*n.a, vars));
    case ExprOp::Log:
      return ev_log(eval_node(*n.a, vars));
    case ExprOp::Tanh:
      return ev_tanh(eval_node(*n.a, vars));
    case ExprOp::Abs:
      return ev_abs(eval_node(*n.a, vars));
  }
  throw Error("corrupt expression node");
}

template <class Scalar>
Scalar Expr::eval(std::span<const Scalar> vars) const {
  if (!node_) throw Error("evaluating an empty expression");
  if (vars.empty()) throw Error("evaluation requires at least one variable slot");
  Scalar r = eval_node<Scalar>(*node_, vars);
  if (!ev_finite(r)) throw DomainError("expression evaluated to a non-finite value");
  return r;
}

}  // namespace ureg
