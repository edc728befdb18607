#include "ureg/expr.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>

namespace ureg {

bool integer_exponent(double e, long long& n) {
  const double r = std::nearbyint(e);
  if (std::abs(e - r) > 1e-12 || std::abs(r) > 64.0) return false;
  n = static_cast<long long>(r);
  return true;
}

Expr Expr::constant(double v) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Const;
  n->value = v;
  return Expr(std::move(n));
}

Expr Expr::variable(int index) {
  if (index < 0) throw Error("negative variable index");
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Var;
  n->var = index;
  return Expr(std::move(n));
}

Expr Expr::make(ExprOp op, Expr a, Expr b) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->a = a.node_;
  n->b = b.node_;
  return Expr(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::make(ExprOp::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::make(ExprOp::Sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::make(ExprOp::Mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::make(ExprOp::Div, a, b); }
Expr operator-(const Expr& a) { return Expr::make(ExprOp::Neg, a); }
Expr pow(const Expr& a, const Expr& b) { return Expr::make(ExprOp::Pow, a, b); }
Expr sqrt(const Expr& a) { return Expr::make(ExprOp::Sqrt, a); }
Expr sin(const Expr& a) { return Expr::make(ExprOp::Sin, a); }
Expr cos(const Expr& a) { return Expr::make(ExprOp::Cos, a); }
Expr exp(const Expr& a) { return Expr::make(ExprOp::Exp, a); }
Expr log(const Expr& a) { return Expr::make(ExprOp::Log, a); }
Expr tanh(const Expr& a) { return Expr::make(ExprOp::Tanh, a); }
Expr abs(const Expr& a) { return Expr::make(ExprOp::Abs, a); }

namespace {

int max_var_node(const ExprNode& n) {
  switch (n.op) {
    case ExprOp::Const:
      return -1;
    case ExprOp::Var:
      return n.var;
    default: {
      int m = n.a ? max_var_node(*n.a) : -1;
      if (n.b) m = std::max(m, max_var_node(*n.b));
      return m;
    }
  }
}

bool same_node(const ExprNode& a, const ExprNode& b) {
  if (a.op != b.op) return false;
  switch (a.op) {
    case ExprOp::Const:
      return a.value == b.value;
    case ExprOp::Var:
      return a.var == b.var;
    default:
      if (static_cast<bool>(a.a) != static_cast<bool>(b.a)) return false;
      if (static_cast<bool>(a.b) != static_cast<bool>(b.b)) return false;
      if (a.a && !same_node(*a.a, *b.a)) return false;
      if (a.b && !same_node(*a.b, *b.b)) return false;
      return true;
  }
}

ExprPtr substitute_node(const ExprPtr& n, std::span<const ExprPtr> repl) {
  switch (n->op) {
    case ExprOp::Const:
      return n;
    case ExprOp::Var:
      if (n->var >= static_cast<int>(repl.size()))
        throw Error("substitute: no replacement for variable x" + std::to_string(n->var + 1));
      return repl[n->var];  // nodes are immutable, sharing is safe
    default: {
      auto out = std::make_shared<ExprNode>();
      out->op = n->op;
      out->value = n->value;
      out->var = n->var;
      if (n->a) out->a = substitute_node(n->a, repl);
      if (n->b) out->b = substitute_node(n->b, repl);
      return out;
    }
  }
}

// Operator precedence for printing: Add/Sub 1, Mul/Div 2, Neg 3, Pow 4.
int precedence(ExprOp op) {
  switch (op) {
    case ExprOp::Add:
    case ExprOp::Sub:
      return 1;
    case ExprOp::Mul:
    case ExprOp::Div:
      return 2;
    case ExprOp::Neg:
      return 3;
    case ExprOp::Pow:
      return 4;
    default:
      return 5;
  }
}

void print_node(const ExprNode& n, std::ostringstream& out, int parent_prec, bool rhs_of_sub_like) {
  const int prec = precedence(n.op);
  const bool parens = prec < parent_prec || (prec == parent_prec && rhs_of_sub_like);
  switch (n.op) {
    case ExprOp::Const: {
      char buf[32];
      auto res = std::to_chars(buf, buf + sizeof(buf), n.value);
      std::string s(buf, res.ptr);
      if (n.value < 0.0 && parent_prec > 1) {
        out << '(' << s << ')';
      } else {
        out << s;
      }
      return;
    }
    case ExprOp::Var:
      out << 'x' << (n.var + 1);
      return;
    case ExprOp::Add:
      if (parens) out << '(';
      print_node(*n.a, out, 1, false);
      out << " + ";
      print_node(*n.b, out, 1, false);
      if (parens) out << ')';
      return;
    case ExprOp::Sub:
      if (parens) out << '(';
      print_node(*n.a, out, 1, false);
      out << " - ";
      print_node(*n.b, out, 2, false);
      if (parens) out << ')';
      return;
    case ExprOp::Mul:
      if (parens) out << '(';
      print_node(*n.a, out, 2, false);
      out << "*";
      print_node(*n.b, out, 2, false);
      if (parens) out << ')';
      return;
    case ExprOp::Div:
      if (parens) out << '(';
      print_node(*n.a, out, 2, false);
      out << "/";
      print_node(*n.b, out, 3, false);
      if (parens) out << ')';
      return;
    case ExprOp::Neg:
      if (parens) out << '(';
      out << '-';
      print_node(*n.a, out, 3, false);
      if (parens) out << ')';
      return;
    case ExprOp::Pow:
      if (parens) out << '(';
      print_node(*n.a, out, 5, false);  // ^ binds tighter than unary minus on the left
      out << '^';
      print_node(*n.b, out, 4, false);  // right-associative
      if (parens) out << ')';
      return;
    case ExprOp::Sqrt:
      out << "sqrt(";
      print_node(*n.a, out, 0, false);
      out << ')';
      return;
    case ExprOp::Sin:
      out << "sin(";
      print_node(*n.a, out, 0, false);
      out << ')';
      return;
    case ExprOp::Cos:
      out << "cos(";
      print_node(*n.a, out, 0, false);
      out << ')';
      return;
    case ExprOp::Exp:
      out << "exp(";
      print_node(*n.a, out, 0, false);
      out << ')';
      return;
    case ExprOp::Log:
      out << "log(";
      print_node(*n.a, out, 0, false);
      out << ')';
      return;
    case ExprOp::Tanh:
      out << "tanh(";
      print_node(*n.a, out, 0, false);
      out << ')';
      return;
    case ExprOp::Abs:
      out << "abs(";
      print_node(*n.a, out, 0, false);
      out << ')';
      return;
  }
}

// Recursive-descent parser. Grammar (whitespace-insensitive):
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | power
//   power   := atom ('^' unary)?          (right-associative)
//   atom    := number | ident '(' expr ')' | var | '(' expr ')'
// Numbers are decimal with optional exponent.
class Parser {
 public:
  Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  Expr parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    Expr e = parse_expr_();
    skip_ws();
    if (pos_ < text_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool consume(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_expr_() {
    Expr e = parse_term();
    while (true) {
      if (consume('+')) {
        e = e + parse_term();
      } else if (consume('-')) {
        e = e - parse_term();
      } else {
        return e;
      }
    }
  }

  Expr parse_term() {
    Expr e = parse_unary();
    while (true) {
      if (consume('*')) {
        e = e * parse_unary();
      } else if (consume('/')) {
        e = e / parse_unary();
      } else {
        return e;
      }
    }
  }

  Expr parse_unary() {
    if (consume('-')) return -parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    if (consume('^')) return pow(base, parse_unary());
    return base;
  }

  Expr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr_();
      if (!consume(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
      ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t e = pos_ + 1;
      if (e < text_.size() && (text_[e] == '+' || text_[e] == '-')) ++e;
      if (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) {
        pos_ = e;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_)
      throw ParseError("malformed number", start);
    return Expr::constant(v);
  }

  Expr parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);

    if (name.size() >= 2 && name[0] == 'x' && std::isdigit(static_cast<unsigned char>(name[1]))) {
      int idx = 0;
      const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
      if (res.ec != std::errc() || res.ptr != name.data() + name.size())
        throw ParseError("malformed variable name", start);
      if (idx < 1) throw ParseError("variable indices start at x1", start);
      if (idx > dim_)
        throw ParseError("variable x" + std::to_string(idx) + " exceeds dimension " + std::to_string(dim_),
                         start);
      return Expr::variable(idx - 1);
    }

    if (peek() != '(') throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    ++pos_;
    Expr arg = parse_expr_();
    if (!consume(')')) throw ParseError("expected ')' after function argument", pos_);

    if (name == "sqrt") return sqrt(arg);
    if (name == "sin") return sin(arg);
    if (name == "cos") return cos(arg);
    if (name == "exp") return exp(arg);
    if (name == "log") return log(arg);
    if (name == "tanh") return tanh(arg);
    if (name == "abs") return abs(arg);
    throw ParseError("unknown function '" + std::string(name) + "'", start);
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace

int Expr::max_var() const {
  if (!node_) return -1;
  return max_var_node(*node_);
}

bool Expr::same_structure(const Expr& other) const {
  if (!node_ || !other.node_) return node_ == other.node_;
  return same_node(*node_, *other.node_);
}

Expr Expr::substitute(std::span<const Expr> repl) const {
  if (!node_) throw Error("substitute on empty expression");
  std::vector<ExprPtr> nodes;
  nodes.reserve(repl.size());
  for (const Expr& r : repl) {
    if (!r.valid()) throw Error("substitute: invalid replacement expression");
    nodes.push_back(r.node_);
  }
  return Expr(substitute_node(node_, nodes));
}

std::string Expr::str() const {
  if (!node_) return "<empty>";
  std::ostringstream out;
  print_node(*node_, out, 0, false);
  return out.str();
}

Expr parse_expr(std::string_view text, int dim) {
  if (dim < 1) throw Error("parse_expr: dimension must be positive");
  bool all_ws = true;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) all_ws = false;
  if (text.empty() || all_ws) throw ParseError("empty expression", 0);
  return Parser(text, dim).parse();
}

namespace {

bool is_const(const Expr& e, double v) {
  return e.valid() && e.node().op == ExprOp::Const && e.node().value == v;
}

// Folding combinators so derivatives stay readable.
Expr fadd(const Expr& a, const Expr& b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  return a + b;
}
Expr fsub(const Expr& a, const Expr& b) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return -b;
  return a - b;
}
Expr fmul(const Expr& a, const Expr& b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return Expr::constant(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  return a * b;
}

}  // namespace

Expr differentiate(const Expr& e, int var) {
  if (!e.valid()) throw Error("differentiate on empty expression");
  const ExprNode& n = e.node();
  auto A = [&] { return Expr::from_node(n.a); };
  auto B = [&] { return Expr::from_node(n.b); };
  auto dA = [&] { return differentiate(Expr::from_node(n.a), var); };
  auto dB = [&] { return differentiate(Expr::from_node(n.b), var); };

  switch (n.op) {
    case ExprOp::Const:
      return Expr::constant(0.0);
    case ExprOp::Var:
      return Expr::constant(n.var == var ? 1.0 : 0.0);
    case ExprOp::Add:
      return fadd(dA(), dB());
    case ExprOp::Sub:
      return fsub(dA(), dB());
    case ExprOp::Mul:
      return fadd(fmul(dA(), B()), fmul(A(), dB()));
    case ExprOp::Div: {
      Expr da = dA(), db = dB();
      if (is_const(db, 0.0)) {
        if (is_const(da, 0.0)) return Expr::constant(0.0);
        return da / B();
      }
      return fsub(da, fmul(A(), db) / B()) / B();
    }
    case ExprOp::Pow:
      if (n.b->op == ExprOp::Const) {
        const double p = n.b->value;
        if (p == 0.0) return Expr::constant(0.0);
        // p * a^(p-1) * a'; valid for integer exponents on negative bases too.
        return fmul(fmul(Expr::constant(p), pow(A(), Expr::constant(p - 1.0))), dA());
      }
      // d(a^b) = a^b * (b' log a + b a'/a)
      return fmul(pow(A(), B()), fadd(fmul(dB(), log(A())), fmul(B(), dA()) / A()));
    case ExprOp::Neg:
      return fsub(Expr::constant(0.0), dA());
    case ExprOp::Sqrt:
      return dA() / fmul(Expr::constant(2.0), sqrt(A()));
    case ExprOp::Sin:
      return fmul(cos(A()), dA());
    case ExprOp::Cos:
      return fsub(Expr::constant(0.0), fmul(sin(A()), dA()));
    case ExprOp::Exp:
      return fmul(exp(A()), dA());
    case ExprOp::Log:
      return dA() / A();
    case ExprOp::Tanh: {
      Expr t = tanh(A());
      return fmul(fsub(Expr::constant(1.0), t * t), dA());
    }
    case ExprOp::Abs:
      // |a|' = a a' / |a|; naturally a domain error at a = 0.
      return fmul(A(), dA()) / abs(A());
  }
  throw Error("corrupt expression node");
}

}  // namespace ureg
