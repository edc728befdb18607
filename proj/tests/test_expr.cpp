#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>

#include "ureg/expr.hpp"

using namespace ureg;

namespace {
double ev(const Expr& e, std::initializer_list<double> xs) {
  std::vector<double> v(xs);
  return e.eval_d(v);
}
}  // namespace

TEST_CASE("parse and evaluate simple arithmetic") {
  Expr e = parse_expr("x1^2 + x2", 2);
  CHECK(ev(e, {2.0, 3.0}) == doctest::Approx(7.0));
  CHECK(ev(e, {-1.5, 0.25}) == doctest::Approx(2.5));
}

TEST_CASE("syntax error carries byte offset") {
  try {
    parse_expr("x1 +", 1);
    FAIL("expected ParseError");
  } catch (const ParseError& pe) {
    CHECK(pe.offset == 4);
  }
}

TEST_CASE("poincare conformal factor expression") {
  Expr e = parse_expr("4/(1 - (x1^2 + x2^2))^2", 2);
  // at x=(0.5,0): 4/(1-0.25)^2 = 4/0.5625 = 64/9
  CHECK(ev(e, {0.5, 0.0}) == doctest::Approx(64.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("unknown identifiers and bad variable indices") {
  CHECK_THROWS_AS(parse_expr("y1 + 2", 2), ParseError);
  CHECK_THROWS_AS(parse_expr("x3", 2), ParseError);
  CHECK_THROWS_AS(parse_expr("foo(x1)", 1), ParseError);
  CHECK_THROWS_AS(parse_expr("(x1", 1), ParseError);
  CHECK_THROWS_AS(parse_expr("", 1), ParseError);
  CHECK_THROWS_AS(parse_expr("   ", 1), ParseError);
}

TEST_CASE("precedence and associativity") {
  CHECK(ev(parse_expr("2 + 3*4", 1), {0.0}) == doctest::Approx(14.0));
  CHECK(ev(parse_expr("2*3^2", 1), {0.0}) == doctest::Approx(18.0));
  // right-associative exponent: 2^(3^2) = 512
  CHECK(ev(parse_expr("2^3^2", 1), {0.0}) == doctest::Approx(512.0));
  // unary minus binds looser than ^
  CHECK(ev(parse_expr("-x1^2", 1), {3.0}) == doctest::Approx(-9.0));
  CHECK(ev(parse_expr("2 - 3 - 4", 1), {0.0}) == doctest::Approx(-5.0));
  CHECK(ev(parse_expr("24/4/2", 1), {0.0}) == doctest::Approx(3.0));
  CHECK(ev(parse_expr("1.5e2 + 2.5E-1", 1), {0.0}) == doctest::Approx(150.25));
}

TEST_CASE("functions evaluate") {
  CHECK(ev(parse_expr("sqrt(x1)", 1), {9.0}) == doctest::Approx(3.0));
  CHECK(ev(parse_expr("sin(x1)^2 + cos(x1)^2", 1), {0.7}) == doctest::Approx(1.0));
  CHECK(ev(parse_expr("exp(log(x1))", 1), {2.5}) == doctest::Approx(2.5));
  CHECK(ev(parse_expr("tanh(x1)", 1), {0.0}) == doctest::Approx(0.0));
  CHECK(ev(parse_expr("abs(x1)", 1), {-4.0}) == doctest::Approx(4.0));
}

TEST_CASE("domain errors instead of silent NaN") {
  CHECK_THROWS_AS(ev(parse_expr("1/x1", 1), {0.0}), DomainError);
  CHECK_THROWS_AS(ev(parse_expr("sqrt(x1)", 1), {-1.0}), DomainError);
  CHECK_THROWS_AS(ev(parse_expr("log(x1)", 1), {0.0}), DomainError);
  CHECK_THROWS_AS(ev(parse_expr("x1^0.5", 1), {-2.0}), DomainError);
  // integer powers of negative bases are fine
  CHECK(ev(parse_expr("x1^2", 1), {-3.0}) == doctest::Approx(9.0));
  CHECK(ev(parse_expr("x1^-3", 1), {-2.0}) == doctest::Approx(-0.125));
}

TEST_CASE("print round-trips structurally") {
  const char* cases[] = {
      "x1^2 + x2",
      "4/(1 - (x1^2 + x2^2))^2",
      "-x1^2",
      "(x1 + x2)*(x1 - x2)",
      "sin(cos(x1))*tanh(x2) - abs(x1/x2)",
      "2^3^2",
      "1 - 2 - 3",
      "x1/(x2*x1)/x2",
      "sqrt(exp(log(x1 + 1.5)))",
      "x1*-2 + 3",  // parses as x1*(-2) + 3
  };
  for (const char* text : cases) {
    CAPTURE(text);
    Expr e = parse_expr(text, 2);
    Expr r = parse_expr(e.str(), 2);
    CHECK(e.same_structure(r));
  }
}

TEST_CASE("substitute composes expressions") {
  Expr e = parse_expr("x1^2 + x2", 2);
  std::array<Expr, 2> repl = {parse_expr("x1 + 1", 2), parse_expr("2*x2", 2)};
  Expr composed = e.substitute(repl);
  // (x1+1)^2 + 2*x2 at (2, 5) = 9 + 10
  CHECK(ev(composed, {2.0, 5.0}) == doctest::Approx(19.0));
}

TEST_CASE("max_var reports the highest referenced variable") {
  CHECK(parse_expr("3.5", 1).max_var() == -1);
  CHECK(parse_expr("x1", 3).max_var() == 0);
  CHECK(parse_expr("x1 + x3", 3).max_var() == 2);
}
