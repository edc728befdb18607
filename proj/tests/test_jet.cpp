#include <doctest.h>

#include <random>

#include "ureg/expr.hpp"
#include "ureg/jet.hpp"
#include "ureg/types.hpp"

using namespace ureg;

namespace {

double deriv(const Jet& j, std::initializer_list<int> alpha) {
  std::vector<int> a(alpha);
  return j.derivative(a);
}

// Central finite difference of order-0 evaluations, one Richardson step.
double fd_partial(const Expr& e, std::vector<double> base, int var, double h = 1e-3) {
  auto d = [&](double step) {
    std::vector<double> p = base, m = base;
    p[var] += step;
    m[var] -= step;
    return (e.eval_d(p) - e.eval_d(m)) / (2.0 * step);
  };
  const double d1 = d(h), d2 = d(h / 2.0);
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace

TEST_CASE("polynomial jets are exact") {
  Expr e = parse_expr("x1^2", 1);
  Jet j = eval_jet(e, std::vector<double>{2.0}, 2);
  CHECK(j.value() == doctest::Approx(4.0));
  CHECK(deriv(j, {1}) == doctest::Approx(4.0));
  CHECK(deriv(j, {2}) == doctest::Approx(2.0));
}

TEST_CASE("sin jet matches derivative cycle at zero") {
  Expr e = parse_expr("sin(x1)", 1);
  Jet j = eval_jet(e, std::vector<double>{0.0}, 3);
  CHECK(j.value() == doctest::Approx(0.0));
  CHECK(deriv(j, {1}) == doctest::Approx(1.0));
  CHECK(deriv(j, {2}) == doctest::Approx(0.0));
  CHECK(deriv(j, {3}) == doctest::Approx(-1.0));
}

TEST_CASE("reciprocal jet: 1/(1-x) at 0.5") {
  Expr e = parse_expr("1/(1 - x1)", 1);
  Jet j = eval_jet(e, std::vector<double>{0.5}, 1);
  // hand oracle: value 2, derivative 1/(1-x)^2 = 4
  CHECK(j.value() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(deriv(j, {1}) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("random degree-4 polynomials have exact jets") {
  // p(x,y) = sum c_ab x^a y^b, a+b <= 4; all jet coefficients must match the
  // analytic derivatives a!b!/( (a-i)! (b-j)! ) * c_ab * x^(a-i) y^(b-j).
  std::mt19937_64 eng(42);
  auto u = [&] { return (static_cast<double>(eng() >> 11) * 0x1.0p-53) * 4.0 - 2.0; };
  for (int rep = 0; rep < 20; ++rep) {
    double c[5][5] = {};
    Expr p = Expr::constant(0.0);
    for (int a = 0; a <= 4; ++a)
      for (int b = 0; a + b <= 4; ++b) {
        c[a][b] = u();
        Expr term = Expr::constant(c[a][b]);
        for (int i = 0; i < a; ++i) term = term * Expr::variable(0);
        for (int i = 0; i < b; ++i) term = term * Expr::variable(1);
        p = p + term;
      }
    const double x = u() * 0.5, y = u() * 0.5;
    Jet j = eval_jet(p, std::vector<double>{x, y}, 4);
    for (int i = 0; i <= 4; ++i)
      for (int k = 0; i + k <= 4; ++k) {
        double expected = 0.0;
        for (int a = i; a <= 4; ++a)
          for (int b = k; a + b <= 4; ++b) {
            double f = c[a][b];
            for (int t = 0; t < i; ++t) f *= (a - t);
            for (int t = 0; t < k; ++t) f *= (b - t);
            expected += f * std::pow(x, a - i) * std::pow(y, b - k);
          }
        std::vector<int> alpha = {i, k};
        CHECK(j.derivative(alpha) == doctest::Approx(expected).epsilon(1e-12));
      }
  }
}

TEST_CASE("truncation commutes with evaluation") {
  Expr e = parse_expr("exp(x1*x2) / (1 + x1^2)", 2);
  std::vector<double> base = {0.3, -0.7};
  Jet hi = eval_jet(e, base, 5);
  Jet lo = eval_jet(e, base, 2);
  Jet tr = hi.truncated(2);
  for (int i = 0; i < tr.space()->size(); ++i)
    CHECK(tr.coeff(i) == doctest::Approx(lo.coeff(i)).epsilon(1e-13));
}

TEST_CASE("first-order jet coefficients match central differences") {
  const char* exprs[] = {"sin(x1)*exp(x2)", "sqrt(1 + x1^2 + x2^2)", "tanh(x1 - x2)",
                         "log(2 + x1)*cos(x2)"};
  for (const char* text : exprs) {
    CAPTURE(text);
    Expr e = parse_expr(text, 2);
    std::vector<double> base = {0.4, -0.3};
    Jet j = eval_jet(e, base, 1);
    for (int v = 0; v < 2; ++v) {
      std::vector<int> alpha = {v == 0 ? 1 : 0, v == 1 ? 1 : 0};
      CHECK(j.derivative(alpha) == doctest::Approx(fd_partial(e, base, v)).epsilon(1e-6));
    }
  }
}

TEST_CASE("jet partial produces the derivative jet") {
  Expr e = parse_expr("x1^3*x2 + sin(x2)", 2);
  std::vector<double> base = {1.2, 0.5};
  Jet j = eval_jet(e, base, 4);
  Jet dj = j.partial(0);  // 3 x1^2 x2
  Expr de = parse_expr("3*x1^2*x2", 2);
  Jet expect = eval_jet(de, base, 3);
  for (int i = 0; i < dj.space()->size(); ++i)
    CHECK(dj.coeff(i) == doctest::Approx(expect.coeff(i)).epsilon(1e-12));
}

TEST_CASE("abs jets require a nonzero argument for derivatives") {
  Expr e = parse_expr("abs(x1)", 1);
  CHECK(eval_jet(e, std::vector<double>{-2.0}, 3).value() == doctest::Approx(2.0));
  CHECK(deriv(eval_jet(e, std::vector<double>{-2.0}, 1), {1}) == doctest::Approx(-1.0));
  CHECK_NOTHROW(eval_jet(e, std::vector<double>{0.0}, 0));
  CHECK_THROWS_AS(eval_jet(e, std::vector<double>{0.0}, 1), DomainError);
}

TEST_CASE("jet order ceiling is enforced") {
  Expr e = parse_expr("x1", 1);
  CHECK_THROWS_AS(eval_jet(e, std::vector<double>{0.0}, kMaxJetOrder + 1), Error);
}

TEST_CASE("jet domain errors propagate") {
  CHECK_THROWS_AS(eval_jet(parse_expr("1/x1", 1), std::vector<double>{0.0}, 2), DomainError);
  CHECK_THROWS_AS(eval_jet(parse_expr("log(x1)", 1), std::vector<double>{-1.0}, 2), DomainError);
  CHECK_THROWS_AS(eval_jet(parse_expr("sqrt(x1)", 1), std::vector<double>{0.0}, 1), DomainError);
}

TEST_CASE("non-integer powers and jet pow agree with exp/log route") {
  Expr a = parse_expr("x1^2.5", 1);
  Expr b = parse_expr("exp(2.5*log(x1))", 1);
  Jet ja = eval_jet(a, std::vector<double>{1.7}, 3);
  Jet jb = eval_jet(b, std::vector<double>{1.7}, 3);
  for (int i = 0; i < ja.space()->size(); ++i)
    CHECK(ja.coeff(i) == doctest::Approx(jb.coeff(i)).epsilon(1e-12));
}

TEST_CASE("mixed partials are stored symmetrically") {
  Expr e = parse_expr("exp(x1*x2^2)", 2);
  Jet j = eval_jet(e, std::vector<double>{0.3, 0.8}, 4);
  // d1 d2 == d2 d1 by construction: both map to the same coefficient slot.
  Jet d12 = j.partial(0).partial(1);
  Jet d21 = j.partial(1).partial(0);
  for (int i = 0; i < d12.space()->size(); ++i)
    CHECK(d12.coeff(i) == doctest::Approx(d21.coeff(i)).epsilon(1e-13));
}
