#include "doctest.h"

#include <cmath>

#include "ensdev/expr.hpp"

using namespace ensdev;

namespace {

std::vector<Expr> sample_exprs() {
  const Expr x = Expr::coord(0), y = Expr::coord(1);
  return {
      x * x * y + Expr(3.0) * y,
      exp(Expr(-0.5) * x) * sin(Expr(2.0) * y) + cos(x * y),
      pow(Expr(1.5) + x * x, 2.5) / (Expr(2.0) + y * y),
      sqrt(Expr(4.0) + x * y) * log(Expr(3.0) + x),
      Expr::bump({0.3, 0.6}, 0.5) * (Expr(1.0) + x),
      Expr::bump({0.3, 0.6}, 0.8, 2),
      Expr::gauss({0.1, -0.2}, 0.7) * y,
      Expr(cplx(0.5, -1.5)) * x * Expr::bump({0.4, 0.5}, 0.9),
      -(x / (Expr(1.0) + y * y)),
  };
}

double fd(const Expr& e, std::array<double, 4> p, int j, double h = 1e-5) {
  auto q = p, r = p;
  q[j] += h;
  r[j] -= h;
  return ((e.evaluate(q) - e.evaluate(r)) / (2 * h)).real();
}

}  // namespace

TEST_CASE("simplifying constructors fold constants and identities") {
  const Expr x = Expr::coord(0);
  CHECK((Expr(2.0) * Expr(3.0)).constant_value() == cplx(6.0));
  CHECK((x * Expr(0.0)).is_zero());
  CHECK((x * Expr(1.0)).node() == x.node());
  CHECK((x + Expr(0.0)).node() == x.node());
  CHECK((x - x).is_zero());
  CHECK((-(-x)).node() == x.node());
  CHECK(Expr().is_zero());
  CHECK(!x.is_constant());
  CHECK(sin(Expr(0.0)).is_zero());
  CHECK_THROWS_AS(x / Expr(0.0), std::domain_error);
}

TEST_CASE("symbolic derivatives match central differences") {
  SeededRng rng(5, 0);
  for (const Expr& e : sample_exprs()) {
    for (int trial = 0; trial < 20; ++trial) {
      std::array<double, 4> p{rng.uniform(0.0, 0.9), rng.uniform(0.2, 1.0), 0, 0};
      for (int j = 0; j < 2; ++j) {
        const double sym = e.derivative(j).evaluate(p).real();
        CHECK(sym == doctest::Approx(fd(e, p, j)).epsilon(1e-6).scale(1.0));
      }
    }
  }
}

TEST_CASE("tape jets agree with the recursive evaluator and symbolic derivatives") {
  const auto exprs = sample_exprs();
  const Tape tape(exprs, 2);
  CHECK(tape.outputs() == exprs.size());
  SeededRng rng(9, 0);
  std::vector<Jet> jets(exprs.size());
  std::vector<cplx> vals(exprs.size());
  for (int trial = 0; trial < 50; ++trial) {
    std::array<double, 2> p{rng.uniform(0.0, 0.9), rng.uniform(0.2, 1.0)};
    tape.eval(p, 2, jets);
    tape.eval_values(p, vals);
    for (std::size_t i = 0; i < exprs.size(); ++i) {
      const cplx v = exprs[i].evaluate(p);
      CHECK(std::abs(jets[i].v - v) <= 1e-13 * (1.0 + std::abs(v)));
      CHECK(std::abs(vals[i] - v) <= 1e-13 * (1.0 + std::abs(v)));
      for (int a = 0; a < 2; ++a) {
        const Expr da = exprs[i].derivative(a);
        const cplx g = da.evaluate(p);
        CHECK(std::abs(jets[i].g[a] - g) <= 1e-10 * (1.0 + std::abs(g)));
        for (int b = 0; b < 2; ++b) {
          const cplx h = da.derivative(b).evaluate(p);
          CHECK(std::abs(jets[i].hess(a, b) - h) <= 1e-9 * (1.0 + std::abs(h)));
        }
      }
    }
  }
}

TEST_CASE("bump vanishes outside its support with all derivatives") {
  const Expr b = Expr::bump({0.0}, 1.0, 1);
  const Expr outs[1] = {b};
  const Tape t(outs, 1);
  Jet j[1];
  const double p[1] = {1.2};
  t.eval(p, 2, j);
  CHECK(j[0].v == cplx(0.0));
  CHECK(j[0].g[0] == cplx(0.0));
  CHECK(j[0].hess(0, 0) == cplx(0.0));
  const double c[1] = {0.0};
  CHECK(b.evaluate(c).real() == doctest::Approx(1.0));
}

TEST_CASE("conj conjugates constants only") {
  const Expr x = Expr::coord(0);
  const Expr e = Expr(cplx(1.0, 2.0)) * x + exp(Expr(cplx(0.0, 0.5)) * x);
  const std::array<double, 1> p{0.7};
  CHECK(std::abs(e.conj().evaluate(p) - std::conj(e.evaluate(p))) < 1e-15);
}

TEST_CASE("parser handles the documented grammar") {
  auto e = parse_expression("2*I1^2 + sin(I2) - exp(-I1/2) + bump([0.5, 0.5], 0.3) + pi", 2);
  const std::array<double, 2> p{0.4, 0.6};
  const double expect = 2 * 0.16 + std::sin(0.6) - std::exp(-0.2) +
                        std::exp(1.0 - 1.0 / (1.0 - (0.01 + 0.01) / 0.09)) + std::numbers::pi;
  CHECK(e.evaluate(p).real() == doctest::Approx(expect).epsilon(1e-14));

  auto c = parse_expression("complex(1, -2) * I1", 1);
  const std::array<double, 1> q{3.0};
  CHECK(c.evaluate(q) == cplx(3.0, -6.0));

  CHECK(parse_expression("-2^2", 1).constant_value().real() == -4.0);
  CHECK(parse_expression("2^-1", 1).constant_value().real() == 0.5);
  CHECK(parse_expression("1e-3 * 4", 1).constant_value().real() == doctest::Approx(4e-3));
}

TEST_CASE("to_string round-trips through the parser") {
  SeededRng rng(1, 0);
  for (const Expr& e : sample_exprs()) {
    const Expr back = parse_expression(e.to_string(), 2);
    for (int trial = 0; trial < 5; ++trial) {
      std::array<double, 2> p{rng.uniform(0, 1), rng.uniform(0.2, 1)};
      CHECK(std::abs(back.evaluate(p) - e.evaluate(p)) <= 1e-12 * (1.0 + std::abs(e.evaluate(p))));
    }
  }
}

TEST_CASE("parse errors carry positions") {
  auto position_of = [](const char* text, int dim) -> std::size_t {
    try {
      parse_expression(text, dim);
    } catch (const ParseError& e) {
      return e.position();
    }
    return std::size_t(-1);
  };
  CHECK(position_of("I1 + I3", 2) == 5);
  CHECK(position_of("foo(I1)", 1) == 0);
  CHECK(position_of("1 + * 2", 1) == 4);
  CHECK(position_of("(I1 + 2", 1) == 7);
  CHECK(position_of("I1 ^ I1", 1) == 4);
  CHECK(position_of("bump([1], 0.5)", 2) == 5);
  CHECK(position_of("1 / 0", 1) == 3);
  CHECK(position_of("2 2", 1) == 2);
}
