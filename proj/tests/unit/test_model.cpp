#include "doctest.h"

#include <cmath>

#include "ensdev/model.hpp"

using namespace ensdev;
using std::numbers::pi;

namespace {

PhasePoint pt(std::vector<double> th, std::vector<double> ac) { return PhasePoint(th, ac); }

TrigPolyField random_field(SeededRng& rng, int n, int modes) {
  TrigPolyField f(n);
  const Expr x = Expr::coord(0);
  for (int m = 0; m < modes; ++m) {
    Wavevector k(n);
    for (int& v : k) v = int(std::floor(rng.uniform(-3, 4)));
    const Expr c = Expr(cplx(rng.uniform(-1, 1), rng.uniform(-1, 1))) * (Expr(1.0) + Expr(rng.uniform(-1, 1)) * x) +
                   Expr(rng.uniform(-1, 1)) * Expr::coord(n - 1) * x;
    f.add_mode(k, c);
  }
  return f;
}

}  // namespace

TEST_CASE("eval_field examples") {
  TrigPolyField f(2);
  f.add_cos({1, 0}, 1.0);
  const CompiledField cf(f);
  CHECK(cf.value(pt({0, 0}, {0.3, -1})) == doctest::Approx(1.0).epsilon(1e-15));

  TrigPolyField g(2);
  g.add_sin({0, 1}, Expr::coord(0));
  CHECK(CompiledField(g).value(pt({0, pi / 2}, {3, 0})) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(CompiledField(g).value_complex(pt({0}, {1})), std::invalid_argument);
}

TEST_CASE("compiled evaluation matches direct summation and is real") {
  SeededRng rng(2, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const TrigPolyField f = random_field(rng, 2, 5);
    const CompiledField cf(f);
    for (int i = 0; i < 10; ++i) {
      auto z = pt({rng.uniform(0, 7), rng.uniform(0, 7)}, {rng.uniform(-1, 1), rng.uniform(-1, 1)});
      const cplx direct = f.evaluate(z);
      CHECK(std::abs(direct.imag()) < 1e-10);
      CHECK(cf.value(z) == doctest::Approx(direct.real()).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("field jets match finite differences in phase space") {
  SeededRng rng(4, 0);
  const TrigPolyField f = random_field(rng, 2, 6);
  const CompiledField cf(f);
  FieldJet J, Jp, Jm;
  for (int i = 0; i < 20; ++i) {
    auto z = pt({rng.uniform(0, 6), rng.uniform(0, 6)}, {rng.uniform(-1, 1), rng.uniform(-1, 1)});
    cf.eval(z, 2, J);
    CHECK(J.v == doctest::Approx(cf.value(z)).epsilon(1e-13));
    const double h = 1e-5;
    for (int a = 0; a < 4; ++a) {
      PhasePoint zp = z, zm = z;
      if (a < 2) {
        zp.theta[a] += h;
        zm.theta[a] -= h;
      } else {
        zp.action[a - 2] += h;
        zm.action[a - 2] -= h;
      }
      const double g = a < 2 ? J.dtheta[a] : J.daction[a - 2];
      CHECK(g == doctest::Approx((cf.value(zp) - cf.value(zm)) / (2 * h)).epsilon(1e-6).scale(1.0));
      cf.eval(zp, 1, Jp);
      cf.eval(zm, 1, Jm);
      for (int b = 0; b < 4; ++b) {
        const double gp = b < 2 ? Jp.dtheta[b] : Jp.daction[b - 2];
        const double gm = b < 2 ? Jm.dtheta[b] : Jm.daction[b - 2];
        CHECK(J.hess(b, a) == doctest::Approx((gp - gm) / (2 * h)).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("linearity of fields") {
  SeededRng rng(8, 0);
  const TrigPolyField F = random_field(rng, 2, 4), G = random_field(rng, 2, 4);
  const TrigPolyField S = F.scaled(2.5) + G.scaled(-0.75);
  const CompiledField cf(F), cg(G), cs(S);
  for (int i = 0; i < 10; ++i) {
    auto z = pt({rng.uniform(0, 6), rng.uniform(0, 6)}, {rng.uniform(-1, 1), rng.uniform(-1, 1)});
    CHECK(cs.value(z) == doctest::Approx(2.5 * cf.value(z) - 0.75 * cg.value(z)).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("Fourier read-off") {
  TrigPolyField f(2);
  f.add_cos({1, 0}, 1.0);
  CHECK(f.coeff({1, 0}).constant_value() == cplx(0.5));
  CHECK(f.coeff({-1, 0}).constant_value() == cplx(0.5));
  TrigPolyField g(2);
  g.add_sin({0, 1}, Expr::coord(1));
  const std::array<double, 2> p{0.0, 2.0};
  CHECK(g.coeff({0, 1}).evaluate(p) == cplx(0.0, -1.0));
  CHECK(g.coeff({3, 3}).is_zero());
  CHECK(g.band_limit() == 1);
}

TEST_CASE("poisson bracket of simple fields") {
  // {cos th1, I1} = d_th cos th1 * d_I I1 = -sin th1
  TrigPolyField F(1), G(1);
  F.add_cos({1}, 1.0);
  G.add_constant(Expr::coord(0));
  const TrigPolyField B = poisson_bracket(F, G);
  const CompiledField cb(B);
  for (double th : {0.3, 1.1, 4.0})
    CHECK(cb.value(pt({th}, {0.5})) == doctest::Approx(-std::sin(th)).epsilon(1e-14));

  // {h, chi} with h = I^2/2 and chi = sin th / I equals -omega d_th chi = -cos th
  TrigPolyField h(1), chi(1);
  h.add_constant(Expr(0.5) * Expr::coord(0) * Expr::coord(0));
  chi.add_sin({1}, Expr(1.0) / Expr::coord(0));
  const CompiledField c2(poisson_bracket(h, chi));
  CHECK(c2.value(pt({0.4}, {1.3})) == doctest::Approx(-std::cos(0.4)).epsilon(1e-13));
}

TEST_CASE("integrable part frequency map") {
  IntegrablePart h1(Expr(0.5) * (Expr::coord(0) * Expr::coord(0) + Expr::coord(1) * Expr::coord(1)), 2);
  const std::array<double, 2> p{1.0, 2.0};
  auto w = h1.frequency(p);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 2.0);

  IntegrablePart h2(parse_expression("I1^2/2 + I1*I2", 2), 2);
  const std::array<double, 2> q{1.0, 1.0};
  auto w2 = h2.frequency(q);
  CHECK(w2[0] == doctest::Approx(2.0));
  CHECK(w2[1] == doctest::Approx(1.0));

  for (const auto& name : builtin_names()) {
    const auto b = builtin_system(name, 1e-3);
    const int n = b.system.dim();
    SeededRng rng(6, 0);
    for (int t = 0; t < 10; ++t) {
      std::vector<double> I(n);
      for (double& v : I) v = rng.uniform(-1, 1);
      const Vec om = b.system.frequency(I);
      for (int j = 0; j < n; ++j) {
        auto a = I, c = I;
        a[j] += 1e-5;
        c[j] -= 1e-5;
        const double fdv = (b.system.integrable.energy(a) - b.system.integrable.energy(c)) / 2e-5;
        CHECK(om[j] == doctest::Approx(fdv).epsilon(1e-6).scale(1.0));
      }
    }
  }
  const auto tw = builtin_system("twist2", 1e-3);
  const std::array<double, 2> far{5.0, 0.0};
  CHECK_THROWS_AS(tw.system.frequency(far), Error);
  auto J = tw.system.integrable.frequency_jacobian(p);
  CHECK(J[0] == 1.0);
  CHECK(J[1] == 0.0);
  CHECK(J[3] == 1.0);
}

TEST_CASE("builtin catalog") {
  CHECK_THROWS_AS(builtin_system("nope", 0.1), Error);
  const auto tw = builtin_system("twist2", 1e-2);
  const SupEstimate s = certified_sup(tw.system.perturbation(), tw.system.domain);
  CHECK(s.probe_max == doctest::Approx(2e-2).epsilon(1e-3));
  CHECK(s.bound >= s.probe_max);
  CHECK(s.margin >= 0.05 - 1e-12);
  // the perturbation scales linearly in epsilon
  const auto tw2 = builtin_system("twist2", 2e-2);
  CHECK(certified_sup(tw2.system.perturbation(), tw2.system.domain).probe_max ==
        doctest::Approx(2.0 * s.probe_max).epsilon(1e-12));
  const auto p0 = builtin_system("pendulum1", 0.0);
  CHECK(p0.system.perturbation().empty());
}

TEST_CASE("densities are normalized, nonnegative and vanish at the boundary") {
  for (const auto& name : builtin_names()) {
    const auto b = builtin_system(name, 1e-3);
    const int n = b.system.dim();
    const int res[3] = {400, 80, 40};
    const auto grid = build_grid(b.system.domain, {res[n - 1]});
    const auto d = EnsembleDensity::normalize(b.density, b.system.domain, grid);
    CHECK(d.min_probe >= -1e-12);
    CHECK(d.compact_support);
    CHECK(d.boundary_max < 1e-10);
    const Expr m = d.marginal();
    double same = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) same += grid.weights[i] * m.evaluate(grid.node(i)).real();
    CHECK(same == doctest::Approx(1.0).epsilon(1e-12));
    // a finer rule agrees up to the discretization error of the coarse one
    const auto fine = build_grid(b.system.domain, {2 * res[n - 1]}, QuadratureRule::gauss_legendre);
    double s = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i) s += fine.weights[i] * m.evaluate(fine.node(i)).real();
    CHECK(s == doctest::Approx(1.0).epsilon(n <= 2 ? 1e-4 : 2e-3));
    const auto G = Observable::make(b.observable, b.system.domain);
    CHECK(G.sup.bound >= G.sup.probe_max);
  }
}

TEST_CASE("density with mass at the boundary is flagged") {
  TrigPolyField u(1);
  u.add_constant(1.0);
  const auto dom = ActionDomain::box({0.0}, {1.0});
  const auto d = EnsembleDensity::normalize(u, dom, build_grid(dom, {10}));
  CHECK(!d.compact_support);
  CHECK(d.field.zero_mode().constant_value().real() == doctest::Approx(1.0 / (2 * pi)));
}

TEST_CASE("sup estimate is an upper bound for a rough observable") {
  TrigPolyField f(2);
  f.add_cos({5, -3}, Expr::coord(0));
  f.add_sin({1, 2}, 0.7);
  const auto dom = ActionDomain::ball({0, 0}, 1.0);
  const auto est = certified_sup(f, dom);
  SeededRng rng(1, 1);
  const CompiledField cf(f);
  double best = 0.0;
  for (int i = 0; i < 200000; ++i) {
    std::vector<double> I{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (!dom.contains(I)) continue;
    best = std::max(best, std::abs(cf.value(pt({rng.uniform(0, 2 * pi), rng.uniform(0, 2 * pi)}, I))));
  }
  CHECK(best <= est.bound);
}
