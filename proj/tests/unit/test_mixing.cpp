#include "doctest.h"

#include <cmath>

#include "../common/random_cases.hpp"
#include "ensdev/estimator.hpp"
#include "ensdev/mixing.hpp"

using namespace ensdev;

namespace {

const ActionDomain unit_square = ActionDomain::box({0.0, 0.0}, {1.0, 1.0});

}  // namespace

TEST_CASE("u_field hand-computed cases") {
  const Expr x = Expr::coord(0);
  const Expr a = Expr::bump({0.5}, 0.4) * (Expr(1.0) + x);
  const UField u1(a, x, 1);
  for (double v : {0.3, 0.5, 0.7}) {
    const std::vector<double> I{v};
    CHECK(u1(I).real() == doctest::Approx(a.derivative(0).evaluate(I).real()).epsilon(1e-13));
  }
  // phi = x^2/2, a = 1 on [1, 2]: u = d/dx (1/x) = -1/x^2
  const UField u2(Expr(1.0), Expr(0.5) * x * x, 1);
  for (double v : {1.0, 1.5, 2.0}) CHECK(u2(std::vector<double>{v}).real() == doctest::Approx(-1.0 / (v * v)));
  const UField bad(Expr(1.0), Expr(0.5) * x * x, 1);
  CHECK_THROWS_AS(bad(std::vector<double>{0.0}), Error);
}

TEST_CASE("u matches the finite-difference divergence") {
  SeededRng rng(12, 0);
  for (int c = 0; c < 10; ++c) {
    const auto pc = testing::random_phase_case(rng);
    const UField u(pc.a, pc.phi, 2);
    // flux a grad phi / |grad phi|^2
    auto flux = [&](std::vector<double> I, int j) {
      const PhaseJet p = u.phase(I);
      const double g2 = p.grad[0] * p.grad[0] + p.grad[1] * p.grad[1];
      return u.a(I) * p.grad[j] / g2;
    };
    for (int t = 0; t < 5; ++t) {
      const std::vector<double> I{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)};
      const double h = 1e-5;
      cplx div{};
      for (int j = 0; j < 2; ++j) {
        auto p = I, m = I;
        p[j] += h;
        m[j] -= h;
        div += (flux(p, j) - flux(m, j)) / (2 * h);
      }
      CHECK(std::abs(u(I) - div) < 1e-5 * std::max(1.0, std::abs(div)));
    }
  }
}

TEST_CASE("oscillatory integral: trivial case, identity and decay") {
  const Expr x = Expr::coord(0), y = Expr::coord(1);
  const Expr a = Expr::bump({0.5, 0.5}, 0.35);
  const auto g = build_grid(unit_square, {400});
  const L1Norms n = expr_l1_norms(a, g);
  CHECK(std::abs(oscillatory_integral(a, x, 0.0, g) - cplx(n.a)) < 1e-14);

  const UField u(a, x, 2);
  const cplx lhs = oscillatory_integral(a, x, 50.0, g);
  const cplx rhs = integrated_by_parts(u, x, 50.0, g);
  CHECK(std::abs(lhs - rhs) < 1e-8);

  const Expr phi = x + Expr(0.3) * y + Expr(0.1) * x * x;
  const UField uq(a, phi, 2);
  const auto fine = build_grid(unit_square, required_resolution(phi, 1000.0, g));
  const double ul1 = u_l1_norm(uq, fine);
  for (double lam : {10.0, 100.0, 1000.0}) {
    const auto& grid = lam > 100.0 ? fine : g;
    CHECK(std::abs(oscillatory_integral(a, phi, lam, grid)) <= ul1 / lam);
  }
  CHECK_THROWS_AS(oscillatory_integral(a, phi, 1000.0, g), Error);
  const auto need = required_resolution(phi, 1000.0, g);
  CHECK(need[0] > 400);
}

TEST_CASE("L1 norms of amplitudes") {
  const auto g = build_grid(ActionDomain::box({-1.0}, {1.0}), {4000});
  CHECK(expr_l1_norms(Expr(0.0), g).a == 0.0);
  CHECK(expr_l1_norms(Expr(0.0), g).grad == 0.0);
  const Expr b = Expr::bump({0.0}, 0.8);
  const double mass = expr_l1_norms(b, g).a;
  const Expr unit = b / Expr(mass);
  const auto n = expr_l1_norms(unit, g);
  CHECK(n.a == doctest::Approx(1.0).epsilon(1e-6));
  // monotone on each side: int |b'| = 2 max b
  CHECK(n.grad == doctest::Approx(2.0 / mass).epsilon(1e-6));
  // complex modulus
  const Expr c = b * Expr(cplx(3.0, 4.0));
  CHECK(expr_l1_norms(c, g).a == doctest::Approx(5.0 * mass).epsilon(1e-12));
}

TEST_CASE("lemma bound arithmetic and dominance") {
  CHECK(lemma_l1_bound({3.0, 2.0}, 1.0, 0.0, 2) == 2.0);
  CHECK(lemma_l1_bound({1.0, 2.0}, 0.5, 1.0, 2) == doctest::Approx(20.0));
  CHECK_THROWS_AS(lemma_l1_bound({1.0, 1.0}, 0.0, 1.0, 2), Error);

  SeededRng rng(21, 0);
  const auto g = build_grid(unit_square, {200});
  for (int c = 0; c < 20; ++c) {
    const auto pc = testing::random_phase_case(rng);
    const UField u(pc.a, pc.phi, 2);
    const auto pb = phase_bounds([&](std::span<const double> I) { return u.phase(I); }, 2, g,
                                 [](std::size_t) { return true; });
    CHECK(pb.gamma > 0.0);
    CHECK(pb.gamma <= pb.gamma_grid);
    CHECK(pb.M >= pb.M_grid);
    const double direct = u_l1_norm(u, g);
    CHECK(direct <= lemma_l1_bound(expr_l1_norms(pc.a, g), pb.gamma, pb.M, 2));
  }
}

TEST_CASE("mixing constant of the twist") {
  const auto b = builtin_system("twist2", 0.0);
  const auto& dom = b.system.domain;
  const auto grid = build_grid(dom, {200});
  const auto d = EnsembleDensity::normalize(b.density, dom, grid);

  TrigPolyField flat(2);
  flat.add_constant(Expr::coord(0));
  const auto none = mixing_constant(b.system.integrable, FieldModeSource(flat, d.field), 3, grid, "ball", "none");
  CHECK(none.C_direct == 0.0);
  CHECK(none.records.empty());

  const FieldModeSource src(b.observable, d.field);
  const auto rep = mixing_constant(b.system.integrable, src, 2, grid, dom.describe(), "none");
  REQUIRE(rep.records.size() == 2);
  CHECK(rep.C_direct <= rep.C_lemma);
  double lemma = 0.0;
  for (const auto& r : rep.records) {
    CHECK(r.phase.gamma == doctest::Approx(l2_norm(r.k)).epsilon(1e-14));
    CHECK(r.phase.M == 0.0);
    lemma += r.grad_l1 / l2_norm(r.k);
  }
  CHECK(rep.C_lemma == doctest::Approx(std::pow(kTwoPi, 2) * 2.0 * lemma).epsilon(1e-12));
  // monotone in K
  CHECK(mixing_constant(b.system.integrable, src, 1, grid, "", "").C_direct <= rep.C_direct);
  CHECK(rep.to_json().find("\"C_G_direct\"") != std::string::npos);

  // records for k and -k agree when both are listed explicitly
  TrigPolyField Gc(2, false), fc(2, false);
  for (const auto& [k, c] : b.observable.modes()) Gc.accumulate(k, c);
  for (const auto& [k, c] : d.field.modes()) fc.accumulate(k, c);
  const auto full = mixing_constant(b.system.integrable, FieldModeSource(Gc, fc), 2, grid, "", "");
  CHECK(full.records.size() == 4);
  CHECK(full.C_direct == doctest::Approx(rep.C_direct).epsilon(1e-12));
  for (const auto& r : full.records)
    for (const auto& s : full.records)
      if (s.k == negate(r.k)) {
        CHECK(s.u_l1 == doctest::Approx(r.u_l1).epsilon(1e-12));
        CHECK(s.phase.gamma == r.phase.gamma);
      }
}

TEST_CASE("contaminated domain is refused") {
  // h = I^3/6 gives phi_1 = I^2/2, which has a critical point inside the support
  const IntegrablePart h(Expr(1.0 / 6.0) * pow(Expr::coord(0), 3.0), 1);
  TrigPolyField G(1), f(1);
  G.add_cos({1}, 1.0);
  f.add_cos({1}, Expr::bump({0.0}, 0.5));
  const auto grid = build_grid(ActionDomain::box({-1.0}, {1.0}), {201});
  CHECK_THROWS_AS(mixing_constant(h, FieldModeSource(G, f), 1, grid, "", ""), Error);
}

TEST_CASE("empirical deviation under the mixing bound (small ensemble)") {
  const auto b = builtin_system("twist2", 0.0);
  const auto& dom = b.system.domain;
  const auto grid = build_grid(dom, {200});
  const auto d = EnsembleDensity::normalize(b.density, dom, grid);
  const FieldModeSource src(b.observable, d.field);
  const auto rep = mixing_constant(b.system.integrable, src, 2, grid, dom.describe(), "none");
  const double R = tail(b.observable, d.field, 2, grid);
  const auto s = sample_density(d, dom, 5000, SeededRng(4, 0));
  const double eq = equilibrium_value(b.observable, d.field, grid);
  const std::vector<double> times{10, 100, 1000};
  const auto ser = deviation_series_mc(b.observable, Flow::integrable(b.system.integrable), s, times, eq);
  for (std::size_t j = 0; j < times.size(); ++j)
    CHECK(ser.deviation[j] <= rep.C_direct / times[j] + R + 3.0 * ser.stderr_[j]);
}
