#include "doctest.h"

#include <cmath>

#include "ensdev/spectral.hpp"

using namespace ensdev;

namespace {

EnsembleDensity density_of(const Builtin& b, int res) {
  return EnsembleDensity::normalize(b.density, b.system.domain, build_grid(b.system.domain, {res}));
}

}  // namespace

TEST_CASE("fourier_coeff read-off") {
  TrigPolyField f(2);
  f.add_cos({1, 0}, 1.0);
  CHECK(fourier_coeff(f, {1, 0}).constant_value() == cplx(0.5));
  TrigPolyField g(2);
  g.add_sin({0, 1}, Expr::coord(1));
  const std::vector<double> I{0.0, 3.0};
  CHECK(fourier_coeff(g, {0, 1}).evaluate(I) == cplx(0.0, -1.5));
  CHECK(fourier_coeff(g, {2, 1}).is_zero());
}

TEST_CASE("mode products") {
  TrigPolyField G(2), f0(2);
  G.add_cos({1, 0}, 1.0);
  const Expr rho = Expr::bump({0.0, 0.0}, 1.0);
  f0.add_constant(rho);
  f0.add_cos({1, 0}, rho);
  CHECK(mode_product(G, f0, {0, 1}).is_zero());
  const auto p = mode_product(G, f0, {1, 0});
  const std::vector<double> I{0.2, -0.3};
  CHECK(p.a.evaluate(I).real() == doctest::Approx(rho.evaluate(I).real() / 4.0).epsilon(1e-14));
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    auto a = I, b = I;
    a[j] += h;
    b[j] -= h;
    const double fd = (p.a.evaluate(a) - p.a.evaluate(b)).real() / (2 * h);
    CHECK(p.grad[j].evaluate(I).real() == doctest::Approx(fd).epsilon(1e-6));
  }
  // a_{-k} = conj(a_k) for real fields
  const auto b = builtin_system("twist2", 0.0);
  const auto d = density_of(b, 80);
  for (const Wavevector& k : {Wavevector{1, 0}, Wavevector{1, 1}}) {
    const auto pk = mode_product(b.observable, d.field, k);
    const auto pm = mode_product(b.observable, d.field, negate(k));
    const std::vector<double> J{1.1, 0.4};
    CHECK(std::abs(pk.a.evaluate(J) - std::conj(pm.a.evaluate(J))) < 1e-14);
  }
}

TEST_CASE("tail: band limits, single high mode and monotonicity") {
  const auto b = builtin_system("twist2", 0.0);
  const auto dom = b.system.domain;
  const auto grid = build_grid(dom, {120});
  const auto d = density_of(b, 120);
  CHECK(tail(b.observable, d.field, b.observable.band_limit() + d.field.band_limit(), grid) == 0.0);
  double prev = 1e300;
  for (int K = 0; K <= 3; ++K) {
    const double t = tail(b.observable, d.field, K, grid);
    CHECK(t <= prev);
    CHECK(t >= 0.0);
    prev = t;
  }
  CHECK(tail(b.observable, d.field, 0, grid) > 0.0);

  // one mode pair k0 = (2, 1): a_{k0} = a_{-k0} = bump/4, so R = (2pi)^2 * 2 * m / 4
  TrigPolyField G(2), f(2);
  G.add_cos({2, 1}, 1.0);
  const Expr bump = Expr::bump({0.0, 0.0}, 1.0);
  f.add_cos({2, 1}, bump);
  double m = 0.0;
  const auto fine = build_grid(dom, {400}, QuadratureRule::gauss_legendre);
  for (std::size_t i = 0; i < fine.size(); ++i) m += fine.weights[i] * bump.evaluate(fine.node(i)).real();
  CHECK(tail(G, f, 2, fine) == doctest::Approx(std::pow(kTwoPi, 2) * 2.0 * m / 4.0).epsilon(1e-12));
  CHECK(tail(G, f, 3, fine) == 0.0);

  // uniform f0 has no oscillating modes
  TrigPolyField u(2), c(2);
  u.add_constant(1.0);
  c.add_cos({1, 0}, 1.0);
  CHECK(tail(c, u, 0, grid) == 0.0);
}

TEST_CASE("mode L1 norms are independent of the execution policy") {
  const auto b = builtin_system("twist2", 0.0);
  const auto d = density_of(b, 100);
  const FieldModeSource src(b.observable, d.field);
  const auto grid = build_grid(b.system.domain, {100});
  const auto s = mode_l1_norms(src, grid, Exec::serial);
  const auto p = mode_l1_norms(src, grid, Exec::openmp);
  CHECK(s.a_l1 == p.a_l1);
  CHECK(s.grad_l1 == p.grad_l1);
  CHECK(s.multiplicity == 2.0);
  CHECK(s.modes.size() == 2);
}

TEST_CASE("decay fit") {
  std::vector<int> Ks{2, 3, 4, 5, 6};
  std::vector<double> t;
  for (int K : Ks) t.push_back(3.0 * std::exp(-0.5 * K));
  const auto f = tail_decay_fit(Ks, t);
  CHECK(f.sigma0 == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(f.residual < 1e-10);
  const std::vector<int> two{1, 2};
  const std::vector<double> tt{0.1, 0.05};
  CHECK_THROWS_AS(tail_decay_fit(two, tt), Error);
  const std::vector<double> zeros(5, 0.0);
  CHECK_THROWS_AS(tail_decay_fit(Ks, zeros), Error);

  // synthetic field with amplitudes e^{-|k|_1}: tails from the actual tail routine
  TrigPolyField G(1), f0(1);
  const Expr bump = Expr::bump({0.0}, 1.0);
  f0.add_constant(bump);
  for (int k = 1; k <= 8; ++k) {
    G.add_cos({k}, std::exp(-0.5 * k));
    f0.add_cos({k}, Expr(std::exp(-0.5 * k)) * bump);
  }
  const auto grid = build_grid(ActionDomain::box({-1.0}, {1.0}), {200});
  std::vector<int> Ks2;
  std::vector<double> tails;
  for (int K = 1; K <= 6; ++K) {
    Ks2.push_back(K);
    tails.push_back(tail(G, f0, K, grid));
  }
  const auto g = tail_decay_fit(Ks2, tails);
  CHECK(g.sigma0 == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("FFT cross-check of the symbolic coefficients") {
  for (const auto& name : builtin_names()) {
    const auto b = builtin_system(name, 1.0);
    const int n = b.system.dim();
    const auto& f = b.system.unit_perturbation;
    std::vector<double> I(n, 0.3);
    I[0] = 0.7;
    const int M = 2 * f.band_limit() + 1;
    for (const auto& [k, c] : sampled_coefficients(f, I, M))
      CHECK(std::abs(c - f.coeff(k).evaluate(I)) < 1e-13);
  }
  const ThetaTransform T(2, 4);
  Vec th{};
  T.angles(5, th);
  CHECK(th[0] == doctest::Approx(kTwoPi / 4));
  CHECK(th[1] == doctest::Approx(kTwoPi / 4));
  CHECK(T.index(std::vector<int>{-1, 0}) == 12);
}

TEST_CASE("Parseval") {
  for (const auto& name : builtin_names()) {
    const auto b = builtin_system(name, 1.0);
    const int n = b.system.dim();
    const int res[3] = {200, 60, 16};
    const auto grid = build_grid(b.system.domain, {res[n - 1]});
    const auto d = density_of(b, res[n - 1]);
    for (const TrigPolyField* f : {&b.observable, &d.field}) {
      const auto p = parseval_check(*f, grid);
      CHECK(p.mode_side == doctest::Approx(p.grid_side).epsilon(1e-2));
    }
  }
}

TEST_CASE("mode table JSON") {
  TrigPolyField f(1);
  f.add_cos({1}, Expr::coord(0));
  const std::string j = mode_table_json(f);
  CHECK(j.find("\"-1\"") != std::string::npos);
  CHECK(j.find("\"1\"") != std::string::npos);
}
