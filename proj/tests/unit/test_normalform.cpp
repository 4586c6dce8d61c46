#include "doctest.h"

#include <cmath>

#include "ensdev/mixing.hpp"
#include "ensdev/normalform.hpp"

using namespace ensdev;

namespace {

NormalFormOptions light() {
  NormalFormOptions o;
  o.probe_resolution = {16};
  o.probe_theta = 8;
  return o;
}

HamiltonianSystem single_mode(double eps) {
  HamiltonianSystem s;
  s.name = "single";
  s.integrable = IntegrablePart(Expr(0.5) * (Expr::coord(0) * Expr::coord(0) + Expr::coord(1) * Expr::coord(1)), 2);
  s.domain = ActionDomain::box({0.5, 0.5}, {1.5, 1.5});
  TrigPolyField f(2);
  f.add_cos({1, 0}, 1.0);
  s.unit_perturbation = f;
  s.epsilon = eps;
  return s;
}

std::vector<PhasePoint> random_probes(const NormalFormPackage& pkg, int count, std::uint64_t seed) {
  SeededRng rng(seed, 0);
  const auto& dom = pkg.system().domain;
  std::vector<PhasePoint> out;
  while (int(out.size()) < count) {
    PhasePoint z;
    z.dim = pkg.dim();
    for (int a = 0; a < z.dim; ++a) {
      z.theta[a] = rng.uniform(0.0, kTwoPi);
      z.action[a] = rng.uniform(dom.lower()[a], dom.upper()[a]);
    }
    if (pkg.region().contains(z.actions())) out.push_back(z);
  }
  return out;
}

}  // namespace

TEST_CASE("homological equation for a single mode") {
  const double eps = 1e-2;
  const auto sys = single_mode(eps);
  const auto pkg = NormalFormPackage::build(sys, {1, 0.3}, light());
  const auto& chi = pkg.generator().chi;
  REQUIRE(chi.modes().size() == 2);
  // chi = eps sin(theta_1) / I_1 with the residual fixing the sign
  const CompiledField c(chi);
  for (const auto& z : random_probes(pkg, 20, 3))
    CHECK(c.value(z) == doctest::Approx(eps * std::sin(z.theta[0]) / z.action[0]).epsilon(1e-12));
  CHECK(homological_residual(sys, pkg.generator(), random_probes(pkg, 1000, 4)) < 1e-12);
  CHECK(pkg.summary().homological_residual < 1e-12);
  REQUIRE(pkg.summary().divisors.size() == 1);
  CHECK(pkg.summary().divisors[0].min_abs >= pkg.region().floor);
}

TEST_CASE("trivial generators") {
  auto sys = single_mode(0.0);
  CHECK(NormalFormPackage::build(sys, {1, 0.3}, light()).identity());

  TrigPolyField avg(2);
  avg.add_constant(Expr::coord(0) * Expr::coord(1));
  sys.unit_perturbation = avg;
  sys.epsilon = 0.1;
  const auto pkg = NormalFormPackage::build(sys, {1, 0.3}, light());
  CHECK(pkg.identity());
  const std::vector<double> I{1.0, 1.2};
  CHECK(pkg.averaged_twist().energy(I) == doctest::Approx(0.5 * (1.0 + 1.44) + 0.1 * 1.2));
  CHECK(pkg.summary().remainder_sup == 0.0);
  PhasePoint z;
  z.dim = 2;
  z.action = {1.0, 1.2};
  CHECK(std::abs(pkg.remainder(z)) < 1e-15);
}

TEST_CASE("small divisors are refused with k and I named") {
  const auto sys = single_mode(1e-3);
  const auto region = NormalFormRegion::make(sys, {1, 0.3}, 0.1, 0.05, 1.05);
  const std::vector<double> probes{1.0, 1.0, 1e-3, 1.0};
  try {
    solve_homological(sys, region, probes);
    FAIL("expected a small-divisor error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("k = (1,0)") != std::string::npos);
    CHECK(msg.find("0.001") != std::string::npos);
  }
  CHECK_THROWS_AS(NormalFormRegion::make(sys, {1, 0.3}, 0.2, 0.2, 1.05), Error);
}

TEST_CASE("package invariants on the twist") {
  const auto pkg = NormalFormPackage::build(builtin_system("twist2", 1e-3).system, {2, 0.4});
  const auto& S = pkg.summary();
  CHECK(S.det_error < 1e-6);
  CHECK(S.inverse_error < 1e-8);
  CHECK(S.symplectic_defect < 1e-5);
  CHECK(S.homological_residual < 1e-10);
  CHECK(S.remainder_sup > 0.0);
  CHECK(S.delta_nf <= pkg.region().margin);
  CHECK(S.to_json().find("\"small_divisors\"") != std::string::npos);

  // propagated Jacobian against finite differences
  const auto z = random_probes(pkg, 1, 9)[0];
  PhaseMatrix J;
  pkg.transform(z, &J);
  const Eigen::MatrixXd F = map_jacobian([&](const PhasePoint& p) { return pkg.transform(p); }, z);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(std::abs(J(r, c) - F(r, c)) < 1e-7);

  // remainder gradient against finite differences
  Vec gt, ga;
  pkg.remainder_gradient(z, gt, ga);
  const double h = 1e-5;
  for (int c = 0; c < 4; ++c) {
    PhasePoint p = z, m = z;
    (c < 2 ? p.theta[c] : p.action[c - 2]) += h;
    (c < 2 ? m.theta[c] : m.action[c - 2]) -= h;
    const double fd = (pkg.remainder(p) - pkg.remainder(m)) / (2 * h);
    const double an = c < 2 ? gt[c] : ga[c - 2];
    CHECK(std::abs(fd - an) < 1e-8);
  }
}

TEST_CASE("remainder and displacement scale with epsilon") {
  CHECK(NormalFormPackage::build(builtin_system("twist2", 0.0).system, {2, 0.4}, light()).summary().remainder_sup ==
        0.0);
  const auto a = NormalFormPackage::build(builtin_system("twist2", 1e-3).system, {2, 0.4}, light());
  const auto b = NormalFormPackage::build(builtin_system("twist2", 5e-4).system, {2, 0.4}, light());
  CHECK(a.summary().remainder_sup / b.summary().remainder_sup == doctest::Approx(4.0).epsilon(0.125));
  CHECK(a.summary().displacement_c0 / b.summary().displacement_c0 == doctest::Approx(2.0).epsilon(0.25));
  const auto it = iterate_normal_form(a, 2);
  REQUIRE(it.size() == 2);
  CHECK(it[0].remainder_sup == doctest::Approx(a.summary().remainder_sup).epsilon(0.02));
  CHECK(it[1].remainder_sup <= it[0].remainder_sup);
  CHECK_THROWS_AS(iterate_normal_form(a, 4), Error);
}

TEST_CASE("normal-form error bound arithmetic") {
  CHECK(nf_error_bound(2.0, 0.0, 1e-6, 1.0) == doctest::Approx(2e-6));
  CHECK(nf_error_bound(1.0, 10.0, 1e-8, 1.0) == doctest::Approx(1.11e-6));
  CHECK(nf_error_bound(1.0, 10.0, 0.0, 1.0) == 0.0);
  CHECK_THROWS(nf_error_bound(-1.0, 1.0, 1.0, 1.0));

  const std::vector<double> train{1.0, 2.0};
  const std::vector<double> meas{3e-6, 7e-6, 1e-5};
  const auto c = calibrate_c_err(train, 5.0, meas, 1.0, 1e-6);
  CHECK(c.C_err == doctest::Approx(1.0));  // 3e-6 / (3e-6), 7e-6 / 7e-6
  CHECK(c.heldout_bound == doctest::Approx(31e-6));
  CHECK(c.validated);
  CHECK(override_c_err(2.5).source == "override");
  CHECK_THROWS_AS(override_c_err(-1.0), Error);
}

TEST_CASE("conjugacy, pullback and measured normal-form error") {
  const auto b = builtin_system("twist2", 1e-3);
  const auto pkg = NormalFormPackage::build(b.system, {2, 0.4}, light());
  const Flow A = Flow::symplectic(std::make_shared<PerturbedHamiltonian>(b.system), 1e-3);
  const Flow B = Flow::symplectic(pkg.transformed(), 0.05);
  const auto probes = random_probes(pkg, 3, 5);
  const auto tf = [&](const PhasePoint& z) { return pkg.transform(z); };
  for (double t : {1.0, 10.0, 100.0}) CHECK(conjugacy_residual(tf, A, B, t, probes) <= 1e-5);

  const auto d = EnsembleDensity::normalize(b.density, b.system.domain, build_grid(b.system.domain, {120}));
  const auto s = transformed_samples(pkg, d, 100, SeededRng(6, 0));
  for (const auto& z : s.original.points) CHECK(pkg.region().cutoff.value(z.actions()) > 0.0);
  const auto pb = pullback_check(b.observable, pkg, s, A, 10.0, 0.1);
  CHECK(pb.residual <= 3.0 * pb.stderr_ + 1e-5);

  const std::vector<double> ts{1.0, 10.0, 100.0};
  const auto m = nf_error_measured(b.observable, pkg, s.transformed.head(40), ts, 0.1);
  std::vector<double> up;
  for (const auto& e : m) up.push_back(std::abs(e.mean) + 3.0 * e.stderr_);
  CHECK(std::log(up[2] / up[0]) / std::log(100.0) <= 2.2);

  const auto z0 = builtin_system("twist2", 0.0);
  const auto id = NormalFormPackage::build(z0.system, {2, 0.4}, light());
  const auto s0 = transformed_samples(id, d, 50, SeededRng(6, 0));
  for (const auto& e : nf_error_measured(z0.observable, id, s0.transformed, ts, 0.1)) CHECK(std::abs(e.mean) < 1e-14);
  CHECK(pullback_check(z0.observable, id, s0, Flow::integrable(z0.system.integrable), 0.0, 0.1).residual == 0.0);
}

TEST_CASE("sampled mode products in normal-form coordinates") {
  const auto b = builtin_system("twist2", 1e-3);
  const auto d = EnsembleDensity::normalize(b.density, b.system.domain, build_grid(b.system.domain, {120}));
  const auto pkg = NormalFormPackage::build(b.system, {2, 0.4}, light());
  const NormalFormModeSource src(pkg, b.observable, d.field, 16, 4);
  CHECK(src.multiplicity() == 2.0);
  for (const auto& k : src.modes()) CHECK(l1_norm(k) <= 4);
  const std::size_t m = src.modes().size();
  std::vector<cplx> a(m), ap(m), am(m);
  std::vector<CGrad> g(m), tmp(m);
  const std::vector<double> I{1.2, 0.55};
  REQUIRE(pkg.region().contains(I));
  src.eval(I, a, g, nullptr);
  const double h = 1e-5;
  for (int j = 0; j < 2; ++j) {
    auto p = I, q = I;
    p[j] += h;
    q[j] -= h;
    src.eval(p, ap, tmp, nullptr);
    src.eval(q, am, tmp, nullptr);
    for (std::size_t i = 0; i < m; ++i) CHECK(std::abs((ap[i] - am[i]) / (2 * h) - g[i][j]) < 1e-6);
  }

  // near the identity the products approach the masked symbolic ones
  const auto tiny = NormalFormPackage::build(builtin_system("twist2", 1e-7).system, {2, 0.4}, light());
  const NormalFormModeSource ts(tiny, b.observable, d.field, 16, 2);
  const auto& cut = tiny.region().cutoff;
  const FieldModeSource sym(b.observable, d.field, 0, 2, [&](std::span<const double> J, Vec* gr) { return cut.value(J, gr); });
  std::vector<cplx> x(ts.modes().size()), y(sym.modes().size());
  std::vector<CGrad> gx(x.size()), gy(y.size());
  double zx = 0, zy = 0;
  ts.eval(I, x, gx, &zx);
  sym.eval(I, y, gy, &zy);
  CHECK(zx == doctest::Approx(zy).epsilon(1e-5));
  for (std::size_t i = 0; i < sym.modes().size(); ++i)
    for (std::size_t q = 0; q < ts.modes().size(); ++q)
      if (ts.modes()[q] == sym.modes()[i]) {
        CHECK(std::abs(x[q] - y[i]) < 1e-5 * (1.0 + std::abs(y[i])));
        for (int j = 0; j < 2; ++j) CHECK(std::abs(gx[q][j] - gy[i][j]) < 1e-4 * (1.0 + std::abs(gy[i][j])));
      }
  // outside the region everything vanishes
  const std::vector<double> far{0.01, 0.01};
  ts.eval(far, x, gx, &zx);
  CHECK(zx == 0.0);
  for (auto v : x) CHECK(v == cplx{});
}

TEST_CASE("equilibrium change") {
  // the nonresonant region covers the whole density here
  const auto grid = build_grid(ActionDomain::box({0.5, 0.5}, {1.5, 1.5}), {40});
  const Expr rho = Expr::bump({1.0, 1.0}, 0.3);
  TrigPolyField raw(2);
  raw.add_constant(rho);
  raw.add_cos({1, 0}, Expr(0.5) * rho);
  const auto d = EnsembleDensity::normalize(raw, grid.domain, build_grid(grid.domain, {120}));
  TrigPolyField G(2);
  G.add_cos({1, 0}, 1.0);
  G.add_constant(Expr(0.2) * Expr::coord(0));
  auto opt = light();
  opt.margin = 0.1;

  const auto id = NormalFormPackage::build(single_mode(0.0), {1, 0.3}, opt);
  CHECK(eq_change_error(G, d.field, id, grid).error == 0.0);

  // E_eq / |Phi - Id|_C1 stays bounded along the epsilon sweep
  std::vector<double> ratio;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const auto pkg = NormalFormPackage::build(single_mode(eps), {1, 0.3}, opt);
    const auto act = transformed_support(d.field, pkg, grid);
    const auto src = transformed_mode_source(pkg, G, d.field, 16, 0);
    const TabulatedModeSource tab(*src, grid, default_exec(), &act);
    const auto e = eq_change_error(tab, G, d.field, pkg.region().cutoff, grid);
    CHECK(e.original == doctest::Approx(eq_change_error(G, d.field, id, grid).original).epsilon(1e-12));
    ratio.push_back(e.error / pkg.summary().displacement_c1);
  }
  for (double r : ratio) CHECK(r < 1.0);
  CHECK(ratio[2] <= 3.0 * ratio[0] + 1e-12);

  // G and f_0 depending on I only: E_eq <= |grad G| |Phi - Id|_C0 mass
  TrigPolyField Gi(2), fi(2);
  Gi.add_constant(Expr::coord(0));
  fi.add_constant(d.field.zero_mode());
  const auto pkg = NormalFormPackage::build(single_mode(1e-3), {1, 0.3}, opt);
  const auto e = eq_change_error(Gi, fi, pkg, grid);
  const double mass = masked_mass(EnsembleDensity{fi}, pkg.region().cutoff, grid);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(e.error <= pkg.summary().action_displacement * mass);
}

TEST_CASE("a generator too large for the partition is refused with a hint") {
  try {
    NormalFormPackage::build(builtin_system("twist2", 5e-3).system, {2, 0.4}, light());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("reduce epsilon") != std::string::npos);
  }
}
