#include "doctest.h"

#include <cmath>

#include "ensdev/estimator.hpp"
#include "ensdev/resonance.hpp"

using namespace ensdev;

namespace {

IntegrablePart twist2() { return builtin_system("twist2", 0.0).system.integrable; }

}  // namespace

TEST_CASE("is_resonant examples") {
  const auto h = twist2();
  const std::vector<double> one{1.0, 1.0};
  const auto r = is_resonant(one, {2, 0.1}, h);
  CHECK(r.resonant);
  CHECK(r.distance == 0.0);
  CHECK(r.k == Wavevector{1, -1});

  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  const std::vector<double> golden{1.0, phi};
  const auto g = is_resonant(golden, {3, 1e-3}, h);
  CHECK(!g.resonant);
  // explicit enumeration of |k|_1 <= 3
  double best = 1e9;
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b) {
      if ((a == 0 && b == 0) || std::abs(a) + std::abs(b) > 3) continue;
      best = std::min(best, std::abs(a + b * phi) / std::hypot(a, b));
    }
  CHECK(g.distance == doctest::Approx(best).epsilon(1e-14));

  const std::vector<double> far{1.3, -0.4};
  CHECK(is_resonant(far, {2, 100.0}, h).resonant);
  CHECK_THROWS_AS(is_resonant(far, {0, 0.1}, h), Error);
  CHECK_THROWS_AS(is_resonant(far, {2, 0.0}, h), Error);
}

TEST_CASE("resonant set of the twist is the band around the rational lines") {
  const auto h = twist2();
  SeededRng rng(3, 0);
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> I{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const bool near_diag = std::abs(I[0] - I[1]) / std::sqrt(2.0) < 0.05;
    const auto r = is_resonant(I, {1, 0.05}, h);
    // K = 1 only has the axes; with K = 2 the diagonal band joins
    const bool axes = std::abs(I[0]) < 0.05 || std::abs(I[1]) < 0.05;
    CHECK(r.resonant == axes);
    const bool k2 = is_resonant(I, {2, 0.05}, h).resonant;
    const bool anti = std::abs(I[0] + I[1]) / std::sqrt(2.0) < 0.05;
    const bool l2 = axes || near_diag || anti || std::abs(2 * I[0]) / 2.0 < 0.05 || std::abs(I[1]) < 0.05;
    CHECK(k2 == l2);
  }
}

TEST_CASE("schedules") {
  const auto s = zz_schedule(std::exp(-1.0), 0.5, 1.0);
  CHECK(s.spec.K == 12);
  CHECK(*s.r == doctest::Approx(2.0 * std::exp(-0.5)));
  CHECK(s.spec.alpha == doctest::Approx(2.0 * *s.r * 12.0));
  // halving epsilon raises -12 s0 log eps by 12 log 2
  const double raw1 = -12.0 * std::log(1e-3), raw2 = -12.0 * std::log(0.5e-3);
  CHECK(raw2 - raw1 == doctest::Approx(12.0 * std::log(2.0)));
  CHECK(zz_schedule(0.5e-3, 0.5, 1.0).spec.K == int(std::ceil(raw2)));
  double prev = 0.0;
  for (double e : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const auto z = zz_schedule(e, 0.5, 1.0);
    const double ratio = z.spec.alpha / std::sqrt(e) / std::abs(std::log(e));
    if (prev > 0.0) CHECK(ratio == doctest::Approx(prev).epsilon(0.05));
    prev = ratio;
  }
  CHECK_THROWS_AS(zz_schedule(1.0, 0.5, 1.0), Error);
  CHECK_THROWS_AS(zz_schedule(1e-3, 1.5, 1.0), Error);

  CHECK(power_schedule(1e-2, 0.5, 1.0, 0.1).spec.K == 10);
  CHECK(power_schedule(1e-4, 0.5, 1.0, 0.1).spec.K == 100);
  int last = 1 << 30;
  for (double e : {1e-6, 1e-4, 1e-3, 1e-2, 0.5}) {
    const int K = power_schedule(e, 0.5, 1.0, 0.1).spec.K;
    CHECK(K <= last);
    last = K;
  }
  CHECK_THROWS_AS(power_schedule(4.0, 0.5, 1.0, 0.1), Error);
}

TEST_CASE("resonant mass: limits, monotonicity and complementarity") {
  const auto b = builtin_system("twist2", 1e-3);
  const auto grid = build_grid(b.system.domain, {200});
  const auto f0 = EnsembleDensity::normalize(b.density, b.system.domain, grid);
  double prev = -1.0;
  for (double a : {1e-6, 0.01, 0.03, 0.05, 0.1, 0.2}) {
    const auto pm = build_partition(b.system.integrable, {3, a}, grid);
    const auto m = resonant_mass(f0, pm);
    CHECK(m.plain >= prev);
    CHECK(m.plain >= 0.0);
    CHECK(m.plain <= 1.0 + 1e-12);
    CHECK(m.conservative >= m.plain);
    CHECK(m.plain + m.nonresonant == doctest::Approx(1.0).epsilon(1e-12));
    if (a == 1e-6) CHECK(m.plain < 1e-2);
    prev = m.plain;
  }
  CHECK(resonant_mass(f0, build_partition(b.system.integrable, {2, 0.05}, grid)).plain <=
        resonant_mass(f0, build_partition(b.system.integrable, {4, 0.05}, grid)).plain);

  // a density supported away from every |k|_1 <= 1 line
  TrigPolyField far(2);
  far.add_constant(Expr::bump({1.0, 1.0}, 0.3));
  const auto g = EnsembleDensity::normalize(far, b.system.domain, grid);
  CHECK(resonant_mass(g, build_partition(b.system.integrable, {1, 0.2}, grid)).plain == 0.0);

  const auto pm = build_partition(b.system.integrable, {3, 0.05}, grid);
  const std::string csv = pm.to_csv();
  CHECK(csv.rfind("I1,I2,weight,resonant,conservative,k,distance\n", 0) == 0);
  CHECK(pm.lipschitz == doctest::Approx(1.05));
}

TEST_CASE("quadrature and Monte Carlo resonant mass agree") {
  const auto b = builtin_system("twist2", 1e-3);
  const auto grid = build_grid(b.system.domain, {400});
  const auto f0 = EnsembleDensity::normalize(b.density, b.system.domain, grid);
  const PartitionSpec spec{3, 0.05};
  const double p = resonant_mass(f0, build_partition(b.system.integrable, spec, grid)).plain;
  const std::size_t N = 20000;
  const auto s = sample_density(f0, b.system.domain, N, SeededRng(9, 0));
  const ResonanceWeb web(2, 3);
  std::size_t hits = 0;
  for (const auto& z : s.points) hits += is_resonant(z.actions(), spec, b.system.integrable, web).resonant;
  const double q = double(hits) / N;
  CHECK(std::abs(q - p) < 4.0 * std::sqrt(p * (1 - p) / N));
}

TEST_CASE("smooth step and domain cutoff") {
  CHECK(smooth_step(-1.0) == 0.0);
  CHECK(smooth_step(2.0) == 1.0);
  CHECK(smooth_step(0.5) == doctest::Approx(0.5));
  double d = 0.0;
  const double h = 1e-6;
  for (double s : {0.1, 0.3, 0.7, 0.9}) {
    smooth_step(s, &d);
    CHECK(d == doctest::Approx((smooth_step(s + h) - smooth_step(s - h)) / (2 * h)).epsilon(1e-6));
  }

  const auto tw = twist2();
  const DomainCutoff c(tw, {2, 0.2}, 0.05);
  SeededRng rng(4, 0);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> I{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    Vec g{};
    const double v = c.value(I, &g);
    const double dist = c.min_distance(I);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (dist >= 0.2) CHECK(v == 1.0);
    if (dist <= 0.15) CHECK(v == 0.0);
    for (int j = 0; j < 2; ++j) {
      auto p = I, m = I;
      p[j] += h;
      m[j] -= h;
      CHECK(g[j] == doctest::Approx((c.value(p) - c.value(m)) / (2 * h)).epsilon(1e-4).scale(1.0));
    }
  }
  CHECK_THROWS_AS(DomainCutoff(tw, {2, 0.2}, 0.3), Error);
  CHECK(default_cutoff_width(ActionDomain::ball({0, 0}, 2.0), 1.0) == doctest::Approx(0.2));
  CHECK(default_cutoff_width(ActionDomain::ball({0, 0}, 2.0), 0.1) == doctest::Approx(0.05));
}

TEST_CASE("cube slices and cut-cell fractions") {
  const std::vector<double> c2{1.0, 1.0}, c3{1.0, 1.0, 1.0}, skew{0.5, 2.0};
  CHECK(cube_slice_volume(c2, 0.5) == doctest::Approx(0.125));
  CHECK(cube_slice_volume(c2, 1.5) == doctest::Approx(0.875));
  CHECK(cube_slice_volume(c3, 1.0) == doctest::Approx(1.0 / 6.0));
  CHECK(cube_slice_volume(c3, 1.5) == doctest::Approx(0.5));
  // trapezoid: v <= (1 - 0.5 u) / 2 runs from 0.5 down to 0.25
  CHECK(cube_slice_volume(skew, 1.0) == doctest::Approx(0.375));
  CHECK(cube_slice_volume(c2, -1.0) == 0.0);
  CHECK(cube_slice_volume(c2, 3.0) == 1.0);

  // omega = I on [-1, 1]^2 with K = 1: N is the cross |I_1| < a or |I_2| < a
  const IntegrablePart h(Expr(0.5) * (Expr::coord(0) * Expr::coord(0) + Expr::coord(1) * Expr::coord(1)), 2);
  const double a = 0.1, exact = (4 * a * 2 - 4 * a * a) / 4.0;
  for (int n : {37, 53, 81}) {
    const auto grid = build_grid(ActionDomain::box({-1.0, -1.0}, {1.0, 1.0}), {n});
    const auto m = build_partition(h, {1, a}, grid);
    double cut = 0.0, plain = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      cut += grid.weights[i] * m.fraction[i];
      plain += grid.weights[i] * m.resonant[i];
    }
    // only the cells where the strips cross are not split by a straight line
    const double hh = grid.spacing[0] * grid.spacing[0];
    CHECK(std::abs(cut / 4.0 - exact) < 0.5 * hh);
    CHECK(std::abs(cut / 4.0 - exact) < std::abs(plain / 4.0 - exact));
  }
}
