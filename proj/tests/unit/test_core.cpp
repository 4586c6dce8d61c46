#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "ensdev/core.hpp"

using namespace ensdev;
using std::numbers::pi;

TEST_CASE("wrap_angles examples") {
  auto a = wrap_angles(std::vector<double>{0.0, 0.0});
  CHECK(a[0] == 0.0);
  CHECK(a[1] == 0.0);

  auto b = wrap_angles(std::vector<double>{2 * pi, -pi / 2});
  CHECK(b[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(b[1] == doctest::Approx(1.5 * pi).epsilon(1e-15));

  auto c = wrap_angles(std::vector<double>{7.5, 13.1});
  CHECK(c[0] == doctest::Approx(std::fmod(7.5, 2 * pi)).epsilon(1e-14));
  CHECK(c[1] == doctest::Approx(13.1 - 4 * pi).epsilon(1e-14));
  for (double v : c) CHECK((v >= 0.0 && v < 2 * pi));
}

TEST_CASE("wrap_angles is idempotent and stays in range") {
  SeededRng rng(7, 0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> raw{rng.uniform(-1e4, 1e4), rng.uniform(-1e-17, 1e-17), rng.uniform(-50, 50)};
    auto once = wrap_angles(raw);
    auto twice = wrap_angles(once);
    for (std::size_t j = 0; j < raw.size(); ++j) {
      CHECK(once[j] >= 0.0);
      CHECK(once[j] < 2 * pi);
      CHECK(twice[j] == once[j]);
      CHECK(std::abs(angle_difference(once[j], raw[j])) < 1e-9);
    }
  }
}

TEST_CASE("phase distance is torus aware") {
  const std::vector<double> t1{0.01, 1.0}, t2{2 * pi - 0.01, 1.0}, ac{0.0, 0.0};
  PhasePoint a(t1, ac), b(t2, ac);
  CHECK(phase_distance(a, b) == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("grid weights sum to the domain volume") {
  auto box = ActionDomain::box({0, 0}, {1, 1});
  auto g = build_grid(box, {10, 10});
  CHECK(g.size() == 100);
  CHECK(compensated_sum(g.weights) == doctest::Approx(1.0).epsilon(1e-12));

  auto ball = ActionDomain::ball({0, 0}, 1.0);
  auto gb = build_grid(ball, {200});
  CHECK(std::abs(compensated_sum(gb.weights) - pi) < 1e-10);
  for (std::size_t i = 0; i < gb.size(); ++i) CHECK(ball.contains(gb.node(i)));
  // without the rescaling the indicator rule is already within 1e-3 of pi
  const double cell = gb.spacing[0] * gb.spacing[1];
  CHECK(std::abs(gb.size() * cell - pi) < 1e-3 * pi);

  auto g3 = build_grid(ActionDomain::ball({0, 0, 0}, 2.0), {30}, QuadratureRule::gauss_legendre);
  CHECK(std::abs(compensated_sum(g3.weights) - 4.0 / 3.0 * pi * 8.0) < 1e-10 * 33.5);
}

TEST_CASE("Gauss-Legendre integrates x^4 exactly") {
  auto g = build_grid(ActionDomain::box({-1}, {1}), {5}, QuadratureRule::gauss_legendre);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.weights[i] * std::pow(g.node(i)[0], 4);
  CHECK(s == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("midpoint rule converges at second order") {
  auto f = [](std::span<const double> x) { return std::exp(x[0]) * std::cos(2 * x[1]); };
  const double exact = (std::exp(1.0) - 1.0) * std::sin(2.0) / 2.0;
  auto err = [&](int r) {
    auto g = build_grid(ActionDomain::box({0, 0}, {1, 1}), {r});
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g.weights[i] * f(g.node(i));
    return std::abs(s - exact);
  };
  const double ratio = err(20) / err(40);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("build_grid rejects bad input") {
  CHECK_THROWS_AS(ActionDomain::ball({0, 0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ActionDomain::box({0, 1}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(ActionDomain::box({0}, {1}), {1}), std::invalid_argument);
}

TEST_CASE("distance_to_resonance examples and homogeneity") {
  CHECK(distance_to_resonance(std::vector<double>{1, 1}, std::vector<int>{1, -1}) == 0.0);
  CHECK(distance_to_resonance(std::vector<double>{2, 1}, std::vector<int>{1, 0}) == 2.0);
  CHECK(distance_to_resonance(std::vector<double>{1, 1}, std::vector<int>{1, 1}) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(distance_to_resonance(std::vector<double>{1, 1}, std::vector<int>{0, 0}), std::invalid_argument);

  SeededRng rng(3, 1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> w{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<int> k{int(rng.uniform(-3, 3)), int(rng.uniform(-3, 3)), 1};
    const double lam = rng.uniform(0.1, 10);
    std::vector<double> lw{lam * w[0], lam * w[1], lam * w[2]};
    CHECK(distance_to_resonance(lw, k) == doctest::Approx(lam * distance_to_resonance(w, k)).epsilon(1e-12));
  }
}

TEST_CASE("wavevector enumeration") {
  auto all = enumerate_wavevectors(2, 2, WavevectorSet::all);
  CHECK(all.size() == 12);  // 2K(K+1) for n = 2
  CHECK(all.size() == count_wavevectors(2, 2));
  auto half = enumerate_wavevectors(2, 2, WavevectorSet::half);
  CHECK(half.size() == 6);
  std::set<Wavevector> seen(all.begin(), all.end());
  for (const auto& k : half) {
    CHECK(is_half_representative(k));
    CHECK(seen.count(negate(k)) == 1);
  }
  CHECK(std::is_sorted(all.begin(), all.end()));
  CHECK(count_wavevectors(3, 3) == enumerate_wavevectors(3, 3, WavevectorSet::all).size());
  CHECK_THROWS(enumerate_wavevectors(4, 200, WavevectorSet::all));
}

TEST_CASE("seeded streams are reproducible and distinct") {
  SeededRng a(42, 0), b(42, 0), c(42, 1);
  bool differ = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
    CHECK(x == y);
    differ |= (x != z);
  }
  CHECK(differ);
  SeededRng u(1, 2);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK((v >= 0.0 && v < 1.0));
  }
}

TEST_CASE("compensated sum does not depend on the partition") {
  SeededRng rng(11, 0);
  std::vector<double> v(100000);
  for (double& x : v) x = rng.uniform(-1, 1) * std::pow(10.0, rng.uniform(-8, 8));
  const double whole = compensated_sum(v);
  for (std::size_t parts : {2u, 7u, 64u}) {
    std::vector<double> partial;
    const std::size_t chunk = (v.size() + parts - 1) / parts;
    for (std::size_t s = 0; s < v.size(); s += chunk) {
      const std::size_t e = std::min(v.size(), s + chunk);
      partial.push_back(compensated_sum(std::span<const double>(v.data() + s, e - s)));
    }
    const double merged = compensated_sum(partial);
    CHECK(std::abs(merged - whole) <= 1e-12 * std::abs(whole));
  }
}
