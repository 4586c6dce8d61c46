#include "ensdev/core.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <fmt/format.h>
#include <numeric>

namespace ensdev {

PhasePoint::PhasePoint(std::span<const double> th, std::span<const double> ac) {
  if (th.size() != ac.size()) throw std::invalid_argument("PhasePoint: angle/action dimension mismatch");
  if (th.empty() || th.size() > std::size_t(kMaxDim))
    throw std::invalid_argument(fmt::format("PhasePoint: dimension must be in [1, {}]", kMaxDim));
  dim = int(th.size());
  for (int j = 0; j < dim; ++j) {
    theta[j] = wrap_angle(th[j]);
    action[j] = ac[j];
  }
}

double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2*pi
  if (r >= kTwoPi) r = 0.0;
  return r;
}

std::vector<double> wrap_angles(std::span<const double> raw) {
  std::vector<double> out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(), wrap_angle);
  return out;
}

void wrap_in_place(PhasePoint& z) {
  for (int j = 0; j < z.dim; ++j) z.theta[j] = wrap_angle(z.theta[j]);
}

double angle_difference(double a, double b) {
  double d = std::remainder(a - b, kTwoPi);
  if (d <= -std::numbers::pi) d += kTwoPi;
  return d;
}

double phase_distance(const PhasePoint& a, const PhasePoint& b) {
  if (a.dim != b.dim) throw std::invalid_argument("phase_distance: dimension mismatch");
  double s = 0.0;
  for (int j = 0; j < a.dim; ++j) {
    const double dt = angle_difference(a.theta[j], b.theta[j]);
    const double di = a.action[j] - b.action[j];
    s += dt * dt + di * di;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

ActionDomain ActionDomain::ball(std::vector<double> center, double radius) {
  if (center.empty() || center.size() > std::size_t(kMaxDim))
    throw std::invalid_argument("ActionDomain::ball: unsupported dimension");
  if (!(radius > 0.0)) throw std::invalid_argument("ActionDomain::ball: radius must be positive");
  ActionDomain d;
  d.kind_ = Kind::ball;
  d.center_ = center;
  d.radius_ = radius;
  d.lower_.resize(center.size());
  d.upper_.resize(center.size());
  for (std::size_t j = 0; j < center.size(); ++j) {
    d.lower_[j] = center[j] - radius;
    d.upper_[j] = center[j] + radius;
  }
  return d;
}

ActionDomain ActionDomain::box(std::vector<double> lower, std::vector<double> upper) {
  if (lower.size() != upper.size() || lower.empty() || lower.size() > std::size_t(kMaxDim))
    throw std::invalid_argument("ActionDomain::box: bad dimensions");
  for (std::size_t j = 0; j < lower.size(); ++j)
    if (!(lower[j] < upper[j])) throw std::invalid_argument("ActionDomain::box: need lower < upper on every axis");
  ActionDomain d;
  d.kind_ = Kind::box;
  d.center_.resize(lower.size());
  for (std::size_t j = 0; j < lower.size(); ++j) d.center_[j] = 0.5 * (lower[j] + upper[j]);
  d.lower_ = std::move(lower);
  d.upper_ = std::move(upper);
  return d;
}

double ActionDomain::volume() const {
  if (kind_ == Kind::box) {
    double v = 1.0;
    for (int j = 0; j < dim(); ++j) v *= upper_[j] - lower_[j];
    return v;
  }
  // V_n(R) = pi^{n/2} R^n / Gamma(n/2 + 1)
  const double n = dim();
  return std::pow(std::numbers::pi, 0.5 * n) * std::pow(radius_, n) / std::tgamma(0.5 * n + 1.0);
}

double ActionDomain::diameter() const {
  if (kind_ == Kind::ball) return 2.0 * radius_;
  double s = 0.0;
  for (int j = 0; j < dim(); ++j) s += (upper_[j] - lower_[j]) * (upper_[j] - lower_[j]);
  return std::sqrt(s);
}

bool ActionDomain::contains(std::span<const double> a) const {
  if (int(a.size()) != dim()) return false;
  if (kind_ == Kind::box) {
    for (int j = 0; j < dim(); ++j)
      if (a[j] < lower_[j] || a[j] > upper_[j]) return false;
    return true;
  }
  double s = 0.0;
  for (int j = 0; j < dim(); ++j) s += (a[j] - center_[j]) * (a[j] - center_[j]);
  return s <= radius_ * radius_;
}

double ActionDomain::boundary_distance(std::span<const double> a) const {
  if (kind_ == Kind::box) {
    double d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < dim(); ++j) d = std::min({d, a[j] - lower_[j], upper_[j] - a[j]});
    return d;
  }
  double s = 0.0;
  for (int j = 0; j < dim(); ++j) s += (a[j] - center_[j]) * (a[j] - center_[j]);
  return radius_ - std::sqrt(s);
}

std::string ActionDomain::describe() const {
  if (kind_ == Kind::ball) return fmt::format("ball(center=[{}], R={})", fmt::join(center_, ","), radius_);
  return fmt::format("box(lower=[{}], upper=[{}])", fmt::join(lower_, ","), fmt::join(upper_, ","));
}

// ---------------------------------------------------------------------------

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

double ActionGrid::half_cell_diagonal() const {
  double s = 0.0;
  for (double h : spacing) s += 0.25 * h * h;
  return std::sqrt(s);
}

std::string ActionGrid::describe() const {
  return fmt::format("{} {} on {}", rule == QuadratureRule::midpoint ? "midpoint" : "gauss-legendre",
                     fmt::join(resolution, "x"), domain.describe());
}

ActionGrid build_grid(const ActionDomain& domain, std::vector<int> resolution, QuadratureRule rule) {
  const int n = domain.dim();
  if (resolution.size() == 1 && n > 1) resolution.assign(n, resolution[0]);
  if (int(resolution.size()) != n) throw std::invalid_argument("build_grid: resolution/dimension mismatch");
  for (int r : resolution)
    if (r < 2) throw std::invalid_argument("build_grid: resolution must be >= 2 per axis");

  ActionGrid g{domain, resolution, rule, n, {}, {}, {}};
  std::vector<std::vector<double>> ax(n), aw(n);
  g.spacing.resize(n);
  for (int j = 0; j < n; ++j) {
    const double lo = domain.lower()[j], hi = domain.upper()[j], len = hi - lo;
    const int r = resolution[j];
    if (rule == QuadratureRule::midpoint) {
      for (int i = 0; i < r; ++i) {
        ax[j].push_back(lo + (i + 0.5) * len / r);
        aw[j].push_back(len / r);
      }
      g.spacing[j] = len / r;
    } else {
      std::vector<double> x, w;
      gauss_legendre(r, x, w);
      for (int i = 0; i < r; ++i) {
        ax[j].push_back(lo + 0.5 * (x[i] + 1.0) * len);
        aw[j].push_back(0.5 * len * w[i]);
      }
      // twice the largest distance from a point of the axis to its nearest node
      double reach = std::max(ax[j].front() - lo, hi - ax[j].back());
      for (int i = 1; i < r; ++i) reach = std::max(reach, 0.5 * (ax[j][i] - ax[j][i - 1]));
      g.spacing[j] = 2.0 * reach;
    }
  }

  std::size_t total = 1;
  for (int r : resolution) total *= std::size_t(r);
  g.nodes.reserve(total * n);
  g.weights.reserve(total);
  std::vector<int> idx(n, 0);
  std::vector<double> p(n);
  for (std::size_t t = 0; t < total; ++t) {
    double w = 1.0;
    for (int j = 0; j < n; ++j) {
      p[j] = ax[j][idx[j]];
      w *= aw[j][idx[j]];
    }
    if (domain.contains(p)) {
      g.nodes.insert(g.nodes.end(), p.begin(), p.end());
      g.weights.push_back(w);
    }
    for (int j = n - 1; j >= 0; --j) {
      if (++idx[j] < resolution[j]) break;
      idx[j] = 0;
    }
  }
  if (g.weights.empty()) throw std::invalid_argument("build_grid: no nodes fall inside the domain");
  if (domain.kind() == ActionDomain::Kind::ball) {
    // Cells cut by the sphere absorb the volume defect; interior cells keep
    // their exact weights so integrands supported inside stay at full order.
    const double reach = g.half_cell_diagonal();
    const double deficit = domain.volume() - compensated_sum(g.weights);
    std::vector<double> cut;
    for (std::size_t i = 0; i < g.weights.size(); ++i)
      if (domain.boundary_distance(g.node(i)) < reach) cut.push_back(g.weights[i]);
    const double cut_mass = compensated_sum(cut);
    if (cut_mass > 0.0 && cut_mass + deficit > 0.1 * cut_mass) {
      const double scale = (cut_mass + deficit) / cut_mass;
      for (std::size_t i = 0; i < g.weights.size(); ++i)
        if (domain.boundary_distance(g.node(i)) < reach) g.weights[i] *= scale;
    } else {
      const double scale = domain.volume() / compensated_sum(g.weights);
      for (double& w : g.weights) w *= scale;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

int l1_norm(std::span<const int> k) {
  int s = 0;
  for (int v : k) s += std::abs(v);
  return s;
}

double l2_norm(std::span<const int> k) {
  double s = 0.0;
  for (int v : k) s += double(v) * v;
  return std::sqrt(s);
}

double dot(std::span<const int> k, std::span<const double> v) {
  assert(k.size() <= v.size());
  double s = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) s += k[j] * v[j];
  return s;
}

bool is_half_representative(std::span<const int> k) {
  for (int v : k) {
    if (v > 0) return true;
    if (v < 0) return false;
  }
  return false;
}

Wavevector negate(std::span<const int> k) {
  Wavevector out(k.begin(), k.end());
  for (int& v : out) v = -v;
  return out;
}

std::size_t count_wavevectors(int dim, int order) {
  // number of integer points with |k|_1 <= order, minus the origin
  // N(d, K) = sum_i 2^i C(d, i) C(K, i)
  double total = 0.0;
  double cd = 1.0, ck = 1.0;
  for (int i = 0; i <= std::min(dim, order); ++i) {
    total += std::ldexp(cd * ck, i);
    cd = cd * (dim - i) / (i + 1);
    ck = ck * (order - i) / (i + 1);
  }
  return std::size_t(total + 0.5) - 1;
}

namespace {
void enumerate_rec(int j, int remaining, Wavevector& cur, std::vector<Wavevector>& out) {
  if (j == int(cur.size())) {
    if (l1_norm(cur) > 0) out.push_back(cur);
    return;
  }
  for (int v = -remaining; v <= remaining; ++v) {
    cur[j] = v;
    enumerate_rec(j + 1, remaining - std::abs(v), cur, out);
  }
  cur[j] = 0;
}
}  // namespace

std::vector<Wavevector> enumerate_wavevectors(int dim, int order, WavevectorSet set, std::size_t limit) {
  if (dim < 1) throw std::invalid_argument("enumerate_wavevectors: dimension must be positive");
  if (order < 0) throw std::invalid_argument("enumerate_wavevectors: negative order");
  const std::size_t count = count_wavevectors(dim, order);
  if (count > limit)
    throw Error(fmt::format("wavevector enumeration guard: {} vectors with |k|_1 <= {} in dimension {} exceeds {}",
                            count, order, dim, limit));
  std::vector<Wavevector> all;
  all.reserve(count);
  Wavevector cur(dim, 0);
  enumerate_rec(0, order, cur, all);
  if (set == WavevectorSet::all) return all;
  std::vector<Wavevector> half;
  half.reserve(all.size() / 2);
  for (auto& k : all)
    if (is_half_representative(k)) half.push_back(std::move(k));
  return half;
}

double distance_to_resonance(std::span<const double> omega, std::span<const int> k) {
  if (k.size() != omega.size()) throw std::invalid_argument("distance_to_resonance: dimension mismatch");
  const double nk = l2_norm(k);
  if (nk == 0.0) throw std::invalid_argument("distance_to_resonance: k must be nonzero");
  return std::abs(dot(k, omega)) / nk;
}

// ---------------------------------------------------------------------------

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                    std::uint32_t(stream >> 32), 0x5eedu};
  engine_.seed(seq);
}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

double compensated_sum(std::span<const double> values) {
  CompensatedAccumulator acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

}  // namespace ensdev
