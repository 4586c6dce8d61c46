#include "ensdev/resonance.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <sstream>

namespace ensdev {

void PartitionSpec::validate() const {
  if (K < 1) throw Error(fmt::format("partition: K must be at least 1 (got {})", K));
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(fmt::format("partition: alpha must be positive (got {})", alpha));
}

std::string PartitionSpec::describe() const { return fmt::format("K={}, alpha={:.6g}", K, alpha); }

ResonanceWeb::ResonanceWeb(int dim, int K) : dim_(dim), K_(K) {
  ks_ = enumerate_wavevectors(dim, K, WavevectorSet::half);
  norms_.reserve(ks_.size());
  for (const auto& k : ks_) norms_.push_back(l2_norm(k));
}

std::pair<std::size_t, double> ResonanceWeb::nearest(std::span<const double> omega) const {
  std::size_t best = 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ks_.size(); ++i) {
    const double v = std::abs(dot(ks_[i], omega)) / norms_[i];
    if (v < d) {
      d = v;
      best = i;
    }
  }
  return {best, d};
}

Resonance is_resonant(std::span<const double> I, const PartitionSpec& spec, const IntegrablePart& h,
                      const ResonanceWeb& web) {
  const Vec w = h.frequency(I);
  const auto [i, d] = web.nearest({w.data(), std::size_t(h.dim())});
  return {d < spec.alpha, web.k(i), d};
}

Resonance is_resonant(std::span<const double> I, const PartitionSpec& spec, const IntegrablePart& h) {
  spec.validate();
  return is_resonant(I, spec, h, ResonanceWeb(h.dim(), spec.K));
}

double frequency_lipschitz(const IntegrablePart& h, const ActionGrid& grid) {
  const int n = h.dim();
  double best = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.weights[i] == 0.0) continue;
    const auto J = h.frequency_jacobian(grid.node(i));
    Eigen::MatrixXd M(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) M(r, c) = J[r * n + c];
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    best = std::max(best, svd.singularValues()(0));
  }
  return 1.05 * best;
}

std::size_t PartitionMap::resonant_count() const {
  std::size_t c = 0;
  for (auto f : resonant) c += f;
  return c;
}

std::string PartitionMap::to_csv() const {
  std::ostringstream os;
  for (int j = 0; j < grid.dim; ++j) os << "I" << j + 1 << ",";
  os << "weight,resonant,conservative,k,distance\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (double v : grid.node(i)) os << fmt::format("{:.10g},", v);
    os << fmt::format("{:.10g},{},{},{},{:.10g}\n", grid.weights[i], int(resonant[i]), int(conservative[i]),
                      fmt::join(web.k(nearest[i]), ";"), distance[i]);
  }
  return os.str();
}

double cube_slice_volume(std::span<const double> c, double t) {
  const int m = int(c.size());
  double total = 0.0;
  for (int i = 0; i < m; ++i) total += c[i];
  if (t <= 0.0) return 0.0;
  if (t >= total) return 1.0;
  double prod = 1.0, fact = 1.0;
  for (int i = 0; i < m; ++i) prod *= c[i], fact *= i + 1;
  double sum = 0.0;
  for (unsigned v = 0; v < (1u << m); ++v) {
    double cv = 0.0;
    int bits = 0;
    for (int i = 0; i < m; ++i)
      if (v >> i & 1u) cv += c[i], ++bits;
    const double r = t - cv;
    if (r > 0.0) sum += (bits % 2 ? -1.0 : 1.0) * std::pow(r, m);
  }
  return std::clamp(sum / (fact * prod), 0.0, 1.0);
}

namespace {

// Share of the cell around I where d_k < alpha, with d_k linear across the cell.
double cut_fraction(const IntegrablePart& h, std::span<const int> k, double knorm, std::span<const double> I,
                    double g0, std::span<const double> spacing) {
  const int n = h.dim();
  const auto J = h.frequency_jacobian(I);
  // g(u) = g0 + sum b_j (u_j - 1/2) on the unit cube; flipping axes with
  // b_j < 0 gives sum |b_j| u_j < -g0 + sum |b_j| / 2. Flat axes are dropped.
  std::array<double, kMaxDim> b{};
  double bmax = 0.0;
  for (int j = 0; j < n; ++j) {
    double a = 0.0;
    for (int i = 0; i < n; ++i) a += k[i] * J[i * n + j];
    b[j] = std::abs(a) / knorm * spacing[j];
    bmax = std::max(bmax, b[j]);
  }
  std::vector<double> c;
  double t = -g0;
  for (int j = 0; j < n; ++j)
    if (b[j] > 1e-6 * bmax) {
      c.push_back(b[j]);
      t += 0.5 * b[j];
    }
  if (c.empty()) return g0 < 0.0 ? 1.0 : 0.0;
  return cube_slice_volume(c, t);
}

}  // namespace

PartitionMap build_partition(const IntegrablePart& h, const PartitionSpec& spec, const ActionGrid& grid, Exec exec) {
  spec.validate();
  if (grid.dim != h.dim()) throw std::invalid_argument("build_partition: dimension mismatch");
  PartitionMap m;
  m.spec = spec;
  m.grid = grid;
  m.web = ResonanceWeb(h.dim(), spec.K);
  m.lipschitz = frequency_lipschitz(h, grid);
  m.band = m.lipschitz * grid.half_cell_diagonal();
  const std::size_t N = grid.size();
  m.resonant.assign(N, 0);
  m.conservative.assign(N, 0);
  m.nearest.assign(N, 0);
  m.distance.assign(N, 0.0);
  m.fraction.assign(N, 0.0);
  for_each_index(
      N,
      [&](std::size_t i) {
        const Vec w = h.frequency(grid.node(i));
        const auto [k, d] = m.web.nearest({w.data(), std::size_t(h.dim())});
        m.nearest[i] = std::uint32_t(k);
        m.distance[i] = d;
        m.resonant[i] = d < spec.alpha;
        m.conservative[i] = d < spec.alpha + m.band;
        m.fraction[i] = std::abs(d - spec.alpha) > m.band
                            ? double(m.resonant[i])
                            : cut_fraction(h, m.web.k(k), m.web.norm(k), grid.node(i), d - spec.alpha, grid.spacing);
      },
      exec);
  return m;
}

ResonantMass resonant_mass(const EnsembleDensity& f0, const PartitionMap& map, Exec exec) {
  const auto& g = map.grid;
  const std::vector<Expr> outs{f0.field.zero_mode()};
  const Tape tape(outs, g.dim);
  std::vector<double> plain(g.size(), 0.0), wide(g.size(), 0.0), rest(g.size(), 0.0), cut(g.size(), 0.0);
  for_each_index(
      g.size(),
      [&](std::size_t i) {
        if (g.weights[i] == 0.0) return;
        std::array<cplx, 1> v;
        tape.eval_values(g.node(i), v);
        const double m = g.weights[i] * v[0].real();
        (map.resonant[i] ? plain : rest)[i] = m;
        if (map.conservative[i]) wide[i] = m;
        cut[i] = m * map.fraction[i];
      },
      exec);
  const double scale = std::pow(kTwoPi, g.dim);
  return {scale * compensated_sum(plain), scale * compensated_sum(wide), scale * compensated_sum(rest),
          scale * compensated_sum(cut)};
}

std::string Schedule::describe() const {
  if (r) return fmt::format("{}: {}, r={:.6g}", kind, spec.describe(), *r);
  return fmt::format("{}: {}", kind, spec.describe());
}

Schedule zz_schedule(double eps, double beta, double s0) {
  if (!(eps > 0.0) || eps >= 1.0) throw Error(fmt::format("zz schedule: epsilon must lie in (0, 1), got {}", eps));
  if (!(beta > 0.0) || beta >= 1.0) throw Error(fmt::format("zz schedule: beta must lie in (0, 1), got {}", beta));
  if (!(s0 > 0.0)) throw Error("zz schedule: s0 must be positive");
  Schedule s;
  s.kind = "zz";
  s.spec.K = int(std::ceil(-12.0 * s0 * std::log(eps) - 1e-9));
  s.r = std::sqrt(eps) / beta;
  s.spec.alpha = *s.r * s.spec.K / beta;
  return s;
}

Schedule power_schedule(double eps, double a, double prefactor, double alpha) {
  if (!(a > 0.0)) throw Error("power schedule: exponent a must be positive");
  if (!(eps > 0.0)) throw Error("power schedule: epsilon must be positive");
  Schedule s;
  s.kind = "power";
  s.spec.K = int(std::floor(prefactor * std::pow(eps, -a) + 1e-9));
  if (s.spec.K < 1) throw Error(fmt::format("power schedule gives K=0 at epsilon={}", eps));
  s.spec.alpha = alpha;
  s.spec.validate();
  return s;
}

Schedule explicit_schedule(int K, double alpha) {
  Schedule s;
  s.kind = "explicit";
  s.spec = {K, alpha};
  s.spec.validate();
  return s;
}

double smooth_step(double s, double* ds) {
  if (s <= 0.0 || s >= 1.0) {
    if (ds) *ds = 0.0;
    return s <= 0.0 ? 0.0 : 1.0;
  }
  const double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
  const double den = a + b;
  if (ds) {
    const double da = a / (s * s), db = -b / ((1.0 - s) * (1.0 - s));
    *ds = (da * den - a * (da + db)) / (den * den);
  }
  return a / den;
}

double default_cutoff_width(const ActionDomain& domain, double alpha, double fraction) {
  return std::min(fraction * domain.diameter(), 0.5 * alpha);
}

DomainCutoff::DomainCutoff(IntegrablePart h, PartitionSpec spec, double width)
    : h_(std::move(h)), spec_(spec), web_(h_.dim(), spec.K), w_(width) {
  spec_.validate();
  if (!(w_ > 0.0) || w_ >= spec_.alpha)
    throw Error(fmt::format("cutoff width {} must lie in (0, alpha={})", w_, spec_.alpha));
}

double DomainCutoff::min_distance(std::span<const double> I) const {
  const Vec w = h_.frequency(I);
  return web_.nearest({w.data(), std::size_t(h_.dim())}).second;
}

double DomainCutoff::value(std::span<const double> I, Vec* grad) const {
  const int n = h_.dim();
  const Vec w = h_.frequency(I);
  const double lo = spec_.alpha - w_;
  struct Factor {
    double psi, dpsi;
    std::size_t k;
    double sign;
  };
  std::vector<Factor> active;
  double c = 1.0;
  for (std::size_t i = 0; i < web_.size(); ++i) {
    const double kw = dot(web_.k(i), {w.data(), std::size_t(n)});
    const double d = std::abs(kw) / web_.norm(i);
    if (d >= spec_.alpha) continue;
    double dp = 0.0;
    const double p = smooth_step((d - lo) / w_, &dp);
    c *= p;
    active.push_back({p, dp / w_, i, kw >= 0.0 ? 1.0 : -1.0});
  }
  if (grad) {
    grad->fill(0.0);
    // a vanishing factor has vanishing derivative, so c = 0 means grad = 0
    if (c != 0.0 && !active.empty()) {
      const auto J = h_.frequency_jacobian(I);
      for (const auto& f : active) {
        const double others = c / f.psi;
        const auto& k = web_.k(f.k);
        for (int j = 0; j < n; ++j) {
          double kj = 0.0;
          for (int r = 0; r < n; ++r) kj += k[r] * J[r * n + j];
          (*grad)[j] += others * f.dpsi * f.sign * kj / web_.norm(f.k);
        }
      }
    }
  }
  return c;
}

std::string DomainCutoff::describe() const {
  return fmt::format("product smooth cutoff, {}, width={:.6g}", spec_.describe(), w_);
}

}  // namespace ensdev
