#include "ensdev/model.hpp"

#include <algorithm>
#include <fmt/format.h>

#include "ensdev/parallel.hpp"

namespace ensdev {

namespace {

void check_wavevector(const Wavevector& k, int dim) {
  if (int(k.size()) != dim)
    throw std::invalid_argument(fmt::format("wavevector of length {} in a {}-dimensional field", k.size(), dim));
}

bool is_zero_vector(const Wavevector& k) {
  return std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
}

double kdot(const std::array<int, kMaxDim>& k, const Vec& theta, int n) {
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += k[j] * theta[j];
  return s;
}

}  // namespace

TrigPolyField::TrigPolyField(int dim, bool real) : dim_(dim), real_(real) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("TrigPolyField: unsupported dimension");
}

void TrigPolyField::accumulate(const Wavevector& k, const Expr& c) {
  check_wavevector(k, dim_);
  if (c.is_zero()) return;
  auto it = modes_.find(k);
  if (it == modes_.end()) {
    modes_.emplace(k, c);
    return;
  }
  it->second = it->second + c;
  if (it->second.is_zero()) modes_.erase(it);
}

void TrigPolyField::add_mode(const Wavevector& k, const Expr& c) {
  check_wavevector(k, dim_);
  if (!real_) {
    accumulate(k, c);
    return;
  }
  if (is_zero_vector(k)) {
    accumulate(k, Expr(0.5) * (c + c.conj()));
    return;
  }
  accumulate(k, c);
  accumulate(negate(k), c.conj());
}

void TrigPolyField::add_cos(const Wavevector& k, const Expr& amp) {
  check_wavevector(k, dim_);
  if (is_zero_vector(k)) {
    accumulate(k, amp);
    return;
  }
  const Expr half = Expr(0.5) * amp;
  if (real_) {
    add_mode(k, half);
  } else {
    accumulate(k, half);
    accumulate(negate(k), half);
  }
}

void TrigPolyField::add_sin(const Wavevector& k, const Expr& amp) {
  check_wavevector(k, dim_);
  if (is_zero_vector(k)) return;
  const Expr c = Expr(cplx(0.0, -0.5)) * amp;
  if (real_) {
    add_mode(k, c);
  } else {
    accumulate(k, c);
    accumulate(negate(k), Expr(cplx(0.0, 0.5)) * amp);
  }
}

void TrigPolyField::add_constant(const Expr& c) { accumulate(Wavevector(std::size_t(dim_), 0), c); }

Expr TrigPolyField::coeff(const Wavevector& k) const {
  check_wavevector(k, dim_);
  auto it = modes_.find(k);
  return it == modes_.end() ? Expr() : it->second;
}

int TrigPolyField::band_limit() const {
  int b = 0;
  for (const auto& [k, c] : modes_) b = std::max(b, l1_norm(k));
  return b;
}

bool TrigPolyField::depends_on_actions() const {
  return std::any_of(modes_.begin(), modes_.end(), [](const auto& m) { return m.second.depends_on_actions(); });
}

TrigPolyField TrigPolyField::scaled(cplx s) const {
  TrigPolyField out(dim_, real_ && s.imag() == 0.0);
  if (s == cplx(0.0)) return out;
  for (const auto& [k, c] : modes_) out.accumulate(k, Expr(s) * c);
  return out;
}

TrigPolyField TrigPolyField::operator+(const TrigPolyField& other) const {
  if (other.dim_ != dim_) throw std::invalid_argument("TrigPolyField: dimension mismatch in +");
  TrigPolyField out = *this;
  out.real_ = real_ && other.real_;
  for (const auto& [k, c] : other.modes_) out.accumulate(k, c);
  return out;
}

TrigPolyField TrigPolyField::operator-(const TrigPolyField& other) const { return *this + other.scaled(-1.0); }

TrigPolyField TrigPolyField::oscillating(int order) const {
  TrigPolyField out(dim_, real_);
  for (const auto& [k, c] : modes_) {
    const int l = l1_norm(k);
    if (l > 0 && l <= order) out.accumulate(k, c);
  }
  return out;
}

TrigPolyField TrigPolyField::above(int order) const {
  TrigPolyField out(dim_, real_);
  for (const auto& [k, c] : modes_)
    if (l1_norm(k) > order) out.accumulate(k, c);
  return out;
}

TrigPolyField TrigPolyField::averaged() const {
  TrigPolyField out(dim_, real_);
  out.add_constant(zero_mode());
  return out;
}

cplx TrigPolyField::evaluate(const PhasePoint& z) const {
  if (z.dim != dim_) throw std::invalid_argument("TrigPolyField::evaluate: dimension mismatch");
  cplx s = 0.0;
  for (const auto& [k, c] : modes_) {
    double phase = 0.0;
    for (int j = 0; j < dim_; ++j) phase += k[j] * z.theta[j];
    s += c.evaluate(z.actions()) * std::polar(1.0, phase);
  }
  return s;
}

TrigPolyField poisson_bracket(const TrigPolyField& F, const TrigPolyField& G) {
  if (F.dim() != G.dim()) throw std::invalid_argument("poisson_bracket: dimension mismatch");
  const int n = F.dim();
  TrigPolyField out(n, F.is_real() && G.is_real());
  struct Entry {
    Wavevector k;
    Expr c;
    std::vector<Expr> grad;
  };
  auto expand = [n](const TrigPolyField& f) {
    std::vector<Entry> v;
    for (const auto& [k, c] : f.modes()) {
      Entry e{k, c, {}};
      for (int j = 0; j < n; ++j) e.grad.push_back(c.derivative(j));
      v.push_back(std::move(e));
    }
    return v;
  };
  const auto fe = expand(F), ge = expand(G);
  const Expr I(cplx(0.0, 1.0));
  for (const Entry& a : fe)
    for (const Entry& b : ge) {
      Expr term;
      for (int j = 0; j < n; ++j) {
        if (a.k[j] != 0 && !b.grad[j].is_zero()) term = term + Expr(double(a.k[j])) * a.c * b.grad[j];
        if (b.k[j] != 0 && !a.grad[j].is_zero()) term = term - Expr(double(b.k[j])) * a.grad[j] * b.c;
      }
      if (term.is_zero()) continue;
      Wavevector m(static_cast<std::size_t>(n), 0);
      for (int j = 0; j < n; ++j) m[j] = a.k[j] + b.k[j];
      out.accumulate(m, I * term);
    }
  return out;
}

// ---------------------------------------------------------------------------

CompiledField::CompiledField(const TrigPolyField& field) : dim_(field.dim()), real_(field.is_real()) {
  std::vector<Expr> coeffs;
  for (const auto& [k, c] : field.modes()) {
    double w = 1.0;
    if (real_) {
      const bool zero = is_zero_vector(k);
      if (!zero && !is_half_representative(k)) continue;
      w = zero ? 1.0 : 2.0;
    }
    std::array<int, kMaxDim> kk{};
    for (int j = 0; j < dim_; ++j) kk[j] = k[j];
    ks_.push_back(kk);
    weight_.push_back(w);
    coeffs.push_back(c);
  }
  tape_ = Tape(coeffs, dim_);
  action_dependent_ = tape_.depends_on_actions();
  if (!action_dependent_) {
    frozen_.resize(coeffs.size());
    const std::array<double, kMaxDim> origin{};
    tape_.eval_values(std::span<const double>(origin.data(), std::size_t(dim_)), frozen_);
  }
}

namespace {
thread_local std::vector<cplx> tl_coeff;
thread_local std::vector<Jet> tl_jets;
}  // namespace

double CompiledField::value(const PhasePoint& z) const {
  if (!real_) return value_complex(z).real();
  const cplx* c = frozen_.data();
  if (action_dependent_) {
    tl_coeff.resize(ks_.size());
    tape_.eval_values(z.actions(), tl_coeff);
    c = tl_coeff.data();
  }
  double s = 0.0;
  for (std::size_t t = 0; t < ks_.size(); ++t) {
    const double ph = kdot(ks_[t], z.theta, dim_);
    s += weight_[t] * (c[t].real() * std::cos(ph) - c[t].imag() * std::sin(ph));
  }
  return s;
}

cplx CompiledField::value_complex(const PhasePoint& z) const {
  if (z.dim != dim_) throw std::invalid_argument("CompiledField: dimension mismatch");
  const cplx* c = frozen_.data();
  if (action_dependent_) {
    tl_coeff.resize(ks_.size());
    tape_.eval_values(z.actions(), tl_coeff);
    c = tl_coeff.data();
  }
  cplx s = 0.0;
  for (std::size_t t = 0; t < ks_.size(); ++t) {
    const cplx term = c[t] * std::polar(1.0, kdot(ks_[t], z.theta, dim_));
    s += real_ ? cplx(weight_[t] * term.real()) : term;
  }
  return s;
}

void CompiledField::eval(const PhasePoint& z, int order, FieldJet& out) const {
  if (!real_) throw std::logic_error("CompiledField::eval: derivatives are provided for real fields only");
  const int n = dim_;
  out = FieldJet{};
  const std::size_t T = ks_.size();
  if (action_dependent_) {
    tl_jets.resize(T);
    tape_.eval(z.actions(), order, std::span<Jet>(tl_jets.data(), T));
  }
  constexpr int S = 2 * kMaxDim;
  for (std::size_t t = 0; t < T; ++t) {
    const auto& k = ks_[t];
    const double w = weight_[t];
    const cplx e = std::polar(1.0, kdot(k, z.theta, n));
    const cplx c = action_dependent_ ? tl_jets[t].v : frozen_[t];
    const cplx ce = c * e;
    out.v += w * ce.real();
    if (order < 1) continue;
    // d/dtheta_a (c e) = i k_a c e
    for (int a = 0; a < n; ++a) out.dtheta[a] += -w * k[a] * ce.imag();
    if (action_dependent_)
      for (int a = 0; a < n; ++a) out.daction[a] += w * (tl_jets[t].g[a] * e).real();
    if (order < 2) continue;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) out.h[a * S + b] += -w * k[a] * k[b] * ce.real();
    if (!action_dependent_) continue;
    const Jet& J = tl_jets[t];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const cplx ge = J.g[b] * e;
        const double mixed = -w * k[a] * ge.imag();  // Re(i k_a g_b e)
        out.h[a * S + (n + b)] += mixed;
        out.h[(n + b) * S + a] += mixed;
        out.h[(n + a) * S + (n + b)] += w * (J.h[a * kMaxDim + b] * e).real();
      }
  }
}

// ---------------------------------------------------------------------------

IntegrablePart::IntegrablePart(Expr h, int dim) : dim_(dim), h_(std::move(h)) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("IntegrablePart: unsupported dimension");
  if (h_.min_dimension() > dim) throw std::invalid_argument("IntegrablePart: h uses more coordinates than dim");
  for (int j = 0; j < dim; ++j) omega_.push_back(h_.derivative(j));
  const Expr outs[1] = {h_};
  h_tape_ = Tape(outs, dim);
  omega_tape_ = Tape(omega_, dim);
}

double IntegrablePart::energy(std::span<const double> I) const {
  cplx v[1];
  h_tape_.eval_values(I, v);
  return v[0].real();
}

Vec IntegrablePart::frequency(std::span<const double> I) const {
  std::array<cplx, kMaxDim> v{};
  omega_tape_.eval_values(I, std::span<cplx>(v.data(), std::size_t(dim_)));
  Vec w{};
  for (int a = 0; a < dim_; ++a) w[a] = v[a].real();
  return w;
}

std::array<double, kMaxDim * kMaxDim> IntegrablePart::frequency_jacobian(std::span<const double> I) const {
  Jet j[1];
  h_tape_.eval(I, 2, j);
  std::array<double, kMaxDim * kMaxDim> m{};
  for (int a = 0; a < dim_; ++a)
    for (int b = 0; b < dim_; ++b) m[a * dim_ + b] = j[0].hess(a, b).real();
  return m;
}

void IntegrablePart::frequency_jets(std::span<const double> I, std::span<Jet> out) const {
  omega_tape_.eval(I, 2, out);
}

Vec HamiltonianSystem::frequency(std::span<const double> I) const {
  if (!domain.contains(I))
    throw Error(fmt::format("frequency: action [{}] lies outside {}", fmt::join(I, ", "), domain.describe()));
  return integrable.frequency(I);
}

HamiltonianSystem HamiltonianSystem::with_epsilon(double eps) const {
  HamiltonianSystem s = *this;
  s.epsilon = eps;
  return s;
}

// ---------------------------------------------------------------------------

std::string SupEstimate::describe() const {
  return fmt::format("probe max {:.6g} on {}^n angles x [{}] actions, correction {:.3g}, bound {:.6g} (margin {:.1f}%)",
                     probe_max, theta_points, fmt::join(action_points, "x"), correction, bound, 100.0 * margin);
}

namespace {

constexpr int kDefaultActionProbes[kMaxDim] = {64, 24, 10, 6};
constexpr int kDefaultThetaProbes[kMaxDim] = {32, 16, 8, 6};

ActionGrid probe_grid(const ActionDomain& domain, std::vector<int> res) {
  if (res.empty()) res = {kDefaultActionProbes[domain.dim() - 1]};
  // bounding box, so that every point of the domain is within half a cell of a node
  return build_grid(ActionDomain::box(domain.lower(), domain.upper()), std::move(res));
}

std::vector<double> theta_grid(int n, int m) {
  std::size_t total = 1;
  for (int j = 0; j < n; ++j) total *= std::size_t(m);
  std::vector<double> out(total * n);
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t r = t;
    for (int j = n - 1; j >= 0; --j) {
      out[t * n + j] = kTwoPi * double(r % m) / m;
      r /= m;
    }
  }
  return out;
}

}  // namespace

SupEstimate certified_sup(const TrigPolyField& field, const ActionDomain& domain, const SupOptions& options) {
  if (!field.is_real()) throw std::invalid_argument("certified_sup: field must be real");
  const int n = field.dim();
  if (domain.dim() != n) throw std::invalid_argument("certified_sup: domain dimension mismatch");
  const ActionGrid grid = probe_grid(domain, options.action_resolution);
  const CompiledField cf(field);

  // Lipschitz constants: |grad_theta F| <= sum |k|_2 |c_k|, |grad_I F| <= sum |grad c_k|
  std::vector<Expr> coeffs;
  std::vector<double> knorm;
  for (const auto& [k, c] : field.modes()) {
    coeffs.push_back(c);
    knorm.push_back(l2_norm(k));
  }
  const Tape tape(coeffs, n);
  std::vector<double> lt(grid.size()), li(grid.size());
  for_each_index(grid.size(), [&](std::size_t i) {
    std::vector<Jet> j(coeffs.size());
    tape.eval(grid.node(i), 1, j);
    double a = 0.0, b = 0.0;
    for (std::size_t m = 0; m < j.size(); ++m) {
      a += knorm[m] * std::abs(j[m].v);
      double g = 0.0;
      for (int d = 0; d < n; ++d) g += std::norm(j[m].g[d]);
      b += std::sqrt(g);
    }
    lt[i] = a;
    li[i] = b;
  });
  const double Lt = lt.empty() ? 0.0 : *std::max_element(lt.begin(), lt.end());
  const double Li = li.empty() ? 0.0 : *std::max_element(li.begin(), li.end());
  const double action_corr = Li * grid.half_cell_diagonal();

  SupEstimate est;
  est.action_points = grid.resolution;
  int m = options.theta_points > 0 ? options.theta_points : kDefaultThetaProbes[n - 1];
  for (;;) {
    const std::vector<double> th = theta_grid(n, m);
    const std::size_t nt = th.size() / n;
    std::vector<double> local(grid.size());
    for_each_index(grid.size(), [&](std::size_t i) {
      PhasePoint z;
      z.dim = n;
      const auto I = grid.node(i);
      for (int d = 0; d < n; ++d) z.action[d] = I[d];
      double best = 0.0;
      for (std::size_t t = 0; t < nt; ++t) {
        for (int d = 0; d < n; ++d) z.theta[d] = th[t * n + d];
        best = std::max(best, std::abs(cf.value(z)));
      }
      local[i] = best;
    });
    est.probe_max = local.empty() ? 0.0 : *std::max_element(local.begin(), local.end());
    const double theta_corr = Lt * (std::numbers::pi / m) * std::sqrt(double(n));
    est.theta_points = m;
    est.correction = theta_corr + action_corr;
    if (theta_corr <= 0.5 * options.target_margin * est.probe_max ||
        double(grid.size()) * std::pow(2.0 * m, n) > options.max_probes)
      break;
    m *= 2;
  }
  // a field with vanishing Lipschitz constants is constant and needs no margin
  est.bound = est.correction == 0.0
                  ? est.probe_max
                  : std::max(est.probe_max * (1.0 + options.target_margin), est.probe_max + est.correction);
  est.margin = est.probe_max > 0.0 ? est.bound / est.probe_max - 1.0 : 0.0;
  return est;
}

EnsembleDensity EnsembleDensity::normalize(const TrigPolyField& raw, const ActionDomain& domain,
                                           const ActionGrid& grid, const SupOptions& options) {
  if (!raw.is_real()) throw std::invalid_argument("EnsembleDensity: density must be a real field");
  const int n = raw.dim();
  if (domain.dim() != n || grid.dim != n) throw std::invalid_argument("EnsembleDensity: dimension mismatch");
  const Expr zero = raw.zero_mode();
  const Expr outs[1] = {zero};
  const Tape tape(outs, n);
  std::vector<double> vals(grid.size());
  for_each_index(grid.size(), [&](std::size_t i) {
    cplx v[1];
    tape.eval_values(grid.node(i), v);
    vals[i] = grid.weights[i] * v[0].real();
  });
  const double Z = std::pow(kTwoPi, n) * compensated_sum(vals);
  if (!(Z > 0.0)) throw Error(fmt::format("EnsembleDensity: total mass {} is not positive", Z));

  EnsembleDensity d;
  d.normalization = Z;
  d.field = raw.scaled(1.0 / Z);
  d.sup = certified_sup(d.field, domain, options);

  const CompiledField cf(d.field);
  const ActionGrid probes = probe_grid(domain, options.action_resolution);
  const std::vector<double> th = theta_grid(n, n <= 2 ? 8 : 4);
  const std::size_t nt = th.size() / n;
  std::vector<double> mins(probes.size());
  for_each_index(probes.size(), [&](std::size_t i) {
    PhasePoint z;
    z.dim = n;
    for (int j = 0; j < n; ++j) z.action[j] = probes.node(i)[j];
    double lo = std::numeric_limits<double>::infinity();
    if (domain.contains(z.actions()))
      for (std::size_t t = 0; t < nt; ++t) {
        for (int j = 0; j < n; ++j) z.theta[j] = th[t * n + j];
        lo = std::min(lo, cf.value(z));
      }
    mins[i] = lo;
  });
  d.min_probe = *std::min_element(mins.begin(), mins.end());

  // outer layer: points within 2% of the diameter from the boundary
  const double layer = 0.02 * domain.diameter();
  const ActionGrid fine = probe_grid(domain, {n <= 2 ? 96 : 20});
  std::vector<double> edge(fine.size(), 0.0);
  for_each_index(fine.size(), [&](std::size_t i) {
    const auto I = fine.node(i);
    const double bd = domain.boundary_distance(I);
    if (bd < 0.0 || bd > layer) return;
    PhasePoint z;
    z.dim = n;
    for (int j = 0; j < n; ++j) z.action[j] = I[j];
    double hi = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
      for (int j = 0; j < n; ++j) z.theta[j] = th[t * n + j];
      hi = std::max(hi, std::abs(cf.value(z)));
    }
    edge[i] = hi;
  });
  d.boundary_max = *std::max_element(edge.begin(), edge.end());
  d.compact_support = d.boundary_max < 1e-10;
  return d;
}

Expr EnsembleDensity::marginal() const { return Expr(std::pow(kTwoPi, field.dim())) * field.zero_mode(); }

Observable Observable::make(const TrigPolyField& field, const ActionDomain& domain, const SupOptions& options) {
  if (!field.is_real()) throw std::invalid_argument("Observable: field must be real");
  return Observable{field, certified_sup(field, domain, options)};
}

// ---------------------------------------------------------------------------

std::vector<std::string> builtin_names() { return {"twist2", "pendulum1", "steep3"}; }

Builtin builtin_system(const std::string& name, double epsilon) {
  const Expr I1 = Expr::coord(0), I2 = Expr::coord(1), I3 = Expr::coord(2);
  Builtin b;
  b.system.name = name;
  b.system.epsilon = epsilon;
  if (name == "twist2") {
    b.system.integrable = IntegrablePart(Expr(0.5) * (I1 * I1 + I2 * I2), 2);
    b.system.domain = ActionDomain::ball({0.0, 0.0}, 2.0);
    TrigPolyField f(2);
    f.add_cos({1, 0}, 1.0);
    f.add_cos({1, -1}, 1.0);
    b.system.unit_perturbation = f;
    const Expr rho = Expr::bump({1.2, 0.3}, 0.6);
    TrigPolyField f0(2);
    f0.add_constant(rho);
    f0.add_cos({1, 0}, Expr(0.5) * rho);
    f0.add_sin({1, 1}, Expr(0.3) * rho);
    b.density = f0;
    TrigPolyField G(2);
    G.add_cos({1, 0}, 1.0);
    G.add_sin({1, 1}, 0.5);
    G.add_constant(Expr(0.2) * I1);
    b.observable = G;
  } else if (name == "pendulum1") {
    b.system.integrable = IntegrablePart(Expr(0.5) * I1 * I1, 1);
    b.system.domain = ActionDomain::ball({0.0}, 2.0);
    TrigPolyField f(1);
    f.add_cos({1}, 1.0);
    b.system.unit_perturbation = f;
    const Expr rho = Expr::bump({1.0}, 0.5);
    TrigPolyField f0(1);
    f0.add_constant(rho);
    f0.add_cos({1}, Expr(0.5) * rho);
    b.density = f0;
    TrigPolyField G(1);
    G.add_cos({1}, 1.0);
    b.observable = G;
  } else if (name == "steep3") {
    b.system.integrable =
        IntegrablePart(Expr(0.5) * (I1 * I1 + I2 * I2 + I3 * I3) + Expr(0.2) * (I1 * I2 + I2 * I3), 3);
    b.system.domain = ActionDomain::ball({0.0, 0.0, 0.0}, 2.0);
    TrigPolyField f(3);
    f.add_cos({1, 0, 0}, 1.0);
    f.add_cos({1, -1, 0}, 1.0);
    f.add_cos({0, 1, -1}, 0.5);
    f.add_sin({0, 0, 1}, Expr(0.3) * I3);
    b.system.unit_perturbation = f;
    const Expr rho = Expr::bump({0.9, 0.5, 0.7}, 0.6);
    TrigPolyField f0(3);
    f0.add_constant(rho);
    f0.add_cos({1, 0, 0}, Expr(0.4) * rho);
    f0.add_cos({0, 1, 1}, Expr(0.3) * rho);
    b.density = f0;
    TrigPolyField G(3);
    G.add_cos({1, 0, 0}, 1.0);
    G.add_cos({0, 1, -1}, 0.5);
    b.observable = G;
  } else {
    throw Error(fmt::format("unknown builtin system '{}' (known: {})", name, fmt::join(builtin_names(), ", ")));
  }
  return b;
}

}  // namespace ensdev
