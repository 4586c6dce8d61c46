#include "ensdev/mixing.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "json.hpp"

namespace ensdev {

PhaseJet mode_phase(const IntegrablePart& h, std::span<const int> k, std::span<const double> I) {
  const int n = h.dim();
  std::array<Jet, kMaxDim> jets;
  h.frequency_jets(I, {jets.data(), std::size_t(n)});
  PhaseJet p;
  for (int i = 0; i < n; ++i) {
    if (k[i] == 0) continue;
    const double ki = k[i];
    p.value += ki * jets[i].v.real();
    for (int a = 0; a < n; ++a) {
      p.grad[a] += ki * jets[i].g[a].real();
      for (int b = 0; b < n; ++b) p.hess[a * kMaxDim + b] += ki * jets[i].hess(a, b).real();
    }
  }
  return p;
}

cplx u_value(cplx a, const CGrad& grad_a, const PhaseJet& p, int n) {
  double g2 = 0.0, lap = 0.0, quad = 0.0;
  cplx ga{};
  for (int i = 0; i < n; ++i) {
    g2 += p.grad[i] * p.grad[i];
    lap += p.hess[i * kMaxDim + i];
    ga += grad_a[i] * p.grad[i];
    for (int j = 0; j < n; ++j) quad += p.grad[i] * p.hess[i * kMaxDim + j] * p.grad[j];
  }
  return ga / g2 + a * (lap / g2 - 2.0 * quad / (g2 * g2));
}

double hessian_norm(const PhaseJet& p, int n) {
  if (n == 1) return std::abs(p.hess[0]);
  if (n == 2) {
    const double a = p.hess[0], b = p.hess[1], d = p.hess[kMaxDim + 1];
    const double m = 0.5 * (a + d), r = std::hypot(0.5 * (a - d), b);
    return std::max(std::abs(m + r), std::abs(m - r));
  }
  Eigen::Matrix4d H = Eigen::Matrix4d::Zero();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) H(i, j) = p.hess[i * kMaxDim + j];
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

UField::UField(const Expr& a, const Expr& phi, int dim, double gamma_floor) : dim_(dim), floor_(gamma_floor) {
  const std::vector<Expr> outs{a, phi};
  tape_ = Tape(outs, dim);
}

cplx UField::a(std::span<const double> I, CGrad* grad) const {
  std::array<Jet, 2> j;
  tape_.eval(I, 1, j);
  if (grad)
    for (int i = 0; i < dim_; ++i) (*grad)[i] = j[0].g[i];
  return j[0].v;
}

PhaseJet UField::phase(std::span<const double> I) const {
  std::array<Jet, 2> j;
  tape_.eval(I, 2, j);
  PhaseJet p;
  p.value = j[1].v.real();
  for (int a = 0; a < dim_; ++a) {
    p.grad[a] = j[1].g[a].real();
    for (int b = 0; b < dim_; ++b) p.hess[a * kMaxDim + b] = j[1].hess(a, b).real();
  }
  return p;
}

cplx UField::operator()(std::span<const double> I) const { return value(I, nullptr); }

cplx UField::value(std::span<const double> I, double* phase) const {
  std::array<Jet, 2> j;
  tape_.eval(I, 2, j);
  if (phase) *phase = j[1].v.real();
  CGrad ga{};
  bool zero = j[0].v == cplx{};
  for (int i = 0; i < dim_; ++i) {
    ga[i] = j[0].g[i];
    zero = zero && ga[i] == cplx{};
  }
  if (zero) return {};
  PhaseJet p;
  double g2 = 0.0;
  for (int a = 0; a < dim_; ++a) {
    p.grad[a] = j[1].g[a].real();
    g2 += p.grad[a] * p.grad[a];
    for (int b = 0; b < dim_; ++b) p.hess[a * kMaxDim + b] = j[1].hess(a, b).real();
  }
  if (std::sqrt(g2) < floor_)
    throw Error(fmt::format("singular phase: |grad phi| = {:.3e} below the floor {:g} at I=({})", std::sqrt(g2),
                            floor_, fmt::join(I, ", ")));
  return u_value(j[0].v, ga, p, dim_);
}

std::vector<int> required_resolution(const Expr& phi, double lambda, const ActionGrid& grid) {
  const int n = grid.dim;
  std::vector<Expr> d;
  for (int j = 0; j < n; ++j) d.push_back(phi.derivative(j));
  const Tape t(d, n);
  // fixed lattice over the bounding box, edges included, so the answer does
  // not depend on the resolution of the grid being checked
  const int m = n <= 2 ? 65 : 17;
  std::size_t count = 1;
  for (int j = 0; j < n; ++j) count *= std::size_t(m);
  std::vector<double> sup(n, 0.0), I(n);
  std::vector<cplx> v(n);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t r = i;
    for (int j = 0; j < n; ++j, r /= std::size_t(m)) {
      const double s = double(r % std::size_t(m)) / (m - 1);
      I[j] = grid.domain.lower()[j] + s * (grid.domain.upper()[j] - grid.domain.lower()[j]);
    }
    t.eval_values(I, v);
    for (int j = 0; j < n; ++j) sup[j] = std::max(sup[j], std::abs(v[j]));
  }
  std::vector<int> need(n);
  for (int j = 0; j < n; ++j) {
    const double len = grid.domain.upper()[j] - grid.domain.lower()[j];
    need[j] = std::max(2, int(std::ceil(kNodesPerWavelength * len * std::abs(lambda) * sup[j] / kTwoPi)));
  }
  return need;
}

namespace {

void guard_resolution(const Expr& phi, double lambda, const ActionGrid& grid) {
  const auto need = required_resolution(phi, lambda, grid);
  for (int j = 0; j < grid.dim; ++j)
    if (grid.resolution[j] < need[j])
      throw Error(fmt::format("oscillatory integral at lambda={} is under-resolved: axis {} has {} nodes, needs at "
                              "least {} ({} per wavelength); use resolution [{}]",
                              lambda, j + 1, grid.resolution[j], need[j], kNodesPerWavelength, fmt::join(need, ", ")));
}

cplx complex_sum(const ActionGrid& grid, const std::function<cplx(std::size_t)>& term, Exec exec) {
  const auto s = chunked_sums(
      grid.size(), 2,
      [&](std::size_t i, std::span<double> out) {
        if (grid.weights[i] == 0.0) return;
        const cplx v = grid.weights[i] * term(i);
        out[0] = v.real();
        out[1] = v.imag();
      },
      exec);
  return {s[0], s[1]};
}

}  // namespace

cplx oscillatory_integral(const Expr& a, const Expr& phi, double lambda, const ActionGrid& grid, Exec exec) {
  guard_resolution(phi, lambda, grid);
  const std::vector<Expr> outs{a, phi};
  const Tape t(outs, grid.dim);
  return complex_sum(
      grid,
      [&](std::size_t i) {
        std::array<cplx, 2> v;
        t.eval_values(grid.node(i), v);
        return v[0] * std::exp(cplx(0.0, lambda * v[1].real()));
      },
      exec);
}

cplx integrated_by_parts(const UField& u, const Expr& phi, double lambda, const ActionGrid& grid, Exec exec) {
  if (lambda == 0.0) throw std::invalid_argument("integrated_by_parts: lambda must be nonzero");
  guard_resolution(phi, lambda, grid);
  const cplx s = complex_sum(
      grid,
      [&](std::size_t i) {
        const auto I = grid.node(i);
        double ph = 0.0;
        const cplx uv = u.value(I, &ph);
        if (uv == cplx{}) return cplx{};
        return uv * std::exp(cplx(0.0, lambda * ph));
      },
      exec);
  return -s / cplx(0.0, lambda);
}

L1Norms expr_l1_norms(const Expr& a, const ActionGrid& grid, Exec exec) {
  const std::vector<Expr> outs{a};
  const Tape t(outs, grid.dim);
  const auto s = chunked_sums(
      grid.size(), 2,
      [&](std::size_t i, std::span<double> out) {
        const double w = grid.weights[i];
        if (w == 0.0) return;
        std::array<Jet, 1> j;
        t.eval(grid.node(i), 1, j);
        double g = 0.0;
        for (int d = 0; d < grid.dim; ++d) g += std::norm(j[0].g[d]);
        out[0] = w * std::abs(j[0].v);
        out[1] = w * std::sqrt(g);
      },
      exec);
  return {s[0], s[1]};
}

double u_l1_norm(const UField& u, const ActionGrid& grid, Exec exec) {
  const auto s = chunked_sums(
      grid.size(), 1,
      [&](std::size_t i, std::span<double> out) {
        if (grid.weights[i] == 0.0) return;
        out[0] = grid.weights[i] * std::abs(u(grid.node(i)));
      },
      exec);
  return s[0];
}

PhaseBounds phase_bounds(const std::function<PhaseJet(std::span<const double>)>& phase, int dim,
                         const ActionGrid& grid, const std::function<bool(std::size_t)>& support, Exec exec) {
  const std::size_t N = grid.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(N, inf), H(N, -inf), rise(N, 0.0);
  std::vector<std::uint8_t> used(N, 0);
  for_each_index(
      N,
      [&](std::size_t i) {
        if (grid.weights[i] == 0.0 || !support(i)) return;
        used[i] = 1;
        const auto I = grid.node(i);
        const PhaseJet p = phase(I);
        double s = 0.0;
        for (int a = 0; a < dim; ++a) s += p.grad[a] * p.grad[a];
        g[i] = std::sqrt(s);
        H[i] = hessian_norm(p, dim);
        std::array<double, kMaxDim> q;
        for (int a = 0; a < dim; ++a) {
          for (double sign : {-0.5, 0.5}) {
            std::copy(I.begin(), I.end(), q.begin());
            q[a] += sign * grid.spacing[a];
            const double hq = hessian_norm(phase({q.data(), std::size_t(dim)}), dim);
            rise[i] = std::max(rise[i], hq - H[i]);
          }
        }
      },
      exec);
  PhaseBounds b;
  b.gamma_grid = inf;
  double M = 0.0, r = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (!used[i]) continue;
    ++b.support_nodes;
    b.gamma_grid = std::min(b.gamma_grid, g[i]);
    M = std::max(M, H[i]);
    r = std::max(r, rise[i]);
  }
  if (b.support_nodes == 0) return b;
  b.M_grid = M;
  b.M = M + r;
  b.gamma = std::max(0.0, b.gamma_grid - b.M * grid.half_cell_diagonal());
  return b;
}

double lemma_l1_bound(const L1Norms& norms, double gamma, double M, int dim, double gamma_floor) {
  if (!(gamma > gamma_floor))
    throw Error(fmt::format("resonance-contaminated domain: gamma = {:.3e} is not above the floor {:g}; shrink the "
                            "domain",
                            gamma, gamma_floor));
  return norms.grad / gamma + (dim + 2) * M * norms.a / (gamma * gamma);
}

std::string MixingReport::to_json() const {
  nlohmann::ordered_json j;
  j["K"] = K;
  j["dim"] = dim;
  j["omega"] = omega;
  j["cutoff"] = cutoff;
  j["source"] = source;
  j["multiplicity"] = multiplicity;
  j["C_G_direct"] = C_direct;
  j["C_G_lemma"] = C_lemma;
  auto& rec = j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json e;
    e["k"] = r.k;
    e["gamma"] = r.phase.gamma;
    e["gamma_grid"] = r.phase.gamma_grid;
    e["M"] = r.phase.M;
    e["M_grid"] = r.phase.M_grid;
    e["support_nodes"] = r.phase.support_nodes;
    e["a_l1"] = r.a_l1;
    e["grad_a_l1"] = r.grad_l1;
    e["u_l1"] = r.u_l1;
    e["lemma_bound"] = r.lemma;
    rec.push_back(e);
  }
  return j.dump(2);
}

MixingReport mixing_constant(const IntegrablePart& h, const ModeSource& src, int K, const ActionGrid& grid,
                             const std::string& omega, const std::string& cutoff, double gamma_floor, Exec exec) {
  const int n = grid.dim;
  if (h.dim() != n || src.dim() != n) throw std::invalid_argument("mixing_constant: dimension mismatch");
  std::vector<std::size_t> sel;
  for (std::size_t i = 0; i < src.modes().size(); ++i)
    if (l1_norm(src.modes()[i]) <= K) sel.push_back(i);
  const std::size_t m = src.modes().size(), ms = sel.size(), N = grid.size();

  // support flags of each selected a_k
  std::vector<std::uint8_t> supp(N * ms, 0);
  for_each_index(
      N,
      [&](std::size_t i) {
        if (grid.weights[i] == 0.0) return;
        thread_local std::vector<cplx> a;
        thread_local std::vector<CGrad> g;
        a.resize(m);
        g.resize(m);
        src.eval(grid.node(i), a, g, nullptr);
        for (std::size_t s = 0; s < ms; ++s) {
          bool nz = a[sel[s]] != cplx{};
          for (int d = 0; d < n && !nz; ++d) nz = g[sel[s]][d] != cplx{};
          supp[i * ms + s] = nz;
        }
      },
      exec);

  MixingReport rep;
  rep.K = K;
  rep.dim = n;
  rep.omega = omega;
  rep.cutoff = cutoff;
  rep.source = src.describe();
  rep.multiplicity = src.multiplicity();
  std::vector<std::string> bad;
  for (std::size_t s = 0; s < ms; ++s) {
    ModeRecord r;
    r.k = src.modes()[sel[s]];
    const Wavevector k = r.k;
    r.phase = phase_bounds([&](std::span<const double> I) { return mode_phase(h, k, I); }, n, grid,
                           [&](std::size_t i) { return supp[i * ms + s] != 0; }, exec);
    if (r.phase.support_nodes > 0 && !(r.phase.gamma > gamma_floor))
      bad.push_back(fmt::format("({}) gamma={:.3e}", fmt::join(k, ","), r.phase.gamma));
    rep.records.push_back(std::move(r));
  }
  if (!bad.empty())
    throw Error(fmt::format("resonance-contaminated domain: gamma_k at or below the floor {:g} for k = {}", gamma_floor,
                            fmt::join(bad, "; ")));

  const auto sums = chunked_sums(
      N, 3 * ms,
      [&](std::size_t i, std::span<double> out) {
        const double w = grid.weights[i];
        if (w == 0.0) return;
        bool any = false;
        for (std::size_t s = 0; s < ms; ++s) any = any || supp[i * ms + s];
        if (!any) return;
        thread_local std::vector<cplx> a;
        thread_local std::vector<CGrad> g;
        a.resize(m);
        g.resize(m);
        const auto I = grid.node(i);
        src.eval(I, a, g, nullptr);
        for (std::size_t s = 0; s < ms; ++s) {
          if (!supp[i * ms + s]) continue;
          const std::size_t q = sel[s];
          double gn = 0.0;
          for (int d = 0; d < n; ++d) gn += std::norm(g[q][d]);
          out[s] = w * std::abs(a[q]);
          out[ms + s] = w * std::sqrt(gn);
          out[2 * ms + s] = w * std::abs(u_value(a[q], g[q], mode_phase(h, src.modes()[q], I), n));
        }
      },
      exec);

  CompensatedAccumulator cd, cl;
  for (std::size_t s = 0; s < ms; ++s) {
    auto& r = rep.records[s];
    r.a_l1 = sums[s];
    r.grad_l1 = sums[ms + s];
    r.u_l1 = sums[2 * ms + s];
    r.lemma = r.phase.support_nodes == 0 ? 0.0
                                         : lemma_l1_bound({r.a_l1, r.grad_l1}, r.phase.gamma, r.phase.M, n, gamma_floor);
    cd.add(r.u_l1);
    cl.add(r.lemma);
  }
  const double scale = std::pow(kTwoPi, n) * rep.multiplicity;
  rep.C_direct = scale * cd.value();
  rep.C_lemma = scale * cl.value();
  return rep;
}

}  // namespace ensdev
