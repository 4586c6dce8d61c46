#include "ensdev/spectral.hpp"

#include <fftw3.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include "json.hpp"

namespace ensdev {

namespace {
std::mutex& planner_lock() {
  static std::mutex m;
  return m;
}
}  // namespace

Expr fourier_coeff(const TrigPolyField& field, const Wavevector& k) { return field.coeff(k); }

ModeProduct mode_product(const TrigPolyField& G, const TrigPolyField& f0, const Wavevector& k) {
  if (G.dim() != f0.dim() || int(k.size()) != G.dim()) throw std::invalid_argument("mode_product: dimension mismatch");
  ModeProduct p;
  p.k = k;
  p.a = G.coeff(k) * f0.coeff(negate(k));
  for (int j = 0; j < G.dim(); ++j) p.grad.push_back(p.a.derivative(j));
  return p;
}

FieldModeSource::FieldModeSource(const TrigPolyField& G, const TrigPolyField& f0, int min_order, int max_order,
                                 ActionMask mask)
    : dim_(G.dim()), mask_(std::move(mask)) {
  if (G.dim() != f0.dim()) throw std::invalid_argument("FieldModeSource: dimension mismatch");
  const bool half = G.is_real() && f0.is_real();
  mult_ = half ? 2.0 : 1.0;
  std::vector<Expr> outs;
  for (const auto& [k, c] : G.modes()) {
    const int order = l1_norm(k);
    if (order == 0 || order <= min_order || (max_order >= 0 && order > max_order)) continue;
    if (half && !is_half_representative(k)) continue;
    const Expr fk = f0.coeff(negate(k));
    if (fk.is_zero() || c.is_zero()) continue;
    modes_.push_back(k);
    outs.push_back(c * fk);
  }
  outs.push_back(G.zero_mode() * f0.zero_mode());
  tape_ = Tape(outs, dim_);
}

void FieldModeSource::eval(std::span<const double> I, std::span<cplx> a, std::span<CGrad> grad,
                           double* zero) const {
  const std::size_t m = modes_.size();
  thread_local std::vector<Jet> jets;
  jets.resize(m + 1);
  tape_.eval(I, 1, jets);
  double mv = 1.0;
  Vec mg{};
  if (mask_) mv = mask_(I, &mg);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = jets[i].v * mv;
    for (int j = 0; j < dim_; ++j) grad[i][j] = jets[i].g[j] * mv + jets[i].v * mg[j];
  }
  if (zero) *zero = jets[m].v.real() * mv;
}

std::string FieldModeSource::describe() const {
  return fmt::format("symbolic mode products ({} modes{})", modes_.size(), mask_ ? ", masked" : "");
}

TabulatedModeSource::TabulatedModeSource(const ModeSource& src, const ActionGrid& grid, Exec exec,
                                         const std::vector<std::uint8_t>* active)
    : src_(src) {
  if (grid.dim != src.dim()) throw std::invalid_argument("TabulatedModeSource: dimension mismatch");
  if (active && active->size() != grid.size()) throw std::invalid_argument("TabulatedModeSource: mask size mismatch");
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid.weights[i] != 0.0) nodes.push_back(i);
  const std::size_t m = src.modes().size();
  a_.resize(nodes.size() * m);
  grad_.resize(nodes.size() * m);
  zero_.resize(nodes.size());
  for_each_index(
      nodes.size(),
      [&](std::size_t r) {
        if (active && !(*active)[nodes[r]]) return;
        src.eval(grid.node(nodes[r]), std::span<cplx>(a_.data() + r * m, m), std::span<CGrad>(grad_.data() + r * m, m),
                 &zero_[r]);
      },
      exec);
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const auto I = grid.node(nodes[r]);
    row_.emplace(std::vector<double>(I.begin(), I.end()), r);
  }
}

void TabulatedModeSource::eval(std::span<const double> I, std::span<cplx> a, std::span<CGrad> grad,
                               double* zero) const {
  const auto it = row_.find(std::vector<double>(I.begin(), I.end()));
  if (it == row_.end()) {
    src_.eval(I, a, grad, zero);
    return;
  }
  const std::size_t m = src_.modes().size(), r = it->second;
  std::copy_n(a_.begin() + std::ptrdiff_t(r * m), m, a.begin());
  std::copy_n(grad_.begin() + std::ptrdiff_t(r * m), m, grad.begin());
  if (zero) *zero = zero_[r];
}

ModeNorms mode_l1_norms(const ModeSource& src, const ActionGrid& grid, Exec exec) {
  if (grid.dim != src.dim()) throw std::invalid_argument("mode_l1_norms: dimension mismatch");
  const std::size_t m = src.modes().size();
  const int n = grid.dim;
  const auto sums = chunked_sums(
      grid.size(), 2 * m + 1,
      [&](std::size_t i, std::span<double> out) {
        const double w = grid.weights[i];
        if (w == 0.0) return;
        thread_local std::vector<cplx> a;
        thread_local std::vector<CGrad> g;
        a.resize(m);
        g.resize(m);
        double z = 0.0;
        src.eval(grid.node(i), a, g, &z);
        for (std::size_t k = 0; k < m; ++k) {
          out[k] = w * std::abs(a[k]);
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += std::norm(g[k][j]);
          out[m + k] = w * std::sqrt(s);
        }
        out[2 * m] = w * z;
      },
      exec);
  ModeNorms r;
  r.modes = src.modes();
  r.multiplicity = src.multiplicity();
  r.a_l1.assign(sums.begin(), sums.begin() + m);
  r.grad_l1.assign(sums.begin() + m, sums.begin() + 2 * m);
  r.zero_integral = sums[2 * m];
  return r;
}

double tail(const ModeSource& src, int K, const ActionGrid& grid, Exec exec) {
  const ModeNorms norms = mode_l1_norms(src, grid, exec);
  CompensatedAccumulator acc;
  for (std::size_t i = 0; i < norms.modes.size(); ++i)
    if (l1_norm(norms.modes[i]) > K) acc.add(norms.a_l1[i]);
  return std::pow(kTwoPi, grid.dim) * norms.multiplicity * acc.value();
}

double tail(const TrigPolyField& G, const TrigPolyField& f0, int K, const ActionGrid& grid, Exec exec) {
  return tail(FieldModeSource(G, f0, K), K, grid, exec);
}

DecayFit tail_decay_fit(std::span<const int> Ks, std::span<const double> tails) {
  if (Ks.size() != tails.size()) throw std::invalid_argument("tail_decay_fit: size mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < Ks.size(); ++i)
    if (tails[i] > 0.0) {
      x.push_back(Ks[i]);
      y.push_back(std::log(tails[i]));
    }
  if (x.empty()) throw Error("tail_decay_fit: all tails vanish (band-limited, no decay law)");
  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw Error("tail_decay_fit: needs at least 3 distinct K with nonzero tails");
  const double N = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (N * sxy - sx * sy) / (N * sxx - sx * sx);
  DecayFit f;
  f.sigma0 = -slope;
  f.intercept = (sy - slope * sx) / N;
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + slope * x[i]);
    r += e * e;
  }
  f.residual = std::sqrt(r / N);
  return f;
}

ThetaTransform::ThetaTransform(int dim, int M) : dim_(dim), M_(M), size_(1) {
  if (dim < 1 || dim > kMaxDim || M < 1) throw std::invalid_argument("ThetaTransform: bad shape");
  for (int j = 0; j < dim; ++j) size_ *= std::size_t(M);
  std::vector<int> dims(std::size_t(dim), M);
  std::lock_guard<std::mutex> lock(planner_lock());
  fftw_complex* in = fftw_alloc_complex(size_);
  fftw_complex* out = fftw_alloc_complex(size_);
  plan_ = fftw_plan_dft(dim, dims.data(), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  if (!plan_) throw Error("FFTW planning failed");
}

ThetaTransform::~ThetaTransform() {
  std::lock_guard<std::mutex> lock(planner_lock());
  if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void ThetaTransform::angles(std::size_t j, Vec& theta) const {
  for (int a = dim_ - 1; a >= 0; --a) {
    theta[a] = kTwoPi * double(j % std::size_t(M_)) / M_;
    j /= std::size_t(M_);
  }
}

std::size_t ThetaTransform::index(std::span<const int> k) const {
  std::size_t idx = 0;
  for (int a = 0; a < dim_; ++a) idx = idx * std::size_t(M_) + std::size_t(((k[a] % M_) + M_) % M_);
  return idx;
}

void ThetaTransform::forward(std::span<const cplx> samples, std::span<cplx> coeffs) const {
  if (samples.size() != size_ || coeffs.size() != size_) throw std::invalid_argument("ThetaTransform: size mismatch");
  fftw_complex* in = fftw_alloc_complex(size_);
  fftw_complex* out = fftw_alloc_complex(size_);
  for (std::size_t j = 0; j < size_; ++j) {
    in[j][0] = samples[j].real();
    in[j][1] = samples[j].imag();
  }
  fftw_execute_dft(static_cast<fftw_plan>(plan_), in, out);
  const double s = 1.0 / double(size_);
  for (std::size_t j = 0; j < size_; ++j) coeffs[j] = cplx(out[j][0] * s, out[j][1] * s);
  fftw_free(in);
  fftw_free(out);
}

std::vector<std::pair<Wavevector, cplx>> sampled_coefficients(const TrigPolyField& field, std::span<const double> I,
                                                               int M) {
  const int n = field.dim();
  const ThetaTransform T(n, M);
  const CompiledField cf(field);
  std::vector<cplx> samples(T.size()), coeffs(T.size());
  PhasePoint z;
  z.dim = n;
  for (int j = 0; j < n; ++j) z.action[j] = I[j];
  for (std::size_t j = 0; j < T.size(); ++j) {
    T.angles(j, z.theta);
    samples[j] = field.is_real() ? cplx(cf.value(z)) : cf.value_complex(z);
  }
  T.forward(samples, coeffs);
  std::vector<std::pair<Wavevector, cplx>> out;
  const int r = T.resolved();
  Wavevector k(std::size_t(n), -r);
  while (true) {
    out.emplace_back(k, coeffs[T.index(k)]);
    int a = n - 1;
    while (a >= 0 && k[a] == r) k[a--] = -r;
    if (a < 0) break;
    ++k[a];
  }
  return out;
}

ParsevalCheck parseval_check(const TrigPolyField& field, const ActionGrid& grid, Exec exec) {
  const int n = grid.dim;
  const int M = 2 * field.band_limit() + 1;
  const ThetaTransform T(n, M);
  const CompiledField cf(field);
  std::vector<Expr> outs;
  for (const auto& [k, c] : field.modes()) outs.push_back(c);
  const Tape tape(outs, n);
  const double cell = std::pow(kTwoPi / M, n);
  const auto sums = chunked_sums(
      grid.size(), 2,
      [&](std::size_t i, std::span<double> out) {
        const double w = grid.weights[i];
        if (w == 0.0) return;
        thread_local std::vector<cplx> v;
        v.resize(outs.size());
        tape.eval_values(grid.node(i), v);
        double s = 0.0;
        for (const cplx& c : v) s += std::norm(c);
        out[0] = w * s;
        PhasePoint z;
        z.dim = n;
        for (int j = 0; j < n; ++j) z.action[j] = grid.node(i)[j];
        double g = 0.0;
        for (std::size_t j = 0; j < T.size(); ++j) {
          T.angles(j, z.theta);
          g += field.is_real() ? std::pow(cf.value(z), 2) : std::norm(cf.value_complex(z));
        }
        out[1] = w * cell * g;
      },
      exec);
  return {std::pow(kTwoPi, n) * sums[0], sums[1]};
}

std::string mode_table_json(const TrigPolyField& field) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, c] : field.modes()) j[fmt::format("{}", fmt::join(k, ","))] = c.to_string();
  return j.dump(2);
}

}  // namespace ensdev
