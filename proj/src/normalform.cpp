#include "ensdev/normalform.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace ensdev {

namespace {

Expr frequency_dot(const IntegrablePart& h, std::span<const int> k) {
  Expr s;
  for (int j = 0; j < h.dim(); ++j)
    if (k[j] != 0) s = s + Expr(double(k[j])) * h.omega_exprs()[j];
  return s;
}

TrigPolyField constant_field(const Expr& c, int dim) {
  TrigPolyField f(dim);
  if (!c.is_zero()) f.add_constant(c);
  return f;
}

std::vector<int> default_probe_resolution(int dim) {
  static const int res[kMaxDim] = {64, 24, 10, 6};
  return {res[dim - 1]};
}

int default_probe_theta(int dim) {
  static const int th[kMaxDim] = {32, 12, 6, 4};
  return th[dim - 1];
}

double frobenius_minus_identity(const PhaseMatrix& J, int n) {
  double s = 0.0;
  for (int r = 0; r < 2 * n; ++r)
    for (int c = 0; c < 2 * n; ++c) {
      const double d = J(r, c) - (r == c ? 1.0 : 0.0);
      s += d * d;
    }
  return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------

NormalFormRegion NormalFormRegion::make(const HamiltonianSystem& sys, const PartitionSpec& spec, double width,
                                        double margin, double lipschitz) {
  NormalFormRegion r{DomainCutoff(sys.integrable, spec, width), sys.domain, margin, lipschitz, 0.0};
  if (!(margin >= 0.0)) throw Error(fmt::format("normal-form margin must be >= 0 (got {})", margin));
  r.floor = spec.alpha - width - lipschitz * margin;
  if (!(r.floor > 0.0))
    throw Error(fmt::format("normal-form region is empty: alpha - w - Lip*margin = {:.4g} - {:.4g} - {:.4g}*{:.4g} <= 0; "
                            "reduce the margin or enlarge alpha",
                            spec.alpha, width, lipschitz, margin));
  return r;
}

bool NormalFormRegion::contains(std::span<const double> I) const {
  return domain.boundary_distance(I) >= margin && cutoff.min_distance(I) >= floor;
}

std::string NormalFormRegion::describe() const {
  return fmt::format("{{I in {}: boundary distance >= {:.6g}, min_k |k.omega|/|k| >= {:.6g}}}", domain.describe(),
                     margin, floor);
}

// ---------------------------------------------------------------------------

Generator solve_homological(const HamiltonianSystem& sys, const NormalFormRegion& region,
                            std::span<const double> probe_actions, std::vector<DivisorRecord>* divisors) {
  const int n = sys.dim();
  const PartitionSpec spec = region.cutoff.spec();
  const TrigPolyField f = sys.perturbation();
  Generator g;
  g.spec = spec;
  g.chi = TrigPolyField(n);
  g.average = f.zero_mode();
  g.resolved = f.averaged() + f.oscillating(spec.K);
  const std::size_t P = probe_actions.size() / std::size_t(n);

  for (const auto& [k, c] : f.modes()) {
    const int order = l1_norm(k);
    if (order == 0 || order > spec.K || c.is_zero()) continue;
    const Expr kw = frequency_dot(sys.integrable, k);
    if (is_half_representative(k)) {
      DivisorRecord rec{k, std::numeric_limits<double>::infinity(), {}};
      const double need = region.floor * l2_norm(k);
      for (std::size_t p = 0; p < P; ++p) {
        const auto I = probe_actions.subspan(p * std::size_t(n), std::size_t(n));
        const Vec w = sys.integrable.frequency(I);
        const double v = std::abs(dot(k, {w.data(), std::size_t(n)}));
        if (v < rec.min_abs) {
          rec.min_abs = v;
          rec.at.assign(I.begin(), I.end());
        }
        if (!(v >= need) || v == 0.0)
          throw Error(fmt::format("small divisor: |k.omega| = {:.3e} < {:.3e} for k = ({}) at I = ({})", v, need,
                                  fmt::join(k, ","), fmt::join(I, ", ")));
      }
      if (divisors) divisors->push_back(std::move(rec));
    }
    g.chi.accumulate(k, Expr(cplx(0.0, -1.0)) * c / kw);
  }
  return g;
}

double homological_residual(const HamiltonianSystem& sys, const Generator& gen, std::span<const PhasePoint> probes) {
  const int n = sys.dim();
  const TrigPolyField hf = constant_field(sys.integrable.hamiltonian(), n);
  const TrigPolyField res =
      constant_field(gen.average, n) - gen.resolved - poisson_bracket(hf, gen.chi);
  if (res.empty()) return 0.0;
  const CompiledField R(res);
  double worst = 0.0;
  for (const auto& z : probes) worst = std::max(worst, std::abs(R.value(z)));
  return worst;
}

// ---------------------------------------------------------------------------

namespace {

class TransformedHamiltonian final : public SplitHamiltonian {
 public:
  explicit TransformedHamiltonian(const NormalFormPackage& pkg) : pkg_(pkg) {}
  int dim() const override { return pkg_.dim(); }
  const IntegrablePart& twist() const override { return pkg_.averaged_twist(); }
  bool kick_only() const override { return false; }
  double remainder(const PhasePoint& z) const override { return pkg_.remainder(z); }
  void remainder_gradient(const PhasePoint& z, Vec& dtheta, Vec& daction) const override {
    pkg_.remainder_gradient(z, dtheta, daction);
  }

 private:
  const NormalFormPackage& pkg_;
};

}  // namespace

void NormalFormPackage::flow(PhasePoint& z, double direction, PhaseMatrix* J) const {
  const int n = dim();
  if (J) J->setIdentity();
  if (gen_.trivial()) return;
  const double tau = direction * dt_;
  const VectorField X = [this](const PhasePoint& p, Vec& th, Vec& ac) {
    FieldJet j;
    chi_.eval(p, 1, j);
    for (int a = 0; a < p.dim; ++a) {
      th[a] = j.daction[a];
      ac[a] = -j.dtheta[a];
    }
  };
  for (int s = 0; s < steps_; ++s) {
    const PhasePoint start = z;
    implicit_midpoint_step(z, tau, X, 1e-15, 500);
    if (!J) continue;
    PhasePoint mid = z;
    for (int a = 0; a < n; ++a) {
      mid.theta[a] = 0.5 * (start.theta[a] + z.theta[a]);
      mid.action[a] = 0.5 * (start.action[a] + z.action[a]);
    }
    FieldJet j;
    chi_.eval(mid, 2, j);
    PhaseMatrix DX = PhaseMatrix::Zero();
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < 2 * n; ++b) {
        DX(a, b) = j.hess(n + a, b);
        DX(n + a, b) = -j.hess(a, b);
      }
    const PhaseMatrix A = PhaseMatrix::Identity() - 0.5 * tau * DX;
    const PhaseMatrix B = PhaseMatrix::Identity() + 0.5 * tau * DX;
    *J = A.partialPivLu().solve(B * (*J));
  }
  for (int a = 0; a < n; ++a)
    if (!std::isfinite(z.theta[a]) || !std::isfinite(z.action[a])) throw Error("normal-form transform: non-finite state");
}

PhasePoint NormalFormPackage::transform(const PhasePoint& z, PhaseMatrix* J) const {
  PhasePoint out = z;
  flow(out, 1.0, J);
  return out;
}

PhasePoint NormalFormPackage::inverse(const PhasePoint& z) const {
  PhasePoint out = z;
  flow(out, -1.0, nullptr);
  return out;
}

double NormalFormPackage::remainder(const PhasePoint& z) const {
  const PhasePoint w = transform(z);
  return H_->energy(w) - h_eps_.energy(z.actions());
}

void NormalFormPackage::remainder_gradient(const PhasePoint& z, Vec& dtheta, Vec& daction) const {
  const int n = dim();
  PhaseMatrix J;
  const PhasePoint w = transform(z, &J);
  Vec gt, ga;
  H_->remainder_gradient(w, gt, ga);
  const Vec om = sys_.integrable.frequency(w.actions());
  const Vec oe = h_eps_.frequency(z.actions());
  Eigen::Matrix<double, 2 * kMaxDim, 1> g = Eigen::Matrix<double, 2 * kMaxDim, 1>::Zero();
  for (int a = 0; a < n; ++a) {
    g(a) = gt[a];
    g(n + a) = om[a] + ga[a];
  }
  const Eigen::Matrix<double, 2 * kMaxDim, 1> out = J.transpose() * g;
  for (int a = 0; a < n; ++a) {
    dtheta[a] = out(a);
    daction[a] = out(n + a) - oe[a];
  }
}

std::shared_ptr<const SplitHamiltonian> NormalFormPackage::transformed() const {
  return std::make_shared<TransformedHamiltonian>(*this);
}

NormalFormPackage NormalFormPackage::build(const HamiltonianSystem& sys, const PartitionSpec& spec,
                                           const NormalFormOptions& options, Exec exec) {
  spec.validate();
  const int n = sys.dim();
  if (!(options.dt > 0.0) || options.dt > 1.0) throw Error(fmt::format("normal-form dt must lie in (0, 1] (got {})", options.dt));
  const double width = options.width > 0.0 ? options.width : default_cutoff_width(sys.domain, spec.alpha);
  const double margin = options.margin >= 0.0 ? options.margin : 0.5 * width;
  const auto res = options.probe_resolution.empty() ? default_probe_resolution(n) : options.probe_resolution;
  const int Mt = options.probe_theta > 0 ? options.probe_theta : default_probe_theta(n);
  const ActionGrid pg = build_grid(sys.domain, res);
  const double lip = frequency_lipschitz(sys.integrable, pg);

  NormalFormPackage pkg{NormalFormRegion::make(sys, spec, width, margin, lip)};
  pkg.sys_ = sys;
  pkg.steps_ = int(std::ceil(1.0 / options.dt - 1e-9));
  pkg.dt_ = 1.0 / pkg.steps_;
  pkg.H_ = std::make_shared<PerturbedHamiltonian>(sys);

  std::vector<double> acts;
  for (std::size_t i = 0; i < pg.size(); ++i)
    if (pg.weights[i] != 0.0 && pkg.region_.contains(pg.node(i))) {
      const auto I = pg.node(i);
      acts.insert(acts.end(), I.begin(), I.end());
    }
  const std::size_t PA = acts.size() / std::size_t(n);
  if (PA == 0) throw Error(fmt::format("normal-form region {} holds no probe nodes", pkg.region_.describe()));

  auto& S = pkg.summary_;
  pkg.gen_ = solve_homological(sys, pkg.region_, acts, &S.divisors);
  pkg.h_eps_ = pkg.gen_.average.is_zero()
                   ? sys.integrable
                   : IntegrablePart(sys.integrable.hamiltonian() + pkg.gen_.average, n);
  if (!pkg.gen_.trivial()) pkg.chi_ = CompiledField(pkg.gen_.chi);

  // probes: actions x tensor theta grid
  std::size_t Tn = 1;
  for (int a = 0; a < n; ++a) Tn *= std::size_t(Mt);
  pkg.probes_.reserve(PA * Tn);
  for (std::size_t p = 0; p < PA; ++p)
    for (std::size_t j = 0; j < Tn; ++j) {
      PhasePoint z;
      z.dim = n;
      std::size_t r = j;
      for (int a = n - 1; a >= 0; --a) {
        z.theta[a] = kTwoPi * double(r % std::size_t(Mt)) / Mt;
        r /= std::size_t(Mt);
      }
      for (int a = 0; a < n; ++a) z.action[a] = acts[p * std::size_t(n) + std::size_t(a)];
      pkg.probes_.push_back(z);
    }

  S.epsilon = sys.epsilon;
  S.spec = spec;
  S.region = pkg.region_.describe();
  S.dt = pkg.dt_;
  S.steps = pkg.steps_;
  S.probe_actions = PA;
  S.probes = pkg.probes_.size();
  S.homological_residual = homological_residual(sys, pkg.gen_, pkg.probes_);
  if (pkg.identity()) return pkg;

  const std::size_t P = pkg.probes_.size();
  std::vector<double> rr(P), c0(P), c0a(P), c1(P);
  try {
  for_each_index(
      P,
      [&](std::size_t i) {
        const PhasePoint& z = pkg.probes_[i];
        PhaseMatrix J;
        const PhasePoint w = pkg.transform(z, &J);
        rr[i] = std::abs(pkg.H_->energy(w) - pkg.h_eps_.energy(z.actions()));
        c0[i] = phase_distance(w, z);
        double da = 0.0;
        for (int a = 0; a < n; ++a) da += (w.action[a] - z.action[a]) * (w.action[a] - z.action[a]);
        c0a[i] = std::sqrt(da);
        c1[i] = frobenius_minus_identity(J, n);
      },
      exec);
  } catch (const Error& e) {
    throw Error(fmt::format("normal form at eps={} with {}: the generator flow failed ({}); the transform is not "
                            "small here, reduce epsilon or widen alpha",
                            sys.epsilon, spec.describe(), e.what()));
  }
  S.remainder_sup = *std::max_element(rr.begin(), rr.end());
  S.displacement_c0 = *std::max_element(c0.begin(), c0.end());
  S.action_displacement = *std::max_element(c0a.begin(), c0a.end());
  S.displacement_c1 = S.displacement_c0 + *std::max_element(c1.begin(), c1.end());
  S.delta_nf = 2.0 * S.action_displacement;
  if (S.delta_nf > margin)
    throw Error(fmt::format("normal-form margin {:.4g} is below 2 x the action displacement {:.4g}; enlarge the "
                            "margin, reduce epsilon or widen alpha",
                            margin, S.delta_nf));

  const int checks = std::max(1, std::min<int>(options.check_probes, int(P)));
  const auto tf = [&](const PhasePoint& z) { return pkg.transform(z); };
  Eigen::MatrixXd Om = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int a = 0; a < n; ++a) {
    Om(a, n + a) = 1.0;
    Om(n + a, a) = -1.0;
  }
  for (int c = 0; c < checks; ++c) {
    const PhasePoint& z = pkg.probes_[std::size_t(c) * P / std::size_t(checks)];
    const Eigen::MatrixXd J = map_jacobian(tf, z);
    S.det_error = std::max(S.det_error, std::abs(J.determinant() - 1.0));
    S.symplectic_defect = std::max(S.symplectic_defect, (J.transpose() * Om * J - Om).cwiseAbs().maxCoeff());
    S.inverse_error = std::max({S.inverse_error, phase_distance(pkg.transform(pkg.inverse(z)), z),
                                phase_distance(pkg.inverse(pkg.transform(z)), z)});
  }
  return pkg;
}

std::string NormalFormSummary::to_json() const {
  nlohmann::ordered_json j;
  j["epsilon"] = epsilon;
  j["K"] = spec.K;
  j["alpha"] = spec.alpha;
  j["region"] = region;
  j["dt"] = dt;
  j["steps"] = steps;
  j["probe_actions"] = probe_actions;
  j["probes"] = probes;
  j["remainder_sup"] = remainder_sup;
  j["displacement_c0"] = displacement_c0;
  j["action_displacement"] = action_displacement;
  j["displacement_c1"] = displacement_c1;
  j["delta_nf"] = delta_nf;
  j["homological_residual"] = homological_residual;
  j["det_error"] = det_error;
  j["inverse_error"] = inverse_error;
  j["symplectic_defect"] = symplectic_defect;
  auto& d = j["small_divisors"] = nlohmann::ordered_json::array();
  for (const auto& r : divisors) d.push_back({{"k", r.k}, {"min_abs", r.min_abs}, {"at", r.at}});
  return j.dump(2);
}

// ---------------------------------------------------------------------------

double nf_error_bound(double Gt_C1, double t, double r_inf, double C_err) {
  if (!(Gt_C1 >= 0.0) || !(r_inf >= 0.0) || !(C_err >= 0.0))
    throw std::invalid_argument("nf_error_bound: inputs must be non-negative");
  const double a = std::abs(t);
  return C_err * Gt_C1 * (1.0 + a + a * a) * r_inf;
}

double transformed_c1_norm(const TrigPolyField& G, const NormalFormPackage& pkg, Exec exec) {
  const CompiledField g(G);
  const int n = pkg.dim();
  const auto& P = pkg.probes();
  std::vector<double> val(P.size()), grad(P.size());
  for_each_index(
      P.size(),
      [&](std::size_t i) {
        PhaseMatrix J;
        const PhasePoint w = pkg.transform(P[i], &J);
        FieldJet j;
        g.eval(w, 1, j);
        Eigen::Matrix<double, 2 * kMaxDim, 1> v = Eigen::Matrix<double, 2 * kMaxDim, 1>::Zero();
        for (int a = 0; a < n; ++a) {
          v(a) = j.dtheta[a];
          v(n + a) = j.daction[a];
        }
        val[i] = std::abs(j.v);
        grad[i] = (J.transpose() * v).norm();
      },
      exec);
  if (P.empty()) return 0.0;
  return *std::max_element(val.begin(), val.end()) + *std::max_element(grad.begin(), grad.end());
}

double masked_mass(const EnsembleDensity& f0, const DomainCutoff& cutoff, const ActionGrid& grid, Exec exec) {
  const Expr m = f0.field.zero_mode();
  const Expr outs[1] = {m};
  const Tape tape(outs, grid.dim);
  const auto s = chunked_sums(
      grid.size(), 1,
      [&](std::size_t i, std::span<double> out) {
        if (grid.weights[i] == 0.0) return;
        cplx v[1];
        tape.eval_values(grid.node(i), v);
        if (v[0] == cplx{}) return;
        out[0] = grid.weights[i] * v[0].real() * cutoff.value(grid.node(i));
      },
      exec);
  return std::pow(kTwoPi, grid.dim) * s[0];
}

TransformedSamples transformed_samples(const NormalFormPackage& pkg, const EnsembleDensity& f0, std::size_t count,
                                       const SeededRng& rng, Exec exec) {
  const auto& cut = pkg.region().cutoff;
  TransformedSamples out;
  out.original = sample_density_thinned(
      f0, pkg.system().domain, count, rng, [&](const PhasePoint& z) { return cut.value(z.actions()); }, exec);
  out.transformed = out.original;
  for_each_index(
      out.original.size(),
      [&](std::size_t i) {
        PhasePoint z = pkg.inverse(out.original.points[i]);
        wrap_in_place(z);
        out.transformed.points[i] = z;
      },
      exec);
  return out;
}

std::vector<MeanEstimate> nf_error_measured(const TrigPolyField& G, const NormalFormPackage& pkg,
                                            const SampleSet& samples, std::span<const double> times, double dt,
                                            Exec exec) {
  for (std::size_t j = 1; j < times.size(); ++j)
    if (!(times[j] > times[j - 1])) throw std::invalid_argument("nf_error_measured: times must increase");
  const CompiledField g(G);
  const std::size_t N = samples.size(), T = times.size();
  std::vector<double> diff(T * N);
  const Flow B = pkg.identity() ? Flow::integrable(pkg.averaged_twist()) : Flow::symplectic(pkg.transformed(), dt);
  const Flow Psi = Flow::integrable(pkg.averaged_twist());
  for_each_index(
      N,
      [&](std::size_t i) {
        PhasePoint z = samples.points[i];
        double now = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
          B.advance(z, times[j] - now);
          now = times[j];
          const PhasePoint y = Psi.evolve(samples.points[i], times[j]);
          diff[j * N + i] = g.value(pkg.transform(z)) - g.value(pkg.transform(y));
        }
      },
      exec);
  std::vector<MeanEstimate> out(T);
  for (std::size_t j = 0; j < T; ++j) out[j] = mean_and_stderr({diff.data() + j * N, N});
  return out;
}

CErrCalibration calibrate_c_err(std::span<const double> train_t, double heldout_t, std::span<const double> measured,
                                double Gt_C1, double r_inf) {
  if (measured.size() != train_t.size() + 1) throw std::invalid_argument("calibrate_c_err: size mismatch");
  if (train_t.empty()) throw std::invalid_argument("calibrate_c_err: empty training set");
  CErrCalibration c;
  c.source = "calibrated";
  for (std::size_t i = 0; i < train_t.size(); ++i) {
    const double shape = nf_error_bound(Gt_C1, train_t[i], r_inf, 1.0);
    c.train_t.push_back(train_t[i]);
    c.train_measured.push_back(measured[i]);
    c.train_shape.push_back(shape);
    if (shape > 0.0) c.C_err = std::max(c.C_err, measured[i] / shape);
  }
  c.heldout_t = heldout_t;
  c.heldout_measured = measured.back();
  c.heldout_bound = nf_error_bound(Gt_C1, heldout_t, r_inf, c.C_err);
  c.validated = c.heldout_measured <= c.heldout_bound;
  return c;
}

CErrCalibration override_c_err(double C_err) {
  if (!(C_err >= 0.0)) throw Error("C_err override must be non-negative");
  CErrCalibration c;
  c.source = "override";
  c.C_err = C_err;
  return c;
}

std::string CErrCalibration::to_json() const {
  nlohmann::ordered_json j;
  j["source"] = source;
  j["C_err"] = C_err;
  j["train_t"] = train_t;
  j["train_measured"] = train_measured;
  j["train_shape"] = train_shape;
  j["heldout_t"] = heldout_t;
  j["heldout_measured"] = heldout_measured;
  j["heldout_bound"] = heldout_bound;
  j["validated"] = validated;
  return j.dump(2);
}

// ---------------------------------------------------------------------------

int default_theta_points(int dim) { return dim <= 2 ? 16 : 8; }

NormalFormModeSource::NormalFormModeSource(const NormalFormPackage& pkg, const TrigPolyField& G,
                                           const TrigPolyField& f0, int M, int max_order)
    : pkg_(pkg), G_(G), f0_(f0), T_(std::make_shared<ThetaTransform>(pkg.dim(), M)) {
  if (G.dim() != pkg.dim() || f0.dim() != pkg.dim()) throw std::invalid_argument("NormalFormModeSource: dimension mismatch");
  if (!G.is_real() || !f0.is_real()) throw std::invalid_argument("NormalFormModeSource: real fields required");
  const int R = T_->resolved();
  const int order = max_order < 0 ? pkg.dim() * R : max_order;
  for (auto& k : enumerate_wavevectors(pkg.dim(), order, WavevectorSet::half)) {
    bool ok = true;
    for (int v : k) ok = ok && std::abs(v) <= R;
    if (!ok) continue;
    pos_.push_back(T_->index(k));
    neg_.push_back(T_->index(negate(k)));
    modes_.push_back(std::move(k));
  }
}

void NormalFormModeSource::eval(std::span<const double> I, std::span<cplx> a, std::span<CGrad> grad,
                                double* zero) const {
  const int n = pkg_.dim();
  const std::size_t m = modes_.size();
  std::fill_n(a.begin(), m, cplx{});
  for (std::size_t i = 0; i < m; ++i) grad[i] = CGrad{};
  if (zero) *zero = 0.0;
  if (!pkg_.region().contains(I)) return;
  const std::size_t S = T_->size();
  // rows: G~, dG~/dI_b, f~, df~/dI_b
  thread_local std::vector<cplx> samp, coef;
  const std::size_t rows = 2 * std::size_t(n + 1);
  samp.assign(rows * S, cplx{});
  coef.assign(rows * S, cplx{});
  const auto& cut = pkg_.region().cutoff;
  PhasePoint z;
  z.dim = n;
  for (int b = 0; b < n; ++b) z.action[b] = I[b];
  bool any = false;
  for (std::size_t j = 0; j < S; ++j) {
    T_->angles(j, z.theta);
    PhaseMatrix J;
    const PhasePoint w = pkg_.transform(z, &J);
    FieldJet gj, fj;
    G_.eval(w, 1, gj);
    Vec cg{};
    const double c = cut.value(w.actions(), &cg);
    double fv = 0.0;
    Vec ft{}, fa{};
    if (c > 0.0) {
      f0_.eval(w, 1, fj);
      fv = fj.v * c;
      for (int d = 0; d < n; ++d) {
        ft[d] = fj.dtheta[d] * c;
        fa[d] = fj.daction[d] * c + fj.v * cg[d];
      }
      any = any || fv != 0.0;
    }
    samp[j] = gj.v;
    samp[(n + 1) * S + j] = fv;
    for (int b = 0; b < n; ++b) {
      double dg = 0.0, df = 0.0;
      for (int d = 0; d < n; ++d) {
        dg += gj.dtheta[d] * J(d, n + b) + gj.daction[d] * J(n + d, n + b);
        df += ft[d] * J(d, n + b) + fa[d] * J(n + d, n + b);
      }
      samp[(1 + b) * S + j] = dg;
      samp[(n + 2 + b) * S + j] = df;
    }
  }
  if (!any) return;
  for (std::size_t r = 0; r < rows; ++r)
    T_->forward({samp.data() + r * S, S}, {coef.data() + r * S, S});
  const cplx* Gc = coef.data();
  const cplx* Fc = coef.data() + (n + 1) * S;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t p = pos_[i], q = neg_[i];
    a[i] = Gc[p] * Fc[q];
    for (int b = 0; b < n; ++b)
      grad[i][b] = coef[(1 + b) * S + p] * Fc[q] + Gc[p] * coef[(n + 2 + b) * S + q];
  }
  if (zero) {
    const std::size_t o = T_->index(Wavevector(std::size_t(n), 0));
    *zero = (Gc[o] * Fc[o]).real();
  }
}

std::string NormalFormModeSource::describe() const {
  return fmt::format("sampled normal-form mode products (theta grid {}^{}, {} modes)", T_->points(), pkg_.dim(),
                     modes_.size());
}

std::unique_ptr<ModeSource> transformed_mode_source(const NormalFormPackage& pkg, const TrigPolyField& G,
                                                    const TrigPolyField& f0, int M, int max_order) {
  if (!pkg.identity()) return std::make_unique<NormalFormModeSource>(pkg, G, f0, M, max_order);
  const NormalFormPackage* p = &pkg;
  ActionMask mask = [p](std::span<const double> I, Vec* g) {
    if (!p->region().contains(I)) {
      if (g) *g = {};
      return 0.0;
    }
    return p->region().cutoff.value(I, g);
  };
  return std::make_unique<FieldModeSource>(G, f0, 0, max_order, std::move(mask));
}

std::vector<std::uint8_t> transformed_support(const TrigPolyField& f0, const NormalFormPackage& pkg,
                                              const ActionGrid& grid) {
  const int n = grid.dim;
  std::vector<Expr> coeffs;
  for (const auto& [k, c] : f0.modes()) coeffs.push_back(c);
  const Tape tape(coeffs, n);
  std::vector<std::size_t> hot;
  std::vector<cplx> v(coeffs.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.weights[i] == 0.0) continue;
    tape.eval_values(grid.node(i), v);
    if (std::any_of(v.begin(), v.end(), [](cplx c) { return c != cplx{}; })) hot.push_back(i);
  }
  const double radius = pkg.summary().delta_nf + 2.0 * grid.half_cell_diagonal();
  std::vector<std::uint8_t> active(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.weights[i] == 0.0 || !pkg.region().contains(grid.node(i))) continue;
    const auto I = grid.node(i);
    for (std::size_t h : hot) {
      const auto J = grid.node(h);
      double d = 0.0;
      for (int a = 0; a < n; ++a) d += (I[a] - J[a]) * (I[a] - J[a]);
      if (d <= radius * radius) {
        active[i] = 1;
        break;
      }
    }
  }
  return active;
}

// ---------------------------------------------------------------------------

EqChange eq_change_error(const ModeSource& transformed, const TrigPolyField& G, const TrigPolyField& f0,
                         const DomainCutoff& cutoff, const ActionGrid& grid, Exec exec) {
  const double s = std::pow(kTwoPi, grid.dim);
  const FieldModeSource orig(G, f0, 0, 0, [&cutoff](std::span<const double> I, Vec* g) { return cutoff.value(I, g); });
  EqChange e;
  e.normal = s * mode_l1_norms(transformed, grid, exec).zero_integral;
  e.original = s * mode_l1_norms(orig, grid, exec).zero_integral;
  e.error = std::abs(e.normal - e.original);
  return e;
}

EqChange eq_change_error(const TrigPolyField& G, const TrigPolyField& f0, const NormalFormPackage& pkg,
                         const ActionGrid& grid, int M, Exec exec) {
  const auto src = transformed_mode_source(pkg, G, f0, M > 0 ? M : default_theta_points(pkg.dim()), 0);
  return eq_change_error(*src, G, f0, pkg.region().cutoff, grid, exec);
}

PullbackCheck pullback_check(const TrigPolyField& G, const NormalFormPackage& pkg, const TransformedSamples& samples,
                             const Flow& original, double t, double dt_nf, Exec exec) {
  const CompiledField g(G);
  const std::size_t N = samples.original.size();
  const Flow B = pkg.identity() ? Flow::integrable(pkg.averaged_twist()) : Flow::symplectic(pkg.transformed(), dt_nf);
  std::vector<double> lhs(N), rhs(N);
  for_each_index(
      N,
      [&](std::size_t i) {
        lhs[i] = g.value(original.evolve(samples.original.points[i], t));
        rhs[i] = g.value(pkg.transform(B.evolve(samples.transformed.points[i], t)));
      },
      exec);
  const auto L = mean_and_stderr(lhs), R = mean_and_stderr(rhs);
  return {L.mean, R.mean, std::abs(L.mean - R.mean), L.stderr_};
}

// ---------------------------------------------------------------------------

std::vector<IterateStep> iterate_normal_form(const NormalFormPackage& pkg, int m) {
  if (m < 1 || m > 3) throw Error(fmt::format("normal-form iteration count must lie in [1, 3] (got {})", m));
  const HamiltonianSystem& sys = pkg.system();
  const int n = sys.dim();
  const int K = pkg.generator().spec.K;
  Expr h = sys.integrable.hamiltonian();
  TrigPolyField p = sys.perturbation();
  std::vector<IterateStep> out;
  const auto& probes = pkg.probes();
  for (int s = 1; s <= m; ++s) {
    const IntegrablePart hs(h, n);
    TrigPolyField chi(n);
    for (const auto& [k, c] : p.modes()) {
      const int order = l1_norm(k);
      if (order == 0 || order > K || c.is_zero()) continue;
      chi.accumulate(k, Expr(cplx(0.0, -1.0)) * c / frequency_dot(hs, k));
    }
    const TrigPolyField osc = p.oscillating(K);
    const TrigPolyField r = p.above(K) + poisson_bracket(p, chi) - poisson_bracket(osc, chi).scaled(0.5);
    h = h + p.zero_mode();
    p = r;
    IterateStep st;
    st.step = s;
    st.generator_modes = chi.modes().size();
    st.remainder_modes = r.modes().size();
    if (!r.empty()) {
      const CompiledField R(r);
      for (const auto& z : probes) st.remainder_sup = std::max(st.remainder_sup, std::abs(R.value(z)));
    }
    out.push_back(st);
  }
  return out;
}

}  // namespace ensdev
