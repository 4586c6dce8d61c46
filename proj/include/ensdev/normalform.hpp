#pragma once

// One Lie step on the nonresonant region: generator chi from the homological
// equation, Phi = time-1 flow of chi, H o Phi = h_eps + r, the measured
// remainder and the errors it induces downstream.

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ensdev/estimator.hpp"
#include "ensdev/resonance.hpp"
#include "ensdev/spectral.hpp"

namespace ensdev {

/// Actions where normal-form coordinates are used:
/// min_k d_k(I) >= floor = alpha - w - Lip * margin, and I at least `margin`
/// inside the action domain.
struct NormalFormRegion {
  DomainCutoff cutoff;
  ActionDomain domain;
  double margin = 0.0;
  double lipschitz = 0.0;
  double floor = 0.0;

  static NormalFormRegion make(const HamiltonianSystem& sys, const PartitionSpec& spec, double width, double margin,
                               double lipschitz);
  bool contains(std::span<const double> I) const;
  std::string describe() const;
};

struct Generator {
  TrigPolyField chi;       // modes 0 < |k|_1 <= K
  TrigPolyField resolved;  // f_{<=K}, zero mode included
  Expr average;            // zero mode of f
  PartitionSpec spec;

  bool trivial() const { return chi.empty(); }
};

struct DivisorRecord {
  Wavevector k;
  double min_abs = 0.0;  // min |k.omega| over the probes
  std::vector<double> at;
};

/// chi_k = -i f_k / (k.omega) for 0 < |k|_1 <= K. Every probe action must see
/// |k.omega| >= floor * |k|_2 for the modes present in f; otherwise an error
/// names k and I.
Generator solve_homological(const HamiltonianSystem& sys, const NormalFormRegion& region,
                            std::span<const double> probe_actions, std::vector<DivisorRecord>* divisors = nullptr);

/// max |<f> - f_{<=K} - {h, chi}| over the probes.
double homological_residual(const HamiltonianSystem& sys, const Generator& gen, std::span<const PhasePoint> probes);

using PhaseMatrix = Eigen::Matrix<double, 2 * kMaxDim, 2 * kMaxDim>;

struct NormalFormOptions {
  double dt = 0.1;                      // step of the chi flow
  double width = -1.0;                  // cutoff transition width; < 0: default rule
  double margin = -1.0;                 // action margin; < 0: half the width
  std::vector<int> probe_resolution;    // action probes per axis; empty: from the dimension
  int probe_theta = 0;                  // theta probes per axis; 0: from the dimension
  int check_probes = 10;                // Jacobian / inverse / symplectic checks
};

struct NormalFormSummary {
  double epsilon = 0.0;
  PartitionSpec spec;
  std::string region;
  double dt = 0.0;
  int steps = 0;
  std::size_t probe_actions = 0;
  std::size_t probes = 0;
  double remainder_sup = 0.0;        // |H o Phi - h_eps| over the probes
  double displacement_c0 = 0.0;      // sup |Phi - Id| (angles on the torus)
  double action_displacement = 0.0;  // sup |I o Phi - I|
  double displacement_c1 = 0.0;      // C0 + sup |D Phi - Id|_F
  double delta_nf = 0.0;             // 2 x action displacement
  double homological_residual = 0.0;
  double det_error = 0.0;            // max |det D Phi - 1|
  double inverse_error = 0.0;        // max |Phi(Phi^-1 z) - z|, both orders
  double symplectic_defect = 0.0;    // max |J^T Omega J - Omega|
  std::vector<DivisorRecord> divisors;

  std::string to_json() const;
};

/// Immutable once built. Objects created from it (transformed(), mode
/// sources) keep a reference, so the package must stay in place.
class NormalFormPackage {
 public:
  static NormalFormPackage build(const HamiltonianSystem& sys, const PartitionSpec& spec,
                                 const NormalFormOptions& options = {}, Exec exec = default_exec());

  int dim() const { return sys_.dim(); }
  const HamiltonianSystem& system() const { return sys_; }
  const Generator& generator() const { return gen_; }
  const NormalFormRegion& region() const { return region_; }
  const IntegrablePart& averaged_twist() const { return h_eps_; }
  const NormalFormSummary& summary() const { return summary_; }
  const std::vector<PhasePoint>& probes() const { return probes_; }
  bool identity() const { return gen_.trivial(); }

  /// Phi(z), with D Phi in *J (top-left 2n block) when requested.
  PhasePoint transform(const PhasePoint& z, PhaseMatrix* J = nullptr) const;
  PhasePoint inverse(const PhasePoint& z) const;
  /// r = H o Phi - h_eps and its phase-space gradient.
  double remainder(const PhasePoint& z) const;
  void remainder_gradient(const PhasePoint& z, Vec& dtheta, Vec& daction) const;
  /// h_eps + r, i.e. H o Phi, as a split Hamiltonian.
  std::shared_ptr<const SplitHamiltonian> transformed() const;

 private:
  explicit NormalFormPackage(NormalFormRegion region) : region_(std::move(region)) {}
  void flow(PhasePoint& z, double direction, PhaseMatrix* J) const;

  HamiltonianSystem sys_;
  Generator gen_;
  NormalFormRegion region_;
  IntegrablePart h_eps_;
  CompiledField chi_;
  std::shared_ptr<const PerturbedHamiltonian> H_;
  double dt_ = 0.1;
  int steps_ = 10;
  std::vector<PhasePoint> probes_;
  NormalFormSummary summary_;
};

/// C_err |G~|_{C1} (1 + |t| + t^2) |r|_inf.
double nf_error_bound(double Gt_C1, double t, double r_inf, double C_err);

/// sup |G o Phi| + sup |grad (G o Phi)| over the package probes.
double transformed_c1_norm(const TrigPolyField& G, const NormalFormPackage& pkg, Exec exec = default_exec());

/// (2 pi)^n int f_{0,0} c dI, the mass of f_0^D = f_0 c.
double masked_mass(const EnsembleDensity& f0, const DomainCutoff& cutoff, const ActionGrid& grid,
                   Exec exec = default_exec());

/// w ~ f_0 c by thinned rejection sampling; the returned points are
/// z = Phi^{-1}(w), distributed as f~_0 = f_0^D o Phi (normalized).
struct TransformedSamples {
  SampleSet original;     // w
  SampleSet transformed;  // z
};
TransformedSamples transformed_samples(const NormalFormPackage& pkg, const EnsembleDensity& f0, std::size_t count,
                                       const SeededRng& rng, Exec exec = default_exec());

/// Per-sample G~(Phi~^t z) - G~(Psi^t z) averaged over the samples at each
/// time, Phi~ the flow of H o Phi with step dt, Psi the exact flow of h_eps.
/// Multiply by the mass of f_0^D for the unnormalized quantity.
std::vector<MeanEstimate> nf_error_measured(const TrigPolyField& G, const NormalFormPackage& pkg,
                                            const SampleSet& samples, std::span<const double> times, double dt,
                                            Exec exec = default_exec());

struct CErrCalibration {
  std::string source;  // "calibrated" or "override"
  double C_err = 0.0;
  std::vector<double> train_t, train_measured, train_shape;
  double heldout_t = 0.0;
  double heldout_measured = 0.0;
  double heldout_bound = 0.0;
  bool validated = false;

  std::string to_json() const;
};

/// C_err = max over the training times of measured / (|G~|_{C1} (1+t+t^2) |r|),
/// then checked at the held-out time. `measured` has the training times
/// followed by the held-out one.
CErrCalibration calibrate_c_err(std::span<const double> train_t, double heldout_t, std::span<const double> measured,
                                double Gt_C1, double r_inf);
CErrCalibration override_c_err(double C_err);

/// Mode products of G~ = G o Phi and f~_0 = (f_0 c) o Phi from an M^n theta
/// grid at each action (FFT), for |k_j| <= (M-1)/2 and |k|_1 <= max_order
/// (< 0: all resolved). Zero outside the normal-form region.
class NormalFormModeSource final : public ModeSource {
 public:
  NormalFormModeSource(const NormalFormPackage& pkg, const TrigPolyField& G, const TrigPolyField& f0, int M,
                       int max_order = -1);

  int dim() const override { return pkg_.dim(); }
  const std::vector<Wavevector>& modes() const override { return modes_; }
  double multiplicity() const override { return 2.0; }
  void eval(std::span<const double> I, std::span<cplx> a, std::span<CGrad> grad, double* zero) const override;
  std::string describe() const override;

 private:
  const NormalFormPackage& pkg_;
  CompiledField G_, f0_;
  std::shared_ptr<ThetaTransform> T_;
  std::vector<Wavevector> modes_;
  std::vector<std::size_t> pos_, neg_;  // coefficient positions of k and -k
};

/// Mode source in normal-form coordinates: the sampled one, or the masked
/// symbolic products when Phi is the identity.
std::unique_ptr<ModeSource> transformed_mode_source(const NormalFormPackage& pkg, const TrigPolyField& G,
                                                    const TrigPolyField& f0, int M, int max_order = -1);

/// Grid nodes of the normal-form region lying within delta_nf plus one cell
/// diagonal of a node where some coefficient of f_0 is nonzero; elsewhere
/// f~_0 vanishes and the mode products need not be sampled.
std::vector<std::uint8_t> transformed_support(const TrigPolyField& f0, const NormalFormPackage& pkg,
                                              const ActionGrid& grid);

/// Theta points per axis used for normal-form mode sources.
int default_theta_points(int dim);

struct EqChange {
  double normal = 0.0;    // (2 pi)^n int <G~> f~_{0,0} dI
  double original = 0.0;  // (2 pi)^n int <G> (f_0 c)_0 dI
  double error = 0.0;
};

/// E_eq from a normal-form mode source and the masked original products on one grid.
EqChange eq_change_error(const ModeSource& transformed, const TrigPolyField& G, const TrigPolyField& f0,
                         const DomainCutoff& cutoff, const ActionGrid& grid, Exec exec = default_exec());
EqChange eq_change_error(const TrigPolyField& G, const TrigPolyField& f0, const NormalFormPackage& pkg,
                         const ActionGrid& grid, int M = 0, Exec exec = default_exec());

struct PullbackCheck {
  double original = 0.0;     // mean of G(A_t(w))
  double transformed = 0.0;  // mean of G~(B_t(Phi^{-1} w))
  double residual = 0.0;
  double stderr_ = 0.0;      // of the original-side mean
};

/// Both sides of the conjugacy identity on the same points: A the flow of H,
/// B the flow of H o Phi with step `dt_nf`.
PullbackCheck pullback_check(const TrigPolyField& G, const NormalFormPackage& pkg, const TransformedSamples& samples,
                             const Flow& original, double t, double dt_nf, Exec exec = default_exec());

struct IterateStep {
  int step = 0;
  std::size_t generator_modes = 0;
  std::size_t remainder_modes = 0;
  double remainder_sup = 0.0;  // over the package probes
};

/// m <= 3 symbolic Lie steps (series truncated at second order), each
/// re-solving the homological equation for the transformed perturbation.
std::vector<IterateStep> iterate_normal_form(const NormalFormPackage& pkg, int m);

}  // namespace ensdev
