#pragma once

// Hamiltonians H = h(I) + f(theta, I), observables and ensemble densities as
// finite Fourier series in theta whose coefficients are expressions in I.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ensdev/core.hpp"
#include "ensdev/expr.hpp"

namespace ensdev {

/// Sum over k of c_k(I) exp(i k.theta).
class TrigPolyField {
 public:
  TrigPolyField() = default;
  /// A real field keeps mode(-k) = conj(mode(k)) automatically.
  explicit TrigPolyField(int dim, bool real = true);

  int dim() const { return dim_; }
  bool is_real() const { return real_; }

  /// Adds c(I) e^{ik.theta}; a real field also gets conj(c) e^{-ik.theta}
  /// (and Re c at k = 0).
  void add_mode(const Wavevector& k, const Expr& c);
  /// amp(I) cos(k.theta) and amp(I) sin(k.theta) with real amp.
  void add_cos(const Wavevector& k, const Expr& amp);
  void add_sin(const Wavevector& k, const Expr& amp);
  void add_constant(const Expr& c);

  /// Adds to mode k only; the caller keeps the field real if it must be.
  void accumulate(const Wavevector& k, const Expr& c);

  Expr coeff(const Wavevector& k) const;
  Expr zero_mode() const { return coeff(Wavevector(std::size_t(dim_), 0)); }
  const std::map<Wavevector, Expr>& modes() const { return modes_; }
  bool empty() const { return modes_.empty(); }
  /// Largest |k|_1 present, 0 if none.
  int band_limit() const;
  bool depends_on_actions() const;

  TrigPolyField scaled(cplx s) const;
  TrigPolyField operator+(const TrigPolyField& other) const;
  TrigPolyField operator-(const TrigPolyField& other) const;
  /// Modes with 0 < |k|_1 <= order.
  TrigPolyField oscillating(int order) const;
  /// Modes with |k|_1 > order.
  TrigPolyField above(int order) const;
  TrigPolyField averaged() const;

  /// Direct summation in map order; slow, used as an oracle.
  cplx evaluate(const PhasePoint& z) const;

 private:
  int dim_ = 0;
  bool real_ = true;
  std::map<Wavevector, Expr> modes_;
};

/// Poisson bracket {F, G} = d_theta F . d_I G - d_I F . d_theta G as a
/// trig polynomial (mode convolution with symbolic derivatives).
TrigPolyField poisson_bracket(const TrigPolyField& F, const TrigPolyField& G);

/// Value and derivatives of a real field at a phase point. Phase-space index
/// a in [0, 2n): theta components first, then actions.
struct FieldJet {
  double v = 0.0;
  Vec dtheta{}, daction{};
  std::array<double, 4 * kMaxDim * kMaxDim> h{};
  double hess(int a, int b) const { return h[a * 2 * kMaxDim + b]; }
  double& hess(int a, int b) { return h[a * 2 * kMaxDim + b]; }
};

/// Fast evaluator. Real fields store one representative per +-k pair.
class CompiledField {
 public:
  CompiledField() = default;
  explicit CompiledField(const TrigPolyField& field);

  int dim() const { return dim_; }
  bool is_real() const { return real_; }
  bool empty() const { return ks_.empty(); }
  bool depends_on_actions() const { return action_dependent_; }
  std::size_t term_count() const { return ks_.size(); }

  double value(const PhasePoint& z) const;
  cplx value_complex(const PhasePoint& z) const;
  /// order 1 fills gradients, order 2 also the phase-space Hessian.
  void eval(const PhasePoint& z, int order, FieldJet& out) const;

 private:
  int dim_ = 0;
  bool real_ = true;
  bool action_dependent_ = false;
  Tape tape_;
  std::vector<std::array<int, kMaxDim>> ks_;
  std::vector<double> weight_;
  std::vector<cplx> frozen_;  // coefficient values when independent of I
};

/// h(I) with its frequency map and derivatives.
class IntegrablePart {
 public:
  IntegrablePart() = default;
  IntegrablePart(Expr h, int dim);

  int dim() const { return dim_; }
  const Expr& hamiltonian() const { return h_; }
  const std::vector<Expr>& omega_exprs() const { return omega_; }

  double energy(std::span<const double> I) const;
  Vec frequency(std::span<const double> I) const;
  /// d omega_i / d I_j, row-major n x n.
  std::array<double, kMaxDim * kMaxDim> frequency_jacobian(std::span<const double> I) const;
  /// Jets of omega_1..omega_n (value, gradient, Hessian).
  void frequency_jets(std::span<const double> I, std::span<Jet> out) const;

 private:
  int dim_ = 0;
  Expr h_;
  std::vector<Expr> omega_;
  Tape h_tape_, omega_tape_;
};

struct HamiltonianSystem {
  std::string name;
  IntegrablePart integrable;
  TrigPolyField unit_perturbation;  // f_eps / epsilon
  double epsilon = 0.0;
  ActionDomain domain;

  int dim() const { return integrable.dim(); }
  TrigPolyField perturbation() const { return unit_perturbation.scaled(epsilon); }
  /// Checked frequency map: throws for I outside the domain.
  Vec frequency(std::span<const double> I) const;
  HamiltonianSystem with_epsilon(double eps) const;
};

/// Certified upper estimate of sup |F| over T^n x domain.
struct SupEstimate {
  double probe_max = 0.0;
  double correction = 0.0;  // Lipschitz x half spacing, theta and action parts
  double bound = 0.0;
  double margin = 0.0;      // bound / probe_max - 1
  int theta_points = 0;     // per axis
  std::vector<int> action_points;
  std::string describe() const;
};

struct SupOptions {
  std::vector<int> action_resolution;  // empty: chosen from the dimension
  int theta_points = 0;                // 0: chosen from the dimension
  double target_margin = 0.05;
  double max_probes = 2e7;             // refinement stops before exceeding this
};

SupEstimate certified_sup(const TrigPolyField& field, const ActionDomain& domain,
                          const SupOptions& options = {});

struct EnsembleDensity {
  TrigPolyField field;        // normalized f_0
  double normalization = 1.0; // raw integral that was divided out
  SupEstimate sup;
  double min_probe = 0.0;     // smallest probe value (positivity check)
  double boundary_max = 0.0;  // largest |f_0| on the outer cell layer of the domain
  bool compact_support = false;

  /// Normalizes so that the (theta, I) integral is 1.
  static EnsembleDensity normalize(const TrigPolyField& raw, const ActionDomain& domain,
                                   const ActionGrid& grid, const SupOptions& options = {});
  /// Marginal rho_0(I) = (2pi)^n f_{0,0}(I) as an expression.
  Expr marginal() const;
};

struct Observable {
  TrigPolyField field;
  SupEstimate sup;

  static Observable make(const TrigPolyField& field, const ActionDomain& domain,
                         const SupOptions& options = {});
};

struct Builtin {
  HamiltonianSystem system;
  TrigPolyField density;  // unnormalized
  TrigPolyField observable;
};

std::vector<std::string> builtin_names();
Builtin builtin_system(const std::string& name, double epsilon);

}  // namespace ensdev
