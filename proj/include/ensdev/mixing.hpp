#pragma once

// Phase mixing: phases phi_k = k.omega(I), the field
// u = div(a grad phi / |grad phi|^2), gamma_k, M_k, |u_k|_{L1} and the
// mixing constant C_G, plus direct oscillatory integrals.

#include <string>
#include <vector>

#include "ensdev/spectral.hpp"

namespace ensdev {

inline constexpr double kGammaFloor = 1e-8;

/// Gradient and Hessian of a real phase at one point.
struct PhaseJet {
  double value = 0.0;
  Vec grad{};
  std::array<double, kMaxDim * kMaxDim> hess{};  // stride kMaxDim
};

/// phi_k = k.omega(I) from the frequency jets of h.
PhaseJet mode_phase(const IntegrablePart& h, std::span<const int> k, std::span<const double> I);

/// u = grad a.grad phi/|grad phi|^2 + a (lap phi/|grad phi|^2 - 2 grad phi^T H grad phi/|grad phi|^4).
cplx u_value(cplx a, const CGrad& grad_a, const PhaseJet& phase, int dim);

/// Spectral norm of the symmetric Hessian block.
double hessian_norm(const PhaseJet& phase, int dim);

/// Evaluator of u for expression-valued a (complex) and phi (real).
class UField {
 public:
  UField(const Expr& a, const Expr& phi, int dim, double gamma_floor = kGammaFloor);
  int dim() const { return dim_; }
  /// Throws Error when |grad phi| < gamma_floor at I.
  cplx operator()(std::span<const double> I) const;
  /// u(I), with phi(I) in *phase when requested.
  cplx value(std::span<const double> I, double* phase) const;
  cplx a(std::span<const double> I, CGrad* grad = nullptr) const;
  PhaseJet phase(std::span<const double> I) const;

 private:
  int dim_;
  double floor_;
  Tape tape_;  // a, phi
};

/// Nodes per wavelength demanded by the resolution guard.
inline constexpr double kNodesPerWavelength = 10.0;

/// Smallest per-axis resolution giving 10 nodes per oscillation of e^{i lambda phi}.
std::vector<int> required_resolution(const Expr& phi, double lambda, const ActionGrid& grid);

/// int a e^{i lambda phi} dI by quadrature; refuses under-resolved grids.
cplx oscillatory_integral(const Expr& a, const Expr& phi, double lambda, const ActionGrid& grid,
                          Exec exec = default_exec());
/// -(1/(i lambda)) int u e^{i lambda phi} dI, the other side of the identity.
cplx integrated_by_parts(const UField& u, const Expr& phi, double lambda, const ActionGrid& grid,
                         Exec exec = default_exec());

struct L1Norms {
  double a = 0.0;
  double grad = 0.0;
};

/// (int |a|, int |grad a|) for an expression.
L1Norms expr_l1_norms(const Expr& a, const ActionGrid& grid, Exec exec = default_exec());
double u_l1_norm(const UField& u, const ActionGrid& grid, Exec exec = default_exec());

struct PhaseBounds {
  double gamma = 0.0;       // certified inf |grad phi| over the support
  double M = 0.0;           // certified sup ||hess phi|| over the support
  double gamma_grid = 0.0;  // raw grid values
  double M_grid = 0.0;
  std::size_t support_nodes = 0;
};

/// gamma = grid inf - M * half cell diagonal; M = grid sup plus the largest
/// increase seen at the half-step probes around each node. Only nodes where
/// `support(i)` holds enter.
PhaseBounds phase_bounds(const std::function<PhaseJet(std::span<const double>)>& phase, int dim,
                         const ActionGrid& grid, const std::function<bool(std::size_t)>& support,
                         Exec exec = default_exec());

/// |grad a|/gamma + (n + 2) M |a|/gamma^2.
double lemma_l1_bound(const L1Norms& norms, double gamma, double M, int dim, double gamma_floor = kGammaFloor);

struct ModeRecord {
  Wavevector k;
  PhaseBounds phase;
  double a_l1 = 0.0;
  double grad_l1 = 0.0;
  double u_l1 = 0.0;
  double lemma = 0.0;
};

struct MixingReport {
  std::vector<ModeRecord> records;  // one per +-pair, counted `multiplicity` times
  double multiplicity = 1.0;
  double C_direct = 0.0;
  double C_lemma = 0.0;
  int K = 0;
  int dim = 0;
  std::string omega;      // domain descriptor
  std::string cutoff;     // how compact support on the domain is obtained
  std::string source;

  std::string to_json() const;
};

/// C_G(K; Omega) = (2 pi)^n sum_{0<|k|_1<=K} |u_k|_{L1} with the lemma bound
/// alongside. Throws listing the offending k when some gamma_k <= floor.
MixingReport mixing_constant(const IntegrablePart& h, const ModeSource& src, int K, const ActionGrid& grid,
                             const std::string& omega, const std::string& cutoff,
                             double gamma_floor = kGammaFloor, Exec exec = default_exec());

}  // namespace ensdev
