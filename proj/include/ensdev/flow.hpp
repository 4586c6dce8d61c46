#pragma once

// Exact twist flow of h, symplectic integration of h + V, and diagnostics
// (Jacobian determinant, conjugacy residual).

#include <Eigen/Core>
#include <functional>
#include <memory>

#include "ensdev/model.hpp"

namespace ensdev {

/// H = h(I) + V(theta, I) with h integrable in closed form.
class SplitHamiltonian {
 public:
  virtual ~SplitHamiltonian() = default;
  virtual int dim() const = 0;
  virtual const IntegrablePart& twist() const = 0;
  /// True when V does not depend on I, so its flow is an exact kick.
  virtual bool kick_only() const = 0;
  virtual double remainder(const PhasePoint& z) const = 0;
  virtual void remainder_gradient(const PhasePoint& z, Vec& dtheta, Vec& daction) const = 0;

  double energy(const PhasePoint& z) const { return twist().energy(z.actions()) + remainder(z); }
};

/// h + f with f a trig polynomial.
class PerturbedHamiltonian final : public SplitHamiltonian {
 public:
  PerturbedHamiltonian(IntegrablePart h, const TrigPolyField& f);
  explicit PerturbedHamiltonian(const HamiltonianSystem& s) : PerturbedHamiltonian(s.integrable, s.perturbation()) {}

  int dim() const override { return h_.dim(); }
  const IntegrablePart& twist() const override { return h_; }
  bool kick_only() const override { return !f_.depends_on_actions(); }
  double remainder(const PhasePoint& z) const override { return f_.empty() ? 0.0 : f_.value(z); }
  void remainder_gradient(const PhasePoint& z, Vec& dtheta, Vec& daction) const override;

 private:
  IntegrablePart h_;
  CompiledField f_;
};

enum class Scheme { strang, implicit_midpoint };
const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& s);

/// Largest number of steps a single evolve call may take.
inline constexpr double kMaxSteps = 1e9;

class Flow {
 public:
  enum class Kind { exact_integrable, symplectic };

  static Flow integrable(IntegrablePart h);
  static Flow symplectic(std::shared_ptr<const SplitHamiltonian> H, double dt, Scheme scheme = Scheme::strang);

  Kind kind() const { return kind_; }
  Scheme scheme() const { return scheme_; }
  double dt() const { return dt_; }
  int dim() const;
  std::string describe() const;
  /// Same flow with a different step (ignored for the exact flow).
  Flow with_dt(double dt) const;

  PhasePoint evolve(const PhasePoint& z, double t) const;
  /// Advances in place; angles are wrapped on return.
  void advance(PhasePoint& z, double t) const;
  double energy(const PhasePoint& z) const;

 private:
  void strang(PhasePoint& z, double h, long long steps) const;
  void midpoint(PhasePoint& z, double h, long long steps) const;
  void potential_substep(PhasePoint& z, double tau) const;

  Kind kind_ = Kind::exact_integrable;
  Scheme scheme_ = Scheme::strang;
  double dt_ = 0.0;
  IntegrablePart h_;
  std::shared_ptr<const SplitHamiltonian> H_;
};

/// Psi_t(theta, I) = (theta + t omega(I), I).
PhasePoint integrable_flow(const PhasePoint& z, double t, const IntegrablePart& h);

/// Implicit midpoint solve z' = z + tau X((z + z') / 2) by fixed-point
/// iteration; X returns (dtheta/dt, dI/dt) at an unwrapped point.
using VectorField = std::function<void(const PhasePoint&, Vec&, Vec&)>;
void implicit_midpoint_step(PhasePoint& z, double tau, const VectorField& X, double tol = 1e-14,
                            int max_iter = 200);

struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> states;
  std::vector<double> energies;
  double max_energy_drift() const;
};

Trajectory record(const Flow& flow, const PhasePoint& z, std::span<const double> times);

/// 2n x 2n Jacobian of z -> map(z) by central differences (angles first).
Eigen::MatrixXd map_jacobian(const std::function<PhasePoint(const PhasePoint&)>& map, const PhasePoint& z,
                             double h = 1e-6);

/// Determinant of the 2n x 2n Jacobian of z -> map(z), central differences.
double map_jacobian_det(const std::function<PhasePoint(const PhasePoint&)>& map, const PhasePoint& z,
                        double h = 1e-6);
double flow_jacobian_det(const Flow& flow, const PhasePoint& z, double t, double h = 1e-6);

/// max over probes of dist(A_t(T(z)), T(B_t(z))).
double conjugacy_residual(const std::function<PhasePoint(const PhasePoint&)>& transform, const Flow& flowA,
                          const Flow& flowB, double t, std::span<const PhasePoint> probes);

/// Step from the flow design rule dt = min(1e-2, 0.1 / sup|omega|) on a grid.
double default_step(const IntegrablePart& h, const ActionGrid& grid);

}  // namespace ensdev
