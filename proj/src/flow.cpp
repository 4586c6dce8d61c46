#include "ensdev/flow.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fmt/format.h>

namespace ensdev {

PerturbedHamiltonian::PerturbedHamiltonian(IntegrablePart h, const TrigPolyField& f) : h_(std::move(h)), f_(f) {
  if (f.dim() != h_.dim()) throw std::invalid_argument("PerturbedHamiltonian: dimension mismatch");
}

void PerturbedHamiltonian::remainder_gradient(const PhasePoint& z, Vec& dtheta, Vec& daction) const {
  if (f_.empty()) {
    dtheta = {};
    daction = {};
    return;
  }
  FieldJet j;
  f_.eval(z, 1, j);
  dtheta = j.dtheta;
  daction = j.daction;
}

const char* scheme_name(Scheme s) { return s == Scheme::strang ? "strang" : "implicit-midpoint"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "strang" || s == "strang-splitting") return Scheme::strang;
  if (s == "implicit-midpoint" || s == "midpoint") return Scheme::implicit_midpoint;
  throw Error(fmt::format("unknown integration scheme '{}'", s));
}

Flow Flow::integrable(IntegrablePart h) {
  Flow f;
  f.kind_ = Kind::exact_integrable;
  f.h_ = std::move(h);
  return f;
}

Flow Flow::symplectic(std::shared_ptr<const SplitHamiltonian> H, double dt, Scheme scheme) {
  if (!H) throw std::invalid_argument("Flow::symplectic: null Hamiltonian");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("Flow::symplectic: dt must be positive");
  Flow f;
  f.kind_ = Kind::symplectic;
  f.scheme_ = scheme;
  f.dt_ = dt;
  f.h_ = H->twist();
  f.H_ = std::move(H);
  return f;
}

int Flow::dim() const { return h_.dim(); }

std::string Flow::describe() const {
  if (kind_ == Kind::exact_integrable) return "exact-integrable";
  return fmt::format("symplectic({}, dt={})", scheme_name(scheme_), dt_);
}

Flow Flow::with_dt(double dt) const {
  if (kind_ == Kind::exact_integrable) return *this;
  return symplectic(H_, dt, scheme_);
}

double Flow::energy(const PhasePoint& z) const {
  return kind_ == Kind::exact_integrable ? h_.energy(z.actions()) : H_->energy(z);
}

PhasePoint integrable_flow(const PhasePoint& z, double t, const IntegrablePart& h) {
  PhasePoint out = z;
  const Vec w = h.frequency(z.actions());
  for (int j = 0; j < z.dim; ++j) out.theta[j] = wrap_angle(z.theta[j] + t * w[j]);
  return out;
}

PhasePoint Flow::evolve(const PhasePoint& z, double t) const {
  PhasePoint out = z;
  advance(out, t);
  return out;
}

void Flow::advance(PhasePoint& z, double t) const {
  if (z.dim != dim()) throw std::invalid_argument("Flow::advance: dimension mismatch");
  if (!std::isfinite(t)) throw std::invalid_argument("Flow::advance: non-finite time");
  if (t == 0.0) return;
  if (kind_ == Kind::exact_integrable) {
    z = integrable_flow(z, t, h_);
    return;
  }
  const double nsteps = std::ceil(std::abs(t) / dt_ * (1.0 - 1e-12));
  if (nsteps > kMaxSteps)
    throw Error(fmt::format("evolve: {} steps of dt={} exceed the guard of {:g}", nsteps, dt_, kMaxSteps));
  const long long steps = std::max(1LL, static_cast<long long>(nsteps));
  const double h = t / double(steps);
  if (scheme_ == Scheme::strang) strang(z, h, steps);
  else midpoint(z, h, steps);
  for (int j = 0; j < z.dim; ++j) {
    if (!std::isfinite(z.theta[j]) || !std::isfinite(z.action[j]))
      throw Error("evolve: non-finite state encountered");
    z.theta[j] = wrap_angle(z.theta[j]);
  }
}

void Flow::potential_substep(PhasePoint& z, double tau) const {
  const int n = z.dim;
  if (H_->kick_only()) {
    Vec gt, ga;
    H_->remainder_gradient(z, gt, ga);
    for (int j = 0; j < n; ++j) z.action[j] -= tau * gt[j];
    return;
  }
  implicit_midpoint_step(z, tau, [this](const PhasePoint& p, Vec& th, Vec& ac) {
    Vec gt, ga;
    H_->remainder_gradient(p, gt, ga);
    for (int j = 0; j < p.dim; ++j) {
      th[j] = ga[j];
      ac[j] = -gt[j];
    }
  });
}

void Flow::strang(PhasePoint& z, double h, long long steps) const {
  const int n = z.dim;
  // half twist, then (kick, full twist) pairs with the last twist halved
  auto twist = [&](double tau) {
    const Vec w = h_.frequency(z.actions());
    for (int j = 0; j < n; ++j) z.theta[j] += tau * w[j];
  };
  twist(0.5 * h);
  for (long long s = 0; s < steps; ++s) {
    potential_substep(z, h);
    twist(s + 1 < steps ? h : 0.5 * h);
    if ((s & 1023) == 1023)
      for (int j = 0; j < n; ++j) z.theta[j] = wrap_angle(z.theta[j]);
  }
}

void Flow::midpoint(PhasePoint& z, double h, long long steps) const {
  const VectorField X = [this](const PhasePoint& p, Vec& th, Vec& ac) {
    Vec gt, ga;
    H_->remainder_gradient(p, gt, ga);
    const Vec w = h_.frequency(p.actions());
    for (int j = 0; j < p.dim; ++j) {
      th[j] = w[j] + ga[j];
      ac[j] = -gt[j];
    }
  };
  for (long long s = 0; s < steps; ++s) {
    implicit_midpoint_step(z, h, X);
    if ((s & 1023) == 1023)
      for (int j = 0; j < z.dim; ++j) z.theta[j] = wrap_angle(z.theta[j]);
  }
}

void implicit_midpoint_step(PhasePoint& z, double tau, const VectorField& X, double tol, int max_iter) {
  const int n = z.dim;
  Vec vt, va;
  X(z, vt, va);
  PhasePoint next = z;
  for (int j = 0; j < n; ++j) {
    next.theta[j] = z.theta[j] + tau * vt[j];
    next.action[j] = z.action[j] + tau * va[j];
  }
  PhasePoint mid = z;
  for (int it = 0; it < max_iter; ++it) {
    for (int j = 0; j < n; ++j) {
      mid.theta[j] = 0.5 * (z.theta[j] + next.theta[j]);
      mid.action[j] = 0.5 * (z.action[j] + next.action[j]);
    }
    X(mid, vt, va);
    double change = 0.0, scale = 1.0;
    for (int j = 0; j < n; ++j) {
      const double t1 = z.theta[j] + tau * vt[j], a1 = z.action[j] + tau * va[j];
      change = std::max({change, std::abs(t1 - next.theta[j]), std::abs(a1 - next.action[j])});
      scale = std::max({scale, std::abs(t1), std::abs(a1)});
      next.theta[j] = t1;
      next.action[j] = a1;
    }
    if (change <= tol * scale) {
      z = next;
      return;
    }
    if (!std::isfinite(change)) break;
  }
  throw Error(fmt::format("implicit midpoint: fixed-point iteration did not converge (tau={})", tau));
}

double Trajectory::max_energy_drift() const {
  double d = 0.0;
  for (double e : energies) d = std::max(d, std::abs(e - energies.front()));
  return d;
}

Trajectory record(const Flow& flow, const PhasePoint& z, std::span<const double> times) {
  Trajectory tr;
  PhasePoint cur = z;
  double now = 0.0;
  for (double t : times) {
    if (!tr.times.empty() && !(t > tr.times.back())) throw std::invalid_argument("record: times must increase");
    flow.advance(cur, t - now);
    now = t;
    tr.times.push_back(t);
    tr.states.push_back(cur);
    tr.energies.push_back(flow.energy(cur));
  }
  return tr;
}

Eigen::MatrixXd map_jacobian(const std::function<PhasePoint(const PhasePoint&)>& map, const PhasePoint& z, double h) {
  const int n = z.dim;
  Eigen::MatrixXd J(2 * n, 2 * n);
  for (int c = 0; c < 2 * n; ++c) {
    PhasePoint zp = z, zm = z;
    if (c < n) {
      zp.theta[c] += h;
      zm.theta[c] -= h;
    } else {
      zp.action[c - n] += h;
      zm.action[c - n] -= h;
    }
    const PhasePoint a = map(zp), b = map(zm);
    for (int r = 0; r < n; ++r) {
      J(r, c) = angle_difference(a.theta[r], b.theta[r]) / (2 * h);
      J(n + r, c) = (a.action[r] - b.action[r]) / (2 * h);
    }
  }
  return J;
}

double map_jacobian_det(const std::function<PhasePoint(const PhasePoint&)>& map, const PhasePoint& z, double h) {
  return map_jacobian(map, z, h).determinant();
}

double flow_jacobian_det(const Flow& flow, const PhasePoint& z, double t, double h) {
  if (t == 0.0) return 1.0;
  return map_jacobian_det([&](const PhasePoint& p) { return flow.evolve(p, t); }, z, h);
}

double conjugacy_residual(const std::function<PhasePoint(const PhasePoint&)>& transform, const Flow& flowA,
                          const Flow& flowB, double t, std::span<const PhasePoint> probes) {
  double worst = 0.0;
  if (t == 0.0) return 0.0;
  for (const PhasePoint& z : probes) {
    const PhasePoint lhs = flowA.evolve(transform(z), t);
    const PhasePoint rhs = transform(flowB.evolve(z, t));
    worst = std::max(worst, phase_distance(lhs, rhs));
  }
  return worst;
}

double default_step(const IntegrablePart& h, const ActionGrid& grid) {
  double wmax = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec w = h.frequency(grid.node(i));
    double s = 0.0;
    for (int j = 0; j < h.dim(); ++j) s += w[j] * w[j];
    wmax = std::max(wmax, std::sqrt(s));
  }
  return wmax > 0.0 ? std::min(1e-2, 0.1 / wmax) : 1e-2;
}

}  // namespace ensdev
