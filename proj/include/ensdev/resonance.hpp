#pragma once

// Resonant zone N = {I : min_k |k.omega(I)|/|k|_2 < alpha, 0 < |k|_1 <= K},
// its complement D, the resonant mass and the parameter schedules.

#include <optional>
#include <string>
#include <vector>

#include "ensdev/model.hpp"
#include "ensdev/parallel.hpp"

namespace ensdev {

struct PartitionSpec {
  int K = 1;
  double alpha = 0.0;

  void validate() const;
  std::string describe() const;
};

struct Resonance {
  bool resonant = false;
  Wavevector k;           // argmin, one representative of the +-pair
  double distance = 0.0;  // min over k of |k.omega| / |k|_2
};

/// Enumerated half set of wavevectors with their Euclidean norms.
class ResonanceWeb {
 public:
  ResonanceWeb(int dim, int K);
  int dim() const { return dim_; }
  int order() const { return K_; }
  std::size_t size() const { return ks_.size(); }
  const Wavevector& k(std::size_t i) const { return ks_[i]; }
  double norm(std::size_t i) const { return norms_[i]; }

  /// (argmin index, distance) of omega.
  std::pair<std::size_t, double> nearest(std::span<const double> omega) const;

 private:
  int dim_ = 0, K_ = 0;
  std::vector<Wavevector> ks_;
  std::vector<double> norms_;
};

Resonance is_resonant(std::span<const double> I, const PartitionSpec& spec, const IntegrablePart& h);
Resonance is_resonant(std::span<const double> I, const PartitionSpec& spec, const IntegrablePart& h,
                      const ResonanceWeb& web);

/// sup over the grid of the spectral norm of D omega, a Lipschitz constant of
/// I -> omega(I) (inflated by 5% for the gaps between nodes).
double frequency_lipschitz(const IntegrablePart& h, const ActionGrid& grid);

struct PartitionMap {
  PartitionSpec spec;
  ActionGrid grid;
  ResonanceWeb web{1, 1};
  std::vector<std::uint8_t> resonant;      // distance < alpha
  std::vector<std::uint8_t> conservative;  // distance < alpha + Lip * half cell diagonal
  std::vector<std::uint32_t> nearest;      // index into web
  std::vector<double> distance;
  std::vector<double> fraction;  // resonant share of each cell, distance linearized across the cell
  double lipschitz = 0.0;
  double band = 0.0;  // Lip * half cell diagonal

  std::size_t resonant_count() const;
  std::string to_csv() const;
};

/// Volume of {u in [0,1]^m : sum c_j u_j <= t} for c_j > 0.
double cube_slice_volume(std::span<const double> c, double t);

PartitionMap build_partition(const IntegrablePart& h, const PartitionSpec& spec, const ActionGrid& grid,
                             Exec exec = default_exec());

struct ResonantMass {
  double plain = 0.0;         // over nodes flagged resonant
  double conservative = 0.0;  // over nodes in the widened band
  double nonresonant = 0.0;   // complement of plain
  double cut_cell = 0.0;      // weighted by the resonant share of each cell
};

/// (2 pi)^n int_N f_{0,0} dI by quadrature on the partition grid.
ResonantMass resonant_mass(const EnsembleDensity& f0, const PartitionMap& map, Exec exec = default_exec());

struct Schedule {
  std::string kind;  // "zz", "power" or "explicit"
  PartitionSpec spec;
  std::optional<double> r;
  std::string describe() const;
};

Schedule zz_schedule(double eps, double beta, double s0);
Schedule power_schedule(double eps, double a, double prefactor, double alpha);
Schedule explicit_schedule(int K, double alpha);

/// Smooth mask of D: c(I) = prod_k psi((d_k(I) - (alpha - w)) / w) with psi a
/// smooth step from 0 to 1, d_k = |k.omega|/|k|_2. c = 1 on D and c = 0 where
/// some d_k <= alpha - w, hence 1 - c <= 1_N.
class DomainCutoff {
 public:
  DomainCutoff(IntegrablePart h, PartitionSpec spec, double width);

  double width() const { return w_; }
  const PartitionSpec& spec() const { return spec_; }
  /// Value and I-gradient.
  double value(std::span<const double> I, Vec* grad = nullptr) const;
  /// Smallest d_k at I.
  double min_distance(std::span<const double> I) const;
  std::string describe() const;

 private:
  IntegrablePart h_;
  PartitionSpec spec_;
  ResonanceWeb web_;
  double w_;
};

/// Transition width rule: min(fraction * diameter, alpha / 2).
double default_cutoff_width(const ActionDomain& domain, double alpha, double fraction = 0.05);

/// C-infinity step: 0 for s <= 0, 1 for s >= 1; derivative in *ds.
double smooth_step(double s, double* ds = nullptr);

}  // namespace ensdev
