#pragma once

// Ensemble expectations <G>_t by pushing samples of f_0 forward, angular
// averages, the equilibrium value and empirical deviation series.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ensdev/flow.hpp"
#include "ensdev/parallel.hpp"

namespace ensdev {

struct SampleSet {
  std::vector<PhasePoint> points;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::size_t proposals = 0;
  double acceptance_rate = 0.0;

  std::size_t size() const { return points.size(); }
  SampleSet head(std::size_t count) const;
};

/// Rejection sampling from uniform on T^n x domain against the certified
/// sup bound of f_0. Proposals come in fixed blocks, block b drawing from
/// stream (seed, stream + b), so the set does not depend on the thread count.
SampleSet sample_density(const EnsembleDensity& f0, const ActionDomain& domain, std::size_t count,
                         const SeededRng& rng, Exec exec = default_exec());

/// Same, with samples weighted by an extra factor in [0, 1] (thinning).
SampleSet sample_density_thinned(const EnsembleDensity& f0, const ActionDomain& domain, std::size_t count,
                                 const SeededRng& rng, const std::function<double(const PhasePoint&)>& keep,
                                 Exec exec = default_exec());

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error of values (compensated, order independent).
MeanEstimate mean_and_stderr(std::span<const double> values);

MeanEstimate ensemble_average(const CompiledField& G, const Flow& flow, const SampleSet& samples, double t,
                              Exec exec = default_exec());

/// <G>_t at every time of an increasing grid; each sample is advanced
/// incrementally from one time to the next.
std::vector<MeanEstimate> ensemble_series(const CompiledField& G, const Flow& flow, const SampleSet& samples,
                                          std::span<const double> times, Exec exec = default_exec());

/// Zero Fourier coefficient G_0(I).
double angular_average(const TrigPolyField& G, std::span<const double> I);

/// (2 pi)^n int G_0 f_{0,0} dI.
double equilibrium_value(const TrigPolyField& G, const TrigPolyField& f0, const ActionGrid& grid,
                         Exec exec = default_exec());

struct DeviationSeries {
  std::vector<double> times;
  std::vector<double> deviation;
  std::vector<double> stderr_;
  std::vector<double> mean;
  double equilibrium = 0.0;
  std::string estimator;  // "monte-carlo(N)" or "quadrature(...)"
  std::uint64_t seed = 0;

  std::string to_csv() const;
};

DeviationSeries deviation_series_mc(const TrigPolyField& G, const Flow& flow, const SampleSet& samples,
                                    std::span<const double> times, double equilibrium, Exec exec = default_exec());

/// Deterministic quadrature over a (theta, I) grid; only for the exact
/// integrable flow or t = 0. The theta rule is exact for the band limits.
DeviationSeries deviation_series_quadrature(const TrigPolyField& G, const TrigPolyField& f0, const Flow& flow,
                                            const ActionGrid& grid, std::span<const double> times,
                                            Exec exec = default_exec());

}  // namespace ensdev
