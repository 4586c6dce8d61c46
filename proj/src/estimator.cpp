#include "ensdev/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <sstream>

namespace ensdev {

namespace {

constexpr std::size_t kBlock = 4096;
constexpr double kMinAcceptance = 1e-4;

std::vector<PhasePoint> propose_block(const CompiledField& f, double bound, const ActionDomain& domain,
                                      const SeededRng& master, std::size_t block,
                                      const std::function<double(const PhasePoint&)>* keep) {
  SeededRng rng(master.seed(), (master.stream() << 32) + block);
  const int n = domain.dim();
  std::vector<PhasePoint> out;
  PhasePoint z;
  z.dim = n;
  for (std::size_t p = 0; p < kBlock; ++p) {
    for (int j = 0; j < n; ++j) z.theta[j] = rng.uniform(0.0, kTwoPi);
    for (int j = 0; j < n; ++j) z.action[j] = rng.uniform(domain.lower()[j], domain.upper()[j]);
    const double u = rng.uniform();
    if (!domain.contains(z.actions())) continue;
    double accept = f.value(z) / bound;
    if (keep && accept > u) accept *= (*keep)(z);
    if (u < accept) out.push_back(z);
  }
  return out;
}

}  // namespace

SampleSet SampleSet::head(std::size_t count) const {
  SampleSet s = *this;
  if (count < s.points.size()) s.points.resize(count);
  return s;
}

static SampleSet sample_impl(const EnsembleDensity& f0, const ActionDomain& domain, std::size_t count,
                             const SeededRng& rng, const std::function<double(const PhasePoint&)>* keep,
                             Exec exec) {
  if (f0.field.dim() != domain.dim()) throw std::invalid_argument("sample_density: dimension mismatch");
  const double bound = f0.sup.bound;
  if (!(bound > 0.0)) throw Error("sample_density: density has no positive sup bound");
  const CompiledField cf(f0.field);

  SampleSet set;
  set.seed = rng.seed();
  set.stream = rng.stream();
  set.points.reserve(count);
  std::size_t next_block = 0, accepted = 0;
  std::size_t batch = 8;
  while (set.points.size() < count) {
    std::vector<std::vector<PhasePoint>> blocks(batch);
    for_each_index(
        batch, [&](std::size_t b) { blocks[b] = propose_block(cf, bound, domain, rng, next_block + b, keep); },
        exec);
    for (auto& blk : blocks) {
      if (set.points.size() >= count) break;
      ++next_block;
      set.proposals += kBlock;
      accepted += blk.size();
      for (const auto& z : blk) {
        if (set.points.size() >= count) break;
        set.points.push_back(z);
      }
    }
    const double rate = double(accepted) / double(set.proposals);
    if (set.proposals >= 100'000 && rate < kMinAcceptance)
      throw Error(fmt::format("sample_density: acceptance rate {:.2e} is below {:g}; the sup bound or the "
                              "proposal box is far too loose",
                              rate, kMinAcceptance));
    const double remaining = double(count - std::min(count, set.points.size()));
    const double per_block = std::max(rate, 1e-6) * double(kBlock);
    batch = std::clamp<std::size_t>(std::size_t(std::ceil(1.1 * remaining / per_block)) + 1, 1, 4096);
  }
  set.acceptance_rate = double(accepted) / double(set.proposals);
  return set;
}

SampleSet sample_density(const EnsembleDensity& f0, const ActionDomain& domain, std::size_t count,
                         const SeededRng& rng, Exec exec) {
  return sample_impl(f0, domain, count, rng, nullptr, exec);
}

SampleSet sample_density_thinned(const EnsembleDensity& f0, const ActionDomain& domain, std::size_t count,
                                 const SeededRng& rng, const std::function<double(const PhasePoint&)>& keep,
                                 Exec exec) {
  return sample_impl(f0, domain, count, rng, &keep, exec);
}

MeanEstimate mean_and_stderr(std::span<const double> values) {
  MeanEstimate e;
  const std::size_t n = values.size();
  if (n == 0) return e;
  e.mean = compensated_sum(values) / double(n);
  if (n < 2) return e;
  CompensatedAccumulator acc;
  for (double v : values) acc.add((v - e.mean) * (v - e.mean));
  e.stderr_ = std::sqrt(acc.value() / double(n - 1) / double(n));
  return e;
}

std::vector<MeanEstimate> ensemble_series(const CompiledField& G, const Flow& flow, const SampleSet& samples,
                                          std::span<const double> times, Exec exec) {
  for (std::size_t j = 1; j < times.size(); ++j)
    if (!(times[j] > times[j - 1])) throw std::invalid_argument("ensemble_series: times must increase");
  const std::size_t N = samples.size(), T = times.size();
  std::vector<double> values(T * N);
  for_each_index(
      N,
      [&](std::size_t i) {
        PhasePoint z = samples.points[i];
        double now = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
          flow.advance(z, times[j] - now);
          now = times[j];
          values[j * N + i] = G.value(z);
        }
      },
      exec);
  std::vector<MeanEstimate> out(T);
  for (std::size_t j = 0; j < T; ++j) out[j] = mean_and_stderr({values.data() + j * N, N});
  return out;
}

MeanEstimate ensemble_average(const CompiledField& G, const Flow& flow, const SampleSet& samples, double t,
                              Exec exec) {
  std::vector<double> values(samples.size());
  for_each_index(
      samples.size(), [&](std::size_t i) { values[i] = G.value(flow.evolve(samples.points[i], t)); }, exec);
  return mean_and_stderr(values);
}

double angular_average(const TrigPolyField& G, std::span<const double> I) {
  return G.zero_mode().evaluate(I).real();
}

double equilibrium_value(const TrigPolyField& G, const TrigPolyField& f0, const ActionGrid& grid, Exec exec) {
  const std::vector<Expr> outs{G.zero_mode(), f0.zero_mode()};
  const Tape tape(outs, grid.dim);
  std::vector<double> terms(grid.size());
  for_each_index(
      grid.size(),
      [&](std::size_t i) {
        if (grid.weights[i] == 0.0) return;
        std::array<cplx, 2> v;
        tape.eval_values(grid.node(i), v);
        terms[i] = grid.weights[i] * v[0].real() * v[1].real();
      },
      exec);
  return std::pow(kTwoPi, grid.dim) * compensated_sum(terms);
}

std::string DeviationSeries::to_csv() const {
  std::ostringstream os;
  os << "t,deviation,stderr,mean,estimator,seed\n";
  for (std::size_t j = 0; j < times.size(); ++j)
    os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", times[j], deviation[j], stderr_[j], mean[j],
                      estimator, seed);
  return os.str();
}

DeviationSeries deviation_series_mc(const TrigPolyField& G, const Flow& flow, const SampleSet& samples,
                                    std::span<const double> times, double equilibrium, Exec exec) {
  const CompiledField cg(G);
  const auto est = ensemble_series(cg, flow, samples, times, exec);
  DeviationSeries s;
  s.times.assign(times.begin(), times.end());
  s.equilibrium = equilibrium;
  s.estimator = fmt::format("monte-carlo({})", samples.size());
  s.seed = samples.seed;
  for (const auto& e : est) {
    s.mean.push_back(e.mean);
    s.deviation.push_back(std::abs(e.mean - equilibrium));
    s.stderr_.push_back(e.stderr_);
  }
  return s;
}

DeviationSeries deviation_series_quadrature(const TrigPolyField& G, const TrigPolyField& f0, const Flow& flow,
                                            const ActionGrid& grid, std::span<const double> times, Exec exec) {
  const int n = grid.dim;
  if (G.dim() != n || f0.dim() != n) throw std::invalid_argument("deviation_series_quadrature: dimension mismatch");
  if (flow.kind() != Flow::Kind::exact_integrable)
    for (double t : times)
      if (t != 0.0) throw Error("quadrature estimator needs the exact integrable flow for t != 0");
  // the theta rule with M points per axis integrates e^{ik.theta} exactly for |k_j| < M
  const int M = G.band_limit() + f0.band_limit() + 1;
  std::size_t cells = 1;
  for (int j = 0; j < n; ++j) cells *= std::size_t(M);
  const CompiledField cg(G), cf(f0);

  DeviationSeries s;
  s.times.assign(times.begin(), times.end());
  s.equilibrium = equilibrium_value(G, f0, grid, exec);
  s.estimator = fmt::format("quadrature(theta={}^{}, {})", M, n, grid.describe());
  const double cell = std::pow(kTwoPi / M, n);
  std::vector<double> terms(grid.size());
  for (double t : times) {
    for_each_index(
        grid.size(),
        [&](std::size_t i) {
          terms[i] = 0.0;
          if (grid.weights[i] == 0.0) return;
          CompensatedAccumulator acc;
          PhasePoint z;
          z.dim = n;
          const auto I = grid.node(i);
          for (int j = 0; j < n; ++j) z.action[j] = I[j];
          for (std::size_t c = 0; c < cells; ++c) {
            std::size_t r = c;
            for (int j = 0; j < n; ++j) {
              z.theta[j] = kTwoPi * double(r % std::size_t(M)) / M;
              r /= std::size_t(M);
            }
            const double w = cf.value(z);
            acc.add(w * cg.value(flow.evolve(z, t)));
          }
          terms[i] = grid.weights[i] * cell * acc.value();
        },
        exec);
    const double mean = compensated_sum(terms);
    s.mean.push_back(mean);
    s.deviation.push_back(std::abs(mean - s.equilibrium));
    s.stderr_.push_back(0.0);
  }
  return s;
}

}  // namespace ensdev
