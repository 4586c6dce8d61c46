#include "ensdev/pipeline.hpp"

#include <fftw3.h>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>

#include "json.hpp"
#include "ensdev/estimator.hpp"
#include "ensdev/normalform.hpp"
#include "ensdev/resonance.hpp"
#include "ensdev/spectral.hpp"

namespace ensdev {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* command_name(Command c) {
  switch (c) {
    case Command::mixing: return "mixing";
    case Command::resonance: return "resonance";
    case Command::normalform: return "normalform";
    case Command::verify: return "verify";
  }
  return "?";
}

std::string run_fingerprint(const ExperimentConfig& config, Command command, double epsilon, std::uint64_t seed) {
  const std::string key = fmt::format("{}|{}|{:.17g}|{}|{}", config.canonical(), command_name(command), epsilon, seed,
                                      ENSDEV_VERSION);
  return fmt::format("{:016x}", fnv1a(key));
}

std::vector<double> window_times(const ExperimentConfig& config, double epsilon, std::optional<WindowSpec>* window) {
  if (window) window->reset();
  if (epsilon == 0.0 || !config.window.enabled) return config.times;
  const auto& w = config.window;
  const WindowSpec ws = exp_window(epsilon, w.a, w.c, w.sigma, w.ceiling);
  if (window) *window = ws;
  std::vector<double> kept;
  for (double t : config.times)
    if (ws.contains(t)) kept.push_back(t);
  return kept;
}

namespace {

std::string utc_stamp() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y%m%dT%H%M%SZ}", now);
}

fs::path fresh_dir(const fs::path& base, const std::string& stem) {
  fs::create_directories(base);
  fs::path p = base / stem;
  for (int i = 2; fs::exists(p); ++i) p = base / fmt::format("{}-{}", stem, i);
  fs::create_directories(p);
  return p;
}

json library_versions() {
  json j;
  j["ensdev"] = ENSDEV_VERSION;
  j["fmt"] = fmt::format("{}.{}.{}", FMT_VERSION / 10000, FMT_VERSION / 100 % 100, FMT_VERSION % 100);
  j["eigen"] = fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  j["fftw"] = std::string(fftw_version);
  j["nlohmann_json"] = fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                   NLOHMANN_JSON_VERSION_PATCH);
  j["compiler"] = __VERSION__;
  return j;
}

/// A run directory; every written file is recorded for the manifest.
class RunDir {
 public:
  RunDir(const fs::path& base, const std::string& stem) : dir_(fresh_dir(base, stem)) {}
  const fs::path& path() const { return dir_; }
  const std::vector<std::string>& files() const { return names_; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", (dir_ / name).string()));
    out << content;
    if (!out) throw Error(fmt::format("write failed for {}", (dir_ / name).string()));
    names_.push_back(name);
    sizes_.push_back(content.size());
    hashes_.push_back(fnv1a(content));
  }

  void manifest(json head) {
    auto& fl = head["files"] = json::array();
    for (std::size_t i = 0; i < names_.size(); ++i)
      fl.push_back({{"name", names_[i]}, {"bytes", sizes_[i]}, {"fnv1a", fmt::format("{:016x}", hashes_[i])}});
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << head.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
  std::vector<std::size_t> sizes_;
  std::vector<std::uint64_t> hashes_;
};

class Clock {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::vector<int> mixing_resolution(const ExperimentConfig& c) {
  auto v = c.grids.mixing.empty() ? c.grids.action : c.grids.mixing;
  if (v.size() == 1) v.assign(std::size_t(c.model.system.dim()), v[0]);
  return v;
}

/// Everything one experiment computes, filled stage by stage.
struct Experiment {
  Experiment(const ExperimentConfig& c, Command cmd, double e, std::uint64_t s, bool check,
             std::function<void(const std::string&)> l, RunDir& d)
      : cfg(c), command(cmd), eps(e), seed(s), dt_check(check), log(std::move(l)), out(d) {}

  const ExperimentConfig& cfg;
  Command command;
  double eps;
  std::uint64_t seed;
  bool dt_check;
  std::function<void(const std::string&)> log;
  RunDir& out;

  HamiltonianSystem sys;
  ActionGrid grid, mix_grid;
  std::optional<EnsembleDensity> f0;
  std::optional<Observable> G;
  Schedule schedule;
  std::optional<NormalFormPackage> pkg;
  std::vector<std::string> notes;
  RunResult result;
  Clock clock;

  void say(const std::string& stage, const std::string& msg) {
    if (log) log(fmt::format("[{}] {} ({:.1f} s)", stage, msg, clock.lap()));
  }

  void prepare() {
    sys = cfg.model.at(eps);
    grid = build_grid(sys.domain, cfg.grids.action);
    mix_grid = build_grid(sys.domain, mixing_resolution(cfg));
    f0 = EnsembleDensity::normalize(cfg.model.density, sys.domain, grid);
    G = Observable::make(cfg.model.observable, sys.domain);
    if (f0->min_probe < -1e-12)
      throw Error(fmt::format("density takes negative values (min probe {:.3e})", f0->min_probe));
    if (!f0->compact_support)
      notes.push_back(fmt::format("f_0 does not vanish on the boundary of the action domain (max {:.3e}); the "
                                  "mixing constant omits boundary terms",
                                  f0->boundary_max));
    schedule = cfg.schedule.resolve(eps);
    result.spec = schedule.spec;
    say("prepare", fmt::format("{} eps={:g}, {}; |G| <= {:.4g}", sys.name, eps, schedule.describe(), G->sup.bound));
  }

  // --- resonance -----------------------------------------------------------
  std::optional<PartitionMap> partition;
  ResonantMass mass;

  void resonance() {
    partition = build_partition(sys.integrable, schedule.spec, grid);
    mass = resonant_mass(*f0, *partition);
    result.P_res = std::min(1.0, mass.conservative);
    out.write("partition.csv", partition->to_csv());
    json j;
    j["system"] = sys.name;
    j["epsilon"] = eps;
    j["schedule"] = schedule.describe();
    j["K"] = schedule.spec.K;
    j["alpha"] = schedule.spec.alpha;
    j["grid"] = grid.describe();
    j["lipschitz"] = partition->lipschitz;
    j["band"] = partition->band;
    j["resonant_nodes"] = partition->resonant_count();
    j["P_res_plain"] = mass.plain;
    j["P_res_conservative"] = mass.conservative;
    j["P_res_cut_cell"] = mass.cut_cell;
    j["nonresonant_mass"] = mass.nonresonant;
    j["P_res"] = *result.P_res;
    out.write("resonance.json", j.dump(2) + "\n");
    say("resonance", fmt::format("P_res = {:.6g} (plain {:.6g})", *result.P_res, mass.plain));
  }

  // --- normal form ----------------------------------------------------------
  bool region_empty = false;
  double masked = 0.0;
  double Gt_C1 = 0.0;
  std::optional<CErrCalibration> calibration;
  std::vector<IterateStep> iterates;

  /// True when no weighted node of the mixing grid sees a positive cutoff.
  bool nonresonant_region_empty() const {
    const double w = cfg.normal_form.width > 0.0 ? cfg.normal_form.width
                                                 : default_cutoff_width(sys.domain, schedule.spec.alpha);
    const DomainCutoff c(sys.integrable, schedule.spec, w);
    for (std::size_t i = 0; i < mix_grid.size(); ++i)
      if (mix_grid.weights[i] > 0.0 && c.value(mix_grid.node(i)) > 0.0) return false;
    return true;
  }

  void normal_form(bool calibrate) {
    region_empty = nonresonant_region_empty();
    json j;
    j["epsilon"] = eps;
    j["schedule"] = schedule.describe();
    if (region_empty) {
      notes.push_back("nonresonant region is empty on the grid: every action is resonant, the normal form, mixing, "
                      "tail and equilibrium terms vanish and the bound reduces to 2 |G| P_res");
      j["status"] = "skipped: nonresonant region empty";
      out.write("normalform.json", j.dump(2) + "\n");
      say("normalform", "nonresonant region empty, skipped");
      return;
    }
    pkg.emplace(NormalFormPackage::build(sys, schedule.spec, cfg.normal_form));
    const auto& s = pkg->summary();
    say("normalform", fmt::format("|r| = {:.3e}, identity = {}", s.remainder_sup, pkg->identity()));
    j["status"] = pkg->identity() ? "identity" : "built";
    j["summary"] = json::parse(s.to_json());

    masked = masked_mass(*f0, pkg->region().cutoff, grid);
    Gt_C1 = transformed_c1_norm(G->field, *pkg);
    j["masked_mass"] = masked;
    j["Gtilde_C1"] = Gt_C1;
    if (cfg.assumption.enabled) {
      result.r_inf = cfg.assumption.C_nf * eps * std::exp(-cfg.assumption.c_nf * schedule.spec.K);
      j["r_source"] = "assumed";
    } else {
      result.r_inf = s.remainder_sup;
      j["r_source"] = "measured";
    }
    j["r_inf"] = *result.r_inf;

    if (calibrate) {
      if (cfg.calibration.C_err) {
        calibration = override_c_err(*cfg.calibration.C_err);
      } else if (cfg.assumption.enabled) {
        calibration = override_c_err(1.0);
      } else if (pkg->identity() || masked == 0.0) {
        calibration = override_c_err(0.0);
        calibration->source = "identity";
      } else {
        const auto samples = transformed_samples(*pkg, *f0, cfg.calibration.samples, SeededRng(seed, 1u << 20));
        std::vector<double> ts = cfg.calibration.train;
        ts.push_back(cfg.calibration.heldout);
        const auto m = nf_error_measured(G->field, *pkg, samples.transformed, ts, cfg.calibration.dt);
        std::vector<double> measured;
        for (const auto& e : m) measured.push_back((std::abs(e.mean) + 3.0 * e.stderr_) * masked);
        calibration = calibrate_c_err(cfg.calibration.train, cfg.calibration.heldout, measured, Gt_C1, *result.r_inf);
        if (!calibration->validated)
          notes.push_back(fmt::format("C_err calibration failed its held-out check at t = {:g}",
                                      cfg.calibration.heldout));
      }
      result.C_err = calibration->C_err;
      j["calibration"] = json::parse(calibration->to_json());
      say("calibration", fmt::format("C_err = {:.4g} ({})", calibration->C_err, calibration->source));
    }
    if (cfg.iterate > 0) {
      iterates = iterate_normal_form(*pkg, cfg.iterate);
      auto& it = j["iterate"] = json::array();
      for (const auto& st : iterates)
        it.push_back({{"step", st.step},
                      {"generator_modes", st.generator_modes},
                      {"remainder_modes", st.remainder_modes},
                      {"remainder_sup", st.remainder_sup}});
    }
    out.write("normalform.json", j.dump(2) + "\n");
  }

  // --- mixing -----------------------------------------------------------------
  double E_eq = 0.0;
  std::string coordinates = "normal-form";
  bool identity = false;

  void mixing() {
    const int K = schedule.spec.K;
    MixingReport rep;
    double tl = 0.0;
    if (eps == 0.0) {
      const FieldModeSource src(G->field, f0->field);
      rep = mixing_constant(sys.integrable, src, K, mix_grid, sys.domain.describe(), "compact support of f_0");
      tl = tail(src, K, mix_grid);
      coordinates = "original";
      identity = true;
    } else if (region_empty) {
      rep.K = K;
      rep.dim = sys.dim();
      rep.omega = "empty nonresonant region";
      rep.cutoff = "none";
      rep.source = "none";
      coordinates = "original";
      identity = true;
    } else {
      const int M = cfg.grids.theta_points > 0 ? cfg.grids.theta_points : default_theta_points(sys.dim());
      const auto src = transformed_mode_source(*pkg, G->field, f0->field, M);
      const auto active = transformed_support(f0->field, *pkg, mix_grid);
      const TabulatedModeSource tab(*src, mix_grid, default_exec(), &active);
      say("mixing", fmt::format("tabulated {} modes on {}", tab.modes().size(), mix_grid.describe()));
      rep = mixing_constant(pkg->averaged_twist(), tab, K, mix_grid, pkg->region().describe(),
                            pkg->region().cutoff.describe());
      tl = tail(tab, K, mix_grid);
      E_eq = eq_change_error(tab, G->field, f0->field, pkg->region().cutoff, mix_grid).error;
      identity = pkg->identity();
    }
    result.C_G = rep.C_direct;
    result.tail = tl;
    result.E_eq = E_eq;
    json j = json::parse(rep.to_json());
    j["tail"] = tl;
    j["E_eq"] = E_eq;
    j["coordinates"] = coordinates;
    out.write("mixing.json", j.dump(2) + "\n");
    say("mixing", fmt::format("C_G = {:.4g} (lemma {:.4g}), tail = {:.3e}, E_eq = {:.3e}", rep.C_direct, rep.C_lemma,
                              tl, E_eq));
  }

  // --- verification -----------------------------------------------------------
  void verify() {
    std::optional<WindowSpec> window;
    const auto times = window_times(cfg, eps, &window);
    if (times.empty()) throw Error("no time of the grid lies inside the exponential window");
    if (times.size() < cfg.times.size())
      notes.push_back(fmt::format("{} time(s) beyond the window t_max = {:.4g} dropped", cfg.times.size() - times.size(),
                                  window->t_max));

    const bool exact = eps == 0.0 || sys.unit_perturbation.empty();
    const double dt = cfg.estimator.dt > 0.0 ? cfg.estimator.dt : default_step(sys.integrable, grid);
    const Flow flow = exact ? Flow::integrable(sys.integrable)
                            : Flow::symplectic(std::make_shared<PerturbedHamiltonian>(sys), dt, cfg.estimator.scheme);
    const double eq = equilibrium_value(G->field, f0->field, grid);

    DeviationSeries series;
    std::optional<SampleSet> samples;
    if (cfg.estimator.kind == "quadrature") {
      series = deviation_series_quadrature(G->field, f0->field, flow, grid, times);
    } else {
      samples = sample_density(*f0, sys.domain, cfg.estimator.samples, SeededRng(seed, 0));
      series = deviation_series_mc(G->field, flow, *samples, times, eq);
    }
    series.seed = seed;
    say("empirical", fmt::format("{} with {}", series.estimator, flow.describe()));

    BoundInputs in;
    in.G_sup = G->sup.bound;
    in.P_res = eps == 0.0 ? 0.0 : result.P_res.value_or(0.0);
    in.C_G = cfg.zero_mixing ? 0.0 : result.C_G.value_or(0.0);
    in.tail = result.tail.value_or(0.0);
    in.Gt_C1 = Gt_C1;
    in.r_inf = result.r_inf.value_or(0.0);
    in.C_err = result.C_err.value_or(0.0);
    in.E_eq = E_eq;
    in.coordinates = coordinates;
    in.identity_transform = identity;
    in.r_source = cfg.assumption.enabled ? "assumed" : "measured";
    in.c_err_source = calibration ? calibration->source : "none";
    if (cfg.zero_mixing) notes.push_back("fault injection: mixing constant forced to 0");

    BoundReport rep = assemble(in, series, result.fingerprint);
    rep.window = window;
    rep.notes = notes;

    bool beyond = false;
    for (const auto& r : rep.rows) beyond = beyond || r.empirical - 3.0 * r.stderr_ > r.total;
    if (exact) {
      verdict_table(rep, std::vector<double>(rep.rows.size(), 0.0));
    } else if (beyond || dt_check) {
      const Flow half = flow.with_dt(0.5 * dt);
      const auto fine = deviation_series_mc(G->field, half, *samples, times, eq);
      std::vector<double> disc;
      for (std::size_t j = 0; j < times.size(); ++j) disc.push_back(std::abs(series.mean[j] - fine.mean[j]));
      verdict_table(rep, disc);
      say("dt-check", fmt::format("max |mean(dt) - mean(dt/2)| = {:.3e}", *std::max_element(disc.begin(), disc.end())));
    }

    out.write("deviation.csv", series.to_csv());
    out.write("bound.json", rep.to_json() + "\n");
    out.write("verdict.csv", rep.verdict_csv());
    out.write("plot.csv", rep.plot_csv());
    std::size_t holds = 0;
    for (const auto& r : rep.rows) holds += r.verdict == "holds" || r.verdict == "holds-within-3sigma";
    say("verify", fmt::format("{}/{} rows hold", holds, rep.rows.size()));
    if (rep.any_violated()) result.exit_code = kExitViolated;
    result.report = std::move(rep);
  }

  void run() {
    prepare();
    switch (command) {
      case Command::resonance:
        if (eps == 0.0) throw Error("the resonance partition needs epsilon > 0");
        resonance();
        break;
      case Command::normalform:
        if (eps == 0.0) throw Error("the normal form needs epsilon > 0");
        normal_form(true);
        break;
      case Command::mixing:
        if (eps > 0.0) normal_form(false);
        mixing();
        break;
      case Command::verify:
        if (eps > 0.0) {
          resonance();
          normal_form(true);
        }
        mixing();
        verify();
        break;
    }
  }
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, Command command, double epsilon, const RunOptions& options) {
  const std::uint64_t seed = options.seed.value_or(config.estimator.seed);
  const std::string fp = run_fingerprint(config, command, epsilon, seed);
  const std::string stamp = options.timestamp.empty() ? utc_stamp() : options.timestamp;
  const fs::path base = options.out.empty() ? fs::path(config.output) : options.out;
  RunDir dir(base, fmt::format("run-{}-{}", stamp, fp.substr(0, 8)));
  dir.write("config.yaml", config.text);

  json head;
  head["tool"] = "ensdev";
  head["command"] = command_name(command);
  head["created"] = stamp;
  head["fingerprint"] = fp;
  head["config_origin"] = config.origin;
  head["config"] = "config.yaml";
  head["epsilon"] = epsilon;
  head["seed"] = seed;
  head["threads"] = thread_count();
  head["exec"] = exec_name(default_exec());
  head["versions"] = library_versions();

  Experiment ex{config, command, epsilon, seed, options.dt_check || config.dt_check, options.log, dir};
  ex.result.command = command;
  ex.result.epsilon = epsilon;
  ex.result.dir = dir.path();
  ex.result.fingerprint = fp;
  try {
    ex.run();
  } catch (const std::exception& e) {
    head["status"] = "failed";
    head["error"] = e.what();
    head["exit_code"] = kExitError;
    dir.manifest(head);
    throw;
  }
  head["status"] = "ok";
  head["exit_code"] = ex.result.exit_code;
  dir.manifest(head);
  ex.result.files = dir.files();
  ex.result.files.push_back("manifest.json");
  return std::move(ex.result);
}

SweepResult run_sweep(const ExperimentConfig& config, const RunOptions& options) {
  const std::uint64_t seed = options.seed.value_or(config.estimator.seed);
  const std::string stamp = options.timestamp.empty() ? utc_stamp() : options.timestamp;
  const std::string fp = fmt::format("{:016x}", fnv1a(fmt::format("{}|sweep|{}|{}", config.canonical(), seed, ENSDEV_VERSION)));
  const fs::path base = options.out.empty() ? fs::path(config.output) : options.out;
  RunDir dir(base, fmt::format("sweep-{}-{}", stamp, fp.substr(0, 8)));
  dir.write("config.yaml", config.text);

  SweepResult sw;
  RunOptions sub = options;
  sub.out = dir.path();
  sub.timestamp = stamp;
  std::string csv = "epsilon,K,alpha,P_res,C_G,tail,r_inf,C_err,E_eq,rows,holds,within_3sigma,violated,inconclusive,"
                    "max_ratio,run\n";
  auto num = [](const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : std::string(); };
  json runs = json::array();
  for (double eps : config.epsilons) {
    auto r = run_experiment(config, Command::verify, eps, sub);
    std::size_t counts[4] = {0, 0, 0, 0};
    double ratio = 0.0;
    for (const auto& row : r.report->rows) {
      const std::string& v = row.verdict;
      counts[v == "holds" ? 0 : v == "holds-within-3sigma" ? 1 : v == "violated" ? 2 : 3]++;
      if (row.total > 0.0) ratio = std::max(ratio, row.empirical / row.total);
    }
    const std::string rel = r.dir.filename().string();
    csv += fmt::format("{:.17g},{},{:.17g},{},{},{},{},{},{},{},{},{},{},{},{:.17g},{}\n", eps, r.spec.K, r.spec.alpha,
                       num(r.P_res), num(r.C_G), num(r.tail), num(r.r_inf), num(r.C_err), num(r.E_eq),
                       r.report->rows.size(), counts[0], counts[1], counts[2], counts[3], ratio, rel);
    runs.push_back({{"epsilon", eps}, {"dir", rel}, {"fingerprint", r.fingerprint}, {"exit_code", r.exit_code}});
    if (r.exit_code == kExitViolated) sw.exit_code = kExitViolated;
    sw.runs.push_back(std::move(r));
  }
  dir.write("summary.csv", csv);
  json head;
  head["tool"] = "ensdev";
  head["command"] = "sweep";
  head["created"] = stamp;
  head["fingerprint"] = fp;
  head["config_origin"] = config.origin;
  head["config"] = "config.yaml";
  head["seed"] = seed;
  head["versions"] = library_versions();
  head["runs"] = runs;
  head["status"] = "ok";
  head["exit_code"] = sw.exit_code;
  dir.manifest(head);
  sw.summary = dir.path() / "summary.csv";
  return sw;
}

}  // namespace ensdev
