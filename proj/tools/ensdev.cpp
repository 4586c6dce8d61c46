// ensdev: certify ensemble deviation bounds from a YAML experiment file.
//
//   ensdev verify --config configs/quickstart.yaml --out runs
//   ensdev sweep --config configs/sweep.yaml
//
// Exit codes: 0 ok, 1 error, 2 some bound row violated.

#include <fmt/format.h>

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "ensdev/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool dt_check = false;
  bool serial = false;
  bool quiet = false;
  std::optional<double> epsilon;
};

void add_flags(CLI::App* cmd, Flags& f, bool single) {
  cmd->add_option("--config", f.config, "experiment file (YAML)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "base directory for run directories (default: the config's 'output')");
  cmd->add_option("--seed", f.seed, "sampling seed, overrides the config");
  cmd->add_option("--threads", f.threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--serial", f.serial, "use the serial reference kernels");
  cmd->add_flag("--quiet", f.quiet, "no progress lines on stderr");
  if (single) {
    cmd->add_option("--epsilon", f.epsilon, "pick one epsilon (required when the config lists several)");
    cmd->add_flag("--dt-check", f.dt_check, "step-halving check at every row");
  } else {
    cmd->add_flag("--dt-check", f.dt_check, "step-halving check at every row of every run");
  }
}

double pick_epsilon(const ensdev::ExperimentConfig& cfg, const Flags& f) {
  if (f.epsilon) return *f.epsilon;
  if (cfg.epsilons.size() != 1)
    throw ensdev::Error(fmt::format("the config lists {} epsilons; pass --epsilon or use 'sweep'", cfg.epsilons.size()));
  return cfg.epsilons[0];
}

void print_report(const ensdev::RunResult& r) {
  fmt::print("run: {}\n", r.dir.string());
  if (r.P_res) fmt::print("P_res = {:.6g}  (K = {}, alpha = {:.6g})\n", *r.P_res, r.spec.K, r.spec.alpha);
  if (r.r_inf) fmt::print("|r|_inf = {:.4e}\n", *r.r_inf);
  if (r.C_G) fmt::print("C_G = {:.6g}, tail = {:.4e}, E_eq = {:.4e}\n", *r.C_G, r.tail.value_or(0.0), r.E_eq.value_or(0.0));
  if (!r.report) return;
  fmt::print("{:>10} {:>12} {:>10} {:>12}  {}\n", "t", "empirical", "stderr", "bound", "verdict");
  for (const auto& row : r.report->rows)
    fmt::print("{:>10.4g} {:>12.5e} {:>10.3e} {:>12.5e}  {}\n", row.t, row.empirical, row.stderr_, row.total, row.verdict);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble deviation bounds for nearly integrable Hamiltonian flows"};
  app.set_version_flag("--version", ENSDEV_VERSION);
  app.require_subcommand(1);

  Flags f;
  struct Sub {
    const char* name;
    const char* help;
    ensdev::Command cmd;
  };
  const Sub subs[] = {
      {"mixing", "mixing constant and tail only", ensdev::Command::mixing},
      {"resonance", "resonant partition and P_res only", ensdev::Command::resonance},
      {"normalform", "normal-form package summary only", ensdev::Command::normalform},
      {"verify", "full pipeline: bound, empirical deviation and verdicts", ensdev::Command::verify},
  };
  std::vector<std::pair<CLI::App*, ensdev::Command>> single;
  for (const auto& s : subs) {
    auto* c = app.add_subcommand(s.name, s.help);
    add_flags(c, f, true);
    single.emplace_back(c, s.cmd);
  }
  auto* sweep = app.add_subcommand("sweep", "verify at every epsilon of the config, plus summary.csv");
  add_flags(sweep, f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : ensdev::kExitError;
  }

  try {
    if (f.threads > 0) ensdev::set_thread_count(f.threads);
    if (f.serial) ensdev::set_default_exec(ensdev::Exec::serial);
    const auto cfg = ensdev::load_config(f.config);
    ensdev::RunOptions opt;
    opt.out = f.out;
    opt.seed = f.seed;
    opt.dt_check = f.dt_check;
    if (!f.quiet) opt.log = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };

    if (sweep->parsed()) {
      const auto sw = ensdev::run_sweep(cfg, opt);
      for (const auto& r : sw.runs) print_report(r);
      fmt::print("summary: {}\n", sw.summary.string());
      return sw.exit_code;
    }
    for (const auto& [c, cmd] : single) {
      if (!c->parsed()) continue;
      const auto r = ensdev::run_experiment(cfg, cmd, pick_epsilon(cfg, f), opt);
      print_report(r);
      return r.exit_code;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "ensdev: error: {}\n", e.what());
    return ensdev::kExitError;
  }
  return ensdev::kExitError;
}
