#pragma once

// Orchestration of one experiment: partition, normal form, mixing constant,
// empirical deviation and bound, with every artifact written to a run
// directory and listed in its manifest.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ensdev/bound.hpp"
#include "ensdev/config.hpp"
#include "ensdev/mixing.hpp"

namespace ensdev {

enum class Command { mixing, resonance, normalform, verify };
const char* command_name(Command c);

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitViolated = 2;

struct RunOptions {
  std::filesystem::path out;              // empty: the config's output directory
  std::optional<std::uint64_t> seed;      // overrides the config
  bool dt_check = false;                  // step halving at every row
  std::string timestamp;                  // empty: current UTC time
  std::function<void(const std::string&)> log;
};

struct RunResult {
  Command command = Command::verify;
  double epsilon = 0.0;
  std::filesystem::path dir;
  std::string fingerprint;
  int exit_code = kExitOk;
  std::vector<std::string> files;
  PartitionSpec spec;
  std::optional<double> P_res, C_G, tail, r_inf, E_eq, C_err;
  std::optional<BoundReport> report;
};

/// Runs one command at one epsilon. Throws on hard errors after recording
/// the failure in the manifest of the (partial) run directory.
RunResult run_experiment(const ExperimentConfig& config, Command command, double epsilon, const RunOptions& options);

struct SweepResult {
  std::vector<RunResult> runs;
  std::filesystem::path summary;
  int exit_code = kExitOk;
};

/// verify at every epsilon of the config and a combined summary.csv.
SweepResult run_sweep(const ExperimentConfig& config, const RunOptions& options);

/// Fingerprint of a run: FNV-1a over the canonical config, command, epsilon and seed.
std::string run_fingerprint(const ExperimentConfig& config, Command command, double epsilon, std::uint64_t seed);

/// Times kept by the exponential window (all of them when it is off or epsilon = 0).
std::vector<double> window_times(const ExperimentConfig& config, double epsilon, std::optional<WindowSpec>* window);

}  // namespace ensdev
