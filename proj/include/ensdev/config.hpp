#pragma once

// Experiment configuration: a YAML file naming the system, density,
// observable, epsilon list, schedule, time grid and numerical settings.
// Every schema error carries the line and column of the offending node.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ensdev/flow.hpp"
#include "ensdev/normalform.hpp"
#include "ensdev/resonance.hpp"

namespace ensdev {

class ConfigError : public Error {
 public:
  ConfigError(const std::string& origin, int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

struct ModelSpec {
  std::string name;
  std::string source;  // "builtin" or "inline"
  HamiltonianSystem system;  // epsilon is set per run
  TrigPolyField density;     // unnormalized
  TrigPolyField observable;

  HamiltonianSystem at(double eps) const { return system.with_epsilon(eps); }
};

struct ScheduleSpec {
  std::string kind = "explicit";  // zz, power, explicit
  int K = 1;
  double alpha = 0.1;
  double beta = 0.5, s0 = 1.0;   // zz
  double a = 0.5, prefactor = 1.0;  // power

  Schedule resolve(double eps) const;
};

struct EstimatorSpec {
  std::string kind = "monte-carlo";  // or "quadrature" (epsilon = 0 only)
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  double dt = 0.0;  // 0: design rule
  Scheme scheme = Scheme::strang;
};

struct GridSpec {
  std::vector<int> action{60};  // density, partition and quadrature grid
  std::vector<int> mixing;      // mixing and tail grid; empty: same as action
  int theta_points = 0;         // normal-form mode source; 0: from the dimension
};

struct CalibrationSpec {
  std::size_t samples = 200;
  std::vector<double> train{1.0, 2.0, 5.0, 10.0};
  double heldout = 20.0;
  double dt = 0.05;                  // step of the transformed flow
  std::optional<double> C_err;       // override
};

struct AssumptionSpec {
  bool enabled = false;
  double C_nf = 1.0;
  double c_nf = 0.0;
};

struct WindowConfig {
  bool enabled = true;
  double a = 0.5, c = 1.0, sigma = 0.25, ceiling = 1e12;
};

struct ExperimentConfig {
  std::string origin;  // file name used in messages
  std::string text;    // raw file content
  std::string name = "experiment";
  ModelSpec model;
  std::vector<double> epsilons;
  ScheduleSpec schedule;
  std::vector<double> times;
  EstimatorSpec estimator;
  GridSpec grids;
  NormalFormOptions normal_form;
  int iterate = 0;  // symbolic Lie steps reported next to the package
  CalibrationSpec calibration;
  AssumptionSpec assumption;
  WindowConfig window;
  bool zero_mixing = false;  // fault injection: C_G forced to 0
  bool dt_check = false;
  std::string output = "runs";

  /// Canonical text of every setting, the basis of the fingerprint.
  std::string canonical() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

/// FNV-1a, 64 bit.
std::uint64_t fnv1a(std::string_view data);

}  // namespace ensdev
