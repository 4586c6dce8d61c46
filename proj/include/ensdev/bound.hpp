#pragma once

// The five-term deviation bound, the exponential time window and the
// verdict table comparing it with an empirical deviation series.

#include <optional>
#include <string>
#include <vector>

#include "ensdev/estimator.hpp"

namespace ensdev {

struct WindowSpec {
  double epsilon = 0.0;
  double a = 0.0;
  double c = 0.0;
  double sigma = 0.0;
  double t_max_raw = 0.0;  // exp(sigma eps^-a), may be inf
  double ceiling = 0.0;
  double t_max = 0.0;      // clamped to the ceiling

  bool contains(double t) const { return std::abs(t) <= t_max; }
  /// C eps exp(-(c - 2 sigma) eps^-a).
  double envelope(double C) const;
};

/// Rejects sigma outside (0, c/2), a <= 0 and eps outside (0, 1).
WindowSpec exp_window(double eps, double a, double c, double sigma, double ceiling = 1e12);

/// Everything the bound needs, already in consistent coordinates.
struct BoundInputs {
  double G_sup = 0.0;   // certified sup |G|
  double P_res = 0.0;   // resonant mass of f_0
  double C_G = 0.0;     // mixing constant
  double tail = 0.0;    // R_{>K}
  double Gt_C1 = 0.0;   // |G~|_{C1}
  double r_inf = 0.0;   // remainder used in E_nf
  double C_err = 0.0;
  double E_eq = 0.0;
  /// "normal-form" when C_G and the tail were computed for (G~, f~_0);
  /// "original" is accepted only when the transform is the identity.
  std::string coordinates = "normal-form";
  bool identity_transform = false;
  std::string r_source = "measured";  // or "assumed"
  std::string c_err_source = "calibrated";
};

struct BoundRow {
  double t = 0.0;
  double empirical = 0.0;
  double stderr_ = 0.0;
  double term_res = 0.0, term_mix = 0.0, term_tail = 0.0, term_nf = 0.0, term_eq = 0.0;
  double total = 0.0;
  std::optional<double> discretization;  // |mean(dt) - mean(dt/2)| when checked
  std::string verdict;
};

struct BoundReport {
  BoundInputs inputs;
  std::vector<BoundRow> rows;
  std::string fingerprint;
  std::optional<WindowSpec> window;
  std::string estimator;
  std::vector<std::string> notes;

  bool any_violated() const;
  std::string to_json() const;
  /// t, empirical, stderr, five terms, total, discretization, verdict.
  std::string verdict_csv() const;
  /// t, empirical, stderr, term_res, term_mix, term_tail, term_nf, term_eq, total.
  std::string plot_csv() const;
};

/// Builds one row per time of the series (all t must be nonzero). Throws
/// when the mixing inputs are not in normal-form coordinates although the
/// transform is not the identity.
BoundReport assemble(const BoundInputs& inputs, const DeviationSeries& empirical, const std::string& fingerprint = "");

/// Verdicts: "holds" if empirical <= total, "holds-within-3sigma" if
/// empirical - 3 stderr <= total, "violated" if beyond that and the step
/// halving check shows a discretization error <= stderr, "inconclusive"
/// otherwise. `discretization` (one per row, may be empty) comes from the
/// step halving check; the exact flow passes zeros.
void verdict_table(BoundReport& report, std::span<const double> discretization);

}  // namespace ensdev
