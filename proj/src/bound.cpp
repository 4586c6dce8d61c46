#include "ensdev/bound.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "json.hpp"

namespace ensdev {

double WindowSpec::envelope(double C) const { return C * epsilon * std::exp(-(c - 2.0 * sigma) * std::pow(epsilon, -a)); }

WindowSpec exp_window(double eps, double a, double c, double sigma, double ceiling) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error(fmt::format("window: epsilon must lie in (0, 1) (got {})", eps));
  if (!(a > 0.0)) throw Error(fmt::format("window: a must be positive (got {})", a));
  if (!(c > 0.0)) throw Error(fmt::format("window: c must be positive (got {})", c));
  if (!(sigma > 0.0) || !(sigma < 0.5 * c))
    throw Error(fmt::format("window: sigma must lie in (0, c/2) = (0, {}) (got {})", 0.5 * c, sigma));
  if (!(ceiling > 0.0)) throw Error("window: ceiling must be positive");
  WindowSpec w;
  w.epsilon = eps;
  w.a = a;
  w.c = c;
  w.sigma = sigma;
  w.ceiling = ceiling;
  w.t_max_raw = std::exp(sigma * std::pow(eps, -a));
  w.t_max = std::min(w.t_max_raw, ceiling);
  return w;
}

bool BoundReport::any_violated() const {
  for (const auto& r : rows)
    if (r.verdict == "violated") return true;
  return false;
}

BoundReport assemble(const BoundInputs& in, const DeviationSeries& emp, const std::string& fingerprint) {
  if (in.coordinates != "normal-form" && !(in.coordinates == "original" && in.identity_transform))
    throw Error(fmt::format("bound: mixing constant and tail are in '{}' coordinates but the normal-form transform "
                            "is not the identity; recompute them for (G o Phi, f_0^D o Phi)",
                            in.coordinates));
  for (double v : {in.G_sup, in.P_res, in.C_G, in.tail, in.Gt_C1, in.r_inf, in.C_err, in.E_eq})
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(fmt::format("bound: input term {} is not a finite non-negative number", v));
  BoundReport rep;
  rep.inputs = in;
  rep.fingerprint = fingerprint;
  rep.estimator = emp.estimator;
  for (std::size_t j = 0; j < emp.times.size(); ++j) {
    const double t = emp.times[j];
    if (t == 0.0) throw Error("bound: the mixing term is undefined at t = 0");
    const double a = std::abs(t);
    BoundRow r;
    r.t = t;
    r.empirical = emp.deviation[j];
    r.stderr_ = emp.stderr_[j];
    r.term_res = 2.0 * in.G_sup * in.P_res;
    r.term_mix = in.C_G / a;
    r.term_tail = in.tail;
    r.term_nf = in.C_err * in.Gt_C1 * (1.0 + a + a * a) * in.r_inf;
    r.term_eq = in.E_eq;
    r.total = r.term_res + r.term_mix + r.term_tail + r.term_nf + r.term_eq;
    rep.rows.push_back(r);
  }
  verdict_table(rep, {});
  return rep;
}

void verdict_table(BoundReport& report, std::span<const double> discretization) {
  if (!discretization.empty() && discretization.size() != report.rows.size())
    throw std::invalid_argument("verdict_table: one discretization error per row expected");
  for (std::size_t j = 0; j < report.rows.size(); ++j) {
    auto& r = report.rows[j];
    if (!discretization.empty()) r.discretization = discretization[j];
    if (r.empirical <= r.total) r.verdict = "holds";
    else if (r.empirical - 3.0 * r.stderr_ <= r.total) r.verdict = "holds-within-3sigma";
    else if (r.discretization && *r.discretization <= r.stderr_) r.verdict = "violated";
    else r.verdict = "inconclusive";
  }
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::string BoundReport::verdict_csv() const {
  std::string s = "t,empirical,stderr,term_res,term_mix,term_tail,term_nf,term_eq,total,discretization,verdict\n";
  for (const auto& r : rows)
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", num(r.t), num(r.empirical), num(r.stderr_), num(r.term_res),
                     num(r.term_mix), num(r.term_tail), num(r.term_nf), num(r.term_eq), num(r.total),
                     r.discretization ? num(*r.discretization) : std::string(), r.verdict);
  return s;
}

std::string BoundReport::plot_csv() const {
  std::string s = "t,empirical,stderr,term_res,term_mix,term_tail,term_nf,term_eq,total\n";
  for (const auto& r : rows)
    s += fmt::format("{},{},{},{},{},{},{},{},{}\n", num(r.t), num(r.empirical), num(r.stderr_), num(r.term_res),
                     num(r.term_mix), num(r.term_tail), num(r.term_nf), num(r.term_eq), num(r.total));
  return s;
}

std::string BoundReport::to_json() const {
  nlohmann::ordered_json j;
  j["fingerprint"] = fingerprint;
  j["estimator"] = estimator;
  j["notes"] = notes;
  auto& in = j["inputs"];
  in["G_sup"] = inputs.G_sup;
  in["P_res"] = inputs.P_res;
  in["C_G"] = inputs.C_G;
  in["tail"] = inputs.tail;
  in["Gtilde_C1"] = inputs.Gt_C1;
  in["r_inf"] = inputs.r_inf;
  in["r_source"] = inputs.r_source;
  in["C_err"] = inputs.C_err;
  in["C_err_source"] = inputs.c_err_source;
  in["E_eq"] = inputs.E_eq;
  in["coordinates"] = inputs.coordinates;
  in["identity_transform"] = inputs.identity_transform;
  if (window) {
    auto& w = j["window"];
    w["a"] = window->a;
    w["c"] = window->c;
    w["sigma"] = window->sigma;
    w["t_max"] = window->t_max;
    w["t_max_unclamped"] = std::isfinite(window->t_max_raw) ? nlohmann::ordered_json(window->t_max_raw)
                                                             : nlohmann::ordered_json("inf");
    w["ceiling"] = window->ceiling;
    w["nf_envelope_unit"] = window->envelope(1.0);
  }
  auto& rs = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["t"] = r.t;
    o["empirical"] = r.empirical;
    o["stderr"] = r.stderr_;
    o["term_res"] = r.term_res;
    o["term_mix"] = r.term_mix;
    o["term_tail"] = r.term_tail;
    o["term_nf"] = r.term_nf;
    o["term_eq"] = r.term_eq;
    o["total"] = r.total;
    o["discretization"] = r.discretization ? nlohmann::ordered_json(*r.discretization) : nlohmann::ordered_json();
    o["verdict"] = r.verdict;
    rs.push_back(std::move(o));
  }
  j["violated"] = any_violated();
  return j.dump(2);
}

}  // namespace ensdev
