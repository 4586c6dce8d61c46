#include "ensdev/config.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ensdev/spectral.hpp"

namespace ensdev {

ConfigError::ConfigError(const std::string& origin, int line, int column, const std::string& message)
    : Error(fmt::format("{}:{}:{}: {}", origin, line, column, message)), line_(line), column_(column) {}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Schedule ScheduleSpec::resolve(double eps) const {
  if (kind == "zz") return zz_schedule(eps, beta, s0);
  if (kind == "power") return power_schedule(eps, a, prefactor, alpha);
  return explicit_schedule(K, alpha);
}

namespace {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg, int extra_column = 0) const {
    const auto m = n.Mark();
    throw ConfigError(origin_, m.line + 1, m.column + 1 + extra_column, msg);
  }
  [[noreturn]] void fail(const YAML::Mark& m, const std::string& msg) const {
    throw ConfigError(origin_, m.line + 1, m.column + 1, msg);
  }

  void keys(const YAML::Node& map, const std::string& where, std::initializer_list<const char*> allowed) const {
    if (!map.IsMap()) fail(map, fmt::format("'{}' must be a mapping", where));
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!ok.count(key))
        fail(kv.first, fmt::format("unknown key '{}' in {} (allowed: {})", key, where, fmt::join(ok, ", ")));
    }
  }

  double number(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, fmt::format("{} must be a number", what));
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, fmt::format("{} must be a number (got '{}')", what, n.Scalar()));
    }
  }
  double positive(const YAML::Node& n, const std::string& what) const {
    const double v = number(n, what);
    if (!(v > 0.0) || !std::isfinite(v)) fail(n, fmt::format("{} must be positive (got {})", what, v));
    return v;
  }
  long long integer(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, fmt::format("{} must be an integer", what));
    try {
      return n.as<long long>();
    } catch (const YAML::Exception&) {
      fail(n, fmt::format("{} must be an integer (got '{}')", what, n.Scalar()));
    }
  }
  bool boolean(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, fmt::format("{} must be true or false", what));
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, fmt::format("{} must be true or false (got '{}')", what, n.Scalar()));
    }
  }
  std::string text(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, fmt::format("{} must be a string", what));
    return n.Scalar();
  }
  std::vector<double> numbers(const YAML::Node& n, const std::string& what) const {
    std::vector<double> v;
    if (n.IsScalar()) return {number(n, what)};
    if (!n.IsSequence()) fail(n, fmt::format("{} must be a number or a list of numbers", what));
    for (const auto& x : n) v.push_back(number(x, what));
    return v;
  }
  std::vector<int> integers(const YAML::Node& n, const std::string& what, int lo) const {
    std::vector<int> v;
    if (n.IsScalar()) {
      v.push_back(int(integer(n, what)));
    } else {
      if (!n.IsSequence()) fail(n, fmt::format("{} must be an integer or a list of integers", what));
      for (const auto& x : n) v.push_back(int(integer(x, what)));
    }
    for (int x : v)
      if (x < lo) fail(n, fmt::format("{} entries must be >= {}", what, lo));
    return v;
  }

  Expr expression(const YAML::Node& n, int dim, const std::string& what) const {
    if (n.IsScalar() && n.Tag() != "!") {
      // plain numbers are accepted without quotes
      try {
        return Expr(n.as<double>());
      } catch (const YAML::Exception&) {
      }
    }
    const std::string s = text(n, what);
    try {
      return parse_expression(s, dim);
    } catch (const ParseError& e) {
      fail(n, fmt::format("{}: {}", what, e.what()), int(e.position()) + (n.Tag() == "!" ? 1 : 0));
    }
  }

  ActionDomain domain(const YAML::Node& n, int dim) const {
    keys(n, "domain", {"ball", "box"});
    if (n.size() != 1) fail(n, "domain needs exactly one of 'ball' or 'box'");
    try {
      if (n["ball"]) {
        const auto& b = n["ball"];
        keys(b, "domain.ball", {"center", "radius"});
        if (!b["center"] || !b["radius"]) fail(b, "domain.ball needs 'center' and 'radius'");
        const auto c = numbers(b["center"], "domain.ball.center");
        if (int(c.size()) != dim) fail(b["center"], fmt::format("domain.ball.center needs {} entries", dim));
        return ActionDomain::ball(c, positive(b["radius"], "domain.ball.radius"));
      }
      const auto& b = n["box"];
      keys(b, "domain.box", {"lower", "upper"});
      if (!b["lower"] || !b["upper"]) fail(b, "domain.box needs 'lower' and 'upper'");
      const auto lo = numbers(b["lower"], "domain.box.lower"), hi = numbers(b["upper"], "domain.box.upper");
      if (int(lo.size()) != dim || int(hi.size()) != dim) fail(b, fmt::format("domain.box bounds need {} entries", dim));
      return ActionDomain::box(lo, hi);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(n, e.what());
    }
  }

  /// List of {k: [..], cos|sin|coeff: expr}.
  TrigPolyField field(const YAML::Node& n, int dim, const std::string& what) const {
    if (!n.IsSequence() || n.size() == 0) fail(n, fmt::format("{} must be a non-empty list of modes", what));
    TrigPolyField f(dim);
    for (const auto& m : n) {
      keys(m, what + " mode", {"k", "cos", "sin", "coeff"});
      if (!m["k"]) fail(m, fmt::format("{} mode needs 'k'", what));
      const auto kn = m["k"];
      Wavevector k;
      if (!kn.IsSequence()) fail(kn, "k must be a list of integers");
      for (const auto& x : kn) k.push_back(int(integer(x, "k entry")));
      if (int(k.size()) != dim) fail(kn, fmt::format("k needs {} entries (got {})", dim, k.size()));
      int terms = 0;
      const bool zero = std::all_of(k.begin(), k.end(), [](int x) { return x == 0; });
      if (m["cos"]) {
        ++terms;
        const Expr c = expression(m["cos"], dim, what + " cos amplitude");
        if (zero) f.add_constant(c);
        else f.add_cos(k, c);
      }
      if (m["sin"]) {
        ++terms;
        if (zero) fail(m["sin"], "sin term needs a nonzero k");
        f.add_sin(k, expression(m["sin"], dim, what + " sin amplitude"));
      }
      if (m["coeff"]) {
        ++terms;
        const Expr c = expression(m["coeff"], dim, what + " coefficient");
        if (zero) f.add_constant(c);
        else f.add_mode(k, c);
      }
      if (terms == 0) fail(m, fmt::format("{} mode needs one of 'cos', 'sin' or 'coeff'", what));
    }
    return f;
  }

 private:
  std::string origin_;
};

std::string json_number(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  Reader rd(origin);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    rd.fail(e.mark, e.msg);
  }
  if (!root.IsMap()) throw ConfigError(origin, 1, 1, "configuration must be a mapping");
  rd.keys(root, "the configuration",
          {"name", "system", "density", "observable", "epsilon", "schedule", "times", "estimator", "grids",
           "normal_form", "calibration", "assumption", "window", "fault", "dt_check", "output"});

  ExperimentConfig cfg;
  cfg.origin = origin;
  cfg.text = text;
  if (root["name"]) cfg.name = rd.text(root["name"], "name");

  // system
  if (!root["system"]) rd.fail(root, "missing required key 'system'");
  const auto sys = root["system"];
  rd.keys(sys, "system", {"builtin", "name", "dim", "h", "domain", "perturbation"});
  auto& model = cfg.model;
  if (sys["builtin"]) {
    for (const char* k : {"dim", "h", "domain", "perturbation"})
      if (sys[k]) rd.fail(sys[k], fmt::format("system.{} cannot be combined with system.builtin", k));
    const auto name = rd.text(sys["builtin"], "system.builtin");
    const auto names = builtin_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
      rd.fail(sys["builtin"], fmt::format("unknown builtin system '{}' (known: {})", name, fmt::join(names, ", ")));
    const auto b = builtin_system(name, 0.0);
    model.name = name;
    model.source = "builtin";
    model.system = b.system;
    model.density = b.density;
    model.observable = b.observable;
  } else {
    for (const char* k : {"dim", "h", "domain", "perturbation"})
      if (!sys[k]) rd.fail(sys, fmt::format("inline system needs '{}' (or use 'builtin')", k));
    const long long dim = rd.integer(sys["dim"], "system.dim");
    if (dim < 1 || dim > kMaxDim) rd.fail(sys["dim"], fmt::format("system.dim must lie in [1, {}]", kMaxDim));
    const int n = int(dim);
    model.name = sys["name"] ? rd.text(sys["name"], "system.name") : "inline";
    model.source = "inline";
    model.system.name = model.name;
    model.system.integrable = IntegrablePart(rd.expression(sys["h"], n, "system.h"), n);
    model.system.domain = rd.domain(sys["domain"], n);
    model.system.unit_perturbation = rd.field(sys["perturbation"], n, "system.perturbation");
  }
  const int n = model.system.dim();
  if (root["density"]) model.density = rd.field(root["density"], n, "density");
  if (root["observable"]) model.observable = rd.field(root["observable"], n, "observable");
  if (model.source == "inline" && (!root["density"] || !root["observable"]))
    rd.fail(root, "an inline system needs 'density' and 'observable'");
  if (!model.observable.is_real() || !model.density.is_real()) rd.fail(root, "density and observable must be real");

  // epsilon
  if (!root["epsilon"]) rd.fail(root, "missing required key 'epsilon'");
  cfg.epsilons = rd.numbers(root["epsilon"], "epsilon");
  if (cfg.epsilons.empty()) rd.fail(root["epsilon"], "epsilon list is empty");
  for (double e : cfg.epsilons)
    if (!(e >= 0.0 && e < 1.0)) rd.fail(root["epsilon"], fmt::format("epsilon must lie in [0, 1) (got {})", e));

  // schedule
  if (!root["schedule"]) rd.fail(root, "missing required key 'schedule'");
  {
    const auto s = root["schedule"];
    rd.keys(s, "schedule", {"kind", "K", "alpha", "beta", "s0", "a", "prefactor"});
    if (!s["kind"]) rd.fail(s, "schedule needs 'kind' (zz, power or explicit)");
    auto& sc = cfg.schedule;
    sc.kind = rd.text(s["kind"], "schedule.kind");
    if (sc.kind == "explicit") {
      if (!s["K"] || !s["alpha"]) rd.fail(s, "explicit schedule needs 'K' and 'alpha'");
      const long long K = rd.integer(s["K"], "schedule.K");
      if (K < 1) rd.fail(s["K"], "schedule.K must be at least 1");
      sc.K = int(K);
      sc.alpha = rd.positive(s["alpha"], "schedule.alpha");
    } else if (sc.kind == "zz") {
      if (s["beta"]) sc.beta = rd.number(s["beta"], "schedule.beta");
      if (s["s0"]) sc.s0 = rd.positive(s["s0"], "schedule.s0");
      if (!(sc.beta > 0.0 && sc.beta < 1.0)) rd.fail(s["beta"], "schedule.beta must lie in (0, 1)");
    } else if (sc.kind == "power") {
      if (!s["alpha"]) rd.fail(s, "power schedule needs 'alpha'");
      sc.alpha = rd.positive(s["alpha"], "schedule.alpha");
      if (s["a"]) sc.a = rd.positive(s["a"], "schedule.a");
      if (s["prefactor"]) sc.prefactor = rd.positive(s["prefactor"], "schedule.prefactor");
    } else {
      rd.fail(s["kind"], fmt::format("unknown schedule kind '{}' (zz, power or explicit)", sc.kind));
    }
    for (double e : cfg.epsilons)
      if (e == 0.0 && sc.kind != "explicit") rd.fail(s["kind"], "epsilon = 0 needs an explicit schedule");
  }

  // times
  if (!root["times"]) rd.fail(root, "missing required key 'times'");
  {
    const auto t = root["times"];
    if (t.IsMap()) {
      rd.keys(t, "times", {"from", "to", "points", "spacing"});
      if (!t["from"] || !t["to"] || !t["points"]) rd.fail(t, "times range needs 'from', 'to' and 'points'");
      const double lo = rd.positive(t["from"], "times.from"), hi = rd.positive(t["to"], "times.to");
      const long long m = rd.integer(t["points"], "times.points");
      if (m < 1 || hi < lo) rd.fail(t, "times range needs points >= 1 and to >= from");
      const std::string sp = t["spacing"] ? rd.text(t["spacing"], "times.spacing") : "log";
      if (sp != "log" && sp != "linear") rd.fail(t["spacing"], "times.spacing must be 'log' or 'linear'");
      for (long long i = 0; i < m; ++i) {
        const double u = m == 1 ? 0.0 : double(i) / double(m - 1);
        cfg.times.push_back(sp == "log" ? lo * std::pow(hi / lo, u) : lo + (hi - lo) * u);
      }
    } else {
      cfg.times = rd.numbers(t, "times");
    }
    if (cfg.times.empty()) rd.fail(t, "times list is empty");
    for (std::size_t i = 0; i < cfg.times.size(); ++i) {
      if (!(cfg.times[i] > 0.0)) rd.fail(t, "times must be positive (the bound is undefined at t = 0)");
      if (i && !(cfg.times[i] > cfg.times[i - 1])) rd.fail(t, "times must be strictly increasing");
    }
  }

  // estimator
  if (const auto e = root["estimator"]) {
    rd.keys(e, "estimator", {"kind", "samples", "seed", "dt", "scheme"});
    auto& es = cfg.estimator;
    if (e["kind"]) {
      es.kind = rd.text(e["kind"], "estimator.kind");
      if (es.kind != "monte-carlo" && es.kind != "quadrature")
        rd.fail(e["kind"], "estimator.kind must be 'monte-carlo' or 'quadrature'");
      if (es.kind == "quadrature")
        for (double x : cfg.epsilons)
          if (x != 0.0) rd.fail(e["kind"], "the quadrature estimator needs the exact flow (epsilon = 0)");
    }
    if (e["samples"]) {
      const long long s = rd.integer(e["samples"], "estimator.samples");
      if (s < 2) rd.fail(e["samples"], "estimator.samples must be at least 2");
      es.samples = std::size_t(s);
    }
    if (e["seed"]) {
      try {
        es.seed = e["seed"].as<std::uint64_t>();
      } catch (const YAML::Exception&) {
        rd.fail(e["seed"], "estimator.seed must be an unsigned integer");
      }
    }
    if (e["dt"]) {
      if (e["dt"].IsScalar() && e["dt"].Scalar() == "auto") es.dt = 0.0;
      else es.dt = rd.positive(e["dt"], "estimator.dt");
    }
    if (e["scheme"]) {
      try {
        es.scheme = parse_scheme(rd.text(e["scheme"], "estimator.scheme"));
      } catch (const Error& x) {
        rd.fail(e["scheme"], x.what());
      }
    }
  }

  // grids
  if (const auto g = root["grids"]) {
    rd.keys(g, "grids", {"action", "mixing", "theta_points"});
    auto fit = [&](const YAML::Node& node, const char* what) {
      auto v = rd.integers(node, what, 2);
      if (v.size() == 1) v.assign(std::size_t(n), v[0]);
      if (int(v.size()) != n) rd.fail(node, fmt::format("{} needs 1 or {} entries", what, n));
      return v;
    };
    if (g["action"]) cfg.grids.action = fit(g["action"], "grids.action");
    if (g["mixing"]) cfg.grids.mixing = fit(g["mixing"], "grids.mixing");
    if (g["theta_points"]) {
      const long long m = rd.integer(g["theta_points"], "grids.theta_points");
      if (m < 3) rd.fail(g["theta_points"], "grids.theta_points must be at least 3");
      cfg.grids.theta_points = int(m);
    }
  }
  if (cfg.grids.action.size() == 1) cfg.grids.action.assign(std::size_t(n), cfg.grids.action[0]);

  // normal form
  if (const auto f = root["normal_form"]) {
    rd.keys(f, "normal_form", {"dt", "width", "margin", "probe_resolution", "probe_theta", "check_probes", "iterate"});
    auto& o = cfg.normal_form;
    if (f["dt"]) o.dt = rd.positive(f["dt"], "normal_form.dt");
    if (f["width"]) o.width = rd.positive(f["width"], "normal_form.width");
    if (f["margin"]) o.margin = rd.positive(f["margin"], "normal_form.margin");
    if (f["probe_resolution"]) o.probe_resolution = rd.integers(f["probe_resolution"], "normal_form.probe_resolution", 2);
    if (f["probe_theta"]) o.probe_theta = int(rd.integers(f["probe_theta"], "normal_form.probe_theta", 2)[0]);
    if (f["check_probes"]) o.check_probes = int(rd.integers(f["check_probes"], "normal_form.check_probes", 1)[0]);
    if (f["iterate"]) {
      const long long m = rd.integer(f["iterate"], "normal_form.iterate");
      if (m < 0 || m > 3) rd.fail(f["iterate"], "normal_form.iterate must lie in [0, 3]");
      cfg.iterate = int(m);
    }
  }

  if (const auto c = root["calibration"]) {
    rd.keys(c, "calibration", {"samples", "train", "heldout", "dt", "C_err"});
    auto& cs = cfg.calibration;
    if (c["samples"]) {
      const long long s = rd.integer(c["samples"], "calibration.samples");
      if (s < 2) rd.fail(c["samples"], "calibration.samples must be at least 2");
      cs.samples = std::size_t(s);
    }
    if (c["train"]) {
      cs.train = rd.numbers(c["train"], "calibration.train");
      if (cs.train.empty()) rd.fail(c["train"], "calibration.train is empty");
      for (std::size_t i = 0; i < cs.train.size(); ++i)
        if (!(cs.train[i] > 0.0) || (i && !(cs.train[i] > cs.train[i - 1])))
          rd.fail(c["train"], "calibration.train must be positive and increasing");
    }
    if (c["heldout"]) cs.heldout = rd.positive(c["heldout"], "calibration.heldout");
    if (!(cs.heldout > cs.train.back())) rd.fail(c, "calibration.heldout must exceed the training times");
    if (c["dt"]) cs.dt = rd.positive(c["dt"], "calibration.dt");
    if (c["C_err"]) {
      const double v = rd.number(c["C_err"], "calibration.C_err");
      if (!(v >= 0.0)) rd.fail(c["C_err"], "calibration.C_err must be non-negative");
      cs.C_err = v;
    }
  }

  if (const auto a = root["assumption"]) {
    rd.keys(a, "assumption", {"C_nf", "c_nf"});
    if (!a["C_nf"] || !a["c_nf"]) rd.fail(a, "assumption mode needs 'C_nf' and 'c_nf'");
    cfg.assumption.enabled = true;
    cfg.assumption.C_nf = rd.number(a["C_nf"], "assumption.C_nf");
    cfg.assumption.c_nf = rd.number(a["c_nf"], "assumption.c_nf");
    if (!(cfg.assumption.C_nf >= 0.0)) rd.fail(a["C_nf"], "assumption.C_nf must be non-negative");
    if (!(cfg.assumption.c_nf > 0.0)) rd.fail(a["c_nf"], "assumption.c_nf must be positive");
  }

  if (const auto w = root["window"]) {
    rd.keys(w, "window", {"enabled", "a", "c", "sigma", "ceiling"});
    auto& ws = cfg.window;
    if (w["enabled"]) ws.enabled = rd.boolean(w["enabled"], "window.enabled");
    if (w["a"]) ws.a = rd.positive(w["a"], "window.a");
    if (w["c"]) ws.c = rd.positive(w["c"], "window.c");
    if (w["sigma"]) ws.sigma = rd.positive(w["sigma"], "window.sigma");
    if (w["ceiling"]) ws.ceiling = rd.positive(w["ceiling"], "window.ceiling");
    if (!(ws.sigma < 0.5 * ws.c))
      rd.fail(w["sigma"] ? w["sigma"] : w, fmt::format("window.sigma must lie in (0, c/2) = (0, {})", 0.5 * ws.c));
  }

  if (const auto f = root["fault"]) {
    rd.keys(f, "fault", {"zero_mixing"});
    if (f["zero_mixing"]) cfg.zero_mixing = rd.boolean(f["zero_mixing"], "fault.zero_mixing");
  }
  if (root["dt_check"]) cfg.dt_check = rd.boolean(root["dt_check"], "dt_check");
  if (root["output"]) cfg.output = rd.text(root["output"], "output");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open config '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string ExperimentConfig::canonical() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  auto& m = j["model"];
  m["name"] = model.name;
  m["source"] = model.source;
  m["h"] = model.system.integrable.hamiltonian().to_string();
  m["domain"] = model.system.domain.describe();
  m["perturbation"] = nlohmann::ordered_json::parse(mode_table_json(model.system.unit_perturbation));
  m["density"] = nlohmann::ordered_json::parse(mode_table_json(model.density));
  m["observable"] = nlohmann::ordered_json::parse(mode_table_json(model.observable));
  std::vector<std::string> eps, ts;
  for (double e : epsilons) eps.push_back(json_number(e));
  for (double t : times) ts.push_back(json_number(t));
  j["epsilon"] = eps;
  j["times"] = ts;
  j["schedule"] = {{"kind", schedule.kind},       {"K", schedule.K},
                   {"alpha", json_number(schedule.alpha)}, {"beta", json_number(schedule.beta)},
                   {"s0", json_number(schedule.s0)},       {"a", json_number(schedule.a)},
                   {"prefactor", json_number(schedule.prefactor)}};
  j["estimator"] = {{"kind", estimator.kind},
                    {"samples", estimator.samples},
                    {"seed", estimator.seed},
                    {"dt", json_number(estimator.dt)},
                    {"scheme", scheme_name(estimator.scheme)}};
  j["grids"] = {{"action", grids.action}, {"mixing", grids.mixing}, {"theta_points", grids.theta_points}};
  const auto& o = normal_form;
  j["normal_form"] = {{"dt", json_number(o.dt)},
                      {"width", json_number(o.width)},
                      {"margin", json_number(o.margin)},
                      {"probe_resolution", o.probe_resolution},
                      {"probe_theta", o.probe_theta},
                      {"check_probes", o.check_probes},
                      {"iterate", iterate}};
  std::vector<std::string> tr;
  for (double t : calibration.train) tr.push_back(json_number(t));
  j["calibration"] = {{"samples", calibration.samples},
                      {"train", tr},
                      {"heldout", json_number(calibration.heldout)},
                      {"dt", json_number(calibration.dt)},
                      {"C_err", calibration.C_err ? json_number(*calibration.C_err) : std::string("calibrated")}};
  j["assumption"] = {{"enabled", assumption.enabled},
                     {"C_nf", json_number(assumption.C_nf)},
                     {"c_nf", json_number(assumption.c_nf)}};
  j["window"] = {{"enabled", window.enabled},
                 {"a", json_number(window.a)},
                 {"c", json_number(window.c)},
                 {"sigma", json_number(window.sigma)},
                 {"ceiling", json_number(window.ceiling)}};
  j["fault"] = {{"zero_mixing", zero_mixing}};
  j["dt_check"] = dt_check;
  return j.dump();
}

}  // namespace ensdev
