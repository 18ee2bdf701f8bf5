#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "sbt/classical.hpp"
#include "sbt/eigen.hpp"
#include "sbt/errors.hpp"
#include "sbt/io.hpp"
#include "sbt/stochastic.hpp"
#include "sbt/systems.hpp"
#include "sbt/todachain.hpp"
#include "sbt/verify.hpp"

namespace sbt::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HypothesisViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kSubcommands = {"classical-flow", "eigen-scan",  "simulate",
                                               "verify-identities", "verify-laws", "toda-chain-check"};
const std::vector<std::string> kModes = {"backlund", "target", "toda-exact", "pitman"};
const std::vector<std::string> kLawTests = {"marginal", "conditional", "pitman"};

template <class T>
void read_key(const json& block, const char* key, T& target, std::vector<std::string>& seen) {
  if (auto it = block.find(key); it != block.end()) {
    try {
      target = it->get<T>();
    } catch (const json::exception& ex) {
      throw ConfigError(std::string("config key '") + key + "': " + ex.what());
    }
    seen.emplace_back(key);
  }
}

void reject_unknown(const json& block, const std::vector<std::string>& seen, const std::string& where) {
  for (const auto& [key, _] : block.items()) {
    if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
      throw ConfigError("unknown config key '" + where + key + "'");
    }
  }
}

template <class Fn>
void read_block(const json& j, const char* name, std::vector<std::string>& top_seen, Fn fn) {
  if (auto it = j.find(name); it != j.end()) {
    if (!it->is_object()) throw ConfigError(std::string("config block '") + name + "' must be an object");
    std::vector<std::string> seen;
    fn(*it, seen);
    reject_unknown(*it, seen, std::string(name) + ".");
    top_seen.emplace_back(name);
  }
}

double lambda_cap(const ExperimentConfig& c) {
  return c.system == "hyperbolic2" ? c.epsilon * c.mu : kInf;
}

SystemSpec make_spec(const ExperimentConfig& c) {
  return SystemSpec(parse_system_kind(c.system), c.epsilon, c.mu);
}

QuadratureSpec make_quad(const ExperimentConfig& c) {
  QuadratureSpec q;
  q.n_panels = c.n_panels;
  q.rel_tol = c.rel_tol;
  q.kernel_power = c.kernel_power;
  return q;
}

McConfig make_mc(const ExperimentConfig& c) {
  McConfig mc;
  mc.n_paths = c.n_paths;
  mc.dt = c.dt;
  mc.horizon = c.t;
  mc.seed = c.seed;
  mc.noise_scale = c.noise_scale;
  mc.lambda = c.lambda;
  mc.strict = c.strict;
  mc.save_every = c.save_every ? c.save_every : std::max<std::size_t>(mc.n_steps(), 1);
  return mc;
}

void require_lambda_cap(const ExperimentConfig& c, const char* what) {
  if (c.system == "hyperbolic2" && !(std::abs(c.lambda) < lambda_cap(c))) {
    std::ostringstream os;
    os << what << " for hyperbolic2 requires |lambda| < epsilon*mu = " << lambda_cap(c) << " (got lambda=" << c.lambda
       << ")";
    throw HypothesisViolation(os.str());
  }
}

void require_x_section(const ExperimentConfig& c, double x, const char* what) {
  if (c.system != "toda" && !(x > 0.0)) {
    std::ostringstream os;
    os << what << "=" << x << " must be > 0 for " << c.system;
    throw ConfigError(os.str());
  }
}

// Checks run before any computation.
void validate(const ExperimentConfig& c) {
  if (std::find(kSubcommands.begin(), kSubcommands.end(), c.subcommand) == kSubcommands.end()) {
    throw ConfigError("unknown subcommand '" + c.subcommand + "'");
  }
  try {
    (void)parse_system_kind(c.system);
  } catch (const std::exception&) {
    throw ConfigError("unknown system '" + c.system + "' (expected toda, rational, hyperbolic1, hyperbolic2)");
  }
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive and finite");
  };
  positive(c.epsilon, "epsilon");
  positive(c.mu, "mu");
  positive(c.t, "t");
  positive(c.dt, "dt");
  positive(c.h, "h");
  positive(c.rel_tol, "rel_tol");
  positive(c.kernel_power, "kernel_power");
  if (!(c.noise_scale >= 0.0) || !std::isfinite(c.noise_scale)) throw ConfigError("noise_scale must be >= 0");
  if (!std::isfinite(c.lambda) || !std::isfinite(c.x0)) throw ConfigError("lambda and x0 must be finite");
  if (c.n_paths < 1 || c.n_paths > 1000000) throw ConfigError("n_paths must be in [1, 1e6]");
  if (c.n_panels < 8) throw ConfigError("n_panels must be >= 8");
  if (c.t / c.dt > 1e7) throw ConfigError("t/dt must not exceed 1e7");

  if (c.system == "hyperbolic1" && !(c.mu >= 1.0)) {
    std::ostringstream os;
    os << "hyperbolic1 requires mu >= 1 (got mu=" << c.mu << ")";
    throw HypothesisViolation(os.str());
  }
  if (c.system == "hyperbolic2" && !(c.mu >= 0.5)) {
    std::ostringstream os;
    os << "hyperbolic2 requires mu >= 1/2 (got mu=" << c.mu << ")";
    throw HypothesisViolation(os.str());
  }

  const std::string& s = c.subcommand;
  if (s == "classical-flow") {
    require_x_section(c, c.x0, "x0");
    require_lambda_cap(c, "the classical flow");
  } else if (s == "eigen-scan") {
    if (!(c.x_min < c.x_max) || c.n_x < 1) throw ConfigError("eigen-scan needs x_min < x_max and n_x >= 1");
    require_x_section(c, c.x_min, "x_min");
    require_lambda_cap(c, "the eigenfunction integral");
  } else if (s == "simulate") {
    if (std::find(kModes.begin(), kModes.end(), c.mode) == kModes.end()) {
      throw ConfigError("unknown simulate mode '" + c.mode + "' (expected backlund, target, toda-exact, pitman)");
    }
    if (c.mode == "toda-exact" && c.system != "toda") throw ConfigError("mode toda-exact requires system toda");
    if (c.mode == "pitman") {
      if (!(c.x0 >= 0.0)) throw ConfigError("pitman paths need x0 >= 0");
    } else {
      require_x_section(c, c.x0, "x0");
      if (c.mode != "toda-exact") require_lambda_cap(c, "drawing U_0 from nu_x");
    }
  } else if (s == "verify-identities") {
    if (c.grid_points < 1) throw ConfigError("grid_points must be >= 1");
  } else if (s == "verify-laws") {
    for (const auto& t : c.tests) {
      if (std::find(kLawTests.begin(), kLawTests.end(), t) == kLawTests.end()) {
        throw ConfigError("unknown law test '" + t + "' (expected marginal, conditional, pitman)");
      }
    }
    if (c.n_bins < 1) throw ConfigError("n_bins must be >= 1");
    if (c.n_paths < 25) throw ConfigError("law tests need n_paths >= 25");
    require_x_section(c, c.x0, "x0");
    if (c.system == "hyperbolic2" && !(c.mu > 0.5)) {
      std::ostringstream os;
      os << "the law theorem for hyperbolic2 requires mu > 1/2 (got mu=" << c.mu << ")";
      throw HypothesisViolation(os.str());
    }
    require_lambda_cap(c, "the law theorem");
    if (std::find(c.tests.begin(), c.tests.end(), "pitman") != c.tests.end() && !(c.x0 > 0.0)) {
      throw ConfigError("the pitman law test needs x0 > 0");
    }
  } else if (s == "toda-chain-check") {
    if (c.nmax < 1 || c.nmax > kMaxChainIndex - 1) {
      std::ostringstream os;
      os << "nmax must be in [1, " << kMaxChainIndex - 1 << "]";
      throw ConfigError(os.str());
    }
  }
}

// ---------------------------------------------------------------------------
// reports

struct Report {
  ordered_json tests = ordered_json::array();
  ordered_json extra = ordered_json::object();

  bool pass() const {
    return std::all_of(tests.begin(), tests.end(), [](const ordered_json& t) { return t.at("pass").get<bool>(); });
  }

  void add(const std::string& name, ordered_json params, double statistic, std::optional<double> p_value, bool pass,
           std::optional<std::uint64_t> seed) {
    ordered_json t;
    t["test"] = name;
    t["params"] = std::move(params);
    t["statistic"] = statistic;
    t["p_value"] = p_value ? ordered_json(*p_value) : ordered_json(nullptr);
    t["pass"] = pass;
    t["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
    tests.push_back(std::move(t));
  }
};

ordered_json system_params(const ExperimentConfig& c) {
  return {{"system", c.system}, {"epsilon", c.epsilon}, {"mu", c.mu}, {"lambda", c.lambda}};
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

void run_classical(const ExperimentConfig& c, Report& r) {
  const SystemSpec spec = make_spec(c);
  const Trajectory traj = flow_rk4(spec, c.lambda, c.x0, c.t, c.dt);
  if (!c.output.empty()) {
    auto os = open_output(c.output);
    write_csv(os, traj);
  }
  const ConservationReport cons = conservation_report(traj);
  const PhasePoint exact = flow_exact(spec, c.lambda, c.x0, traj.times.back());
  const double err = std::abs(traj.states.back().x - exact.x);
  auto params = [&](double tol) {
    ordered_json p = system_params(c);
    p["x0"] = c.x0;
    p["t"] = c.t;
    p["dt"] = c.dt;
    p["tolerance"] = tol;
    return p;
  };
  r.add("rk4-endpoint", params(1e-9), err, std::nullopt, err <= 1e-9, std::nullopt);
  r.add("conservation-u", params(1e-8), cons.r_u, std::nullopt, cons.r_u <= 1e-8, std::nullopt);
  r.add("conservation-lax", params(1e-6), cons.r_lax, std::nullopt, cons.r_lax <= 1e-6, std::nullopt);
  r.add("equation-of-motion", params(1e-6), cons.r_eom, std::nullopt, cons.r_eom <= 1e-6, std::nullopt);
}

void run_eigen_scan(const ExperimentConfig& c, Report& r) {
  const SystemSpec spec = make_spec(c);
  const QuadratureSpec quad = make_quad(c);
  const bool with_residual = c.kernel_power == 1.0;
  std::ostringstream csv;
  csv << "x,psi,drift,eigen_residual\n";
  double worst = 0.0;
  for (int i = 0; i < c.n_x; ++i) {
    const double x = c.n_x == 1 ? c.x_min : c.x_min + (c.x_max - c.x_min) * i / (c.n_x - 1);
    const double p = psi(spec, c.lambda, x, quad);
    const double b = log_psi_drift(spec, c.lambda, x, quad);
    csv << io::format_double(x) << ',' << io::format_double(p) << ',' << io::format_double(b) << ',';
    if (with_residual) {
      const double res = eigen_residual(spec, c.lambda, x, quad, c.h);
      worst = std::max(worst, res);
      csv << io::format_double(res);
    }
    csv << '\n';
  }
  if (!c.output.empty()) {
    auto os = open_output(c.output);
    os << csv.str();
  }
  if (with_residual) {
    const double tol = std::max(10.0 * c.h * c.h, 100.0 * c.rel_tol);
    ordered_json p = system_params(c);
    p["x_min"] = c.x_min;
    p["x_max"] = c.x_max;
    p["n_x"] = c.n_x;
    p["h"] = c.h;
    p["tolerance"] = tol;
    r.add("eigen-residual", p, worst, std::nullopt, worst <= tol, std::nullopt);
  }
}

void run_simulate(const ExperimentConfig& c, Report& r) {
  const McConfig mc = make_mc(c);
  PathEnsemble e;
  if (c.mode == "pitman") {
    e = pitman_paths(c.lambda, c.x0, mc);
  } else if (c.mode == "toda-exact") {
    e = toda_exact_paths({c.x0, std::nullopt}, mc, make_quad(c));
  } else if (c.mode == "target") {
    e = simulate_target(make_spec(c), c.lambda, c.x0, mc, make_quad(c));
  } else {
    e = simulate_backlund(make_spec(c), {c.x0, std::nullopt}, mc, make_quad(c));
  }
  if (!c.output.empty()) io::save_ensemble(c.output, e);
  ordered_json p = system_params(c);
  p["mode"] = c.mode;
  p["x0"] = c.x0;
  p["t"] = c.t;
  p["dt"] = c.dt;
  p["n_paths"] = c.n_paths;
  r.add("domain-violations", p, static_cast<double>(e.violations), std::nullopt, e.violations == 0, c.seed);
  if (c.mode == "backlund" && (c.system == "toda" || c.system == "rational")) {
    r.add("monotone-gap", p, static_cast<double>(e.monotone_violations), std::nullopt, e.monotone_violations == 0,
          c.seed);
  }
  r.extra["n_times"] = e.n_times;
}

void run_identities(const ExperimentConfig& c, Report& r) {
  const SystemSpec spec = make_spec(c);
  const auto grid = random_grid(spec, c.grid_points, c.seed);
  double r_grad = 0.0, r_lap = 0.0;
  for (const auto& p : grid) {
    const auto res = backlund_residuals(spec, p, c.h);
    r_grad = std::max(r_grad, res.r_grad);
    r_lap = std::max(r_lap, res.r_lap);
  }
  ordered_json p = system_params(c);
  p["grid_points"] = c.grid_points;
  p["h"] = c.h;
  auto with_tol = [&](ordered_json q, double tol) {
    q["tolerance"] = tol;
    return q;
  };
  r.add("backlund-gradient", with_tol(p, 1e-10), r_grad, std::nullopt, r_grad <= 1e-10, c.seed);
  r.add("backlund-laplacian", with_tol(p, 1e-5), r_lap, std::nullopt, r_lap <= 1e-5, c.seed);
  const ResidualReport kern = intertwining_kernel_residual(spec, c.lambda, grid, c.h);
  r.add("intertwining-kernel", with_tol(p, kern.tolerance), kern.max_abs, std::nullopt, kern.pass, c.seed);

  const QuadratureSpec quad = make_quad(c);
  for (const auto& place : standard_bump_placements(spec)) {
    const double res = intertwining_operator_residual(spec, c.lambda, place.bump, place.x, quad, c.h);
    ordered_json q = system_params(c);
    q["bump"] = {{"cx", place.bump.cx}, {"cu", place.bump.cu}, {"wx", place.bump.wx}, {"wu", place.bump.wu}};
    q["x"] = place.x;
    q["h"] = c.h;
    q["tolerance"] = 1e-4;
    r.add("intertwining-operator", q, res, std::nullopt, res <= 1e-4, std::nullopt);
  }
}

void run_laws(const ExperimentConfig& c, Report& r) {
  const SystemSpec spec = make_spec(c);
  const QuadratureSpec quad = make_quad(c);
  McConfig mc = make_mc(c);
  auto wants = [&](const char* name) { return std::find(c.tests.begin(), c.tests.end(), name) != c.tests.end(); };
  ordered_json base = system_params(c);
  base["x0"] = c.x0;
  base["t"] = c.t;
  base["dt"] = c.dt;
  base["n_paths"] = c.n_paths;

  if (wants("marginal")) {
    const double ts[] = {c.t};
    const KsReport ks = marginal_law_tests(spec, c.lambda, c.x0, ts, mc, quad).front();
    r.add("marginal-law", base, ks.statistic, ks.p_value, ks.pass, c.seed);
    const double control = c.lambda == 0.0 ? 0.5 * std::min(1.0, lambda_cap(c)) : 0.0;
    LawTestOptions opts;
    opts.target_lambda = control;
    const KsReport neg = marginal_law_tests(spec, c.lambda, c.x0, ts, mc, quad, opts).front();
    ordered_json p = base;
    p["target_lambda"] = control;
    p["expect"] = "p_value < 1e-3";
    r.add("marginal-law-control", p, neg.statistic, neg.p_value, neg.p_value < 1e-3, c.seed);
  }
  if (wants("conditional")) {
    const std::vector<std::function<double(double)>> gs = {[](double u) { return u; },
                                                           [](double u) { return std::tanh(u); }};
    const auto reps = conditional_law_tests(spec, c.lambda, c.x0, c.t, gs, c.n_bins, mc, quad);
    const char* names[] = {"conditional-law-u", "conditional-law-tanh"};
    for (std::size_t i = 0; i < reps.size(); ++i) {
      ordered_json p = base;
      p["n_bins"] = c.n_bins;
      p["tolerance"] = reps[i].tolerance;
      r.add(names[i], p, reps[i].max_abs, std::nullopt, reps[i].pass, c.seed);
    }
  }
  if (wants("pitman")) {
    ordered_json p = {{"lambda", c.lambda}, {"x", c.x0}, {"t", c.t}, {"dt", c.dt}, {"n_paths", c.n_paths}};
    const KsReport ks = pitman_law_test(c.lambda, c.x0, c.t, mc);
    r.add("pitman-law", p, ks.statistic, ks.p_value, ks.pass, c.seed);
    const KsReport neg = pitman_law_test(c.lambda, c.x0, c.t, mc, 0.01, 2.0);
    p["drift_multiplier"] = 2.0;
    p["expect"] = "p_value < 1e-3";
    r.add("pitman-law-control", p, neg.statistic, neg.p_value, neg.p_value < 1e-3, c.seed);
  }
}

void run_toda_chain(const ExperimentConfig& c, Report& r) {
  const std::vector<std::pair<double, double>> points = {{0.0, 0.0}, {0.3, -0.2}, {-0.7, 0.4}};
  ordered_json table = ordered_json::array();
  double worst_xy = 0.0, worst_xx = 0.0, worst_chain = 0.0, worst_a = 0.0;
  for (int n = 1; n <= c.nmax; ++n) {
    for (const auto& [x, y] : points) {
      const TauChainPoint p{n, c.t, x, y};
      const Toda2dResiduals td = toda2d_residuals(p, c.h);
      const double ch = chain_residual(n, c.t, x, y, c.h);
      const double a_err = std::abs(a_coefficient(p) / (n / c.t) - 1.0);
      worst_xy = std::max(worst_xy, td.r_xy);
      worst_xx = std::max(worst_xx, td.r_xx);
      worst_chain = std::max(worst_chain, ch);
      worst_a = std::max(worst_a, a_err);
      table.push_back(
          {{"n", n}, {"t", c.t}, {"x", x}, {"y", y}, {"r_xy", td.r_xy}, {"r_xx", td.r_xx}, {"chain", ch}, {"a_n_rel_error", a_err}});
    }
  }
  ordered_json p = {{"nmax", c.nmax}, {"t", c.t}, {"h", c.h}, {"tolerance", 1e-5}};
  r.add("toda2d-xy", p, worst_xy, std::nullopt, worst_xy <= 1e-5, std::nullopt);
  r.add("toda2d-xx", p, worst_xx, std::nullopt, worst_xx <= 1e-5, std::nullopt);
  r.add("chain", p, worst_chain, std::nullopt, worst_chain <= 1e-5, std::nullopt);
  ordered_json pa = {{"nmax", c.nmax}, {"t", c.t}, {"tolerance", 1e-12}};
  r.add("a_n-identity", pa, worst_a, std::nullopt, worst_a <= 1e-12, std::nullopt);
  r.extra["table"] = std::move(table);
}

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

void add_options(CLI::App* sub, ExperimentConfig& c, std::string& config_path) {
  sub->set_help_flag("--help", "print this help and exit");
  sub->add_option("--config", config_path, "JSON config file; flags override its values");
  sub->add_option("--system", c.system, "toda | rational | hyperbolic1 | hyperbolic2");
  sub->add_option("--epsilon", c.epsilon, "hyperbolic scale epsilon");
  sub->add_option("--mu", c.mu, "coupling mu");
  sub->add_option("--lambda", c.lambda, "spectral parameter");
  sub->add_option("--x0", c.x0, "initial position (or x for eigen/pitman)");
  sub->add_option("--t", c.t, "time horizon / test time / chain time");
  sub->add_option("--dt", c.dt, "time step");
  sub->add_option("--n-paths", c.n_paths, "Monte Carlo paths");
  sub->add_option("--seed", c.seed, "64-bit seed");
  sub->add_option("--noise-scale", c.noise_scale, "factor on the Brownian increment");
  sub->add_option("--kernel-power", c.kernel_power, "power w in K^w");
  sub->add_option("--h", c.h, "finite-difference step");
  sub->add_option("--rel-tol", c.rel_tol, "quadrature relative tolerance");
  sub->add_option("--n-panels", c.n_panels, "starting quadrature panels");
  sub->add_option("--output", c.output, "data file (.csv, or .sbk for simulate)");
  sub->add_option("--report", c.report, "write the JSON report here as well");
  sub->add_flag("--strict", c.strict, "treat clamped steps as errors");
}

}  // namespace

void apply_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::string> seen;
  read_key(j, "subcommand", c.subcommand, seen);
  read_key(j, "output", c.output, seen);
  read_key(j, "report", c.report, seen);
  read_key(j, "strict", c.strict, seen);
  read_key(j, "mode", c.mode, seen);
  read_block(j, "system", seen, [&](const json& b, std::vector<std::string>& s) {
    read_key(b, "kind", c.system, s);
    read_key(b, "epsilon", c.epsilon, s);
    read_key(b, "mu", c.mu, s);
  });
  read_block(j, "run", seen, [&](const json& b, std::vector<std::string>& s) {
    read_key(b, "lambda", c.lambda, s);
    read_key(b, "x0", c.x0, s);
    read_key(b, "t", c.t, s);
    read_key(b, "dt", c.dt, s);
    read_key(b, "n_paths", c.n_paths, s);
    read_key(b, "seed", c.seed, s);
    read_key(b, "noise_scale", c.noise_scale, s);
    read_key(b, "kernel_power", c.kernel_power, s);
    read_key(b, "h", c.h, s);
    read_key(b, "save_every", c.save_every, s);
  });
  read_block(j, "quad", seen, [&](const json& b, std::vector<std::string>& s) {
    read_key(b, "rel_tol", c.rel_tol, s);
    read_key(b, "n_panels", c.n_panels, s);
  });
  read_block(j, "scan", seen, [&](const json& b, std::vector<std::string>& s) {
    read_key(b, "x_min", c.x_min, s);
    read_key(b, "x_max", c.x_max, s);
    read_key(b, "n_x", c.n_x, s);
  });
  read_block(j, "identities", seen,
             [&](const json& b, std::vector<std::string>& s) { read_key(b, "grid_points", c.grid_points, s); });
  read_block(j, "laws", seen, [&](const json& b, std::vector<std::string>& s) {
    read_key(b, "tests", c.tests, s);
    read_key(b, "n_bins", c.n_bins, s);
  });
  read_block(j, "chain", seen, [&](const json& b, std::vector<std::string>& s) { read_key(b, "nmax", c.nmax, s); });
  reject_unknown(j, seen, "");
}

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["subcommand"] = c.subcommand;
  j["system"] = {{"kind", c.system}, {"epsilon", c.epsilon}, {"mu", c.mu}};
  j["run"] = {{"lambda", c.lambda},       {"x0", c.x0},     {"t", c.t},
              {"dt", c.dt},               {"n_paths", c.n_paths}, {"seed", c.seed},
              {"noise_scale", c.noise_scale}, {"kernel_power", c.kernel_power}, {"h", c.h},
              {"save_every", c.save_every}};
  j["quad"] = {{"rel_tol", c.rel_tol}, {"n_panels", c.n_panels}};
  j["output"] = c.output;
  j["report"] = c.report;
  j["strict"] = c.strict;
  j["mode"] = c.mode;
  j["scan"] = {{"x_min", c.x_min}, {"x_max", c.x_max}, {"n_x", c.n_x}};
  j["identities"] = {{"grid_points", c.grid_points}};
  j["laws"] = {{"tests", c.tests}, {"n_bins", c.n_bins}};
  j["chain"] = {{"nmax", c.nmax}};
  return j;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  ExperimentConfig c;
  std::string config_path;
  try {
    if (auto path = find_config_path(args)) {
      std::ifstream is(*path);
      if (!is) throw ConfigError("cannot read config file " + *path);
      json j;
      try {
        j = json::parse(is);
      } catch (const json::exception& ex) {
        throw ConfigError("config file " + *path + " is not valid JSON: " + ex.what());
      }
      apply_json(j, c);
    }
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kConfigError;
  }

  CLI::App app{"Stochastic Bäcklund transformations: flows, eigenfunctions, simulation and verification"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> help = {
      {"classical-flow", "RK4 flow on the iso-spectral manifold: trajectory CSV and conservation checks"},
      {"eigen-scan", "psi, drift and eigen-residual on an x grid (CSV x,psi,drift,eigen_residual)"},
      {"simulate", "simulate an ensemble and write it as CSV or SBK"},
      {"verify-identities", "kernel identities and intertwining residuals"},
      {"verify-laws", "Monte Carlo law tests with negative controls"},
      {"toda-chain-check", "tau-function residuals of the Toda chain"}};
  for (const auto& name : kSubcommands) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    add_options(sub, c, config_path);
    subs[name] = sub;
  }
  subs["eigen-scan"]->add_option("--x-min", c.x_min, "first x");
  subs["eigen-scan"]->add_option("--x-max", c.x_max, "last x");
  subs["eigen-scan"]->add_option("--n-x", c.n_x, "number of x points");
  subs["simulate"]->add_option("--mode", c.mode, "backlund | target | toda-exact | pitman");
  subs["simulate"]->add_option("--save-every", c.save_every, "store every k-th step (0: endpoints only)");
  subs["verify-identities"]->add_option("--grid-points", c.grid_points, "random grid size");
  subs["verify-laws"]->add_option("--tests", c.tests, "subset of marginal, conditional, pitman")->delimiter(',');
  subs["verify-laws"]->add_option("--n-bins", c.n_bins, "conditional-law bins");
  subs["toda-chain-check"]->add_option("--nmax", c.nmax, "largest chain index");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) c.subcommand = name;
  }

  try {
    validate(c);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kConfigError;
  } catch (const HypothesisViolation& ex) {
    err << "hypothesis violation: " << ex.what() << '\n';
    return kHypothesisViolation;
  }

  Report rep;
  try {
    if (c.subcommand == "classical-flow") {
      run_classical(c, rep);
    } else if (c.subcommand == "eigen-scan") {
      run_eigen_scan(c, rep);
    } else if (c.subcommand == "simulate") {
      run_simulate(c, rep);
    } else if (c.subcommand == "verify-identities") {
      run_identities(c, rep);
    } else if (c.subcommand == "verify-laws") {
      run_laws(c, rep);
    } else {
      run_toda_chain(c, rep);
    }
  } catch (const HypothesisError& ex) {
    err << "hypothesis violation: " << ex.what() << '\n';
    return kHypothesisViolation;
  } catch (const RangeError& ex) {
    err << "hypothesis violation: " << ex.what() << '\n';
    return kHypothesisViolation;
  } catch (const DomainError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kConfigError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kFail;
  }

  ordered_json body;
  body["subcommand"] = c.subcommand;
  body["config"] = to_json(c);
  body["tests"] = rep.tests;
  for (auto& [k, v] : rep.extra.items()) body[k] = v;
  body["pass"] = rep.pass();
  const std::string text = body.dump(2) + "\n";
  out << text;
  if (!c.report.empty()) {
    std::ofstream os(c.report, std::ios::binary);
    if (!os) {
      err << "error: cannot write report " << c.report << '\n';
      return kFail;
    }
    os << text;
  }
  return rep.pass() ? kPass : kFail;
}

}  // namespace sbt::cli
