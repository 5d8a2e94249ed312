// hecop: simulation, free-limit and verification front end.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hecop/density.hpp"
#include "hecop/freeprob.hpp"
#include "hecop/io.hpp"
#include "hecop/sde.hpp"
#include "hecop/stats.hpp"
#include "hecop/verify.hpp"

using namespace hecop;
namespace fs = std::filesystem;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNumeric = 3;

const char* kFooter = R"(Clock conventions
  HO     dX = k * drift(X) dt + dB             (1/2 <= k < inf)
  TILDE  dX = drift(X) dt + dB / sqrt(k)       (k = inf: deterministic flow, RK4)
  drift(X) = gradient of sum over positive roots of log sinh<alpha, X>.
  Both clocks coincide at k = 1. Free time tau maps to simulation time:
    IDENT  x          tau / N       case A, TILDE clock
    EXP2   exp(2x)    tau / (2N)    case A, TILDE clock
    ABS    |x|        tau / (2N)    case B (k = 1 for the limit theorem)

Verify targets
  thm1       Limit of the empirical spectral measure: case A at TILDE time tau/N
             tends to U_tau (+) semicircle of radius 2 sqrt(tau), for every k
             in [1/2, inf]. Even moments vs the free-cumulant engine, plus
             pairwise consistency across the k list.
  thm3_1     exp(2x) push-forward at TILDE time tau/(2N) tends to
             delta_1 [x] mu_tau (free multiplicative Brownian motion);
             moments vs the moment recursion, plus k consistency.
  thm3_2     Identity exp_2(U_t (+) semicircle) = mu_{2t}: quadrature of the
             subordination density vs the moment recursion (--tau is t).
  thm4_2     Case B, k = 1, time tau/(2N): |x| push-forward tends to
             |U_tau (+) semicircle|; even moments l = 2, 4, ...
  cor2_6     At k = 1 the case-A process equals the spectrum of Hermitian
             Brownian motion with drift rho; two-sample KS per coordinate
             (--tau is the process time t).
  densities  Importance-sampled normalization of the closed-form chamber
             laws (--case, --N; all acceptance laws when --case is omitted).

Config: --config FILE reads flat key=value lines whose keys are long option
names (N=50, tau=0.5, ...); flags on the command line override the file.
Exit codes: 0 ok, 1 verification failed, 2 invalid input, 3 numeric failure.
Env: HECOP_CACHE_DIR caches density marginal tables.
)";

double parse_k(const std::string& s) {
  if (s == "inf" || s == "infinity" || s == "Inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double k = 0.0;
  try {
    k = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw InvalidArgument("k must be a number or 'inf', got '" + s + "'");
  }
  if (pos != s.size()) throw InvalidArgument("k must be a number or 'inf', got '" + s + "'");
  if (!(k >= 0.5)) throw InvalidArgument("k must lie in [1/2, inf]");
  return k;
}

std::vector<double> parse_k_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_k(item));
  if (out.empty()) throw InvalidArgument("empty k list");
  return out;
}

std::string k_string(double k) { return io::format_double(k); }

struct Global {
  std::string config;
  std::string out = "hecop_out";
  std::string format = "csv";
  unsigned threads = 0;

  unsigned workers() const { return threads == 0 ? default_threads() : threads; }
  void validate() const {
    if (format != "csv" && format != "json") throw InvalidArgument("--format must be csv or json");
  }
  void add_to(io::Config& c) const {
    c["config"] = config;
    c["out"] = out;
    c["format"] = format;
    c["threads"] = std::to_string(threads);
  }
};

struct SchemeFlags {
  std::string scheme = "implicit";
  double steps = 400.0;
  double dt_base = 0.0;  // 0: horizon / steps
  double dt_min = SchemeConfig{}.dt_min;
  double initial_dt_fraction = SchemeConfig{}.initial_dt_fraction;
  double collision_margin = SchemeConfig{}.collision_margin;
  double max_gap_shrink = SchemeConfig{}.max_gap_shrink;
  std::int64_t max_steps = SchemeConfig{}.max_steps;

  void add(CLI::App* app) {
    app->add_option("--scheme", scheme, "implicit | explicit")->check(CLI::IsMember({"implicit", "explicit"}));
    app->add_option("--steps", steps, "base step = horizon / steps");
    app->add_option("--dt-base", dt_base, "base step (overrides --steps when > 0)");
    app->add_option("--dt-min", dt_min, "step-size floor");
    app->add_option("--initial-dt-fraction", initial_dt_fraction, "first step as a fraction of the base step");
    app->add_option("--collision-margin", collision_margin, "smallest admissible chamber gap");
    app->add_option("--max-gap-shrink", max_gap_shrink, "largest admissible drift-driven gap contraction");
    app->add_option("--max-steps", max_steps, "step budget per path");
  }
  SchemeConfig resolve(double horizon) const {
    if (!(steps > 0.0)) throw InvalidArgument("--steps must be positive");
    SchemeConfig c = SchemeConfig::for_horizon(horizon, steps);
    if (dt_base > 0.0) c.dt_base = dt_base;
    c.scheme = scheme_from_string(scheme);
    c.dt_min = dt_min;
    c.initial_dt_fraction = initial_dt_fraction;
    c.collision_margin = collision_margin;
    c.max_gap_shrink = max_gap_shrink;
    c.max_steps = max_steps;
    c.validate();
    return c;
  }
  void add_to(io::Config& m, const SchemeConfig& c) const {
    m["scheme"] = scheme;
    m["steps"] = io::format_double(steps);
    m["dt_base"] = io::format_double(c.dt_base);
    m["dt_min"] = io::format_double(c.dt_min);
    m["initial_dt_fraction"] = io::format_double(c.initial_dt_fraction);
    m["collision_margin"] = io::format_double(c.collision_margin);
    m["max_gap_shrink"] = io::format_double(c.max_gap_shrink);
    m["max_steps"] = std::to_string(c.max_steps);
  }
};

void write(const Global& g, const std::string& name, const std::string& content) {
  io::write_text(fs::path(g.out) / name, content);
}

// ---------------------------------------------------------------------------

struct SimulateFlags {
  std::string family = "A";
  int N = 50;
  std::string k = "1";
  double tau = 0.5;
  std::string clock = "TILDE";
  std::string transform;  // default by case
  double horizon = 0.0;   // > 0 overrides the tau mapping
  std::size_t replicas = 100;
  std::uint64_t seed = 1;
  int L = 4;
  SchemeFlags scheme;
};

int cmd_simulate(const Global& g, const SimulateFlags& f) {
  g.validate();
  const Family fam = family_from_string(f.family);
  const RootCase rc(fam, f.N);
  const double k = parse_k(f.k);
  const Clock clock = clock_from_string(f.clock);
  if (std::isinf(k) && clock != Clock::TILDE) throw InvalidArgument("k = inf is defined on the TILDE clock only");
  const Transform tr = f.transform.empty() ? (fam == Family::A ? Transform::IDENT : Transform::ABS)
                                           : transform_from_string(f.transform);
  if (f.replicas < 1) throw InvalidArgument("--replicas must be >= 1");
  const double horizon = f.horizon > 0.0 ? f.horizon : simulation_horizon(tr, f.tau, f.N);
  const auto cfg = f.scheme.resolve(horizon);
  detail::check_L(f.L);

  io::Config c;
  g.add_to(c);
  c["command"] = "simulate";
  c["case"] = to_string(fam);
  c["N"] = std::to_string(f.N);
  c["k"] = k_string(k);
  c["tau"] = io::format_double(f.tau);
  c["clock"] = to_string(clock);
  c["transform"] = to_string(tr);
  c["horizon"] = io::format_double(horizon);
  c["replicas"] = std::to_string(f.replicas);
  c["seed"] = std::to_string(f.seed);
  c["L"] = std::to_string(f.L);
  f.scheme.add_to(c, cfg);

  const auto ens = run_ensemble(rc, k, horizon, cfg, f.replicas, f.seed, clock, g.workers());
  EmpiricalReport r;
  r.family = fam;
  r.k = k;
  r.N = f.N;
  r.tau = f.tau;
  r.clock = clock;
  r.horizon = horizon;
  r.transform = tr;
  r.estimate = empirical_moments(ens, tr, f.L);
  r.target = target_moments(tr, f.tau, f.L);
  r.replicas = f.replicas;
  r.seed = f.seed;
  const bool backed = ((fam == Family::A && tr != Transform::ABS) || (fam == Family::B && tr == Transform::ABS)) &&
                      f.horizon <= 0.0 && clock == Clock::TILDE;

  json out = io::metadata("simulate", c);
  out["report"] = io::to_json(r);
  out["report"]["target_is_limit"] = backed;
  if (g.format == "csv") {
    write(g, "terminal_states.csv", io::terminal_states_csv(ens));
    write(g, "report.csv", io::reports_csv({r}));
    out["files"] = {"terminal_states.csv", "report.csv"};
  } else {
    json states = json::array();
    for (const auto& s : ens.terminal_states) states.push_back(io::json_array(s.x));
    out["terminal_states"] = states;
  }
  write(g, "simulate.json", io::dump(out));
  std::printf("simulate: case %s N=%d k=%s %s clock, horizon %s, %zu replicas -> %s\n", to_string(fam), f.N,
              k_string(k).c_str(), to_string(clock), io::format_double(horizon).c_str(), f.replicas, g.out.c_str());
  for (int l = 1; l <= f.L; ++l) {
    std::printf("  m%d = %.6g +- %.2g   (target %.6g)\n", l, r.estimate[l], r.estimate.stderr_[l], r.target[l]);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VerifyFlags {
  std::string target;
  std::string family;
  int N = 0;                // 0: per-target default
  double tau = 0.0;         // 0: per-target default
  std::string k = "0.5,1,2,inf";
  std::size_t replicas = 100;
  std::size_t paths = 2000;
  std::size_t draws = 100000;
  std::size_t ks_samples = 0;
  std::uint64_t seed = 20240607;
  int L = 4;
  double steps = 0.0;  // 0: 400 for the limit theorems, 500 for cor2_6
  std::string scheme = "implicit";
};

int cmd_verify(const Global& g, const VerifyFlags& f) {
  g.validate();
  io::Config c;
  g.add_to(c);
  c["command"] = "verify";
  c["target"] = f.target;
  c["seed"] = std::to_string(f.seed);
  verify::Verdict v;
  const auto sch = scheme_from_string(f.scheme);
  if (f.target == "thm1" || f.target == "thm3_1" || f.target == "thm4_2") {
    verify::LimitOptions o;
    o.N = f.N > 0 ? f.N : 150;
    o.tau = f.tau > 0.0 ? f.tau : 0.5;
    o.replicas = f.replicas;
    o.ks = f.target == "thm4_2" ? std::vector<double>{1.0} : parse_k_list(f.k);
    o.L = f.L;
    o.seed = f.seed;
    o.steps = f.steps > 0.0 ? f.steps : 400.0;
    o.scheme = sch;
    o.threads = g.workers();
    if (f.target == "thm4_2" && !f.family.empty() && family_from_string(f.family) != Family::B) {
      throw InvalidArgument("thm4_2 concerns case B");
    }
    if (f.target != "thm4_2" && !f.family.empty() && family_from_string(f.family) != Family::A) {
      throw InvalidArgument(f.target + " concerns case A");
    }
    c["case"] = f.target == "thm4_2" ? "B" : "A";
    c["N"] = std::to_string(o.N);
    c["tau"] = io::format_double(o.tau);
    c["replicas"] = std::to_string(o.replicas);
    std::string ks;
    for (double k : o.ks) ks += (ks.empty() ? "" : ",") + k_string(k);
    c["k"] = ks;
    c["L"] = std::to_string(o.L);
    c["steps"] = io::format_double(o.steps);
    c["scheme"] = f.scheme;
    v = f.target == "thm1" ? verify::thm1(o) : f.target == "thm3_1" ? verify::thm3_1(o) : verify::thm4_2(o);
  } else if (f.target == "thm3_2") {
    const double t = f.tau > 0.0 ? f.tau : 0.25;
    c["tau"] = io::format_double(t);
    c["L"] = std::to_string(f.L);
    v = verify::thm3_2({t}, f.L, 0.01, g.workers());
  } else if (f.target == "cor2_6") {
    verify::Cor26Options o;
    o.N = f.N > 0 ? f.N : 5;
    o.t = f.tau > 0.0 ? f.tau : 0.2;
    o.paths = f.paths;
    o.seed = f.seed;
    o.steps = f.steps > 0.0 ? f.steps : 500.0;
    o.scheme = sch;
    o.threads = g.workers();
    c["case"] = "A";
    c["N"] = std::to_string(o.N);
    c["tau"] = io::format_double(o.t);
    c["paths"] = std::to_string(o.paths);
    c["steps"] = io::format_double(o.steps);
    c["scheme"] = f.scheme;
    v = verify::cor2_6(o);
  } else if (f.target == "densities") {
    verify::DensityOptions o;
    o.draws = f.draws;
    o.seed = f.seed;
    o.ks_samples = f.ks_samples;
    o.threads = g.workers();
    std::vector<ChamberDensity> laws;
    if (f.family.empty()) {
      laws = verify::acceptance_laws();
      c["case"] = "";
    } else {
      const int n = f.N > 0 ? f.N : 2;
      const double t = f.tau > 0.0 ? f.tau : 1.0;
      laws = verify::selftest_laws(family_from_string(f.family), n, t);
      c["case"] = to_string(family_from_string(f.family));
      c["N"] = std::to_string(n);
      c["tau"] = io::format_double(t);
    }
    c["draws"] = std::to_string(o.draws);
    c["ks_samples"] = std::to_string(o.ks_samples);
    c["cache_dir"] = o.cache_dir;
    v = verify::densities(laws, o);
  } else {
    throw InvalidArgument("unknown verify target '" + f.target + "'");
  }
  json out = io::metadata("verify", c);
  out["verdict"] = verify::to_json(v);
  write(g, "verify_" + f.target + ".json", io::dump(out));
  if (g.format == "csv" && v.details.contains("reports")) {
    // Flat per-(k, N, l) table rebuilt from the JSON rows.
    io::CsvWriter w({"case", "k", "N", "tau", "transform", "l", "estimate", "stderr", "target"});
    for (const auto& r : v.details["reports"]) {
      const auto& est = r["estimate"]["moments"];
      for (std::size_t l = 1; l < est.size(); ++l) {
        auto num = [](const json& x) { return x.is_string() ? x.get<std::string>() : io::format_double(x.get<double>()); };
        w.row({r["case"].get<std::string>(), num(r["k"]), std::to_string(r["N"].get<int>()), num(r["tau"]),
               r["transform"].get<std::string>(), std::to_string(l), num(est[l]), num(r["estimate"]["stderr"][l]),
               num(r["target"]["moments"][l])});
      }
    }
    write(g, "verify_" + f.target + ".csv", w.str());
  }
  std::printf("verify %s: %s  %s\n", f.target.c_str(), v.pass ? "PASS" : "FAIL", v.summary.c_str());
  return v.pass ? kExitOk : kExitVerifyFailed;
}

// ---------------------------------------------------------------------------

struct FreeLimitFlags {
  double tau = 1.0;
  int points = 4001;
  int L = 8;
};

int cmd_free_limit(const Global& g, const FreeLimitFlags& f) {
  g.validate();
  if (!(f.tau > 0.0)) throw InvalidArgument("--tau must be positive");
  if (f.points < 101) throw InvalidArgument("--points must be >= 101");
  detail::check_L(f.L);
  io::Config c;
  g.add_to(c);
  c["command"] = "free-limit";
  c["tau"] = io::format_double(f.tau);
  c["points"] = std::to_string(f.points);
  c["L"] = std::to_string(f.L);
  const auto grid = subordination_density(f.tau, GridSpec::for_time(f.tau, f.points), g.workers());
  const auto cum = limit_moments_ident(f.tau, f.L);
  const auto quad = grid_moments(grid, f.L);
  const int le = std::min(f.L, 4);
  const auto e_quad = exp2_moments(grid, le);
  const auto e_rec = mult_bm_moments(moments_dirac(1.0, le), 2.0 * f.tau, le);

  json out = io::metadata("free-limit", c);
  out["grid"] = io::to_json(grid);
  out["moments"] = json{{"cumulant_engine", io::to_json(cum)},
                        {"grid_quadrature", io::to_json(quad)},
                        {"exp2_quadrature", io::to_json(e_quad)},
                        {"exp2_recursion_2tau", io::to_json(e_rec)}};
  if (g.format == "csv") {
    write(g, "free_limit.csv", io::density_grid_csv(grid));
    io::CsvWriter w({"l", "cumulant_engine", "grid_quadrature", "exp2_quadrature", "exp2_recursion_2tau"});
    for (int l = 0; l <= f.L; ++l) {
      const auto e1 = l <= le ? io::format_double(e_quad[l]) : std::string();
      const auto e2 = l <= le ? io::format_double(e_rec[l]) : std::string();
      w.row({std::to_string(l), io::format_double(cum[l]), io::format_double(quad[l]), e1, e2});
    }
    write(g, "free_limit_moments.csv", w.str());
    out["files"] = {"free_limit.csv", "free_limit_moments.csv"};
  } else {
    out["grid"]["x"] = io::json_array(grid.xs());
    out["grid"]["rho"] = io::json_array(grid.rho);
  }
  write(g, "free_limit.json", io::dump(out));
  std::printf("free-limit: tau=%s, mass %.6f (raw %.6f), support [%.4f, %.4f] -> %s\n",
              io::format_double(f.tau).c_str(), grid.mass, grid.raw_mass, grid.support_lo, grid.support_hi,
              g.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SelftestFlags {
  std::string family;  // empty: all cases
  int N = 2;
  double t = 1.0;
  std::size_t draws = 100000;
  std::size_t ks_samples = 2000;
  std::uint64_t seed = 20240607;
};

int cmd_density_selftest(const Global& g, const SelftestFlags& f) {
  g.validate();
  io::Config c;
  g.add_to(c);
  c["command"] = "density-selftest";
  c["case"] = f.family;
  c["N"] = std::to_string(f.N);
  c["t"] = io::format_double(f.t);
  c["draws"] = std::to_string(f.draws);
  c["ks_samples"] = std::to_string(f.ks_samples);
  c["seed"] = std::to_string(f.seed);
  verify::DensityOptions o;
  o.draws = f.draws;
  o.seed = f.seed;
  o.ks_samples = f.ks_samples;
  o.threads = g.workers();
  c["cache_dir"] = o.cache_dir;
  std::vector<ChamberDensity> laws;
  if (f.family.empty()) {
    for (Family fam : {Family::A, Family::B, Family::C, Family::D}) {
      const auto l = verify::selftest_laws(fam, f.N, f.t);
      laws.insert(laws.end(), l.begin(), l.end());
    }
  } else {
    laws = verify::selftest_laws(family_from_string(f.family), f.N, f.t);
  }
  const auto v = verify::densities(laws, o);
  json out = io::metadata("density-selftest", c);
  out["verdict"] = verify::to_json(v);
  write(g, "density_selftest.json", io::dump(out));
  if (g.format == "csv") {
    io::CsvWriter w({"variant", "case", "N", "t", "estimate", "stderr", "ess", "draws", "pass", "ks_pass01"});
    for (const auto& r : v.details["laws"]) {
      const std::string ks = r.contains("ks") ? (r["ks"]["pass01"].get<bool>() ? "true" : "false") : "";
      w.row({r["variant"].get<std::string>(), r["case"].get<std::string>(), std::to_string(r["N"].get<int>()),
             io::format_double(r["t"].get<double>()), io::format_double(r["estimate"].get<double>()),
             io::format_double(r["stderr"].get<double>()), io::format_double(r["ess"].get<double>()),
             std::to_string(r["draws"].get<std::size_t>()), r["pass"].get<bool>() ? "true" : "false", ks});
    }
    write(g, "density_selftest.csv", w.str());
  }
  std::printf("density-selftest: %s  %s\n", v.pass ? "PASS" : "FAIL", v.summary.c_str());
  return v.pass ? kExitOk : kExitVerifyFailed;
}

// ---------------------------------------------------------------------------

// Splices key=value lines of --config FILE in as --key=value right after the
// subcommand name, so explicit flags (parsed later, last value wins) override.
std::vector<std::string> expand_config(int argc, char** argv, const std::vector<std::string>& subcommands) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  const auto cfg = io::parse_config_file(path);
  std::vector<std::string> injected;
  for (const auto& [k, v] : cfg) {
    if (k == "config") throw InvalidArgument("config files cannot nest --config");
    injected.push_back("--" + k + "=" + v);
  }
  auto at = args.begin();
  for (auto it = args.begin(); it != args.end(); ++it) {
    if (std::find(subcommands.begin(), subcommands.end(), *it) != subcommands.end()) {
      at = it + 1;
      break;
    }
  }
  args.insert(at, injected.begin(), injected.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hecop: radial Heckman-Opdam processes, their matrix models and free limits"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", io::version_hash());

  Global g;
  app.add_option("--config", g.config, "flat key=value file; flags override it");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--format", g.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", g.threads, "worker cap (0 = all cores); results do not depend on it");

  SimulateFlags sf;
  auto* sim = app.add_subcommand("simulate", "run an ensemble and report empirical moments");
  sim->add_option("--case", sf.family, "A | B | C | D");
  sim->add_option("--N", sf.N, "rank");
  sim->add_option("--k", sf.k, "multiplicity in [1/2, inf]; 'inf' selects the deterministic flow");
  sim->add_option("--tau", sf.tau, "free time");
  sim->add_option("--clock", sf.clock, "HO | TILDE");
  sim->add_option("--transform", sf.transform, "IDENT | EXP2 | ABS (default IDENT for A, ABS otherwise)");
  sim->add_option("--horizon", sf.horizon, "process time; overrides the tau mapping when > 0");
  sim->add_option("--replicas", sf.replicas, "independent paths");
  sim->add_option("--seed", sf.seed, "master seed");
  sim->add_option("--L", sf.L, "number of moments");
  sf.scheme.add(sim);

  VerifyFlags vf;
  auto* ver = app.add_subcommand("verify", "run a verification recipe; exit 1 when it fails");
  ver->add_option("target", vf.target, "thm1 | thm3_1 | thm3_2 | thm4_2 | cor2_6 | densities")
      ->required()
      ->check(CLI::IsMember({"thm1", "thm3_1", "thm3_2", "thm4_2", "cor2_6", "densities"}));
  ver->add_option("--case", vf.family, "case (densities; checked for the others)");
  ver->add_option("--N", vf.N, "rank (default 150; 5 for cor2_6; 2 for densities)");
  ver->add_option("--tau", vf.tau, "free time (default 0.5; 0.25 for thm3_2; t = 0.2 for cor2_6)");
  ver->add_option("--k", vf.k, "comma-separated k list for thm1 and thm3_1");
  ver->add_option("--replicas", vf.replicas, "replicas per k");
  ver->add_option("--paths", vf.paths, "paths per sample for cor2_6");
  ver->add_option("--draws", vf.draws, "importance draws per law");
  ver->add_option("--ks-samples", vf.ks_samples, "samples for the marginal KS check (0 skips)");
  ver->add_option("--seed", vf.seed, "master seed");
  ver->add_option("--L", vf.L, "number of moments");
  ver->add_option("--steps", vf.steps, "base step = horizon / steps (default 400; 500 for cor2_6)");
  ver->add_option("--scheme", vf.scheme, "implicit | explicit")->check(CLI::IsMember({"implicit", "explicit"}));

  FreeLimitFlags ff;
  auto* fl = app.add_subcommand("free-limit", "density and moments of U_tau (+) semicircle");
  fl->add_option("--tau", ff.tau, "free time");
  fl->add_option("--points", ff.points, "grid points");
  fl->add_option("--L", ff.L, "number of moments");

  SelftestFlags tf;
  auto* st = app.add_subcommand("density-selftest", "normalization and marginal KS checks of the chamber laws");
  st->add_option("--case", tf.family, "A | B | C | D (default: all)");
  st->add_option("--N", tf.N, "rank");
  st->add_option("--t", tf.t, "time");
  st->add_option("--draws", tf.draws, "importance draws per law");
  st->add_option("--ks-samples", tf.ks_samples, "samples for the marginal KS check (0 skips)");
  st->add_option("--seed", tf.seed, "master seed");

  try {
    auto args = expand_config(argc, argv, {"simulate", "verify", "free-limit", "density-selftest"});
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }

  try {
    if (*sim) return cmd_simulate(g, sf);
    if (*ver) return cmd_verify(g, vf);
    if (*fl) return cmd_free_limit(g, ff);
    if (*st) return cmd_density_selftest(g, tf);
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const SingularInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const Error& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitInvalid;
}
