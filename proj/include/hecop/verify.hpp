#pragma once

// Verification recipes shared by the CLI and the acceptance binary. Each
// returns a verdict plus every intermediate number as JSON.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hecop/density.hpp"
#include "hecop/freeprob.hpp"
#include "hecop/io.hpp"
#include "hecop/ks.hpp"
#include "hecop/matmodel.hpp"
#include "hecop/rootsys.hpp"
#include "hecop/sde.hpp"
#include "hecop/stats.hpp"

namespace hecop::verify {

using io::json;

struct Verdict {
  std::string target;
  bool pass = false;
  std::string summary;
  json details = json::object();
  double seconds = 0.0;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

inline std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Unit-multiplicity equivalence: SDE at k = 1 against matrix-model spectra.

struct Cor26Options {
  int N = 5;
  double t = 0.2;
  std::size_t paths = 2000;
  std::uint64_t seed = 20240607;
  double steps = 500.0;
  SdeScheme scheme = SdeScheme::IMPLICIT;
  unsigned threads = default_threads();
};

inline Verdict cor2_6(const Cor26Options& o) {
  detail::Stopwatch sw;
  if (o.N < 2) throw InvalidArgument("cor2_6 needs N >= 2");
  if (!(o.t > 0.0)) throw InvalidArgument("t must be positive");
  if (o.paths < 100) throw InvalidArgument("cor2_6 needs at least 100 paths");
  const RootCase rc(Family::A, o.N);
  auto cfg = SchemeConfig::for_horizon(o.t, o.steps);
  cfg.scheme = o.scheme;
  const auto ens = run_ensemble(rc, 1.0, o.t, cfg, o.paths, o.seed, Clock::HO, o.threads);
  std::vector<std::vector<double>> a(o.N), b(o.N);
  std::vector<HermitianSample> mats(o.paths);
  parallel_for(o.paths, o.threads, [&](std::size_t r) {
    mats[r] = sample_hermitian_bm_drift(o.N, o.t, 1.0, o.seed ^ 0xC0FFEEULL, r);
  });
  for (std::size_t r = 0; r < o.paths; ++r) {
    for (int i = 0; i < o.N; ++i) {
      a[i].push_back(ens.terminal_states[r].x[i]);
      b[i].push_back(mats[r].spectrum.coords[i]);
    }
  }
  Verdict v{"cor2_6"};
  v.pass = true;
  json per = json::array();
  double worst = 0.0;
  for (int i = 0; i < o.N; ++i) {
    const auto ks = ks_two_sample(a[i], b[i]);
    per.push_back(io::to_json(ks));
    worst = std::max(worst, ks.statistic / ks.crit01);
    if (ks.reject01()) v.pass = false;
  }
  v.details = json{{"N", o.N}, {"t", o.t}, {"k", 1.0}, {"clock", "HO"}, {"paths", o.paths},
                   {"seed", o.seed}, {"steps", o.steps}, {"ks_per_coordinate", per}};
  v.summary = "two-sample KS on " + std::to_string(o.N) + " ordered coordinates, max D/D_crit01 = " +
              detail::fmt(worst, 3);
  v.seconds = sw.seconds();
  return v;
}

// ---------------------------------------------------------------------------
// Density normalization self-tests.

/// Laws checked for a case at rank N.
inline std::vector<ChamberDensity> selftest_laws(Family f, int n, double t = 1.0) {
  switch (f) {
    case Family::A: {
      std::vector<ChamberDensity> v{ChamberDensity::gue(n, t), ChamberDensity::drift_c(n, t, 1.0)};
      if (n >= 2 && n <= 6) {
        std::vector<double> lam(n);
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += (lam[i] = (i - 0.5 * (n - 1)) * (1.0 + 0.1 * i));
        for (double& l : lam) l -= mean / n;
        v.push_back(ChamberDensity::drift_lambda(t, lam));
      }
      return v;
    }
    case Family::B: return {ChamberDensity::flat(Family::B, n, t), ChamberDensity::drift(Family::B, n, t)};
    case Family::C: return {ChamberDensity::drift(Family::C, n, t)};
    case Family::D: return {ChamberDensity::flat(Family::D, n, t), ChamberDensity::drift(Family::D, n, t)};
  }
  return {};
}

/// The acceptance set: GUE at N = 2, 3; the c-drifted law at N = 3; the B, D
/// and C laws at N = 2.
inline std::vector<ChamberDensity> acceptance_laws() {
  return {ChamberDensity::gue(2, 1.0),
          ChamberDensity::gue(3, 1.0),
          ChamberDensity::drift_c(3, 1.0, 1.0),
          ChamberDensity::flat(Family::B, 2, 1.0),
          ChamberDensity::drift(Family::B, 2, 1.0),
          ChamberDensity::flat(Family::D, 2, 1.0),
          ChamberDensity::drift(Family::D, 2, 1.0),
          ChamberDensity::drift(Family::C, 2, 1.0)};
}

struct DensityOptions {
  std::size_t draws = 100000;
  std::uint64_t seed = 20240607;
  double tolerance = 0.02;
  std::size_t ks_samples = 0;  // >= 500 adds a marginal KS check where a sampler exists
  std::string cache_dir = cache_dir_from_env();
  unsigned threads = default_threads();
};

/// Exact samples of d: matrix models where available, the k = 1 SDE on the
/// HO clock for C. Empty for the flat B and D laws.
inline std::vector<ChamberPoint> density_samples(const ChamberDensity& d, std::size_t count, std::uint64_t seed,
                                                 unsigned threads = default_threads()) {
  const int n = d.root_case.rank();
  std::vector<ChamberPoint> out(count);
  switch (d.variant) {
    case DensityVariant::GUE:
    case DensityVariant::DRIFT_C: {
      const double c = d.variant == DensityVariant::GUE ? 0.0 : d.c;
      parallel_for(count, threads, [&](std::size_t i) { out[i] = sample_hermitian_bm_drift(n, d.t, c, seed, i).spectrum; });
      return out;
    }
    case DensityVariant::DRIFT_LAMBDA:
      parallel_for(count, threads,
                   [&](std::size_t i) { out[i] = sample_hermitian_bm_drift_lambda(n, d.t, d.lambda, seed, i).spectrum; });
      return out;
    case DensityVariant::B_DRIFT:
    case DensityVariant::D_DRIFT:
      parallel_for(count, threads,
                   [&](std::size_t i) { out[i] = sample_skew_bm_drift(d.root_case.family(), n, d.t, seed, i).x; });
      return out;
    case DensityVariant::C_DRIFT: {
      const auto ens =
          run_ensemble(d.root_case, 1.0, d.t, SchemeConfig::for_horizon(d.t, 500), count, seed, Clock::HO, threads);
      for (std::size_t i = 0; i < count; ++i) out[i].coords = ens.terminal_states[i].x;
      return out;
    }
    case DensityVariant::B_FLAT:
    case DensityVariant::D_FLAT: break;
  }
  return {};
}

inline Verdict densities(const std::vector<ChamberDensity>& laws, const DensityOptions& o) {
  detail::Stopwatch sw;
  if (o.draws < 100000) throw InvalidArgument("density self-tests need at least 1e5 importance draws");
  Verdict v{"densities"};
  v.pass = true;
  json rows = json::array();
  double worst = 0.0;
  for (const auto& d : laws) {
    const auto e = mc_normalization(d, 0.0, o.draws, o.seed, o.threads);
    const double dev = std::abs(e.estimate - 1.0);
    worst = std::max(worst, dev);
    const bool ok = dev <= o.tolerance;
    v.pass = v.pass && ok;
    auto j = io::to_json(e);
    if (o.ks_samples >= 500) {
      const auto pts = density_samples(d, o.ks_samples, o.seed ^ 0x5A5A5A5AULL, o.threads);
      if (!pts.empty()) {
        MarginalOptions mo;
        mo.seed = o.seed;
        mo.threads = o.threads;
        mo.cache_dir = o.cache_dir;
        const auto rep = density_vs_sample_ks(d, pts, mo);
        json per = json::array();
        for (const auto& k : rep.per_coordinate) per.push_back(io::to_json(k));
        j["ks"] = json{{"per_coordinate", per}, {"samples", rep.sample_size}, {"tabulation_ess", rep.tabulation_ess},
                       {"pass01", rep.pass01()}};
        v.pass = v.pass && rep.pass01();
      }
    }
    j["variant"] = to_string(d.variant);
    j["case"] = to_string(d.root_case.family());
    j["N"] = d.root_case.rank();
    j["t"] = d.t;
    j["pass"] = ok;
    rows.push_back(j);
  }
  v.details = json{{"draws", o.draws}, {"seed", o.seed}, {"tolerance", o.tolerance}, {"ks_samples", o.ks_samples},
                   {"laws", rows}};
  v.summary = std::to_string(laws.size()) + " laws, max |mass - 1| = " + detail::fmt(worst, 3) + " (tol " +
              detail::fmt(o.tolerance, 3) + ")";
  v.seconds = sw.seconds();
  return v;
}

// ---------------------------------------------------------------------------
// Moment recursion closed forms and growth bound.

inline Verdict moment_recursion() {
  detail::Stopwatch sw;
  Verdict v{"moment_recursion"};
  v.pass = true;
  json closed = json::array();
  double worst = 0.0;
  for (double t : {0.1, 0.5, 1.0}) {
    const auto m = mult_bm_moments(moments_dirac(1.0, 3), t, 3);
    const double s1 = std::exp(t), s2 = std::exp(2 * t) * (1 + 2 * t), s3 = std::exp(3 * t) * (1 + 6 * t + 6 * t * t);
    const double e = std::max({detail::rel_err(m[1], s1), detail::rel_err(m[2], s2), detail::rel_err(m[3], s3)});
    worst = std::max(worst, e);
    v.pass = v.pass && e <= 1e-8;
    closed.push_back(json{{"t", t}, {"s", io::json_array({m[1], m[2], m[3]})},
                          {"closed", io::json_array({s1, s2, s3})}, {"max_rel_err", e}});
  }
  int bound_violations = 0;
  json bound = json::array();
  for (double t : {0.1, 0.25, 0.5, 1.0, 1.5, 2.0}) {
    const auto m = mult_bm_moments(moments_dirac(1.0, 10), t, 10);
    for (int l = 1; l <= 10; ++l) {
      const double b = mult_bm_growth_bound(1.0, t, l);
      if (m[l] > b * (1.0 + 1e-12)) ++bound_violations;
    }
    bound.push_back(json{{"t", t}, {"s_10", m[10]}, {"bound_10", mult_bm_growth_bound(1.0, t, 10)}});
  }
  v.pass = v.pass && bound_violations == 0;
  v.details = json{{"closed_forms", closed}, {"growth_bound", bound}, {"bound_violations", bound_violations}};
  v.summary = "closed forms max rel err " + detail::fmt(worst, 3) + ", growth-bound violations " +
              std::to_string(bound_violations);
  v.seconds = sw.seconds();
  return v;
}

// ---------------------------------------------------------------------------
// Free-cumulant engine.

namespace detail {

// Every set partition of {0..n-1} by restricted growth strings, kept when no
// two blocks cross.
inline std::vector<Partition> brute_force_nc(int n) {
  std::vector<Partition> out;
  std::vector<int> rgs(n, 0);
  while (true) {
    int k = 0;
    for (int v : rgs) k = std::max(k, v + 1);
    bool crossing = false;
    for (int a = 0; a < n && !crossing; ++a)
      for (int b = a + 1; b < n && !crossing; ++b)
        for (int c = b + 1; c < n && !crossing; ++c)
          for (int d = c + 1; d < n && !crossing; ++d)
            crossing = rgs[a] == rgs[c] && rgs[b] == rgs[d] && rgs[a] != rgs[b];
    if (!crossing) {
      Partition p(k);
      for (int i = 0; i < n; ++i) p[rgs[i]].push_back(i);
      out.push_back(p);
    }
    int i = n - 1;
    for (; i > 0; --i) {
      const int mx = *std::max_element(rgs.begin(), rgs.begin() + i);
      if (rgs[i] <= mx) {
        ++rgs[i];
        std::fill(rgs.begin() + i + 1, rgs.end(), 0);
        break;
      }
    }
    if (i <= 0) break;
  }
  return out;
}

inline std::set<Partition> canonical(std::vector<Partition> v) {
  for (auto& p : v) std::sort(p.begin(), p.end());
  return {v.begin(), v.end()};
}

// Moments of a random 5-atom probability measure on [-1.2, 1.2].
inline MomentVector random_discrete_moments(std::mt19937_64& g, int L) {
  std::uniform_real_distribution<double> ux(-1.2, 1.2), uw(0.1, 1.0);
  double x[5], w[5], sw = 0.0;
  for (int i = 0; i < 5; ++i) {
    x[i] = ux(g);
    sw += (w[i] = uw(g));
  }
  MomentVector v{std::vector<double>(L + 1, 0.0), MomentSource::CLOSED_FORM, {}};
  for (int l = 0; l <= L; ++l)
    for (int i = 0; i < 5; ++i) v.m[l] += w[i] / sw * std::pow(x[i], l);
  return v;
}

}  // namespace detail

inline Verdict cumulant_engine(std::uint64_t seed = 20240607, int trials = 60) {
  detail::Stopwatch sw;
  Verdict v{"cumulant_engine"};
  std::mt19937_64 g(seed);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int L = 1 + trial % 12;
    const auto m = detail::random_discrete_moments(g, L);
    const auto back = cumulants_to_moments(moments_to_cumulants(m));
    for (int l = 1; l <= L; ++l) worst = std::max(worst, detail::rel_err(back[l], m[l]));
  }
  json nc = json::array();
  bool nc_ok = true;
  for (int n = 1; n <= 6; ++n) {
    const auto fast = nc_partitions(n);
    const auto brute = detail::brute_force_nc(n);
    const bool same = detail::canonical(fast) == detail::canonical(brute);
    nc_ok = nc_ok && same;
    nc.push_back(json{{"n", n}, {"enumerated", fast.size()}, {"brute_force", brute.size()}, {"equal", same}});
  }
  v.pass = worst <= 1e-12 && nc_ok;
  v.details = json{{"round_trip_trials", trials}, {"round_trip_max_rel_err", worst}, {"nc_vs_brute_force", nc}};
  v.summary = "round-trip max rel err " + detail::fmt(worst, 3) + ", NC(n<=6) vs brute force " +
              (nc_ok ? "equal" : "DIFFERENT");
  v.seconds = sw.seconds();
  return v;
}

// ---------------------------------------------------------------------------
// Exponential push-forward identity: exp2 of U_t (+) sc equals mu_{2t}.

inline Verdict thm3_2(const std::vector<double>& ts, int L = 4, double tolerance = 0.01,
                      unsigned threads = default_threads()) {
  detail::Stopwatch sw;
  if (ts.empty()) throw InvalidArgument("thm3_2 needs at least one t");
  Verdict v{"thm3_2"};
  v.pass = true;
  json rows = json::array();
  double worst = 0.0;
  for (double t : ts) {
    if (!(t > 0.0)) throw InvalidArgument("t must be positive");
    const auto g = subordination_density(t, GridSpec::for_time(t), threads);
    const auto q = exp2_moments(g, L);
    const auto r = mult_bm_moments(moments_dirac(1.0, L), 2.0 * t, L);
    std::vector<double> errs;
    for (int l = 1; l <= L; ++l) errs.push_back(detail::rel_err(q[l], r[l]));
    const double e = *std::max_element(errs.begin(), errs.end());
    worst = std::max(worst, e);
    v.pass = v.pass && e <= tolerance;
    rows.push_back(json{{"t", t}, {"quadrature", io::json_array(q.m)}, {"recursion", io::json_array(r.m)},
                        {"rel_err", io::json_array(errs)}, {"grid", io::to_json(g)}});
  }
  v.details = json{{"L", L}, {"tolerance", tolerance}, {"cases", rows}};
  v.summary = "exp2 quadrature vs recursion at 2t, max rel err " + detail::fmt(worst, 3) + " (tol " +
              detail::fmt(tolerance, 3) + ")";
  v.seconds = sw.seconds();
  return v;
}

// ---------------------------------------------------------------------------
// Desk-scale limit theorems.

struct LimitOptions {
  int N = 150;
  double tau = 0.5;
  std::size_t replicas = 100;
  std::vector<double> ks{0.5, 1.0, 2.0, std::numeric_limits<double>::infinity()};
  int L = 4;
  std::uint64_t seed = 20240607;
  double steps = 400.0;
  SdeScheme scheme = SdeScheme::IMPLICIT;
  unsigned threads = default_threads();
};

namespace detail {

inline SweepOptions sweep_options(const LimitOptions& o) {
  SweepOptions s;
  s.L = o.L;
  s.replicas = o.replicas;
  s.seed = o.seed;
  s.steps = o.steps;
  s.scheme.scheme = o.scheme;
  s.threads = o.threads;
  return s;
}

// Target check for the listed moments and pairwise k-consistency.
inline Verdict limit_verdict(const std::string& name, const std::vector<EmpiricalReport>& reports,
                             const std::vector<int>& ls) {
  Verdict v{name};
  bool targets_ok = true, mutual_ok = true;
  json rows = json::array();
  for (const auto& r : reports) {
    json ok = json::array();
    for (int l : ls) {
      const bool b = r.moment_ok(l);
      ok.push_back(b);
      targets_ok = targets_ok && b;
    }
    auto j = io::to_json(r);
    j["checked_l"] = ls;
    j["checked_ok"] = ok;
    rows.push_back(j);
  }
  json pairs = json::array();
  double worst_gap = 0.0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (std::size_t j = i + 1; j < reports.size(); ++j) {
      const auto& a = reports[i];
      const auto& b = reports[j];
      for (int l : ls) {
        const double sa = std::isnan(a.estimate.stderr_[l]) ? 0.0 : a.estimate.stderr_[l];
        const double sb = std::isnan(b.estimate.stderr_[l]) ? 0.0 : b.estimate.stderr_[l];
        const bool ok = mutually_consistent(a.estimate[l], sa, b.estimate[l], sb, a.target[l]);
        mutual_ok = mutual_ok && ok;
        const double sigma = std::sqrt(sa * sa + sb * sb);
        const double gap = std::abs(a.estimate[l] - b.estimate[l]);
        worst_gap = std::max(worst_gap, gap / std::abs(a.target[l]));
        pairs.push_back(json{{"k_a", io::json_number(a.k)}, {"k_b", io::json_number(b.k)}, {"l", l},
                             {"difference", gap}, {"pooled_sigma", sigma}, {"consistent", ok}});
      }
    }
  }
  v.pass = targets_ok && mutual_ok;
  v.details = json{{"reports", rows}, {"pairs", pairs}, {"targets_ok", targets_ok}, {"mutual_ok", mutual_ok}};
  double worst_target = 0.0;
  for (const auto& r : reports)
    for (int l : ls) worst_target = std::max(worst_target, r.abs_error(l) / std::abs(r.target[l]));
  v.summary = "targets " + std::string(targets_ok ? "ok" : "FAIL") + " (max rel dev " + fmt(worst_target, 3) +
              "), k-consistency " + (mutual_ok ? "ok" : "FAIL") + " (max rel gap " + fmt(worst_gap, 3) + ")";
  return v;
}

}  // namespace detail

/// Empirical measure at TILDE time tau / N against U_tau (+) sc, across k.
inline Verdict thm1(const LimitOptions& o) {
  detail::Stopwatch sw;
  const auto reports = convergence_sweep(Family::A, o.ks, {o.N}, o.tau, Transform::IDENT, detail::sweep_options(o));
  std::vector<int> ls;
  for (int l = 2; l <= o.L; l += 2) ls.push_back(l);  // odd targets vanish; checked by the 3 sigma floor alone
  auto v = detail::limit_verdict("thm1", reports, ls);
  v.seconds = sw.seconds();
  return v;
}

/// exp(2 x) push-forward at TILDE time tau / (2N) against delta_1 [x] mu_tau, across k.
inline Verdict thm3_1(const LimitOptions& o) {
  detail::Stopwatch sw;
  const auto reports = convergence_sweep(Family::A, o.ks, {o.N}, o.tau, Transform::EXP2, detail::sweep_options(o));
  std::vector<int> ls;
  for (int l = 1; l <= o.L; ++l) ls.push_back(l);
  auto v = detail::limit_verdict("thm3_1", reports, ls);
  v.seconds = sw.seconds();
  return v;
}

/// Case B at k = 1, |x| push-forward at time tau / (2N), even moments.
inline Verdict thm4_2(const LimitOptions& o) {
  detail::Stopwatch sw;
  const auto reports = convergence_sweep(Family::B, {1.0}, {o.N}, o.tau, Transform::ABS, detail::sweep_options(o));
  std::vector<int> ls;
  for (int l = 2; l <= o.L; l += 2) ls.push_back(l);
  auto v = detail::limit_verdict("thm4_2", reports, ls);
  v.seconds = sw.seconds();
  return v;
}

// ---------------------------------------------------------------------------
// Spherical-function and integer identities.

inline Verdict spherical_identities(std::uint64_t seed = 20240607, int points = 100) {
  detail::Stopwatch sw;
  Verdict v{"spherical_identities"};
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> gap(0.3, 1.5);
  // Chamber points whose root pairings are all >= 0.3; for D the first
  // coordinate takes either sign.
  auto interior = [&](const RootCase& rc) {
    const int n = rc.rank();
    std::vector<double> x(n);
    double s = rc.family() == Family::A ? -0.9 * n : gap(g);
    for (int i = 0; i < n; ++i) {
      x[i] = s;
      s += gap(g);
    }
    if (rc.family() == Family::D && (g() & 1u)) x[0] = -x[0];
    return x;
  };
  double worst_weyl = 0.0, worst_scale = 0.0;
  json cases = json::array();
  for (Family f : {Family::A, Family::B, Family::C, Family::D}) {
    for (int n = 2; n <= 4; ++n) {
      const RootCase rc(f, n);
      const auto r = rho_real(rc);
      double w = 0.0;
      for (int p = 0; p < points; ++p) {
        const auto x = interior(rc);
        w = std::max(w, detail::rel_err(psi_general(rc, r, x), psi_weyl(rc, x)));
      }
      worst_weyl = std::max(worst_weyl, w);
      cases.push_back(json{{"case", to_string(f)}, {"N", n}, {"psi_general_vs_weyl_max_rel_err", w}});
    }
  }
  std::uniform_real_distribution<double> uc(0.3, 2.0);
  for (int n = 2; n <= 5; ++n) {
    const RootCase rc(Family::A, n);
    double w = 0.0;
    for (int p = 0; p < points; ++p) {
      const auto lam = interior(rc);
      const auto x = interior(rc);
      const double c = uc(g);
      std::vector<double> cl(lam), cx(x);
      for (double& y : cl) y *= c;
      for (double& y : cx) y *= c;
      w = std::max(w, detail::rel_err(psi_general(rc, cl, x), psi_general(rc, lam, cx)));
    }
    worst_scale = std::max(worst_scale, w);
    cases.push_back(json{{"case", "A"}, {"N", n}, {"scaling_max_rel_err", w}});
  }
  v.pass = worst_weyl <= 1e-10 && worst_scale <= 1e-10;
  v.details = json{{"points_per_case", points}, {"cases", cases}};
  v.summary = "psi_general vs Weyl product max rel err " + detail::fmt(worst_weyl, 3) + ", scaling " +
              detail::fmt(worst_scale, 3);
  v.seconds = sw.seconds();
  return v;
}

inline Verdict integer_identities(int max_rank = 64) {
  detail::Stopwatch sw;
  Verdict v{"integer_identities"};
  int mismatches = 0, checked = 0;
  for (Family f : {Family::A, Family::B, Family::C, Family::D}) {
    for (int n = 2; n <= max_rank; ++n) {
      const RootCase rc(f, n);
      IntVector sum(n, 0);
      for (const auto& a : positive_roots(rc))
        for (int i = 0; i < n; ++i) sum[i] += a[i];
      std::int64_t norm = 0;
      for (auto x : sum) norm += x * x;
      if (sum != rho(rc) || norm != rho_norm_sq(rc)) ++mismatches;
      ++checked;
    }
  }
  v.pass = mismatches == 0;
  v.details = json{{"max_rank", max_rank}, {"cases_checked", checked}, {"mismatches", mismatches}};
  v.summary = std::to_string(checked) + " (case, N) pairs, " + std::to_string(mismatches) + " mismatches";
  v.seconds = sw.seconds();
  return v;
}

inline json to_json(const Verdict& v) {
  return json{{"target", v.target}, {"pass", v.pass}, {"summary", v.summary}, {"details", v.details}};
}

}  // namespace hecop::verify
