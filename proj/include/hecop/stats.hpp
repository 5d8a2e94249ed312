#pragma once

// Empirical spectral moments, free-time bookkeeping and the cross-(k, N)
// convergence sweep against the free-probability targets.
//
// Free time tau maps to simulation horizons as follows:
//   IDENT (U_tau (+) sc):        A, TILDE clock, horizon tau / N
//   EXP2  (delta_1 [x] mu_tau):  A, TILDE clock, horizon tau / (2N)
//   ABS   (|U_tau (+) sc|):      B, k = 1,       horizon tau / (2N)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hecop/errors.hpp"
#include "hecop/freeprob.hpp"
#include "hecop/ks.hpp"
#include "hecop/rootsys.hpp"
#include "hecop/sde.hpp"

namespace hecop {

enum class Transform { IDENT, EXP2, ABS };

inline const char* to_string(Transform t) {
  switch (t) {
    case Transform::IDENT: return "IDENT";
    case Transform::EXP2: return "EXP2";
    case Transform::ABS: return "ABS";
  }
  return "?";
}

inline Transform transform_from_string(const std::string& s) {
  if (s == "IDENT" || s == "ident") return Transform::IDENT;
  if (s == "EXP2" || s == "exp2") return Transform::EXP2;
  if (s == "ABS" || s == "abs") return Transform::ABS;
  throw InvalidArgument("unknown transform '" + s + "' (expected IDENT, EXP2 or ABS)");
}

/// Simulation horizon for free time tau at rank N.
inline double simulation_horizon(Transform tr, double tau, int n) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  if (n < 1) throw InvalidArgument("N must be >= 1");
  return tr == Transform::IDENT ? tau / n : tau / (2.0 * n);
}

/// Limit moments the empirical moments converge to under the conventions above.
inline MomentVector target_moments(Transform tr, double tau, int L) {
  switch (tr) {
    case Transform::IDENT: return limit_moments_ident(tau, L);
    case Transform::EXP2: return mult_bm_moments(moments_dirac(1.0, L), tau, L);
    case Transform::ABS: {
      const auto g = subordination_density(tau);
      return abs_fold_moments(limit_moments_ident(tau, L), &g);
    }
  }
  throw InvalidArgument("unknown transform");
}

namespace detail {

inline double apply_transform(Transform tr, double x) {
  switch (tr) {
    case Transform::IDENT: return x;
    case Transform::EXP2: return std::exp(2.0 * x);
    case Transform::ABS: return std::abs(x);
  }
  return x;
}

}  // namespace detail

/// Pooled moments of the empirical measures (1/N) sum delta_{f(x_i)}, with
/// standard errors from batch means over replicas (one batch per replica).
/// A single replica gives NaN errors.
inline MomentVector empirical_moments(const std::vector<std::vector<double>>& samples, Transform tr, int L) {
  if (samples.empty()) throw InvalidArgument("empirical_moments: empty input");
  detail::check_L(L);
  const std::size_t r = samples.size();
  std::vector<std::vector<double>> per(r, std::vector<double>(L + 1, 0.0));
  for (std::size_t k = 0; k < r; ++k) {
    const auto& x = samples[k];
    if (x.empty()) throw InvalidArgument("empirical_moments: empty replica");
    for (double v : x) {
      const double y = detail::apply_transform(tr, v);
      double p = 1.0;
      for (int l = 0; l <= L; ++l) {
        per[k][l] += p;
        p *= y;
      }
    }
    for (double& m : per[k]) m /= static_cast<double>(x.size());
  }
  MomentVector out{std::vector<double>(L + 1, 0.0), MomentSource::EMPIRICAL, std::vector<double>(L + 1, 0.0)};
  for (int l = 0; l <= L; ++l) {
    double s = 0.0;
    for (std::size_t k = 0; k < r; ++k) s += per[k][l];
    const double mean = s / static_cast<double>(r);
    out.m[l] = mean;
    if (r < 2) {
      out.stderr_[l] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double ss = 0.0;
    for (std::size_t k = 0; k < r; ++k) ss += (per[k][l] - mean) * (per[k][l] - mean);
    out.stderr_[l] = std::sqrt(ss / static_cast<double>(r - 1) / static_cast<double>(r));
  }
  return out;
}

inline MomentVector empirical_moments(const PathEnsemble& e, Transform tr, int L) {
  std::vector<std::vector<double>> s;
  s.reserve(e.terminal_states.size());
  for (const auto& st : e.terminal_states) s.push_back(st.x);
  return empirical_moments(s, tr, L);
}

/// |est - target| <= max(rel_floor |target|, nsigma sigma).
inline bool within_tolerance(double est, double sigma, double target, double rel_floor = 0.05, double nsigma = 3.0) {
  return std::abs(est - target) <= std::max(rel_floor * std::abs(target), nsigma * sigma);
}

/// Two estimates agree within nsigma pooled standard errors, with the same
/// relative floor as the target comparison.
inline bool mutually_consistent(double a, double sa, double b, double sb, double target, double rel_floor = 0.05,
                                double nsigma = 3.0) {
  return std::abs(a - b) <= std::max(rel_floor * std::abs(target), nsigma * std::sqrt(sa * sa + sb * sb));
}

struct EmpiricalReport {
  Family family = Family::A;
  double k = 1.0;
  int N = 0;
  double tau = 0.0;
  Clock clock = Clock::TILDE;
  double horizon = 0.0;
  Transform transform = Transform::IDENT;
  MomentVector estimate;
  MomentVector target;
  std::vector<KsResult> ks;  // optional, per ordered coordinate
  std::size_t replicas = 0;
  std::uint64_t seed = 0;

  bool moment_ok(int l, double rel_floor = 0.05, double nsigma = 3.0) const {
    if (transform == Transform::ABS && l % 2 == 1 && std::isnan(target[l])) return true;
    const double se = std::isnan(estimate.stderr_.at(l)) ? 0.0 : estimate.stderr_.at(l);
    return within_tolerance(estimate[l], se, target[l], rel_floor, nsigma);
  }
  double abs_error(int l) const { return std::abs(estimate[l] - target[l]); }
};

struct SweepOptions {
  int L = 4;
  std::size_t replicas = 100;
  std::uint64_t seed = 1;
  double steps = 400.0;  // dt_base = horizon / steps
  SchemeConfig scheme = {};
  bool scheme_given = false;  // use `scheme` verbatim instead of for_horizon
  unsigned threads = default_threads();
};

/// One ensemble and its report.
inline EmpiricalReport run_report(const RootCase& rc, double k, double tau, Transform tr, const SweepOptions& o) {
  EmpiricalReport r;
  r.family = rc.family();
  r.k = k;
  r.N = rc.rank();
  r.tau = tau;
  r.clock = Clock::TILDE;
  r.transform = tr;
  r.horizon = simulation_horizon(tr, tau, rc.rank());
  r.replicas = o.replicas;
  r.seed = o.seed;
  SchemeConfig cfg = o.scheme_given ? o.scheme : SchemeConfig::for_horizon(r.horizon, o.steps);
  if (!o.scheme_given) cfg.scheme = o.scheme.scheme;
  const auto ens = run_ensemble(rc, k, r.horizon, cfg, o.replicas, o.seed, r.clock, o.threads);
  r.estimate = empirical_moments(ens, tr, o.L);
  r.target = target_moments(tr, tau, o.L);
  return r;
}

/// Reports for every (k, N); cells run one after another, each ensemble in
/// parallel over replicas.
inline std::vector<EmpiricalReport> convergence_sweep(Family family, const std::vector<double>& k_list,
                                                      const std::vector<int>& n_list, double tau, Transform tr,
                                                      const SweepOptions& o) {
  if (k_list.empty() || n_list.empty()) throw InvalidArgument("convergence_sweep needs k and N values");
  for (double k : k_list) {
    if (!(k >= 0.5)) throw InvalidArgument("k must lie in [1/2, inf]");
  }
  if (!std::is_sorted(n_list.begin(), n_list.end())) throw InvalidArgument("N list must be ascending");
  if (tr == Transform::ABS && family != Family::B) throw InvalidArgument("ABS targets belong to case B");
  if (tr != Transform::ABS && family != Family::A) throw InvalidArgument("IDENT/EXP2 targets belong to case A");
  std::vector<EmpiricalReport> out;
  for (int n : n_list)
    for (double k : k_list) out.push_back(run_report(RootCase(family, n), k, tau, tr, o));
  return out;
}

/// Median over l = 1..L of |estimate - target| for the reports at rank N.
inline double median_abs_error(const std::vector<EmpiricalReport>& reports, int n) {
  std::vector<double> e;
  for (const auto& r : reports) {
    if (r.N != n) continue;
    for (int l = 1; l <= r.estimate.L(); ++l) {
      if (!std::isnan(r.target[l])) e.push_back(r.abs_error(l) / std::max(1e-300, std::abs(r.target[l])));
    }
  }
  if (e.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(e.begin(), e.end());
  const std::size_t m = e.size() / 2;
  return e.size() % 2 ? e[m] : 0.5 * (e[m - 1] + e[m]);
}

}  // namespace hecop
