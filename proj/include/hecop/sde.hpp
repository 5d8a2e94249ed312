#pragma once

// Time integrators for the radial Heckman-Opdam particle systems:
//   HO clock:    dX_i = dB_i + k * drift_i(X) dt
//   TILDE clock: dX_i = k^{-1/2} dB_i + drift_i(X) dt      (X~_t = X_{t/k})
// and the k = infinity limit dX_i/dt = drift_i(X) on the TILDE clock.
//
// The drift is k * grad Phi with Phi(x) = sum_{alpha in R+} log sinh <alpha, x>,
// which is concave on the chamber. The default SDE scheme is drift-implicit
// Euler, x' = y + h k grad Phi(x') with y = x + noise: x' is the unique
// minimizer of |x' - y|^2 / 2 - h k Phi(x') and always lies in the open chamber.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hecop/errors.hpp"
#include "hecop/parallel.hpp"
#include "hecop/rng.hpp"
#include "hecop/rootsys.hpp"

namespace hecop {

enum class Clock { HO, TILDE };

inline const char* to_string(Clock c) { return c == Clock::HO ? "HO" : "TILDE"; }

inline Clock clock_from_string(const std::string& s) {
  if (s == "HO" || s == "ho") return Clock::HO;
  if (s == "TILDE" || s == "tilde") return Clock::TILDE;
  throw InvalidArgument("unknown clock '" + s + "'");
}

enum class SdeScheme { IMPLICIT, EXPLICIT };

inline const char* to_string(SdeScheme s) { return s == SdeScheme::IMPLICIT ? "implicit" : "explicit"; }

inline SdeScheme scheme_from_string(const std::string& s) {
  if (s == "implicit") return SdeScheme::IMPLICIT;
  if (s == "explicit") return SdeScheme::EXPLICIT;
  throw InvalidArgument("unknown scheme '" + s + "'");
}

/// Step control shared by the SDE and ODE integrators.
///
/// Integration starts at dt_base * initial_dt_fraction; after 10 consecutive
/// accepted steps dt doubles, up to dt_base, and every rejected proposal
/// halves it. A proposal is rejected when a chamber gap would fall to
/// `collision_margin` or below, or (implicit scheme) when the Newton solve
/// fails. The explicit Euler and RK4 steps are also capped so that the drift
/// alone moves no gap by more than (1 - max_gap_shrink) of itself, and are
/// rejected when their noise-free part changes a gap by more than the factor
/// max_gap_shrink or its inverse.
struct SchemeConfig {
  SdeScheme scheme = SdeScheme::IMPLICIT;
  double dt_base = 1e-4;
  double initial_dt_fraction = 1.0 / 1024.0;
  double dt_min = 1e-30;
  double collision_margin = 1e-12;
  double warm_start_delta = 1e-6;
  double max_gap_shrink = 0.5;
  std::int64_t max_steps = 200'000'000;

  void validate() const {
    if (!(dt_base > 0.0) || !(dt_min > 0.0) || dt_min > dt_base) {
      throw InvalidArgument("scheme needs 0 < dt_min <= dt_base");
    }
    if (!(collision_margin > 0.0)) throw InvalidArgument("collision_margin must be positive");
    if (!(warm_start_delta > 0.0)) throw InvalidArgument("warm_start_delta must be positive");
    if (!(max_gap_shrink > 0.0 && max_gap_shrink < 1.0)) {
      throw InvalidArgument("max_gap_shrink must lie in (0, 1)");
    }
    if (max_steps <= 0) throw InvalidArgument("max_steps must be positive");
    if (!(initial_dt_fraction > 0.0 && initial_dt_fraction <= 1.0)) {
      throw InvalidArgument("initial_dt_fraction must lie in (0, 1]");
    }
  }

  /// dt_base = t_end / steps, other fields at their defaults.
  static SchemeConfig for_horizon(double t_end, double steps = 2000.0) {
    SchemeConfig cfg;
    cfg.dt_base = t_end / steps;
    return cfg;
  }
};

/// delta * rho / N, nudged into the open chamber for D (x1 = delta / (2N)).
inline ParticleState warm_start(const RootCase& rc, double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("warm_start delta must be positive");
  const auto r = rho(rc);
  const double n = rc.rank();
  ParticleState s;
  s.x.resize(rc.size());
  for (std::size_t i = 0; i < rc.size(); ++i) s.x[i] = delta * static_cast<double>(r[i]) / n;
  if (rc.family() == Family::D) s.x[0] = delta / (2.0 * n);
  return s;
}

namespace detail {

inline bool all_zero(const std::vector<double>& x) {
  for (double v : x) {
    if (v != 0.0) return false;
  }
  return true;
}

inline std::vector<double> resolve_start(const RootCase& rc, const ParticleState& start,
                                         const SchemeConfig& cfg) {
  check_dim(rc, start.x.size());
  if (all_zero(start.x)) {
    if (rc.rank() == 1) return start.x;
    return warm_start(rc, cfg.warm_start_delta).x;
  }
  if (!is_interior(rc, start.x)) {
    throw InvalidArgument("start state must be interior or the zero state");
  }
  return start.x;
}

/// Gap guard shared by all steppers.
class StepGuard {
 public:
  StepGuard(Family family, const SchemeConfig& cfg) : family_(family), cfg_(cfg) {}

  void reset(std::span<const double> x) { chamber_gaps(family_, x, old_); }

  /// `deterministic` is the proposal without its noise increment; an empty
  /// span skips the relative-change rule.
  bool accept(std::span<const double> proposal, std::span<const double> deterministic) {
    for (double v : proposal) {
      if (!std::isfinite(v)) return false;
    }
    if (!deterministic.empty()) {
      chamber_gaps(family_, deterministic, new_);
      for (std::size_t i = 0; i < new_.size(); ++i) {
        if (!(new_[i] >= cfg_.max_gap_shrink * old_[i])) return false;
        if (cfg_.max_gap_shrink * new_[i] > old_[i]) return false;
      }
    }
    chamber_gaps(family_, proposal, new_);
    for (double g : new_) {
      if (!(g > cfg_.collision_margin)) return false;
    }
    return true;
  }

  void commit() { old_.swap(new_); }

 private:
  Family family_;
  const SchemeConfig& cfg_;
  std::vector<double> old_;
  std::vector<double> new_;
};

/// Largest h for which h * rate moves no gap by more than `theta` of itself.
inline double drift_step_cap(Family family, std::span<const double> x, std::span<const double> rate,
                             double theta, std::vector<double>& gaps, std::vector<double>& gap_rates) {
  chamber_gaps(family, x, gaps);
  chamber_gaps(family, rate, gap_rates);  // gaps are linear in x
  double cap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double r = std::abs(gap_rates[i]);
    if (r > 0.0) cap = std::min(cap, theta * gaps[i] / r);
  }
  return cap;
}

/// Shared adaptive driver.
///
/// `prepare(x)` runs once per accepted state and returns a state-dependent
/// step cap. `propose(x, h, attempt, out)` writes a proposal and returns
/// false when it cannot be formed (e.g. an RK stage left the chamber or a
/// Newton solve failed); `det_of()` gives the noise-free part to check, or an
/// empty span.
template <class Prepare, class Propose, class Det>
std::vector<double> adaptive_integrate(const RootCase& rc, double t_end, const SchemeConfig& cfg,
                                       std::vector<double> x, std::size_t replica, Prepare&& prepare,
                                       Propose&& propose, Det&& det_of) {
  StepGuard guard(rc.family(), cfg);
  guard.reset(x);
  std::vector<double> proposal(x.size());
  double t = 0.0;
  double dt = cfg.dt_base * cfg.initial_dt_fraction;
  int accepted_run = 0;
  std::int64_t steps = 0;
  std::uint32_t attempt = 0;
  while (t < t_end) {
    const double cap = prepare(x);
    double h = std::min({dt, cap, t_end - t});
    for (;;) {
      if (h < cfg.dt_min) throw StepFailure(t, replica, "step size fell below dt_min");
      if (propose(x, h, attempt++, proposal) && guard.accept(proposal, det_of())) break;
      h /= 2.0;
      dt = h;
      accepted_run = 0;
    }
    x.swap(proposal);
    guard.commit();
    t = (h >= t_end - t) ? t_end : t + h;
    if (++accepted_run >= 10) {
      dt = std::min(2.0 * dt, cfg.dt_base);
      accepted_run = 0;
    }
    if (++steps > cfg.max_steps) throw StepFailure(t, replica, "max_steps exceeded");
  }
  return x;
}

/// Minimizes F(x) = |x - y|^2 / 2 - c Phi(x) over the open chamber by damped
/// Newton, starting from an interior point. Phi is concave, so F is strictly
/// convex with Hessian I + c sum_alpha alpha alpha^T / sinh^2 <alpha, x>.
class ImplicitSolver {
 public:
  explicit ImplicitSolver(const RootCase& rc)
      : rc_(rc), n_(rc.size()), hess_(n_, n_), grad_(n_), step_(n_), trial_(n_) {}

  /// Returns false when Newton does not converge; `x` then holds garbage.
  bool solve(std::span<const double> start, std::span<const double> y, double c, std::span<double> x) {
    std::copy(start.begin(), start.end(), x.begin());
    double mag = 0.0;
    double f = objective(x, y, c, mag);
    bool f_valid = true;  // mag is kept from the last evaluation while stale
    for (int iter = 0; iter < 200; ++iter) {
      assemble(x, y, c);
      llt_.compute(hess_);
      if (llt_.info() != Eigen::Success) return false;
      step_ = -llt_.solve(grad_);
      const double decrement = -grad_.dot(step_);
      if (!std::isfinite(decrement)) return false;
      chamber_gaps(rc_.family(), x, gaps_);
      const double scale = *std::min_element(gaps_.begin(), gaps_.end());
      const bool done = step_.cwiseAbs().maxCoeff() <= 1e-10 * scale;
      // Below the round-off level of F, Armijo cannot see progress: take the
      // plain Newton step (quadratic convergence region).
      const bool plain = done || decrement <= 1e-13 * mag;
      double a = 1.0;
      for (;; a *= 0.5) {
        if (a < 1e-30) return false;
        for (std::size_t i = 0; i < n_; ++i) trial_[i] = x[i] + a * step_[i];
        if (!is_interior(rc_, trial_)) continue;
        if (plain) break;
        if (!f_valid) {
          f = objective(x, y, c, mag);
          f_valid = true;
        }
        double trial_mag = 0.0;
        const double ft = objective(trial_, y, c, trial_mag);
        if (ft <= f - 1e-4 * a * decrement) {
          f = ft;
          mag = trial_mag;
          break;
        }
      }
      std::copy(trial_.begin(), trial_.end(), x.begin());
      if (done) return true;
      f_valid = !plain;
    }
    return false;
  }

 private:
  // coth(u) and 1/sinh^2(u) from one exponential.
  struct PairTerms {
    double coth, inv_sinh2;
  };
  static PairTerms terms(double u) {
    double e, one_minus_e;
    if (u > 0.5) {
      e = std::exp(-2.0 * u);
      one_minus_e = 1.0 - e;
    } else {
      one_minus_e = -std::expm1(-2.0 * u);
      e = 1.0 - one_minus_e;
    }
    return {(1.0 + e) / one_minus_e, 4.0 * e / (one_minus_e * one_minus_e)};
  }

  template <class Visit>
  void for_each_root(std::span<const double> x, Visit&& visit) const {
    // visit(i, j, sign_i, scale, u): root scale * (e_j + sign_i e_i), j > i, or
    // with i == j a singleton root scale * e_i.
    const Family f = rc_.family();
    for (std::size_t j = 1; j < n_; ++j) {
      for (std::size_t i = 0; i < j; ++i) {
        visit(i, j, -1.0, 1.0, x[j] - x[i]);
        if (f != Family::A) visit(i, j, 1.0, 1.0, x[j] + x[i]);
      }
    }
    if (f == Family::B) {
      for (std::size_t i = 0; i < n_; ++i) visit(i, i, 0.0, 1.0, x[i]);
    } else if (f == Family::C) {
      for (std::size_t i = 0; i < n_; ++i) visit(i, i, 0.0, 2.0, 2.0 * x[i]);
    }
  }

  // F and the magnitude |q| + |c Phi| that sets its round-off level.
  double objective(std::span<const double> x, std::span<const double> y, double c, double& mag) const {
    double q = 0.0, phi = 0.0;
    for (std::size_t i = 0; i < n_; ++i) q += 0.5 * (x[i] - y[i]) * (x[i] - y[i]);
    for_each_root(x, [&](std::size_t, std::size_t, double, double, double u) { phi += log_sinh(u); });
    mag = q + std::abs(c * phi);
    return q - c * phi;
  }

  void assemble(std::span<const double> x, std::span<const double> y, double c) {
    hess_.setIdentity();
    for (std::size_t i = 0; i < n_; ++i) grad_[i] = x[i] - y[i];
    for_each_root(x, [&](std::size_t i, std::size_t j, double sgn, double scale, double u) {
      const auto tm = terms(u);
      const double g = c * scale * tm.coth;
      const double w = c * scale * scale * tm.inv_sinh2;
      if (i == j) {
        grad_[i] -= g;
        hess_(i, i) += w;
        return;
      }
      grad_[j] -= g;
      grad_[i] -= sgn * g;
      hess_(j, j) += w;
      hess_(i, i) += w;
      hess_(i, j) += sgn * w;
      hess_(j, i) += sgn * w;
    });
  }

  const RootCase& rc_;
  std::size_t n_;
  Eigen::MatrixXd hess_;
  Eigen::VectorXd grad_, step_;
  std::vector<double> trial_, gaps_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace detail

/// Euler scheme from SchemeConfig::scheme: drift-implicit (default) or
/// explicit Euler-Maruyama with rejection at near-collisions. Deterministic
/// in (seed, replica); a zero start is replaced by warm_start.
inline ParticleState simulate_sde(const RootCase& rc, double k, double t_end, const SchemeConfig& cfg,
                                  std::uint64_t seed, const ParticleState& start, Clock clock,
                                  std::size_t replica = 0) {
  if (!(k >= 0.5) || std::isinf(k)) {
    throw InvalidArgument("simulate_sde needs 1/2 <= k < infinity (use simulate_ode for k = inf)");
  }
  if (!(t_end > 0.0)) throw InvalidArgument("t_end must be positive");
  cfg.validate();
  auto x0 = detail::resolve_start(rc, start, cfg);
  const double drift_scale = clock == Clock::HO ? k : 1.0;
  const double diffusion = clock == Clock::HO ? 1.0 : 1.0 / std::sqrt(k);
  const GaussianStream noise(seed, RngDomain::kSde, replica);
  const Family family = rc.family();
  const std::size_t n = x0.size();
  std::vector<double> drift(n), z(n), y(n), det(n), gaps, rates;

  if (cfg.scheme == SdeScheme::IMPLICIT) {
    detail::ImplicitSolver solver(rc);
    const bool free_particle = n == 1 && family == Family::A;
    auto prepare = [&](const std::vector<double>& x) {
      if (!free_particle) drift_field_into(family, x, drift);
      return std::numeric_limits<double>::infinity();
    };
    auto propose = [&](const std::vector<double>& x, double h, std::uint32_t attempt, std::vector<double>& out) {
      noise.fill(attempt, z);
      const double sh = diffusion * std::sqrt(h);
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + sh * z[i];
      if (free_particle) {
        out[0] = y[0];
        return true;
      }
      // Newton starts from the explicit Euler point when it is admissible.
      for (std::size_t i = 0; i < n; ++i) det[i] = y[i] + drift_scale * h * drift[i];
      return solver.solve(is_interior(rc, det) ? std::span<const double>(det) : std::span<const double>(x), y,
                          drift_scale * h, out);
    };
    auto no_det = [] { return std::span<const double>(); };
    auto x = detail::adaptive_integrate(rc, t_end, cfg, std::move(x0), replica, prepare, propose, no_det);
    return {std::move(x), t_end};
  }

  const double theta = 1.0 - cfg.max_gap_shrink;
  auto prepare = [&](const std::vector<double>& x) {
    drift_field_into(family, x, drift);
    for (double& d : drift) d *= drift_scale;
    return detail::drift_step_cap(family, x, drift, theta, gaps, rates);
  };
  auto propose = [&](const std::vector<double>& x, double h, std::uint32_t attempt, std::vector<double>& out) {
    noise.fill(attempt, z);
    const double sh = diffusion * std::sqrt(h);
    for (std::size_t i = 0; i < n; ++i) {
      det[i] = x[i] + drift[i] * h;
      out[i] = det[i] + sh * z[i];
    }
    return true;
  };
  auto det_of = [&] { return std::span<const double>(det); };
  auto x = detail::adaptive_integrate(rc, t_end, cfg, std::move(x0), replica, prepare, propose, det_of);
  return {std::move(x), t_end};
}

/// Classical RK4 for the k = infinity flow on the TILDE clock, with the
/// drift cap and step guard.
inline ParticleState simulate_ode(const RootCase& rc, double t_end, const SchemeConfig& cfg,
                                  const ParticleState& start) {
  if (!(t_end > 0.0)) throw InvalidArgument("t_end must be positive");
  cfg.validate();
  auto x0 = detail::resolve_start(rc, start, cfg);
  const Family family = rc.family();
  const std::size_t n = x0.size();
  const double theta = 1.0 - cfg.max_gap_shrink;
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), det(n), gaps, rates;
  auto prepare = [&](const std::vector<double>& x) {
    drift_field_into(family, x, k1);
    return detail::drift_step_cap(family, x, k1, theta, gaps, rates);
  };
  auto propose = [&](const std::vector<double>& x, double h, std::uint32_t, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    if (!is_interior(rc, tmp)) return false;
    drift_field_into(family, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    if (!is_interior(rc, tmp)) return false;
    drift_field_into(family, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    if (!is_interior(rc, tmp)) return false;
    drift_field_into(family, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    det = out;
    return true;
  };
  auto det_of = [&] { return std::span<const double>(det); };
  auto x = detail::adaptive_integrate(rc, t_end, cfg, std::move(x0), 0, prepare, propose, det_of);
  return {std::move(x), t_end};
}

/// Terminal states of independent replicas plus the run metadata.
struct PathEnsemble {
  RootCase root_case;
  double k;
  Clock clock;
  double t_end;
  std::uint64_t seed;
  std::size_t replicas;
  std::vector<ParticleState> terminal_states;
};

/// Replica r runs simulate_sde with stream index r; k = inf runs the ODE once
/// (it is deterministic) and copies it into every slot.
inline PathEnsemble run_ensemble(const RootCase& rc, double k, double t_end, const SchemeConfig& cfg,
                                 std::size_t replicas, std::uint64_t seed, Clock clock,
                                 unsigned threads = default_threads()) {
  if (replicas < 1) throw InvalidArgument("replicas must be >= 1");
  PathEnsemble ens{rc, k, clock, t_end, seed, replicas, {}};
  ens.terminal_states.resize(replicas);
  const ParticleState zero{std::vector<double>(rc.size(), 0.0), 0.0};
  if (std::isinf(k)) {
    if (clock != Clock::TILDE) throw InvalidArgument("k = inf is only defined on the TILDE clock");
    const auto s = simulate_ode(rc, t_end, cfg, zero);
    for (auto& slot : ens.terminal_states) slot = s;
    return ens;
  }
  parallel_for(replicas, threads, [&](std::size_t r) {
    ens.terminal_states[r] = simulate_sde(rc, k, t_end, cfg, seed, zero, clock, r);
  });
  return ens;
}

}  // namespace hecop
