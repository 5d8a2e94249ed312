#pragma once

// Large-N limits: moment/free-cumulant combinatorics, free additive
// convolution, the moment ODE of free positive multiplicative Brownian
// motion, and the density of U_t (+) semicircle by subordination.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "hecop/errors.hpp"
#include "hecop/parallel.hpp"

namespace hecop {

inline constexpr int kMaxMoments = 16;

enum class MomentSource { CLOSED_FORM, CUMULANT, RECURSION, QUADRATURE, EMPIRICAL };

inline const char* to_string(MomentSource s) {
  switch (s) {
    case MomentSource::CLOSED_FORM: return "closed_form";
    case MomentSource::CUMULANT: return "cumulant";
    case MomentSource::RECURSION: return "recursion";
    case MomentSource::QUADRATURE: return "quadrature";
    case MomentSource::EMPIRICAL: return "empirical";
  }
  return "?";
}

/// m[l] for l = 0..L with m[0] the total mass; stderr_ is filled for
/// empirical estimates only.
struct MomentVector {
  std::vector<double> m;
  MomentSource source = MomentSource::CLOSED_FORM;
  std::vector<double> stderr_;

  int L() const { return static_cast<int>(m.size()) - 1; }
  double operator[](int l) const { return m.at(static_cast<std::size_t>(l)); }
};

namespace detail {

inline void check_L(int L) {
  if (L < 1 || L > kMaxMoments) throw InvalidArgument("moment count must lie in [1, 16]");
}

inline double catalan(int n) {
  double c = 1.0;
  for (int k = 0; k < n; ++k) c = c * 2.0 * (2.0 * k + 1.0) / (k + 2.0);
  return c;
}

}  // namespace detail

/// Semicircle of radius s: m_{2l} = Catalan(l) (s/2)^{2l}.
inline MomentVector moments_semicircle(double s, int L) {
  if (!(s > 0.0)) throw InvalidArgument("semicircle radius must be positive");
  detail::check_L(L);
  MomentVector v{std::vector<double>(L + 1, 0.0), MomentSource::CLOSED_FORM, {}};
  v.m[0] = 1.0;
  for (int l = 2; l <= L; l += 2) v.m[l] = detail::catalan(l / 2) * std::pow(s / 2.0, l);
  return v;
}

/// Uniform law on [-r, r].
inline MomentVector moments_uniform(double r, int L) {
  if (!(r > 0.0)) throw InvalidArgument("uniform radius must be positive");
  detail::check_L(L);
  MomentVector v{std::vector<double>(L + 1, 0.0), MomentSource::CLOSED_FORM, {}};
  v.m[0] = 1.0;
  for (int l = 2; l <= L; l += 2) v.m[l] = std::pow(r, l) / (l + 1.0);
  return v;
}

/// Point mass at a.
inline MomentVector moments_dirac(double a, int L) {
  detail::check_L(L);
  MomentVector v{std::vector<double>(L + 1, 1.0), MomentSource::CLOSED_FORM, {}};
  for (int l = 1; l <= L; ++l) v.m[l] = std::pow(a, l);
  return v;
}

/// Smallest Hankel eigenvalue relative to the largest entry; >= -tol means
/// the moment sequence is (numerically) that of a measure.
inline bool hankel_psd(const MomentVector& v, double tol = 1e-10) {
  const int k = v.L() / 2;
  Eigen::MatrixXd h(k + 1, k + 1);
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= k; ++j) h(i, j) = v[i + j];
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

// ---------------------------------------------------------------------------
// Non-crossing partitions.

using Block = std::vector<int>;
using Partition = std::vector<Block>;

namespace detail {

// Every NC partition of {lo, ..., hi - 1}: the block of lo picks further
// elements a_2 < ... < a_s, and each gap between them is filled by an
// independent NC partition.
inline void nc_build(int lo, int hi, std::vector<Partition>& out) {
  if (lo >= hi) {
    out.push_back({});
    return;
  }
  const int n = hi - lo;
  // Choose the other members of lo's block by bitmask over lo+1..hi-1.
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    Block first{lo};
    for (int i = 1; i < n; ++i) {
      if (mask & (1u << (i - 1))) first.push_back(lo + i);
    }
    // Gaps: (first[k], first[k+1]) open intervals and the tail after the last.
    std::vector<std::pair<int, int>> gaps;
    for (std::size_t k = 0; k + 1 < first.size(); ++k) gaps.emplace_back(first[k] + 1, first[k + 1]);
    gaps.emplace_back(first.back() + 1, hi);
    std::vector<Partition> acc{Partition{first}};
    for (const auto& [a, b] : gaps) {
      std::vector<Partition> sub;
      nc_build(a, b, sub);
      std::vector<Partition> next;
      next.reserve(acc.size() * sub.size());
      for (const auto& p : acc)
        for (const auto& q : sub) {
          Partition r = p;
          r.insert(r.end(), q.begin(), q.end());
          next.push_back(std::move(r));
        }
      acc = std::move(next);
    }
    for (auto& p : acc) out.push_back(std::move(p));
  }
}

}  // namespace detail

/// All non-crossing partitions of {0, ..., n-1}, blocks sorted by least element.
inline std::vector<Partition> nc_partitions(int n) {
  if (n < 0 || n > 12) throw InvalidArgument("nc_partitions supports 0 <= n <= 12");
  std::vector<Partition> out;
  detail::nc_build(0, n, out);
  for (auto& p : out) std::sort(p.begin(), p.end());
  return out;
}

namespace detail {

/// Block-size signatures of NC(n) with multiplicities, for n <= 8.
inline const std::map<std::vector<int>, long>& nc_block_types(int n) {
  static std::mutex mu;
  static std::map<int, std::map<std::vector<int>, long>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::map<std::vector<int>, long> types;
  for (const auto& p : nc_partitions(n)) {
    std::vector<int> sizes;
    for (const auto& b : p) sizes.push_back(static_cast<int>(b.size()));
    std::sort(sizes.begin(), sizes.end());
    ++types[sizes];
  }
  return cache.emplace(n, std::move(types)).first->second;
}

constexpr int kNcExplicitMax = 8;

/// sum over NC(n) minus the one-block partition of the product of kappa over blocks.
inline double nc_sum_without_top(int n, const std::vector<double>& kappa) {
  double s = 0.0;
  for (const auto& [sizes, count] : nc_block_types(n)) {
    if (sizes.size() == 1) continue;
    double prod = static_cast<double>(count);
    for (int b : sizes) prod *= kappa[b];
    s += prod;
  }
  return s;
}

/// m_n = sum_{s=1}^n kappa_s [z^{n-s}] M(z)^s: the block of the first
/// element has s members and the s gaps after them carry arbitrary moments.
inline double first_block_sum(int n, const std::vector<double>& kappa, const std::vector<double>& m,
                              bool skip_top) {
  // pw[j] = [z^j] M(z)^s, built up in s.
  std::vector<double> pw(n + 1, 0.0);
  pw[0] = 1.0;
  double total = 0.0;
  for (int s = 1; s <= n; ++s) {
    std::vector<double> next(n + 1, 0.0);
    for (int a = 0; a <= n; ++a) {
      if (pw[a] == 0.0) continue;
      for (int b = 0; a + b <= n; ++b) next[a + b] += pw[a] * m[b];
    }
    pw = std::move(next);
    if (skip_top && s == n) continue;
    total += kappa[s] * pw[n - s];
  }
  return total;
}

}  // namespace detail

/// Free cumulants kappa[1..L] (kappa[0] = 0) from moments with m[0] = 1.
inline std::vector<double> moments_to_cumulants(const MomentVector& v) {
  const int L = v.L();
  detail::check_L(L);
  std::vector<double> kappa(L + 1, 0.0);
  for (int n = 1; n <= L; ++n) {
    if (n <= detail::kNcExplicitMax) {
      kappa[n] = v[n] - detail::nc_sum_without_top(n, kappa);
    } else {
      kappa[n] = v[n] - detail::first_block_sum(n, kappa, v.m, true);
    }
  }
  return kappa;
}

inline MomentVector cumulants_to_moments(const std::vector<double>& kappa) {
  const int L = static_cast<int>(kappa.size()) - 1;
  detail::check_L(L);
  MomentVector v{std::vector<double>(L + 1, 0.0), MomentSource::CUMULANT, {}};
  v.m[0] = 1.0;
  for (int n = 1; n <= L; ++n) {
    if (n <= detail::kNcExplicitMax) {
      v.m[n] = kappa[n] + detail::nc_sum_without_top(n, kappa);
    } else {
      v.m[n] = detail::first_block_sum(n, kappa, v.m, false);
    }
  }
  return v;
}

/// Moments of the free additive convolution: cumulants add.
inline MomentVector free_add_convolve(const MomentVector& a, const MomentVector& b) {
  if (a.L() != b.L()) throw InvalidArgument("free_add_convolve needs equal moment counts");
  auto ka = moments_to_cumulants(a);
  const auto kb = moments_to_cumulants(b);
  for (std::size_t i = 0; i < ka.size(); ++i) ka[i] += kb[i];
  return cumulants_to_moments(ka);
}

/// Moments of U_t (+) semicircle of radius 2 sqrt(t).
inline MomentVector limit_moments_ident(double t, int L) {
  return free_add_convolve(moments_uniform(t, L), moments_semicircle(2.0 * std::sqrt(t), L));
}

// ---------------------------------------------------------------------------
// Moment condition and the multiplicative moment ODE.

struct MomentConditionReport {
  bool pass = true;
  double gamma = 0.0;       // gamma actually used
  double gamma_min = 0.0;   // smallest gamma for which s_l <= (gamma l)^l on the available l
  int first_violation = 0;  // 0 when none
  std::vector<double> carleman_partial_sums;  // sum_{j <= l} s_{2j}^{-1/(2j)}
};

/// s_l <= (gamma l)^l for the available l. gamma <= 0 selects gamma_min,
/// which always passes when the moments are positive. The Carleman partial
/// sums are informational only.
inline MomentConditionReport moment_condition_check(const MomentVector& nu, double gamma = 0.0) {
  const int L = nu.L();
  if (L < 4) throw InvalidArgument("moment_condition_check needs at least 4 moments");
  MomentConditionReport r;
  for (int l = 1; l <= L; ++l) {
    if (nu[l] > 0.0) r.gamma_min = std::max(r.gamma_min, std::pow(nu[l], 1.0 / l) / l);
  }
  r.gamma = gamma > 0.0 ? gamma : r.gamma_min;
  for (int l = 1; l <= L; ++l) {
    if (!std::isfinite(nu[l]) || nu[l] > std::pow(r.gamma * l, l) * (1.0 + 1e-12)) {
      r.pass = false;
      r.first_violation = l;
      break;
    }
  }
  double c = 0.0;
  for (int j = 1; 2 * j <= L; ++j) {
    c += nu[2 * j] > 0.0 ? std::pow(nu[2 * j], -1.0 / (2 * j)) : std::numeric_limits<double>::infinity();
    r.carleman_partial_sums.push_back(c);
  }
  return r;
}

/// Moments of nu [x] mu_t from
///   d/dt s_l = l [ s_l + sum_{k=1}^{l-1} s_k s_{l-k} ],  s_l(0) = moments of nu,
/// by classical RK4 with step 1e-4 min(1, 1/L).
inline MomentVector mult_bm_moments(const MomentVector& nu, double t, int L) {
  detail::check_L(L);
  if (nu.L() < L) throw InvalidArgument("nu carries fewer than L moments");
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("t must be finite and >= 0");
  if (std::abs(nu[0] - 1.0) > 1e-12) throw InvalidArgument("nu must be a probability measure (m0 = 1)");
  for (int l = 1; l <= L; ++l) {
    if (!(nu[l] > 0.0) || !std::isfinite(nu[l])) {
      throw InvalidArgument("nu must live on (0, inf): moment " + std::to_string(l) + " is not positive");
    }
  }
  if (L >= 4 && !moment_condition_check(nu).pass) throw InvalidArgument("moment condition violated");
  std::vector<double> s(nu.m.begin(), nu.m.begin() + L + 1);
  const double h_max = 1e-4 * std::min(1.0, 1.0 / L);
  const auto steps = static_cast<long>(std::ceil(t / h_max));
  auto rhs = [L](const std::vector<double>& y, std::vector<double>& d) {
    d[0] = 0.0;
    for (int l = 1; l <= L; ++l) {
      double c = y[l];
      for (int k = 1; k < l; ++k) c += y[k] * y[l - k];
      d[l] = l * c;
    }
  };
  if (steps > 0) {
    const double h = t / steps;
    std::vector<double> k1(L + 1), k2(L + 1), k3(L + 1), k4(L + 1), tmp(L + 1);
    for (long i = 0; i < steps; ++i) {
      rhs(s, k1);
      for (int l = 0; l <= L; ++l) tmp[l] = s[l] + 0.5 * h * k1[l];
      rhs(tmp, k2);
      for (int l = 0; l <= L; ++l) tmp[l] = s[l] + 0.5 * h * k2[l];
      rhs(tmp, k3);
      for (int l = 0; l <= L; ++l) tmp[l] = s[l] + h * k3[l];
      rhs(tmp, k4);
      for (int l = 0; l <= L; ++l) s[l] += h / 6.0 * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]);
    }
  }
  return {s, MomentSource::RECURSION, {}};
}

/// Upper bound (e^t gamma l)^l (1 + t)^{l-1} on s_{l,t}.
inline double mult_bm_growth_bound(double gamma, double t, int l) {
  return std::pow(std::exp(t) * gamma * l, l) * std::pow(1.0 + t, l - 1);
}

// ---------------------------------------------------------------------------
// Subordination density.

struct GridSpec {
  double x_min = 0.0;
  double x_max = 0.0;
  int points = 0;  // M + 1

  /// Default window [-(t + 2 sqrt t) - 1, (t + 2 sqrt t) + 1].
  static GridSpec for_time(double t, int points = 4001) {
    const double r = t + 2.0 * std::sqrt(t) + 1.0;
    return {-r, r, points};
  }
  double dx() const { return (x_max - x_min) / (points - 1); }
  double x(int i) const { return x_min + i * dx(); }
};

/// Tabulated density on a uniform grid.
struct DensityGrid {
  GridSpec grid;
  std::vector<double> rho;
  double mass = 1.0;               // trapezoid mass after post-processing
  double raw_mass = 1.0;           // before renormalization
  double support_lo = 0.0, support_hi = 0.0;
  double t = 0.0;
  std::vector<double> etas;
  int max_iterations = 0;
  long newton_fallbacks = 0;
  double max_residual = 0.0;

  std::vector<double> xs() const {
    std::vector<double> v(rho.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = grid.x(static_cast<int>(i));
    return v;
  }
};

namespace detail {

using Cplx = std::complex<double>;

/// Cauchy transform of the uniform law on [-t, t], principal log branch.
inline Cplx cauchy_uniform(Cplx w, double t) {
  const Cplx q = (w + t) / (w - t);
  return std::log(q) / (2.0 * t);
}

inline Cplx cauchy_uniform_deriv(Cplx w, double t) { return (1.0 / (w + t) - 1.0 / (w - t)) / (2.0 * t); }

struct SubordinationSolve {
  Cplx g;
  int iterations = 0;
  bool newton = false;
  double residual = 0.0;
};

/// Solves G = G_U(z - t G) at Im z > 0: damped fixed-point iteration
/// (damping 0.5), then Newton from the last iterate when that stalls.
inline SubordinationSolve solve_subordination(Cplx z, double t, Cplx start) {
  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 500;
  SubordinationSolve r;
  Cplx g = start;
  for (int it = 1; it <= kMaxIter; ++it) {
    const Cplx w = z - t * g;
    const Cplx next = 0.5 * g + 0.5 * cauchy_uniform(w, t);
    const double step = std::abs(next - g);
    g = next;
    r.iterations = it;
    if (step <= kTol * std::max(1.0, std::abs(g))) {
      r.g = g;
      r.residual = std::abs(g - cauchy_uniform(z - t * g, t));
      return r;
    }
  }
  r.newton = true;
  for (int it = 1; it <= 100; ++it) {
    const Cplx w = z - t * g;
    const Cplx f = g - cauchy_uniform(w, t);
    const Cplx df = 1.0 + t * cauchy_uniform_deriv(w, t);
    Cplx step = f / df;
    // Stay in the lower half plane, where the Herglotz branch lives.
    while (std::imag(g - step) >= 0.0 && std::abs(step) > 1e-300) step *= 0.5;
    g -= step;
    r.iterations = kMaxIter + it;
    if (std::abs(step) <= kTol * std::max(1.0, std::abs(g))) {
      r.g = g;
      r.residual = std::abs(g - cauchy_uniform(z - t * g, t));
      return r;
    }
  }
  throw NumericFailure("subordination fixed point did not converge at z = " + std::to_string(z.real()) + " + " +
                       std::to_string(z.imag()) + "i");
}

}  // namespace detail

/// Cauchy transform of U_t (+) semicircle(2 sqrt t) at z (Im z > 0).
inline std::complex<double> cauchy_transform_limit(std::complex<double> z, double t) {
  if (!(z.imag() > 0.0)) throw InvalidArgument("cauchy_transform_limit needs Im z > 0");
  return detail::solve_subordination(z, t, 1.0 / z).g;
}

/// Density of U_t (+) semicircle(2 sqrt t) by Stieltjes inversion at
/// eta in {1e-2, 5e-3, 2.5e-3} with two levels of Richardson extrapolation.
inline DensityGrid subordination_density(double t, const GridSpec& spec, unsigned threads = default_threads()) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("t must be positive");
  if (spec.points < 3 || !(spec.x_max > spec.x_min)) throw InvalidArgument("grid needs >= 3 points and x_max > x_min");
  const double edge = t + 2.0 * std::sqrt(t);
  if (spec.x_min > -edge - 1.0 + 1e-12 || spec.x_max < edge + 1.0 - 1e-12) {
    throw InvalidArgument("grid must cover [-(t + 2 sqrt t) - 1, (t + 2 sqrt t) + 1]");
  }
  DensityGrid out;
  out.grid = spec;
  out.t = t;
  out.etas = {1e-2, 5e-3, 2.5e-3};
  const auto M = static_cast<std::size_t>(spec.points);
  std::vector<double> r1(M), r2(M), r3(M);
  std::vector<int> iters(M);
  std::vector<char> newton(M);
  std::vector<double> resid(M);
  parallel_for(M, threads, [&](std::size_t i) {
    const double x = spec.x(static_cast<int>(i));
    double* dst[3] = {&r1[i], &r2[i], &r3[i]};
    std::complex<double> start = 1.0 / std::complex<double>(x, 1.0);
    int it_max = 0;
    bool nt = false;
    double res = 0.0;
    for (int k = 0; k < 3; ++k) {
      const std::complex<double> z(x, out.etas[k]);
      const auto s = detail::solve_subordination(z, t, start);
      if (!(s.g.imag() < 0.0)) throw NumericFailure("Herglotz property violated at x = " + std::to_string(x));
      *dst[k] = -s.g.imag() / std::numbers::pi;
      start = s.g;
      it_max = std::max(it_max, s.iterations);
      nt = nt || s.newton;
      res = std::max(res, s.residual);
    }
    iters[i] = it_max;
    newton[i] = nt;
    resid[i] = res;
  });
  out.rho.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    const double a = 2.0 * r2[i] - r1[i];
    const double b = 2.0 * r3[i] - r2[i];
    out.rho[i] = std::max(0.0, (4.0 * b - a) / 3.0);
  }
  out.max_iterations = *std::max_element(iters.begin(), iters.end());
  out.newton_fallbacks = std::count(newton.begin(), newton.end(), 1);
  out.max_residual = *std::max_element(resid.begin(), resid.end());
  const double dx = spec.dx();
  double mass = 0.0;
  for (std::size_t i = 0; i < M; ++i) mass += (i == 0 || i + 1 == M ? 0.5 : 1.0) * out.rho[i] * dx;
  out.raw_mass = mass;
  if (std::abs(mass - 1.0) >= 1e-3) {
    throw NumericFailure("inverted density has mass " + std::to_string(mass) + ", drift >= 1e-3");
  }
  for (double& v : out.rho) v /= mass;
  out.mass = 1.0;
  const double peak = *std::max_element(out.rho.begin(), out.rho.end());
  std::size_t lo = 0, hi = M - 1;
  while (lo < M && out.rho[lo] <= 1e-6 * peak) ++lo;
  while (hi > 0 && out.rho[hi] <= 1e-6 * peak) --hi;
  out.support_lo = spec.x(static_cast<int>(lo));
  out.support_hi = spec.x(static_cast<int>(hi));
  return out;
}

inline DensityGrid subordination_density(double t) { return subordination_density(t, GridSpec::for_time(t)); }

namespace detail {

/// Integral of f(x) rho(x) with rho linear on each cell, by 4-point
/// Gauss-Legendre per cell.
template <class F>
double grid_integral(const DensityGrid& g, F&& f) {
  static constexpr double nodes[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                      0.8611363115940526};
  static constexpr double weights[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                        0.3478548451374538};
  const double dx = g.grid.dx();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < g.rho.size(); ++i) {
    const double a = g.rho[i], b = g.rho[i + 1];
    if (a == 0.0 && b == 0.0) continue;
    const double x0 = g.grid.x(static_cast<int>(i));
    for (int q = 0; q < 4; ++q) {
      const double u = 0.5 * (nodes[q] + 1.0);
      s += 0.5 * dx * weights[q] * f(x0 + u * dx) * (a + (b - a) * u);
    }
  }
  return s;
}

}  // namespace detail

/// Moments of the grid density itself.
inline MomentVector grid_moments(const DensityGrid& g, int L) {
  detail::check_L(L);
  MomentVector v{std::vector<double>(L + 1), MomentSource::QUADRATURE, {}};
  for (int l = 0; l <= L; ++l) v.m[l] = detail::grid_integral(g, [l](double x) { return std::pow(x, l); });
  return v;
}

/// Moments of the push-forward under x -> e^{2x}: integral of e^{2lx} rho.
inline MomentVector exp2_moments(const DensityGrid& g, int lmax) {
  detail::check_L(lmax);
  const double mass = detail::grid_integral(g, [](double) { return 1.0; });
  if (std::abs(mass - 1.0) > 1e-3) throw InvalidArgument("exp2_moments needs a grid of mass 1 within 1e-3");
  MomentVector v{std::vector<double>(lmax + 1), MomentSource::QUADRATURE, {}};
  for (int l = 0; l <= lmax; ++l) v.m[l] = detail::grid_integral(g, [l](double x) { return std::exp(2.0 * l * x); });
  return v;
}

/// Moments of |mu| for a symmetric mu: even moments pass through; odd ones
/// need the density and are NaN without a grid.
inline MomentVector abs_fold_moments(const MomentVector& m, const DensityGrid* grid = nullptr) {
  for (int l = 1; l <= m.L(); l += 2) {
    if (std::abs(m[l]) > 1e-8) throw InvalidArgument("abs_fold_moments needs a symmetric measure");
  }
  MomentVector v = m;
  for (int l = 1; l <= m.L(); l += 2) {
    v.m[l] = grid ? detail::grid_integral(*grid, [l](double x) { return std::pow(std::abs(x), l); })
                  : std::numeric_limits<double>::quiet_NaN();
  }
  return v;
}

}  // namespace hecop
