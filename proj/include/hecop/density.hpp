#pragma once

// Fixed-time chamber densities (start at 0), their normalizations, and Monte
// Carlo harnesses: importance-sampled mass and marginal-CDF KS comparisons.

#include <algorithm>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hecop/errors.hpp"
#include "hecop/ks.hpp"
#include "hecop/parallel.hpp"
#include "hecop/rng.hpp"
#include "hecop/rootsys.hpp"

namespace hecop {

enum class DensityVariant { GUE, DRIFT_C, DRIFT_LAMBDA, B_FLAT, D_FLAT, B_DRIFT, D_DRIFT, C_DRIFT };

inline const char* to_string(DensityVariant v) {
  switch (v) {
    case DensityVariant::GUE: return "GUE";
    case DensityVariant::DRIFT_C: return "DRIFT_C";
    case DensityVariant::DRIFT_LAMBDA: return "DRIFT_LAMBDA";
    case DensityVariant::B_FLAT: return "B_FLAT";
    case DensityVariant::D_FLAT: return "D_FLAT";
    case DensityVariant::B_DRIFT: return "B_DRIFT";
    case DensityVariant::D_DRIFT: return "D_DRIFT";
    case DensityVariant::C_DRIFT: return "C_DRIFT";
  }
  return "?";
}

inline Family required_family(DensityVariant v) {
  switch (v) {
    case DensityVariant::GUE:
    case DensityVariant::DRIFT_C:
    case DensityVariant::DRIFT_LAMBDA: return Family::A;
    case DensityVariant::B_FLAT:
    case DensityVariant::B_DRIFT: return Family::B;
    case DensityVariant::D_FLAT:
    case DensityVariant::D_DRIFT: return Family::D;
    case DensityVariant::C_DRIFT: return Family::C;
  }
  return Family::A;
}

/// A chamber law at time t > 0. `c` is used by DRIFT_C, `lambda` by DRIFT_LAMBDA.
struct ChamberDensity {
  RootCase root_case;
  double t;
  DensityVariant variant;
  double c = 1.0;
  std::vector<double> lambda;

  void validate() const {
    if (root_case.family() != required_family(variant)) {
      throw InvalidArgument(std::string("variant ") + to_string(variant) + " does not belong to case " +
                            to_string(root_case.family()));
    }
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("t must be positive");
    if (variant == DensityVariant::DRIFT_C && !(c > 0.0)) throw InvalidArgument("c must be positive");
    if (variant == DensityVariant::DRIFT_LAMBDA) {
      if (lambda.size() != root_case.size()) throw InvalidArgument("lambda must have N entries");
      if (std::abs(std::accumulate(lambda.begin(), lambda.end(), 0.0)) > 1e-12) {
        throw InvalidArgument("lambda must have zero trace");
      }
      auto s = lambda;
      std::sort(s.begin(), s.end());
      if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw InvalidArgument("lambda entries must be distinct");
    }
  }

  static ChamberDensity gue(int n, double t) { return make({Family::A, n}, t, DensityVariant::GUE); }
  static ChamberDensity drift_c(int n, double t, double c) {
    auto d = ChamberDensity{{Family::A, n}, t, DensityVariant::DRIFT_C, c, {}};
    d.validate();
    return d;
  }
  static ChamberDensity drift_lambda(double t, std::vector<double> lam) {
    const int n = static_cast<int>(lam.size());
    auto d = ChamberDensity{{Family::A, std::max(n, 1)}, t, DensityVariant::DRIFT_LAMBDA, 1.0, std::move(lam)};
    d.validate();
    return d;
  }
  static ChamberDensity flat(Family f, int n, double t) {
    if (f == Family::A) return gue(n, t);
    if (f == Family::C) throw InvalidArgument("the flat C law coincides with B_FLAT; use case B");
    return make({f, n}, t, f == Family::B ? DensityVariant::B_FLAT : DensityVariant::D_FLAT);
  }
  /// Unit-drift law of case B, C or D.
  static ChamberDensity drift(Family f, int n, double t) {
    switch (f) {
      case Family::B: return make({f, n}, t, DensityVariant::B_DRIFT);
      case Family::C: return make({f, n}, t, DensityVariant::C_DRIFT);
      case Family::D: return make({f, n}, t, DensityVariant::D_DRIFT);
      case Family::A: break;
    }
    throw InvalidArgument("drift(): use drift_c or drift_lambda for case A");
  }

 private:
  static ChamberDensity make(RootCase rc, double t, DensityVariant v) {
    ChamberDensity d{rc, t, v, 1.0, {}};
    d.validate();
    return d;
  }
};

/// Log of the time-1 flat normalization: the Gaussian-ensemble prefactor
/// for A, c_N^B for B and C, c_N^D for D.
inline double log_norm_const_flat(Family f, int n) {
  const RootCase rc(f, n);
  double s = 0.0;
  switch (f) {
    case Family::A:
      s = -0.5 * n * std::log(2.0 * std::numbers::pi);
      for (int j = 1; j < n; ++j) s -= std::lgamma(j + 1.0);
      return s;
    case Family::B:
    case Family::C:
      s = std::lgamma(n + 1.0) - n * (n - 0.5) * std::numbers::ln2;
      for (int j = 1; j <= n; ++j) s -= std::lgamma(j + 1.0) + std::lgamma(j + 0.5);
      return s;
    case Family::D:
      s = std::lgamma(n + 1.0) - (n * (n - 1.5) + 1.0) * std::numbers::ln2;
      for (int j = 1; j <= n; ++j) s -= std::lgamma(j + 1.0) + std::lgamma(j - 0.5);
      return s;
  }
  return s;
}

inline double norm_const_flat(Family f, int n) { return std::exp(log_norm_const_flat(f, n)); }

/// Evaluator with the x-independent parts precomputed.
class DensityEvaluator {
 public:
  explicit DensityEvaluator(ChamberDensity d) : d_(std::move(d)) {
    d_.validate();
    const int n = d_.root_case.rank();
    const double t = d_.t;
    const double nn = n;
    const double rho2 = static_cast<double>(rho_norm_sq(d_.root_case));
    const Family f = d_.root_case.family();
    const double lnt = std::log(t);
    switch (d_.variant) {
      case DensityVariant::GUE:
        log_prefactor_ = log_norm_const_flat(Family::A, n) - 0.5 * nn * nn * lnt;
        break;
      case DensityVariant::DRIFT_C:
        log_prefactor_ = log_norm_const_flat(Family::A, n) - 0.5 * nn * nn * lnt - 0.5 * d_.c * d_.c * rho2 * t;
        break;
      case DensityVariant::DRIFT_LAMBDA: {
        double l2 = 0.0, lp = 0.0;
        int sign = 1;
        for (double v : d_.lambda) l2 += v * v;
        for (int i = 0; i < n; ++i) {
          for (int j = i + 1; j < n; ++j) {
            const double diff = d_.lambda[j] - d_.lambda[i];
            lp += std::log(std::abs(diff));
            if (diff < 0) sign = -sign;
          }
        }
        lambda_sign_ = sign;
        log_prefactor_ = -0.5 * l2 * t - 0.5 * nn * std::log(2.0 * std::numbers::pi) - 0.5 * nn * nn * lnt - lp;
        group_ = weyl_group(d_.root_case);
        break;
      }
      case DensityVariant::B_FLAT:
        log_prefactor_ = log_norm_const_flat(f, n) - (nn * nn + 0.5 * nn) * lnt;
        break;
      case DensityVariant::D_FLAT:
        log_prefactor_ = log_norm_const_flat(f, n) - (nn * nn - 0.5 * nn) * lnt;
        break;
      case DensityVariant::B_DRIFT:
      case DensityVariant::C_DRIFT:
        log_prefactor_ = log_norm_const_flat(f, n) - 0.5 * rho2 * t - (nn * nn + 0.5 * nn) * lnt;
        break;
      case DensityVariant::D_DRIFT:
        log_prefactor_ = log_norm_const_flat(f, n) - 0.5 * rho2 * t - (nn * nn - 0.5 * nn) * lnt;
        break;
    }
  }

  const ChamberDensity& density() const { return d_; }

  /// Log density at a closed-chamber point; -inf on the boundary.
  double operator()(std::span<const double> x) const {
    const RootCase& rc = d_.root_case;
    detail::check_dim(rc, x.size());
    for (double v : x) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite coordinate");
    }
    if (!in_closed_chamber(rc, x)) throw InvalidArgument("log_density needs a point of the closed chamber");
    if (!is_interior(rc, x)) return -std::numeric_limits<double>::infinity();

    const std::size_t n = x.size();
    const double t = d_.t;
    double sq = 0.0;
    for (double v : x) sq += v * v;
    double s = log_prefactor_ - sq / (2.0 * t);

    switch (d_.variant) {
      case DensityVariant::GUE:
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * std::log(x[j] - x[i]);
        return s;
      case DensityVariant::DRIFT_C:
        // (u sinh(cu)) / c = u^2 sinh(cu)/(cu): stable as c -> 0.
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) {
            const double u = x[j] - x[i];
            s += 2.0 * std::log(u) + detail::log_sinhc(d_.c * u);
          }
        return s;
      case DensityVariant::DRIFT_LAMBDA:
        return s + log_lambda_part(x);
      case DensityVariant::B_FLAT:
        for (std::size_t i = 0; i < n; ++i) {
          s += 2.0 * std::log(x[i]);
          for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * std::log((x[j] - x[i]) * (x[j] + x[i]));
        }
        return s;
      case DensityVariant::D_FLAT:
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * std::log((x[j] - x[i]) * (x[j] + x[i]));
        return s;
      case DensityVariant::B_DRIFT:
      case DensityVariant::C_DRIFT:
      case DensityVariant::D_DRIFT:
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            const double dm = x[j] - x[i], dp = x[j] + x[i];
            s += std::log(dm) + std::log(dp) + log_sinh(dm) + log_sinh(dp);
          }
          if (d_.variant == DensityVariant::B_DRIFT) s += std::log(x[i]) + log_sinh(x[i]);
          if (d_.variant == DensityVariant::C_DRIFT) s += std::log(0.5 * x[i]) + log_sinh(2.0 * x[i]);
        }
        return s;
    }
    return s;
  }

 private:
  // log[ prod_{i<j} (x_j - x_i) * sign(pi(lam)) * sum_w det(w) e^{<lam, w.x>} ]
  // with the alternating sum accumulated in 50-digit floating point.
  double log_lambda_part(std::span<const double> x) const {
    using Big = boost::multiprecision::cpp_bin_float_50;
    const std::size_t n = x.size();
    std::vector<double> e(group_.size());
    for (std::size_t g = 0; g < group_.size(); ++g) {
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += d_.lambda[i] * x[group_[g].perm[i]];
      e[g] = v;
    }
    const double m = *std::max_element(e.begin(), e.end());
    long double fast = 0.0L, mag = 0.0L;
    for (std::size_t g = 0; g < group_.size(); ++g) {
      const long double v = std::exp(static_cast<long double>(e[g]) - m);
      fast += group_[g].det * v;
      mag += v;
    }
    double log_sum;
    if (std::abs(fast) > 1e-9L * mag) {
      fast *= lambda_sign_;
      if (fast < 0) throw NumericFailure("alternating sum has the wrong sign");
      log_sum = static_cast<double>(std::log(fast));
    } else {
      // Heavy cancellation: redo the sum with 50 significant digits.
      Big sum = 0;
      for (std::size_t g = 0; g < group_.size(); ++g) sum += group_[g].det * exp(Big(e[g]) - Big(m));
      sum *= lambda_sign_;
      if (sum == 0) return -std::numeric_limits<double>::infinity();
      if (sum < 0) throw NumericFailure("alternating sum has the wrong sign");
      log_sum = static_cast<double>(log(sum));
    }
    double lv = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) lv += std::log(x[j] - x[i]);
    return lv + m + log_sum;
  }

  ChamberDensity d_;
  double log_prefactor_ = 0.0;
  int lambda_sign_ = 1;
  std::vector<WeylElement> group_;
};

inline double log_density(const ChamberDensity& d, std::span<const double> x) { return DensityEvaluator(d)(x); }

inline double log_density(const ChamberDensity& d, const ChamberPoint& x) { return log_density(d, x.coords); }

/// Gaussian on R^N folded onto the chamber by chamber_project. Its density
/// on the open chamber is the sum of the Gaussian over the Weyl orbit.
class FoldedGaussian {
 public:
  FoldedGaussian(const RootCase& rc, std::vector<double> mu, std::vector<double> sigma)
      : rc_(rc), mu_(std::move(mu)), sigma_(std::move(sigma)), group_(weyl_group(rc)) {
    detail::check_dim(rc, mu_.size());
    detail::check_dim(rc, sigma_.size());
    for (double s : sigma_) {
      if (!(s > 0.0)) throw InvalidArgument("proposal sigma must be positive");
    }
    log_norm_ = 0.0;
    for (double s : sigma_) log_norm_ -= 0.5 * std::log(2.0 * std::numbers::pi) + std::log(s);
  }

  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& sigma() const { return sigma_; }

  std::vector<double> sample(std::span<const double> z) const {
    std::vector<double> v(mu_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mu_[i] + sigma_[i] * z[i];
    return chamber_project(rc_, v).coords;
  }

  double log_pdf(std::span<const double> y) const {
    const std::size_t n = y.size();
    std::vector<double> e(group_.size());
    for (std::size_t g = 0; g < group_.size(); ++g) {
      double q = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = (group_[g].sign[i] * y[group_[g].perm[i]] - mu_[i]) / sigma_[i];
        q += r * r;
      }
      e[g] = -0.5 * q;
    }
    const double m = *std::max_element(e.begin(), e.end());
    double s = 0.0;
    for (double v : e) s += std::exp(v - m);
    return log_norm_ + m + std::log(s);
  }

 private:
  RootCase rc_;
  std::vector<double> mu_, sigma_;
  std::vector<WeylElement> group_;
  double log_norm_ = 0.0;
};

namespace detail {

/// Rough location of the law: t times the drift (sorted lambda for A).
inline std::vector<double> natural_center(const ChamberDensity& d) {
  const RootCase& rc = d.root_case;
  std::vector<double> mu(rc.size(), 0.0);
  switch (d.variant) {
    case DensityVariant::DRIFT_C:
      mu = rho_real(rc);
      for (double& v : mu) v *= d.c * d.t;
      break;
    case DensityVariant::DRIFT_LAMBDA:
      mu = d.lambda;
      std::sort(mu.begin(), mu.end());
      for (double& v : mu) v *= d.t;
      break;
    case DensityVariant::B_DRIFT:
    case DensityVariant::C_DRIFT:
    case DensityVariant::D_DRIFT:
      mu = rho_real(rc);
      for (double& v : mu) v *= d.t;
      break;
    default:
      break;
  }
  return mu;
}

struct WeightedDraws {
  std::size_t n = 0;
  std::vector<double> points;    // n * N, row-major
  std::vector<double> log_w;     // log f - log q
};

inline WeightedDraws importance_draws(const DensityEvaluator& f, const FoldedGaussian& q, std::size_t draws,
                                      std::uint64_t seed, std::uint64_t stream_offset, unsigned threads) {
  const std::size_t dim = f.density().root_case.size();
  WeightedDraws out;
  out.n = draws;
  out.points.resize(draws * dim);
  out.log_w.resize(draws);
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (draws + kBlock - 1) / kBlock;
  parallel_for(blocks, threads, [&](std::size_t b) {
    std::vector<double> z(dim);
    for (std::size_t i = b * kBlock; i < std::min(draws, (b + 1) * kBlock); ++i) {
      const GaussianStream g(seed, RngDomain::kImportance, stream_offset + i);
      g.fill(0, z);
      const auto y = q.sample(z);
      std::copy(y.begin(), y.end(), out.points.begin() + static_cast<std::ptrdiff_t>(i * dim));
      const double lf = f(y);
      out.log_w[i] = std::isinf(lf) ? lf : lf - q.log_pdf(y);
    }
  });
  return out;
}

/// Normalized weights and effective sample size.
inline std::vector<double> normalized_weights(const WeightedDraws& w, double& ess) {
  const double m = *std::max_element(w.log_w.begin(), w.log_w.end());
  std::vector<double> p(w.n);
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < w.n; ++i) {
    p[i] = std::isinf(w.log_w[i]) ? 0.0 : std::exp(w.log_w[i] - m);
    s += p[i];
    s2 += p[i] * p[i];
  }
  ess = s2 > 0.0 ? s * s / s2 : 0.0;
  for (double& v : p) v /= s;
  return p;
}

constexpr std::size_t kPilotDraws = 16384;

/// Pilot run at sigma0 * sqrt(t) around the natural center, then a diagonal
/// proposal matched to the weighted pilot mean and spread (inflated by 1.25).
inline FoldedGaussian adapted_proposal(const DensityEvaluator& f, std::uint64_t seed, unsigned threads) {
  const auto& d = f.density();
  const std::size_t dim = d.root_case.size();
  const double st = std::sqrt(d.t);
  std::vector<double> sig0(dim, 1.5 * st * std::max(1.0, std::sqrt(static_cast<double>(dim)) / 1.5));
  FoldedGaussian pilot(d.root_case, natural_center(d), sig0);
  const auto w = importance_draws(f, pilot, kPilotDraws, seed ^ 0x9E3779B97F4A7C15ull, 0, threads);
  double ess = 0.0;
  const auto p = normalized_weights(w, ess);
  if (!(ess >= 50.0)) return pilot;
  std::vector<double> mu(dim, 0.0), sig(dim, 0.0);
  for (std::size_t i = 0; i < w.n; ++i)
    for (std::size_t j = 0; j < dim; ++j) mu[j] += p[i] * w.points[i * dim + j];
  for (std::size_t i = 0; i < w.n; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double r = w.points[i * dim + j] - mu[j];
      sig[j] += p[i] * r * r;
    }
  for (double& s : sig) s = std::max(1.25 * std::sqrt(s), 0.05 * st);
  return FoldedGaussian(d.root_case, mu, sig);
}

}  // namespace detail

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double ess = 0.0;
  std::size_t draws = 0;
};

/// Importance-sampled total mass of d. proposal_sigma > 0 uses an isotropic
/// folded Gaussian of that width around t * drift; 0 selects an adapted
/// diagonal proposal from a pilot run.
inline McEstimate mc_normalization(const ChamberDensity& d, double proposal_sigma, std::size_t draws,
                                   std::uint64_t seed, unsigned threads = default_threads()) {
  if (draws < 1000) throw InvalidArgument("mc_normalization needs at least 1000 draws");
  if (!(proposal_sigma >= 0.0)) throw InvalidArgument("proposal_sigma must be >= 0");
  const DensityEvaluator f(d);
  const FoldedGaussian q =
      proposal_sigma > 0.0
          ? FoldedGaussian(d.root_case, detail::natural_center(d), std::vector<double>(d.root_case.size(), proposal_sigma))
          : detail::adapted_proposal(f, seed, threads);
  const auto w = detail::importance_draws(f, q, draws, seed, detail::kPilotDraws, threads);
  const double m = *std::max_element(w.log_w.begin(), w.log_w.end());
  if (!std::isfinite(m)) throw UnreliableEstimate("no draw hit the support");
  double s = 0.0, s2 = 0.0;
  for (double lw : w.log_w) {
    const double v = std::isinf(lw) ? 0.0 : std::exp(lw - m);
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(draws);
  McEstimate r;
  r.draws = draws;
  r.ess = s * s / s2;
  if (r.ess < 50.0) throw UnreliableEstimate("effective sample size " + std::to_string(r.ess) + " below 50");
  const double mean = s / n;
  const double var = std::max(0.0, s2 / n - mean * mean) * n / (n - 1.0);
  r.estimate = std::exp(m) * mean;
  r.stderr_ = std::exp(m) * std::sqrt(var / n);
  return r;
}

/// Marginal CDFs of each coordinate, stored as quantile knots.
struct MarginalTable {
  std::size_t dim = 0;
  std::size_t knots = 0;
  double ess = 0.0;
  std::vector<double> q;  // dim * knots; q[i*knots + k] = quantile of coordinate i at k / (knots - 1)

  double cdf(std::size_t coord, double v) const {
    const double* b = q.data() + coord * knots;
    const double* e = b + knots;
    if (v <= b[0]) return 0.0;
    if (v >= e[-1]) return 1.0;
    const double* hi = std::upper_bound(b, e, v);
    const double* lo = hi - 1;
    const double k = static_cast<double>(lo - b);
    const double frac = *hi > *lo ? (v - *lo) / (*hi - *lo) : 0.0;
    return (k + frac) / static_cast<double>(knots - 1);
  }
};

struct MarginalOptions {
  std::size_t draws = 200000;
  std::size_t knots = 2049;
  std::uint64_t seed = 20240607;
  unsigned threads = default_threads();
  std::string cache_dir = "";  // empty: no caching
};

/// Directory from HECOP_CACHE_DIR, or empty.
inline std::string cache_dir_from_env() {
  const char* v = std::getenv("HECOP_CACHE_DIR");
  return v ? std::string(v) : std::string();
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string marginal_key_text(const ChamberDensity& d, const MarginalOptions& o) {
  char buf[64];
  std::string s = "hecop-marginal-v1|";
  s += to_string(d.variant);
  s += '|';
  s += to_string(d.root_case.family());
  s += '|' + std::to_string(d.root_case.rank());
  auto add = [&](double v) {
    std::snprintf(buf, sizeof buf, "|%.17g", v);
    s += buf;
  };
  add(d.t);
  add(d.c);
  for (double v : d.lambda) add(v);
  s += '|' + std::to_string(o.draws) + '|' + std::to_string(o.knots) + '|' + std::to_string(o.seed);
  return s;
}

constexpr char kMarginalMagic[8] = {'H', 'C', 'M', 'G', 'v', '0', '0', '1'};

inline std::optional<MarginalTable> read_marginal_cache(const std::filesystem::path& p, std::uint64_t key) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::uint64_t k = 0, dim = 0, knots = 0;
  MarginalTable t;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&k), sizeof k);
  in.read(reinterpret_cast<char*>(&dim), sizeof dim);
  in.read(reinterpret_cast<char*>(&knots), sizeof knots);
  in.read(reinterpret_cast<char*>(&t.ess), sizeof t.ess);
  if (!in || !std::equal(magic, magic + 8, kMarginalMagic) || k != key || dim == 0 || knots < 2 ||
      dim * knots > (1u << 26)) {
    return std::nullopt;
  }
  t.dim = dim;
  t.knots = knots;
  t.q.resize(dim * knots);
  in.read(reinterpret_cast<char*>(t.q.data()), static_cast<std::streamsize>(t.q.size() * sizeof(double)));
  if (!in) return std::nullopt;
  return t;
}

inline void write_marginal_cache(const std::filesystem::path& p, std::uint64_t key, const MarginalTable& t) {
  std::error_code ec;
  std::filesystem::create_directories(p.parent_path(), ec);
  const auto tmp = p.string() + ".tmp" + std::to_string(key % 100000);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return;  // caching is best effort
    const std::uint64_t dim = t.dim, knots = t.knots;
    out.write(kMarginalMagic, 8);
    out.write(reinterpret_cast<const char*>(&key), sizeof key);
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&knots), sizeof knots);
    out.write(reinterpret_cast<const char*>(&t.ess), sizeof t.ess);
    out.write(reinterpret_cast<const char*>(t.q.data()), static_cast<std::streamsize>(t.q.size() * sizeof(double)));
  }
  std::filesystem::rename(tmp, p, ec);
  if (ec) std::filesystem::remove(tmp, ec);
}

inline MarginalTable compute_marginals(const ChamberDensity& d, const MarginalOptions& o) {
  const DensityEvaluator f(d);
  const auto q = adapted_proposal(f, o.seed, o.threads);
  const auto w = importance_draws(f, q, o.draws, o.seed, kPilotDraws, o.threads);
  MarginalTable t;
  const auto p = normalized_weights(w, t.ess);
  if (t.ess < 50.0) throw UnreliableEstimate("marginal tabulation: effective sample size below 50");
  const std::size_t dim = d.root_case.size();
  t.dim = dim;
  t.knots = o.knots;
  t.q.resize(dim * o.knots);
  std::vector<std::size_t> idx(w.n);
  for (std::size_t c = 0; c < dim; ++c) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return w.points[a * dim + c] < w.points[b * dim + c]; });
    // Inverse of the piecewise-linear weighted ECDF through (x_(i), cumulative weight).
    double cum = 0.0;
    std::size_t i = 0;
    double prev_x = w.points[idx[0] * dim + c], prev_c = 0.0;
    for (std::size_t k = 0; k < o.knots; ++k) {
      const double target = static_cast<double>(k) / static_cast<double>(o.knots - 1);
      while (i < w.n && cum + p[idx[i]] < target) {
        cum += p[idx[i]];
        prev_x = w.points[idx[i] * dim + c];
        prev_c = cum;
        ++i;
      }
      double v;
      if (i >= w.n) {
        v = w.points[idx[w.n - 1] * dim + c];
      } else {
        const double nx = w.points[idx[i] * dim + c];
        const double nc = cum + p[idx[i]];
        v = nc > prev_c ? prev_x + (nx - prev_x) * (target - prev_c) / (nc - prev_c) : nx;
      }
      t.q[c * o.knots + k] = v;
    }
    for (std::size_t k = 1; k < o.knots; ++k) {
      t.q[c * o.knots + k] = std::max(t.q[c * o.knots + k], t.q[c * o.knots + k - 1]);
    }
  }
  return t;
}

}  // namespace detail

/// MC-tabulated marginals, read from / written to o.cache_dir when set.
inline MarginalTable tabulate_marginals(const ChamberDensity& d, const MarginalOptions& o = {}) {
  d.validate();
  if (o.draws < 1000 || o.knots < 2) throw InvalidArgument("marginal tabulation needs >= 1000 draws and >= 2 knots");
  if (o.cache_dir.empty()) return detail::compute_marginals(d, o);
  const std::uint64_t key = detail::fnv1a(detail::marginal_key_text(d, o));
  char name[64];
  std::snprintf(name, sizeof name, "marginal-%016llx.bin", static_cast<unsigned long long>(key));
  const std::filesystem::path p = std::filesystem::path(o.cache_dir) / name;
  if (auto hit = detail::read_marginal_cache(p, key)) {
    if (hit->dim == d.root_case.size()) return *hit;
  }
  auto t = detail::compute_marginals(d, o);
  detail::write_marginal_cache(p, key, t);
  return t;
}

struct DensityKsReport {
  std::vector<KsResult> per_coordinate;
  std::size_t sample_size = 0;
  double tabulation_ess = 0.0;
  bool pass01() const {
    return std::none_of(per_coordinate.begin(), per_coordinate.end(), [](const KsResult& r) { return r.reject01(); });
  }
  bool pass05() const {
    return std::none_of(per_coordinate.begin(), per_coordinate.end(), [](const KsResult& r) { return r.reject05(); });
  }
};

/// One-sample KS of every ordered coordinate against the tabulated marginal.
inline DensityKsReport density_vs_sample_ks(const ChamberDensity& d, const std::vector<ChamberPoint>& sample,
                                            const MarginalOptions& o = {}) {
  if (sample.size() < 500) throw InvalidArgument("density_vs_sample_ks needs at least 500 sample points");
  const std::size_t dim = d.root_case.size();
  for (const auto& p : sample) detail::check_dim(d.root_case, p.coords.size());
  const auto table = tabulate_marginals(d, o);
  DensityKsReport r;
  r.sample_size = sample.size();
  r.tabulation_ess = table.ess;
  std::vector<double> col(sample.size());
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t i = 0; i < sample.size(); ++i) col[i] = sample[i].coords[c];
    r.per_coordinate.push_back(ks_one_sample(col, [&](double v) { return table.cdf(c, v); }));
  }
  return r;
}

}  // namespace hecop
