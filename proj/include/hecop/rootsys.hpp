#pragma once

// Root systems A_{N-1}, B_N, C_N, D_N in the standard basis of R^N, the
// associated chamber geometry, spherical functions of the flat symmetric
// space and the coth drift fields of the radial processes.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hecop/errors.hpp"

namespace hecop {

enum class Family { A, B, C, D };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::A: return "A";
    case Family::B: return "B";
    case Family::C: return "C";
    case Family::D: return "D";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "A" || s == "a") return Family::A;
  if (s == "B" || s == "b") return Family::B;
  if (s == "C" || s == "c") return Family::C;
  if (s == "D" || s == "d") return Family::D;
  throw InvalidArgument("unknown root-system family '" + s + "'");
}

/// One of the four classical cases together with its rank N.
class RootCase {
 public:
  RootCase(Family family, int rank) : family_(family), rank_(rank) {
    const int min_rank = family == Family::A ? 1 : 2;
    if (rank < min_rank) {
      throw InvalidArgument(std::string("rank ") + std::to_string(rank) + " below minimum " +
                            std::to_string(min_rank) + " for case " + to_string(family));
    }
  }

  Family family() const noexcept { return family_; }
  int rank() const noexcept { return rank_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(rank_); }

  std::int64_t num_positive_roots() const noexcept {
    const std::int64_t n = rank_;
    switch (family_) {
      case Family::A: return n * (n - 1) / 2;
      case Family::B:
      case Family::C: return n * n;
      case Family::D: return n * (n - 1);
    }
    return 0;
  }

  /// Order of the Weyl group: N! for A, 2^N N! for B/C, 2^(N-1) N! for D.
  double weyl_order() const noexcept {
    double f = std::tgamma(rank_ + 1.0);
    if (family_ == Family::B || family_ == Family::C) f *= std::ldexp(1.0, rank_);
    if (family_ == Family::D) f *= std::ldexp(1.0, rank_ - 1);
    return f;
  }

  friend bool operator==(const RootCase&, const RootCase&) = default;

 private:
  Family family_;
  int rank_;
};

using IntVector = std::vector<std::int64_t>;

/// Point of the closed Weyl chamber in canonical coordinate order:
/// A: x1 <= ... <= xN; B/C: 0 <= x1 <= ... <= xN; D: |x1| <= x2 <= ... <= xN.
struct ChamberPoint {
  std::vector<double> coords;
};

/// Particle configuration at a given process time.
struct ParticleState {
  std::vector<double> x;
  double time = 0.0;
};

/// Positive roots, ordered by (j, i, sign) for the pair roots e_j -+ e_i
/// (i < j), followed by the short/long roots e_i or 2 e_i for B/C.
inline std::vector<IntVector> positive_roots(const RootCase& rc) {
  const int n = rc.rank();
  std::vector<IntVector> roots;
  roots.reserve(static_cast<std::size_t>(rc.num_positive_roots()));
  for (int j = 1; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      IntVector minus(n, 0);
      minus[j] = 1;
      minus[i] = -1;
      roots.push_back(minus);
      if (rc.family() != Family::A) {
        IntVector plus(n, 0);
        plus[j] = 1;
        plus[i] = 1;
        roots.push_back(plus);
      }
    }
  }
  if (rc.family() == Family::B || rc.family() == Family::C) {
    const std::int64_t len = rc.family() == Family::B ? 1 : 2;
    for (int i = 0; i < n; ++i) {
      IntVector e(n, 0);
      e[i] = len;
      roots.push_back(e);
    }
  }
  return roots;
}

/// rho = sum of the positive roots, in closed form.
inline IntVector rho(const RootCase& rc) {
  const std::int64_t n = rc.rank();
  IntVector r(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    switch (rc.family()) {
      case Family::A: r[i] = -n + 1 + 2 * i; break;
      case Family::B: r[i] = 2 * i + 1; break;
      case Family::C: r[i] = 2 * i + 2; break;
      case Family::D: r[i] = 2 * i; break;
    }
  }
  return r;
}

inline std::vector<double> rho_real(const RootCase& rc) {
  const auto r = rho(rc);
  return {r.begin(), r.end()};
}

/// |rho|^2 from its closed form, exact in integer arithmetic.
inline std::int64_t rho_norm_sq(const RootCase& rc) {
  const std::int64_t n = rc.rank();
  switch (rc.family()) {
    case Family::A: return (n - 1) * n * (n + 1) / 3;
    case Family::B: return n * (2 * n - 1) * (2 * n + 1) / 3;
    case Family::C: return 2 * n * (n + 1) * (2 * n + 1) / 3;
    case Family::D: return 2 * n * (n - 1) * (2 * n - 1) / 3;
  }
  return 0;
}

namespace detail {

inline void check_dim(const RootCase& rc, std::size_t got) {
  if (got != rc.size()) {
    throw InvalidArgument("vector of length " + std::to_string(got) + " for rank " +
                          std::to_string(rc.rank()));
  }
}

inline double pairing(const IntVector& root, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < root.size(); ++i) {
    if (root[i] != 0) s += static_cast<double>(root[i]) * v[i];
  }
  return s;
}

/// log(sinh(u)/u) for any real u, with the series below |u| < 1e-4.
inline double log_sinhc(double u) {
  const double a = std::abs(u);
  if (a < 1e-4) {
    const double u2 = u * u;
    return std::log1p(u2 / 6.0 + u2 * u2 / 120.0);
  }
  return a + std::log(-std::expm1(-2.0 * a)) - std::numbers::ln2 - std::log(a);
}

}  // namespace detail

/// log sinh(u) for u > 0, stable for every magnitude.
inline double log_sinh(double u) {
  return u + std::log(-std::expm1(-2.0 * u)) - std::numbers::ln2;
}

/// Fundamental alternating polynomial: product of <alpha, lam> over R+.
inline double pi_poly(const RootCase& rc, std::span<const double> lam) {
  detail::check_dim(rc, lam.size());
  double p = 1.0;
  for (const auto& a : positive_roots(rc)) p *= detail::pairing(a, lam);
  return p;
}

/// Weyl-orbit representative in the closed chamber.
inline ChamberPoint chamber_project(const RootCase& rc, std::span<const double> x) {
  detail::check_dim(rc, x.size());
  std::vector<double> y(x.begin(), x.end());
  for (double v : y) {
    if (!std::isfinite(v)) throw InvalidArgument("non-finite coordinate");
  }
  if (rc.family() == Family::A) {
    std::sort(y.begin(), y.end());
    return {y};
  }
  int negatives = 0;
  bool has_zero = false;
  for (double& v : y) {
    if (v < 0.0) ++negatives;
    if (v == 0.0) has_zero = true;
    v = std::abs(v);
  }
  std::sort(y.begin(), y.end());
  // D_N only flips signs in pairs: an odd count survives on the smallest entry.
  if (rc.family() == Family::D && negatives % 2 == 1 && !has_zero) y[0] = -y[0];
  return {y};
}

/// coth with a Laurent series near the pole; x = 0 is rejected.
inline double coth_reg(double x) {
  if (x == 0.0) throw SingularInput("coth_reg evaluated at 0");
  constexpr double kSeries = 1e-4;
  if (std::abs(x) < kSeries) {
    const double x2 = x * x;
    return 1.0 / x + x / 3.0 - x * x2 / 45.0;
  }
  return 1.0 / std::tanh(x);
}

/// Positive chamber gaps of x: adjacent differences plus the wall terms
/// (x1 for B/C, x2 + x1 for D). All are > 0 exactly in the open chamber.
inline void chamber_gaps(Family family, std::span<const double> x, std::vector<double>& out) {
  out.clear();
  const std::size_t n = x.size();
  for (std::size_t i = 0; i + 1 < n; ++i) out.push_back(x[i + 1] - x[i]);
  if (family == Family::B || family == Family::C) out.push_back(x[0]);
  if (family == Family::D && n >= 2) out.push_back(x[1] + x[0]);
}

inline bool is_interior(const RootCase& rc, std::span<const double> x) {
  std::vector<double> gaps;
  chamber_gaps(rc.family(), x, gaps);
  return std::all_of(gaps.begin(), gaps.end(), [](double g) { return g > 0.0; });
}

inline bool in_closed_chamber(const RootCase& rc, std::span<const double> x) {
  std::vector<double> gaps;
  chamber_gaps(rc.family(), x, gaps);
  return std::all_of(gaps.begin(), gaps.end(), [](double g) { return g >= 0.0; });
}

/// Time-normalized coth drift (k = 1 multiplicity) written into `out`.
/// The caller guarantees an interior point; coincidences throw SingularInput.
inline void drift_field_into(Family family, std::span<const double> x, std::span<double> out) {
  const std::size_t n = x.size();
  std::fill(out.begin(), out.end(), 0.0);
  const bool with_plus = family != Family::A;
  for (std::size_t j = 1; j < n; ++j) {
    const double xj = x[j];
    for (std::size_t i = 0; i < j; ++i) {
      const double cm = coth_reg(xj - x[i]);
      out[j] += cm;
      out[i] -= cm;
      if (with_plus) {
        const double cp = coth_reg(xj + x[i]);
        out[j] += cp;
        out[i] += cp;
      }
    }
  }
  if (family == Family::B) {
    for (std::size_t i = 0; i < n; ++i) out[i] += coth_reg(x[i]);
  } else if (family == Family::C) {
    for (std::size_t i = 0; i < n; ++i) out[i] += 2.0 * coth_reg(2.0 * x[i]);
  }
}

inline std::vector<double> drift_field(const RootCase& rc, std::span<const double> x) {
  detail::check_dim(rc, x.size());
  if (!is_interior(rc, x)) throw SingularInput("drift_field requires an interior chamber point");
  std::vector<double> out(x.size());
  drift_field_into(rc.family(), x, out);
  return out;
}

/// One element of a Weyl group acting on R^N by (w.x)_i = sign_i * x_{perm_i}.
struct WeylElement {
  std::vector<int> perm;
  std::vector<int> sign;
  int det = 1;
};

namespace detail {

inline int permutation_parity(const std::vector<int>& p) {
  int s = 1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      if (p[i] > p[j]) s = -s;
    }
  }
  return s;
}

}  // namespace detail

/// Explicit enumeration of W. Rank caps: 8 for A, 6 for B/C/D.
inline std::vector<WeylElement> weyl_group(const RootCase& rc) {
  const int n = rc.rank();
  const int cap = rc.family() == Family::A ? 8 : 6;
  if (n > cap) {
    throw UnsupportedRank("Weyl-group enumeration supports rank <= " + std::to_string(cap) +
                          " for case " + to_string(rc.family()));
  }
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<WeylElement> out;
  const unsigned sign_patterns = rc.family() == Family::A ? 1u : (1u << n);
  do {
    const int parity = detail::permutation_parity(p);
    for (unsigned mask = 0; mask < sign_patterns; ++mask) {
      const int flips = std::popcount(mask);
      if (rc.family() == Family::D && flips % 2 == 1) continue;
      WeylElement w;
      w.perm = p;
      w.sign.assign(n, 1);
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) w.sign[i] = -1;
      }
      w.det = (flips % 2 == 0) ? parity : -parity;
      out.push_back(std::move(w));
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

namespace detail {

/// sum_i signs[i] * exp(exponents[i] - max), with the max returned separately.
inline long double signed_sum_exp(std::span<const long double> exponents, std::span<const int> signs,
                                  long double& max_out) {
  max_out = *std::max_element(exponents.begin(), exponents.end());
  long double s = 0.0L;
  for (std::size_t i = 0; i < exponents.size(); ++i) s += signs[i] * std::exp(exponents[i] - max_out);
  return s;
}

}  // namespace detail

/// Drift of the projected Brownian motion with drift lam on H_N(C) (case A):
/// sum_w det(w) e^{<w.lam, x>} w.lam / sum_w det(w) e^{<w.lam, x>}.
inline std::vector<double> drift_field_lambda(const RootCase& rc, std::span<const double> lam,
                                              std::span<const double> x) {
  if (rc.family() != Family::A) throw InvalidArgument("drift_field_lambda is defined for case A only");
  detail::check_dim(rc, lam.size());
  detail::check_dim(rc, x.size());
  if (!is_interior(rc, x)) throw SingularInput("drift_field_lambda requires an interior point");
  const auto group = weyl_group(rc);
  const std::size_t n = x.size();
  std::vector<long double> exps(group.size());
  std::vector<int> dets(group.size());
  for (std::size_t g = 0; g < group.size(); ++g) {
    long double e = 0.0L;
    for (std::size_t i = 0; i < n; ++i) e += static_cast<long double>(lam[group[g].perm[i]]) * x[i];
    exps[g] = e;
    dets[g] = group[g].det;
  }
  const long double m = *std::max_element(exps.begin(), exps.end());
  long double den = 0.0L;
  std::vector<long double> num(n, 0.0L);
  for (std::size_t g = 0; g < group.size(); ++g) {
    const long double wgt = dets[g] * std::exp(exps[g] - m);
    den += wgt;
    for (std::size_t i = 0; i < n; ++i) num[i] += wgt * lam[group[g].perm[i]];
  }
  if (!(std::abs(den) > 1e-300L)) throw SingularInput("alternating sum vanished after stabilization");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(num[i] / den);
  return out;
}

/// log psi_{-i rho}(x) = sum over R+ of log(sinh<alpha,x> / <alpha,x>).
inline double log_psi_weyl(const RootCase& rc, std::span<const double> x) {
  detail::check_dim(rc, x.size());
  double s = 0.0;
  for (const auto& a : positive_roots(rc)) s += detail::log_sinhc(detail::pairing(a, x));
  return s;
}

/// Weyl product formula for the spherical function at lambda = -i rho.
inline double psi_weyl(const RootCase& rc, std::span<const double> x) {
  return std::exp(log_psi_weyl(rc, x));
}

/// log alpha_lam(x) via the alternating sum
///   pi(rho) / (2^{|R+|} pi(x) pi(lam)) * sum_w det(w) e^{<lam, w.x>}.
inline double log_psi_general(const RootCase& rc, std::span<const double> lam,
                              std::span<const double> x) {
  detail::check_dim(rc, lam.size());
  detail::check_dim(rc, x.size());
  const auto group = weyl_group(rc);
  const double pl = pi_poly(rc, lam);
  const double px = pi_poly(rc, x);
  if (pl == 0.0 || px == 0.0) {
    throw SingularInput("psi_general needs pi(lam) * pi(x) != 0");
  }
  const std::size_t n = x.size();
  std::vector<long double> exps(group.size());
  std::vector<int> dets(group.size());
  for (std::size_t g = 0; g < group.size(); ++g) {
    long double e = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      e += static_cast<long double>(lam[i]) * group[g].sign[i] * x[group[g].perm[i]];
    }
    exps[g] = e;
    dets[g] = group[g].det;
  }
  long double m = 0.0L;
  const long double sum = detail::signed_sum_exp(exps, dets, m);
  const auto r = rho_real(rc);
  const double pr = pi_poly(rc, r);
  const long double ratio = sum / (static_cast<long double>(pl) * px);
  if (!(ratio > 0.0L)) throw SingularInput("alternating sum lost its sign to cancellation");
  return static_cast<double>(std::log(static_cast<long double>(pr)) -
                             static_cast<long double>(rc.num_positive_roots()) * std::log(2.0L) +
                             std::log(ratio) + m);
}

inline double psi_general(const RootCase& rc, std::span<const double> lam, std::span<const double> x) {
  return std::exp(log_psi_general(rc, lam, x));
}

}  // namespace hecop
