#pragma once

// Exact fixed-time matrix models:
//   A:    ordered eigenvalues of B_t^H + t * diag(drift), B^H Hermitian BM;
//   B, D: singular values x of a skew Brownian motion plus t * A(rho).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "hecop/errors.hpp"
#include "hecop/rng.hpp"
#include "hecop/rootsys.hpp"

namespace hecop {

struct HermitianSample {
  int N = 0;
  double t = 0.0;
  double c = 0.0;                 // NaN for a general drift
  std::vector<double> drift;      // diagonal of the drift matrix (per unit time)
  ChamberPoint spectrum;          // ascending
};

struct SkewSample {
  Family family = Family::B;
  int N = 0;
  double t = 0.0;
  ChamberPoint x;  // eigenvalues +-i x_j (and 0 for B)
};

namespace detail {

inline HermitianSample hermitian_with_drift(int n, double t, std::vector<double> drift, double c,
                                            std::uint64_t seed, std::uint64_t draw) {
  using Cplx = std::complex<double>;
  const GaussianStream g(seed, RngDomain::kHermitian, draw);
  std::vector<double> z(static_cast<std::size_t>(n) * n);
  g.fill(0, z);
  const double st = std::sqrt(t);
  Eigen::MatrixXcd h(n, n);
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i) {
    h(i, i) = st * z[idx++] + t * drift[i];
    for (int j = i + 1; j < n; ++j) {
      const Cplx v(st * z[idx] / std::numbers::sqrt2, st * z[idx + 1] / std::numbers::sqrt2);
      idx += 2;
      h(i, j) = v;
      h(j, i) = std::conj(v);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericFailure("Hermitian eigensolver did not converge");
  HermitianSample s{n, t, c, std::move(drift), {}};
  s.spectrum.coords.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::sort(s.spectrum.coords.begin(), s.spectrum.coords.end());
  return s;
}

}  // namespace detail

/// Ordered spectrum of B_t^H + t c diag(rho_A). Draw `draw` of the stream `seed`.
inline HermitianSample sample_hermitian_bm_drift(int n, double t, double c, std::uint64_t seed,
                                                 std::uint64_t draw = 0) {
  if (n < 1) throw InvalidArgument("N must be >= 1");
  if (!(t > 0.0)) throw InvalidArgument("t must be positive");
  if (!(c >= 0.0)) throw InvalidArgument("c must be >= 0");
  auto drift = rho_real(RootCase(Family::A, n));
  for (double& d : drift) d *= c;
  return detail::hermitian_with_drift(n, t, std::move(drift), c, seed, draw);
}

/// Ordered spectrum of B_t^H + t diag(lam); lam must be trace-free with
/// distinct entries.
inline HermitianSample sample_hermitian_bm_drift_lambda(int n, double t, const std::vector<double>& lam,
                                                        std::uint64_t seed, std::uint64_t draw = 0) {
  if (n < 1 || lam.size() != static_cast<std::size_t>(n)) throw InvalidArgument("lam must have N entries");
  if (!(t > 0.0)) throw InvalidArgument("t must be positive");
  const double tr = std::accumulate(lam.begin(), lam.end(), 0.0);
  if (std::abs(tr) > 1e-12) throw InvalidArgument("lam must have zero trace");
  auto sorted = lam;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidArgument("lam must have distinct entries");
  }
  return detail::hermitian_with_drift(n, t, lam, std::numeric_limits<double>::quiet_NaN(), seed, draw);
}

/// 2x2 blocks [[0, x_i], [-x_i, 0]] on the diagonal; B appends a zero row/column.
inline Eigen::MatrixXd block_embed(std::span<const double> x, Family family) {
  if (family != Family::B && family != Family::D) throw InvalidArgument("block_embed needs family B or D");
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::Index dim = 2 * n + (family == Family::B ? 1 : 0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(2 * i, 2 * i + 1) = x[i];
    m(2 * i + 1, 2 * i) = -x[i];
  }
  return m;
}

/// Sign of the Pfaffian of a real skew matrix of even order (Parlett-Reid
/// elimination with pivoting); 0 when singular.
inline int pfaffian_sign(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  if (n % 2 != 0) return 0;
  int sign = 1;
  for (Eigen::Index k = 0; k + 1 < n; k += 2) {
    Eigen::Index kp = k + 1;
    a.col(k).tail(n - k - 1).cwiseAbs().maxCoeff(&kp);
    kp += k + 1;
    if (kp != k + 1) {
      a.row(k + 1).swap(a.row(kp));
      a.col(k + 1).swap(a.col(kp));
      sign = -sign;
    }
    const double piv = a(k, k + 1);
    if (piv == 0.0) return 0;
    if (piv < 0.0) sign = -sign;
    if (k + 2 < n) {
      const Eigen::VectorXd tau = a.row(k).tail(n - k - 2).transpose() / piv;
      const Eigen::VectorXd col = a.col(k + 1).tail(n - k - 2);
      a.bottomRightCorner(n - k - 2, n - k - 2) += tau * col.transpose() - col * tau.transpose();
    }
  }
  return sign;
}

namespace detail {

/// Folds the spectrum of a real skew matrix to x >= 0 (ascending), checking
/// the +-pairing and, for odd order, the forced zero eigenvalue.
inline std::vector<double> skew_singular_values(const Eigen::MatrixXd& s, double tol) {
  const Eigen::Index dim = s.rows();
  if ((s + s.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, s.cwiseAbs().maxCoeff())) {
    throw NumericFailure("matrix is not skew-symmetric");
  }
  const Eigen::MatrixXcd h = std::complex<double>(0.0, 1.0) * s.cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericFailure("eigensolver did not converge on i*S");
  const Eigen::VectorXd ev = es.eigenvalues();  // ascending
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  const Eigen::Index n = dim / 2;
  std::vector<double> x(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const double lo = ev[j], hi = ev[dim - 1 - j];
    if (std::abs(lo + hi) > tol * scale) throw NumericFailure("skew spectrum is not +- paired");
    x[static_cast<std::size_t>(n - 1 - j)] = 0.5 * (hi - lo);
  }
  if (dim % 2 == 1 && std::abs(ev[n]) > tol * scale) {
    throw NumericFailure("odd skew matrix lost its zero eigenvalue");
  }
  return x;
}

}  // namespace detail

/// Skew Brownian motion at time t (entries above the diagonal N(0, t)) plus
/// t A(rho), folded to the chamber of `family`. For D the sign of x_1 is the
/// sign of the Pfaffian, so the result is the SO(2N) orbit representative.
inline SkewSample sample_skew_bm_drift(Family family, int n, double t, std::uint64_t seed,
                                       std::uint64_t draw = 0) {
  if (family != Family::B && family != Family::D) throw InvalidArgument("skew model exists for B and D only");
  const RootCase rc(family, n);
  if (!(t > 0.0)) throw InvalidArgument("t must be positive");
  const auto r = rho_real(rc);
  Eigen::MatrixXd s = block_embed(r, family) * t;
  const Eigen::Index dim = s.rows();
  const GaussianStream g(seed, RngDomain::kSkew, draw);
  std::vector<double> z(static_cast<std::size_t>(dim * (dim - 1) / 2));
  g.fill(0, z);
  const double st = std::sqrt(t);
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      const double v = st * z[idx++];
      s(i, j) += v;
      s(j, i) -= v;
    }
  }
  SkewSample out{family, n, t, {detail::skew_singular_values(s, 1e-8)}};
  if (family == Family::D && pfaffian_sign(s) < 0) out.x.coords[0] = -out.x.coords[0];
  return out;
}

}  // namespace hecop
