#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "hecop/matmodel.hpp"
#include "hecop/stats.hpp"

using namespace hecop;

namespace {

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

}  // namespace

TEST(EmpiricalMoments, HandComputed) {
  const std::vector<std::vector<double>> s{{-1.0, 1.0}, {0.0, 2.0}};
  const auto m = empirical_moments(s, Transform::IDENT, 2);
  EXPECT_DOUBLE_EQ(m[0], 1.0);
  EXPECT_DOUBLE_EQ(m[1], 0.5);   // (0 + 1) / 2
  EXPECT_DOUBLE_EQ(m[2], 1.5);   // (1 + 2) / 2
  EXPECT_NEAR(m.stderr_[1], 0.5, 1e-15);
  EXPECT_EQ(m.source, MomentSource::EMPIRICAL);

  const auto a = empirical_moments(s, Transform::ABS, 1);
  EXPECT_DOUBLE_EQ(a[1], 1.0);
  const auto e = empirical_moments(s, Transform::EXP2, 1);
  EXPECT_NEAR(e[1], 0.25 * (std::exp(-2.0) + std::exp(2.0) + 1.0 + std::exp(4.0)), 1e-12);
}

TEST(EmpiricalMoments, PoolingEqualsWeightedReplicaAverage) {
  std::mt19937_64 g(5);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> s(7, std::vector<double>(13));
  for (auto& r : s)
    for (double& v : r) v = nd(g);
  const auto m = empirical_moments(s, Transform::IDENT, 4);
  for (int l = 1; l <= 4; ++l) {
    double pooled = 0.0;
    for (const auto& r : s)
      for (double v : r) pooled += std::pow(v, l);
    pooled /= 7.0 * 13.0;
    EXPECT_NEAR(m[l], pooled, 1e-13 * std::max(1.0, std::abs(pooled)));
    EXPECT_GT(m.stderr_[l], 0.0);
  }
}

TEST(EmpiricalMoments, Errors) {
  EXPECT_THROW(empirical_moments({}, Transform::IDENT, 2), InvalidArgument);
  EXPECT_THROW(empirical_moments({{}}, Transform::IDENT, 2), InvalidArgument);
  EXPECT_THROW(empirical_moments({{1.0}}, Transform::IDENT, 17), InvalidArgument);
  const auto single = empirical_moments({{1.0, 2.0}}, Transform::IDENT, 2);
  EXPECT_TRUE(std::isnan(single.stderr_[1]));
}

TEST(EmpiricalMoments, SymmetricAEnsembleHasVanishingOddMoments) {
  const RootCase rc(Family::A, 20);
  const double tau = 0.5;
  const double h = simulation_horizon(Transform::IDENT, tau, 20);
  const auto ens = run_ensemble(rc, 1.0, h, SchemeConfig::for_horizon(h, 400), 60, 3, Clock::TILDE);
  const auto m = empirical_moments(ens, Transform::IDENT, 4);
  EXPECT_LE(std::abs(m[1]), 3.0 * m.stderr_[1]);
  EXPECT_LE(std::abs(m[3]), 3.0 * m.stderr_[3]);
}

TEST(Clock, HorizonsAndTargets) {
  EXPECT_DOUBLE_EQ(simulation_horizon(Transform::IDENT, 0.5, 10), 0.05);
  EXPECT_DOUBLE_EQ(simulation_horizon(Transform::EXP2, 0.5, 10), 0.025);
  EXPECT_DOUBLE_EQ(simulation_horizon(Transform::ABS, 0.5, 10), 0.025);
  EXPECT_THROW(simulation_horizon(Transform::IDENT, 0.0, 10), InvalidArgument);

  const auto id = target_moments(Transform::IDENT, 0.5, 4);
  const auto ref = limit_moments_ident(0.5, 4);
  for (int l = 0; l <= 4; ++l) EXPECT_DOUBLE_EQ(id[l], ref[l]);
  const auto ex = target_moments(Transform::EXP2, 0.5, 4);
  const auto mb = mult_bm_moments(moments_dirac(1.0, 4), 0.5, 4);
  for (int l = 0; l <= 4; ++l) EXPECT_DOUBLE_EQ(ex[l], mb[l]);
  EXPECT_NEAR(ex[1], std::exp(0.5), 1e-10);
  const auto ab = target_moments(Transform::ABS, 0.5, 4);
  EXPECT_DOUBLE_EQ(ab[2], ref[2]);
  EXPECT_DOUBLE_EQ(ab[4], ref[4]);
  EXPECT_GT(ab[1], 0.0);
}

TEST(Tolerance, FloorAndSigma) {
  EXPECT_TRUE(within_tolerance(1.04, 0.0, 1.0));
  EXPECT_FALSE(within_tolerance(1.06, 0.0, 1.0));
  EXPECT_TRUE(within_tolerance(1.06, 0.03, 1.0));
  EXPECT_TRUE(mutually_consistent(1.0, 0.1, 1.4, 0.1, 1.0));
  EXPECT_FALSE(mutually_consistent(1.0, 0.01, 1.2, 0.01, 1.0));
}

TEST(Ks, IdenticalSamplesGiveZero) {
  std::vector<double> a(200);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::sin(static_cast<double>(i));
  const auto r = ks_two_sample(a, a);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_FALSE(r.reject05());
}

TEST(Ks, ExhaustiveSmallSampleDistribution) {
  // Every interleaving of two samples of size n is equally likely under H0;
  // the count with D >= k/n is 2 sum_j (-1)^{j+1} C(2n, n - jk).
  for (int n = 1; n <= 10; ++n) {
    std::vector<std::uint64_t> hist(n + 1, 0);
    const std::uint32_t full = (1u << (2 * n)) - 1u;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      if (std::popcount(mask) != n) continue;
      std::vector<double> a, b;
      for (int p = 0; p < 2 * n; ++p) ((mask >> p) & 1u ? a : b).push_back(p);
      const double d = ks_two_sample_statistic(a, b);
      const int k = static_cast<int>(std::lround(d * n));
      ASSERT_NEAR(d * n, k, 1e-12);
      ++hist[k];
    }
    std::uint64_t tail = 0;
    for (int k = n; k >= 1; --k) {
      tail += hist[k];
      double expect = 0.0;
      for (int j = 1; j * k <= n; ++j) expect += (j % 2 ? 2.0 : -2.0) * binom(2 * n, n - j * k);
      EXPECT_EQ(static_cast<double>(tail), expect) << "n=" << n << " k=" << k;
    }
    EXPECT_EQ(hist[0], 0u);
  }
}

TEST(Ks, RejectsShiftedNormal) {
  std::mt19937_64 g(11);
  std::normal_distribution<double> nd;
  std::vector<double> a(2000), b(2000);
  for (double& v : a) v = nd(g);
  for (double& v : b) v = nd(g) + 0.5;
  EXPECT_TRUE(ks_two_sample(a, b).reject01());
}

TEST(Ks, Preconditions) {
  std::vector<double> a(99, 0.0), b(100, 0.0);
  EXPECT_THROW(ks_two_sample(a, b), InvalidArgument);
}

TEST(Ks, SdeAtUnitMultiplicityMatchesMatrixModel) {
  const int n = 5;
  const double t = 0.2;
  const std::size_t reps = 2000;
  const RootCase rc(Family::A, n);
  const auto ens = run_ensemble(rc, 1.0, t, SchemeConfig::for_horizon(t, 500), reps, 101, Clock::HO);
  std::vector<std::vector<double>> sde(n), mat(n);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto h = sample_hermitian_bm_drift(n, t, 1.0, 202, r);
    for (int i = 0; i < n; ++i) {
      sde[i].push_back(ens.terminal_states[r].x[i]);
      mat[i].push_back(h.spectrum.coords[i]);
    }
  }
  for (int i = 0; i < n; ++i) EXPECT_FALSE(ks_two_sample(sde[i], mat[i]).reject01()) << "coordinate " << i;
}

TEST(Sweep, TargetColumnAndDeterminism) {
  SweepOptions o;
  o.replicas = 6;
  o.seed = 9;
  o.steps = 100;
  o.threads = 1;
  const auto a = convergence_sweep(Family::A, {0.5, std::numeric_limits<double>::infinity()}, {8, 16}, 0.5,
                                   Transform::EXP2, o);
  o.threads = 3;
  const auto b = convergence_sweep(Family::A, {0.5, std::numeric_limits<double>::infinity()}, {8, 16}, 0.5,
                                   Transform::EXP2, o);
  ASSERT_EQ(a.size(), 4u);
  const auto mb = mult_bm_moments(moments_dirac(1.0, 4), 0.5, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].estimate.m, b[i].estimate.m);
    EXPECT_EQ(a[i].target.m, mb.m);
    EXPECT_DOUBLE_EQ(a[i].horizon, 0.5 / (2.0 * a[i].N));
    EXPECT_EQ(a[i].clock, Clock::TILDE);
  }
  EXPECT_EQ(a[0].N, 8);
  EXPECT_EQ(a[3].N, 16);
  EXPECT_TRUE(std::isinf(a[3].k));
  EXPECT_FALSE(std::isnan(median_abs_error(a, 16)));
}

TEST(Sweep, Preconditions) {
  SweepOptions o;
  o.replicas = 2;
  EXPECT_THROW(convergence_sweep(Family::A, {0.4}, {4}, 0.5, Transform::EXP2, o), InvalidArgument);
  EXPECT_THROW(convergence_sweep(Family::A, {1.0}, {8, 4}, 0.5, Transform::EXP2, o), InvalidArgument);
  EXPECT_THROW(convergence_sweep(Family::A, {1.0}, {4}, 0.5, Transform::ABS, o), InvalidArgument);
  EXPECT_THROW(convergence_sweep(Family::B, {1.0}, {4}, 0.5, Transform::IDENT, o), InvalidArgument);
  EXPECT_THROW(convergence_sweep(Family::A, {}, {4}, 0.5, Transform::IDENT, o), InvalidArgument);
}

TEST(Sweep, Exp2FirstMomentAtDeskScale) {
  SweepOptions o;
  o.replicas = 20;
  o.seed = 4;
  const auto r = run_report(RootCase(Family::A, 150), 1.0, 0.5, Transform::EXP2, o);
  EXPECT_NEAR(r.estimate[1], std::exp(0.5), 0.05 * std::exp(0.5));
}

TEST(Sweep, AbsEvenMomentsOnB) {
  SweepOptions o;
  o.replicas = 20;
  o.seed = 8;
  const auto r = run_report(RootCase(Family::B, 60), 1.0, 0.5, Transform::ABS, o);
  EXPECT_TRUE(r.moment_ok(2));
  EXPECT_TRUE(r.moment_ok(4));
}
