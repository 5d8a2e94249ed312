#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "hecop/density.hpp"
#include "hecop/matmodel.hpp"
#include "hecop/sde.hpp"
#include "test_util.hpp"

using namespace hecop;

namespace {

std::vector<ChamberDensity> all_variants() {
  return {ChamberDensity::gue(3, 0.8),          ChamberDensity::drift_c(3, 0.5, 1.2),
          ChamberDensity::drift_lambda(0.7, {-1.0, 0.3, 0.7}), ChamberDensity::flat(Family::B, 3, 0.6),
          ChamberDensity::flat(Family::D, 3, 0.6), ChamberDensity::drift(Family::B, 3, 0.9),
          ChamberDensity::drift(Family::C, 3, 0.4), ChamberDensity::drift(Family::D, 3, 1.1)};
}

MarginalOptions quick_marginals() {
  MarginalOptions o;
  o.seed = 99;
  return o;
}

std::vector<ChamberPoint> to_points(const PathEnsemble& e) {
  std::vector<ChamberPoint> out;
  for (const auto& s : e.terminal_states) out.push_back({s.x});
  return out;
}

}  // namespace

TEST(LogDensity, GueExample) {
  const std::vector<double> x{-1.0, 1.0};
  EXPECT_NEAR(log_density(ChamberDensity::gue(2, 1.0), x), std::log(2.0 / std::numbers::pi) - 1.0, 1e-14);
}

TEST(NormConst, ClosedValues) {
  EXPECT_NEAR(norm_const_flat(Family::A, 2), 1.0 / (2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(norm_const_flat(Family::B, 2), 1.0 / (3.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(norm_const_flat(Family::B, 2), 0.1061033, 1e-7);
  EXPECT_NEAR(norm_const_flat(Family::D, 2), 0.1591549, 1e-7);
  EXPECT_DOUBLE_EQ(norm_const_flat(Family::C, 3), norm_const_flat(Family::B, 3));
  // Large ranks stay finite in log space.
  EXPECT_TRUE(std::isfinite(log_norm_const_flat(Family::A, 64)));
  EXPECT_TRUE(std::isfinite(log_norm_const_flat(Family::D, 64)));
}

TEST(LogDensity, BDriftTermByTerm) {
  const std::vector<double> x{0.5, 1.2};
  const double t = 1.0;
  double expected = std::log(1.0 / (3.0 * std::numbers::pi)) - 10.0 * t / 2.0 - 5.0 * std::log(t) -
                    (0.25 + 1.44) / (2.0 * t);
  expected += std::log(1.44 - 0.25) + std::log(std::sinh(0.7)) + std::log(std::sinh(1.7));
  expected += std::log(0.5 * std::sinh(0.5)) + std::log(1.2 * std::sinh(1.2));
  EXPECT_NEAR(log_density(ChamberDensity::drift(Family::B, 2, t), x), expected, 1e-13);
}

TEST(LogDensity, SmallCLimitIsGue) {
  testutil::Rng rng(1);
  for (int n : {2, 3, 5}) {
    const RootCase rc(Family::A, n);
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = testutil::random_interior(rng, rc, 1.0);
      const double a = log_density(ChamberDensity::drift_c(n, 0.7, 1e-6), x);
      const double b = log_density(ChamberDensity::gue(n, 0.7), x);
      EXPECT_NEAR(std::exp(a - b), 1.0, 1e-4);
    }
  }
}

TEST(LogDensity, LambdaFormulaMatchesRhoFormula) {
  testutil::Rng rng(2);
  for (int n = 2; n <= 5; ++n) {
    const RootCase rc(Family::A, n);
    for (double c : {0.3, 1.0}) {
      auto lam = rho_real(rc);
      for (double& v : lam) v *= c;
      const auto dl = ChamberDensity::drift_lambda(0.6, lam);
      const auto dc = ChamberDensity::drift_c(n, 0.6, c);
      for (int trial = 0; trial < 100; ++trial) {
        const auto x = testutil::random_interior(rng, rc, 1.0);
        EXPECT_NEAR(log_density(dl, x), log_density(dc, x), 1e-8) << "n=" << n;
      }
    }
  }
}

TEST(LogDensity, SphericalFunctionFactorization) {
  // log f_c - log f_GUE - log psi(c x) = -c^2 |rho|^2 t / 2 exactly.
  testutil::Rng rng(3);
  for (int n = 2; n <= 4; ++n) {
    const RootCase rc(Family::A, n);
    const double rho2 = static_cast<double>(rho_norm_sq(rc));
    for (double t : {0.2, 0.5, 1.3}) {
      for (int trial = 0; trial < 10; ++trial) {
        const double c = rng.uniform(0.2, 2.0);
        auto x = testutil::random_interior(rng, rc, 1.0);
        std::vector<double> cx(x);
        for (double& v : cx) v *= c;
        const double lhs = log_density(ChamberDensity::drift_c(n, t, c), x) - log_density(ChamberDensity::gue(n, t), x) -
                           log_psi_weyl(rc, cx);
        EXPECT_NEAR(lhs, -0.5 * c * c * rho2 * t, 1e-10);
      }
    }
  }
}

TEST(LogDensity, WeylInvariance) {
  testutil::Rng rng(4);
  for (const auto& d : all_variants()) {
    const auto& rc = d.root_case;
    const auto group = weyl_group(rc);
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = testutil::random_interior(rng, rc, 1.0);
      const auto& w = group[static_cast<std::size_t>(rng.uniform(0.0, 1.0) * group.size()) % group.size()];
      std::vector<double> wx(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) wx[i] = w.sign[i] * x[w.perm[i]];
      const auto back = chamber_project(rc, wx);
      EXPECT_NEAR(log_density(d, back), log_density(d, x), 1e-12) << to_string(d.variant);
    }
  }
}

TEST(LogDensity, BoundaryAndDomain) {
  for (const auto& d : all_variants()) {
    const auto& rc = d.root_case;
    testutil::Rng rng(5);
    auto x = testutil::random_interior(rng, rc, 1.0);
    EXPECT_TRUE(std::isfinite(log_density(d, x))) << to_string(d.variant);
    auto y = x;
    y[2] = y[1];  // adjacent collision
    EXPECT_EQ(log_density(d, y), -std::numeric_limits<double>::infinity()) << to_string(d.variant);
    if (rc.family() == Family::B || rc.family() == Family::C) {
      auto z = x;
      z[0] = 0.0;
      EXPECT_EQ(log_density(d, z), -std::numeric_limits<double>::infinity());
    }
    if (rc.family() == Family::D) {
      auto z = x;
      z[0] = -z[1];
      EXPECT_EQ(log_density(d, z), -std::numeric_limits<double>::infinity());
      z[0] = 0.0;  // interior for D
      EXPECT_TRUE(std::isfinite(log_density(d, z)));
    }
    auto bad = x;
    std::swap(bad[1], bad[2]);
    EXPECT_THROW(log_density(d, bad), InvalidArgument);
  }
}

TEST(ChamberDensity, Validation) {
  EXPECT_THROW(ChamberDensity::gue(2, 0.0), InvalidArgument);
  EXPECT_THROW(ChamberDensity::drift_c(2, 1.0, 0.0), InvalidArgument);
  EXPECT_THROW(ChamberDensity::drift_lambda(1.0, {1.0, 1.0}), InvalidArgument);
  EXPECT_THROW(ChamberDensity::drift_lambda(1.0, {-1.0, 2.0}), InvalidArgument);
  EXPECT_THROW(ChamberDensity::flat(Family::C, 2, 1.0), InvalidArgument);
  EXPECT_THROW(ChamberDensity::drift(Family::A, 2, 1.0), InvalidArgument);
  ChamberDensity mismatch{RootCase(Family::B, 2), 1.0, DensityVariant::D_DRIFT};
  EXPECT_THROW(mismatch.validate(), InvalidArgument);
  EXPECT_THROW(log_density(mismatch, std::vector<double>{0.5, 1.0}), InvalidArgument);
}

TEST(McNormalization, SelfTestLaws) {
  const std::vector<ChamberDensity> laws{
      ChamberDensity::gue(2, 1.0),           ChamberDensity::gue(3, 1.0),
      ChamberDensity::drift_c(3, 0.5, 1.0),  ChamberDensity::flat(Family::B, 2, 1.0),
      ChamberDensity::drift(Family::B, 2, 1.0), ChamberDensity::flat(Family::D, 2, 1.0),
      ChamberDensity::drift(Family::D, 2, 1.0), ChamberDensity::drift(Family::C, 2, 0.5),
      ChamberDensity::drift_lambda(1.0, {-1.0, 1.0})};
  for (const auto& d : laws) {
    const auto r = mc_normalization(d, 0.0, 100000, 17);
    EXPECT_NEAR(r.estimate, 1.0, 0.02) << to_string(d.variant) << " N=" << d.root_case.rank();
    EXPECT_LT(r.stderr_, 0.01);
    EXPECT_GT(r.ess, 1000.0);
  }
}

TEST(McNormalization, FixedIsotropicProposal) {
  const auto r = mc_normalization(ChamberDensity::gue(2, 1.0), 1.5, 100000, 3);
  EXPECT_NEAR(r.estimate, 1.0, 0.02);
}

TEST(McNormalization, DeterministicAcrossThreads) {
  const auto d = ChamberDensity::drift_c(3, 0.5, 1.0);
  const auto a = mc_normalization(d, 0.0, 20000, 5, 1);
  const auto b = mc_normalization(d, 0.0, 20000, 5, 4);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.stderr_, b.stderr_);
}

TEST(McNormalization, Errors) {
  EXPECT_THROW(mc_normalization(ChamberDensity::gue(2, 1.0), 0.0, 999, 1), InvalidArgument);
  EXPECT_THROW(mc_normalization(ChamberDensity::gue(2, 1.0), -1.0, 5000, 1), InvalidArgument);
  // A proposal far wider than the law leaves almost all weight on a few draws.
  EXPECT_THROW(mc_normalization(ChamberDensity::gue(3, 1.0), 1e4, 5000, 1), UnreliableEstimate);
}

TEST(DensityKs, HermitianSamplesMatchDriftDensity) {
  const int n = 3;
  const double t = 0.5, c = 1.0;
  std::vector<ChamberPoint> s;
  for (int d = 0; d < 5000; ++d) s.push_back(sample_hermitian_bm_drift(n, t, c, 21, d).spectrum);
  const auto ok = density_vs_sample_ks(ChamberDensity::drift_c(n, t, c), s, quick_marginals());
  EXPECT_TRUE(ok.pass01());
  for (const auto& r : ok.per_coordinate) EXPECT_LT(r.statistic, r.crit01);
  const auto wrong = density_vs_sample_ks(ChamberDensity::drift_c(n, 1.5 * t, c), s, quick_marginals());
  EXPECT_FALSE(wrong.pass01());
}

TEST(DensityKs, LambdaDriftSamples) {
  const std::vector<double> lam{-1.0, 1.0};
  std::vector<ChamberPoint> s;
  for (int d = 0; d < 5000; ++d) s.push_back(sample_hermitian_bm_drift_lambda(2, 1.0, lam, 22, d).spectrum);
  EXPECT_TRUE(density_vs_sample_ks(ChamberDensity::drift_lambda(1.0, lam), s, quick_marginals()).pass01());
}

TEST(DensityKs, SkewSamplesMatchBAndD) {
  for (auto f : {Family::B, Family::D}) {
    std::vector<ChamberPoint> s;
    for (int d = 0; d < 5000; ++d) s.push_back(sample_skew_bm_drift(f, 2, 1.0, 23, d).x);
    EXPECT_TRUE(density_vs_sample_ks(ChamberDensity::drift(f, 2, 1.0), s, quick_marginals()).pass01())
        << to_string(f);
  }
}

TEST(DensityKs, SdeAtUnitMultiplicity) {
  // k = 1 on the HO clock has the drifted densities as fixed-time laws;
  // for C this is the only available check of the density.
  struct Case {
    ChamberDensity d;
    std::size_t replicas;
  };
  const std::vector<Case> cases{{ChamberDensity::drift_c(3, 0.5, 1.0), 5000},
                                {ChamberDensity::drift(Family::B, 2, 0.5), 5000},
                                {ChamberDensity::drift(Family::C, 2, 0.5), 5000}};
  for (const auto& cs : cases) {
    const auto& rc = cs.d.root_case;
    const auto cfg = SchemeConfig::for_horizon(cs.d.t, 500);
    const auto ens = run_ensemble(rc, 1.0, cs.d.t, cfg, cs.replicas, 31, Clock::HO);
    const auto rep = density_vs_sample_ks(cs.d, to_points(ens), quick_marginals());
    EXPECT_TRUE(rep.pass01()) << to_string(cs.d.variant);
  }
}

TEST(DensityKs, MarginalCacheRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "hecop_cache_test";
  std::filesystem::remove_all(dir);
  MarginalOptions o = quick_marginals();
  o.draws = 20000;
  o.cache_dir = dir.string();
  const auto d = ChamberDensity::drift(Family::D, 2, 1.0);
  const auto a = tabulate_marginals(d, o);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);
  const auto b = tabulate_marginals(d, o);
  EXPECT_EQ(a.q, b.q);
  // A corrupted entry is recomputed, not trusted.
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ofstream(e.path(), std::ios::binary | std::ios::trunc) << "garbage";
  }
  const auto c = tabulate_marginals(d, o);
  EXPECT_EQ(a.q, c.q);
  std::filesystem::remove_all(dir);
}

TEST(DensityKs, MarginalCdfShape) {
  MarginalOptions o = quick_marginals();
  o.draws = 20000;
  const auto t = tabulate_marginals(ChamberDensity::gue(2, 1.0), o);
  EXPECT_EQ(t.cdf(0, -100.0), 0.0);
  EXPECT_EQ(t.cdf(1, 100.0), 1.0);
  // The GUE law is symmetric: x1 and -x2 share a distribution.
  for (double v : {-1.5, -0.8, -0.2, 0.4}) EXPECT_NEAR(t.cdf(0, v), 1.0 - t.cdf(1, -v), 0.02);
}

TEST(DensityKs, Preconditions) {
  std::vector<ChamberPoint> s(499, ChamberPoint{{-1.0, 1.0}});
  EXPECT_THROW(density_vs_sample_ks(ChamberDensity::gue(2, 1.0), s), InvalidArgument);
}
