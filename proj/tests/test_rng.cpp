#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hecop/rng.hpp"

using namespace hecop;

TEST(Philox, KnownAnswerVectors) {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  EXPECT_EQ(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}),
            (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::generate(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                 K{0xffffffffu, 0xffffffffu}),
            (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::generate(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                 K{0xa4093822u, 0x299f31d0u}),
            (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(GaussianStream, Deterministic) {
  GaussianStream a(42, RngDomain::kSde, 7), b(42, RngDomain::kSde, 7);
  std::vector<double> x(9), y(9);
  a.fill(3, x);
  b.fill(3, y);
  EXPECT_EQ(x, y);
  for (std::uint32_t i = 0; i < 9; ++i) EXPECT_EQ(x[i], a.normal(3, i));
}

TEST(GaussianStream, StreamsDomainsStepsDiffer) {
  const GaussianStream base(42, RngDomain::kSde, 0);
  EXPECT_NE(base.normal(0, 0), GaussianStream(42, RngDomain::kSde, 1).normal(0, 0));
  EXPECT_NE(base.normal(0, 0), GaussianStream(42, RngDomain::kSkew, 0).normal(0, 0));
  EXPECT_NE(base.normal(0, 0), GaussianStream(43, RngDomain::kSde, 0).normal(0, 0));
  EXPECT_NE(base.normal(0, 0), base.normal(1, 0));
  EXPECT_NE(base.normal(0, 0), base.normal(0, 1));
}

TEST(GaussianStream, Moments) {
  const GaussianStream g(2024, RngDomain::kTest, 0);
  const int n = 400000;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0, u1 = 0, cov = 0;
  double prev = g.normal(0, 0);
  for (int i = 1; i <= n; ++i) {
    const double z = g.normal(static_cast<std::uint32_t>(i / 64), static_cast<std::uint32_t>(i % 64));
    s1 += z;
    s2 += z * z;
    s3 += z * z * z;
    s4 += z * z * z * z;
    cov += z * prev;
    prev = z;
    const double u = g.uniform(static_cast<std::uint32_t>(i), 0);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    u1 += u;
  }
  // 5-sigma bands for each sample moment.
  const double sn = std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(s1 / n, 0.0, 5.0 / sn);
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0) / sn);
  EXPECT_NEAR(s3 / n, 0.0, 5.0 * std::sqrt(15.0) / sn);
  EXPECT_NEAR(s4 / n, 3.0, 5.0 * std::sqrt(96.0) / sn);
  EXPECT_NEAR(cov / n, 0.0, 5.0 / sn);
  EXPECT_NEAR(u1 / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0) / sn);
}
