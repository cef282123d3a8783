#include <gtest/gtest.h>

#include <cmath>

#include "distort/philox.hpp"

using distort::PathRng;
using distort::Philox4x32;

// Published Philox4x32-10 known-answer vectors
TEST(Philox, KnownAnswers) {
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32::apply({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(PathRng, StreamsAreReproducibleAndDistinct) {
  PathRng a(42, 7), b(42, 7), c(42, 8), d(42, 7, 1);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u32();
    EXPECT_EQ(x, b.next_u32());
    const auto y = c.next_u32(), z = d.next_u32();
    if (i == 0) {
      EXPECT_NE(x, y);
      EXPECT_NE(x, z);
    }
  }
}

TEST(PathRng, Moments) {
  const int n = 200000;
  double su = 0, sz = 0, sz2 = 0, sz4 = 0;
  double umin = 1, umax = 0;
  for (int path = 0; path < n / 10; ++path) {
    PathRng r(3, path);
    for (int k = 0; k < 10; ++k) {
      const double u = r.uniform();
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      su += u;
      const double z = r.normal();
      sz += z;
      sz2 += z * z;
      sz4 += z * z * z * z;
    }
  }
  EXPECT_GT(umin, 0.0);
  EXPECT_LT(umax, 1.0);
  EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sz / n, 0.0, 5 / std::sqrt(n));
  EXPECT_NEAR(sz2 / n, 1.0, 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(sz4 / n, 3.0, 5 * std::sqrt(96.0 / n));
}
