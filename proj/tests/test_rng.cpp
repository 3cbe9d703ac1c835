#include <gtest/gtest.h>

#include <cmath>

#include "crband/rng.hpp"

using namespace crband;

TEST(Rng, SameKeySameSequence)
{
    Stream a{StreamKey(42).with("wb").with(3)};
    Stream b{StreamKey(42).with("wb").with(3)};
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, RolesAndIndicesSeparateStreams)
{
    const auto base = StreamKey(42);
    EXPECT_NE(base.with("wb").with(1).value(), base.with("pi").with(1).value());
    EXPECT_NE(base.with("wb").with(1).value(), base.with("wb").with(2).value());
    EXPECT_NE(StreamKey(1).with("wb").value(), StreamKey(2).with("wb").value());
}

TEST(Rng, UniformInOpenInterval)
{
    Stream s{StreamKey(5)};
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, IndexWithinRange)
{
    Stream s{StreamKey(9)};
    for (int i = 0; i < 1000; ++i) EXPECT_LT(s.index(7), 7u);
}
