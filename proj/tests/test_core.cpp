#include "olrl/core.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace olrl;

TEST(Rng, DeterministicStreams) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
    Rng c(43);
    ASSERT_NE(Rng(42).next_u64(), c.next_u64());
}

TEST(Rng, UniformRange) {
    Rng r(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double v = r.uniform();
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, 1.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_LT(lo, 0.01);
    EXPECT_GT(hi, 0.99);
}

TEST(Rng, UniformIntCoversRange) {
    Rng r(11);
    std::set<int> seen;
    for (int i = 0; i < 1000; ++i) {
        int v = r.uniform_int(5);
        ASSERT_GE(v, 0);
        ASSERT_LT(v, 5);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 5u);
}

TEST(Rng, NormalMoments) {
    Rng r(3);
    double sum = 0.0, sumsq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double v = r.normal();
        sum += v;
        sumsq += v * v;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.02);
    EXPECT_NEAR(sumsq / n, 1.0, 0.03);
}

TEST(Rng, SplitIndependent) {
    Rng r(5);
    Rng s1 = r.split(1);
    Rng r2(5);
    r2.next_u64();
    Rng s2 = r2.split(2);
    EXPECT_NE(s1.next_u64(), s2.next_u64());
}

TEST(MixSeed, OrderSensitive) {
    EXPECT_NE(mix_seed({1, 2}), mix_seed({2, 1}));
    EXPECT_EQ(mix_seed({1, 2, 3}), mix_seed({1, 2, 3}));
}

TEST(PairIndex, Layout) {
    // k = 4: (0,1)(0,2)(0,3)(1,2)(1,3)(2,3)
    EXPECT_EQ(pair_index(0, 1, 4), 0);
    EXPECT_EQ(pair_index(0, 3, 4), 2);
    EXPECT_EQ(pair_index(1, 2, 4), 3);
    EXPECT_EQ(pair_index(2, 3, 4), 5);
    EXPECT_EQ(pair_index(3, 2, 4), 5);  // order-insensitive
    EXPECT_EQ(num_pairs(4), 6);
    int next = 0;
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) EXPECT_EQ(pair_index(i, j, 5), next++);
    EXPECT_EQ(next, num_pairs(5));
}

TEST(BitMask, SetTestCount) {
    BitMask m(10, 70);  // crosses a word boundary
    EXPECT_TRUE(m.empty());
    m.set(0, 0);
    m.set(69, 9);
    m.set(63, 4);
    m.set(64, 4);
    EXPECT_TRUE(m.test(0, 0));
    EXPECT_TRUE(m.test(69, 9));
    EXPECT_TRUE(m.test(63, 4));
    EXPECT_TRUE(m.test(64, 4));
    EXPECT_FALSE(m.test(1, 0));
    EXPECT_EQ(m.count(), 4);
    m.reset(0, 0);
    EXPECT_FALSE(m.test(0, 0));
    EXPECT_EQ(m.count(), 3);
}

TEST(BitMask, ShiftMatchesBruteForce) {
    Rng r(99);
    BitMask m(12, 100);
    for (int i = 0; i < 200; ++i) m.set(r.uniform_int(100), r.uniform_int(12));
    for (int dx : {-70, -64, -63, -5, -1, 0, 1, 5, 63, 64, 70}) {
        for (int dy : {-3, 0, 2}) {
            BitMask s = m.shifted(dx, dy);
            for (int y = 0; y < 12; ++y) {
                for (int x = 0; x < 100; ++x) {
                    int sx = x - dx, sy = y - dy;
                    bool want = sx >= 0 && sx < 100 && sy >= 0 && sy < 12 && m.test(sx, sy);
                    ASSERT_EQ(s.test(x, y), want) << "dx=" << dx << " dy=" << dy
                                                  << " x=" << x << " y=" << y;
                }
            }
        }
    }
}

TEST(BitMask, DilationIsChebyshevBall) {
    BitMask m(9, 9);
    m.set(4, 4);
    BitMask d = m.dilated(2);
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 9; ++x) {
            bool want = std::abs(x - 4) <= 2 && std::abs(y - 4) <= 2;
            ASSERT_EQ(d.test(x, y), want);
        }
    }
    EXPECT_EQ(d.count(), 25);
    // Clipped at borders.
    BitMask c(5, 5);
    c.set(0, 0);
    EXPECT_EQ(c.dilated(1).count(), 4);
}

TEST(BitMask, IntersectsAndUnion) {
    BitMask a(4, 4), b(4, 4);
    a.set(1, 1);
    b.set(2, 2);
    EXPECT_FALSE(a.intersects(b));
    b.set(1, 1);
    EXPECT_TRUE(a.intersects(b));
    BitMask u = a;
    u |= b;
    EXPECT_EQ(u.count(), 2);
}

TEST(BitMask, MedianLower) {
    BitMask m(8, 8);
    // x coords: 1,2,7 -> lower median 2; y coords: 0,3,5 -> 3
    m.set(1, 3);
    m.set(2, 0);
    m.set(7, 5);
    Vec2 med = m.median();
    EXPECT_EQ(med.x, 2.0);
    EXPECT_EQ(med.y, 3.0);
    // Even count takes the lower of the two middles.
    m.set(4, 6);  // x: 1,2,4,7 -> 2; y: 0,3,5,6 -> 3
    med = m.median();
    EXPECT_EQ(med.x, 2.0);
    EXPECT_EQ(med.y, 3.0);
}

TEST(BitMask, CentroidSimple) {
    BitMask m(8, 8);
    m.set(0, 0);
    m.set(2, 4);
    Vec2 c = m.centroid();
    EXPECT_DOUBLE_EQ(c.x, 1.0);
    EXPECT_DOUBLE_EQ(c.y, 2.0);
}

TEST(BitMask, RunsRoundTrip) {
    Rng r(123);
    BitMask m(16, 33);
    for (int i = 0; i < 120; ++i) m.set(r.uniform_int(33), r.uniform_int(16));
    auto rl = m.runs();
    BitMask back = BitMask::from_runs(16, 33, rl);
    EXPECT_TRUE(back == m);
    // Runs are maximal and ordered.
    for (size_t i = 1; i < rl.size(); ++i)
        EXPECT_GT(rl[i].first, rl[i - 1].first + rl[i - 1].second);
}

TEST(FmtExact, RoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 12345.678901234567, -0.0, 1e300, 103.3}) {
        std::string s = fmt_exact(v);
        EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
    }
}

TEST(Errors, Types) {
    EXPECT_THROW(throw ConfigError("x"), std::runtime_error);
    EXPECT_THROW(throw IoError("x"), std::runtime_error);
    EXPECT_THROW(pair_index(1, 1, 3), UsageError);
    Rng r(1);
    EXPECT_THROW(r.uniform_int(0), UsageError);
}
