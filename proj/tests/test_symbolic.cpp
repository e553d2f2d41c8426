#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace lgcarpet;
using namespace testutil;

namespace {

std::vector<std::size_t> repeat(std::vector<std::size_t> pattern, std::size_t N) {
    std::vector<std::size_t> out(N);
    for (std::size_t v = 0; v < N; ++v) out[v] = pattern[v % pattern.size()];
    return out;
}

// Minimal l with 2^n <= 3^l, by exact integer comparison.
std::size_t bm_cut_oracle(std::size_t n) {
    unsigned __int128 two = 1, three = 3;
    for (std::size_t v = 0; v < n; ++v) two *= 2;
    std::size_t l = 1;
    while (three < two) {
        three *= 3;
        ++l;
    }
    return l;
}

}  // namespace

TEST(CuttingIndex, FullSquareIsIdentity) {
    const LGSystem s = full_square();
    Pcg32 rng(3);
    const SymbolicOrbit orbit(s, random_word(rng, 4, 300));
    const auto cuts = cutting_indices(orbit, 300);
    for (std::size_t n = 1; n <= 300; ++n) EXPECT_EQ(cuts[n], n);
}

TEST(CuttingIndex, BedfordMcMullenMatchesIntegerOracle) {
    const LGSystem s = bedford_mcmullen();
    Pcg32 rng(4);
    const SymbolicOrbit orbit(s, random_word(rng, 3, 64));
    const auto cuts = cutting_indices(orbit, 64);
    for (std::size_t n = 1; n <= 64; ++n) {
        EXPECT_EQ(cuts[n], bm_cut_oracle(n)) << n;
        EXPECT_EQ(cuts[n], static_cast<std::size_t>(std::ceil(n * std::log(2.0) / std::log(3.0)))) << n;
        EXPECT_EQ(cutting_index(orbit, n), cuts[n]);
    }
}

TEST(CuttingIndex, BoundedByDepthAndNondecreasing) {
    const LGSystem g = general();
    Pcg32 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const SymbolicOrbit orbit(g, random_word(rng, g.digit_count(), 200));
        const auto cuts = cutting_indices(orbit, 200);
        for (std::size_t n = 1; n <= 200; ++n) {
            EXPECT_GE(cuts[n], 1u);
            EXPECT_LE(cuts[n], n);
            if (n > 1) {
                EXPECT_GE(cuts[n], cuts[n - 1]);
            }
        }
    }
}

TEST(CuttingIndex, ReportsDeficit) {
    const LGSystem s = full_square();
    const SymbolicOrbit orbit(s, {0, 1, 2});
    try {
        cutting_index(orbit, 10);
        FAIL() << "expected InsufficientPrefix";
    } catch (const InsufficientPrefix& e) {
        EXPECT_EQ(e.deficit(), 7u);
    }
    EXPECT_THROW(cutting_index(orbit, 0), InvalidInput);
}

TEST(ApproxSquare, RatioBoundOnRandomPairs) {
    const LGSystem g = general();
    const double log_amin = std::log(g.a_min());
    Pcg32 rng(6);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 1 + rng.next_u32() % 200;
        const SymbolicOrbit orbit(g, random_word(rng, g.digit_count(), n));
        const ApproxSquare sq = approx_square(orbit, n);
        ASSERT_GT(sq.log_ratio(), log_amin);
        ASSERT_LE(sq.log_ratio(), 1e-12);
    }
}

TEST(ApproxSquare, FullSquareDepthOneIsTheCell) {
    const LGSystem s = full_square();
    for (std::size_t k = 0; k < 4; ++k) {
        const ApproxSquare sq = approx_square(SymbolicOrbit(s, {k, 0, 3}), 1);
        ASSERT_TRUE(sq.rect);
        EXPECT_EQ(sq.cut, 1u);
        EXPECT_DOUBLE_EQ(sq.rect->x0, s.c(k));
        EXPECT_DOUBLE_EQ(sq.rect->y0, s.d(k));
        EXPECT_DOUBLE_EQ(sq.rect->width, 0.5);
        EXPECT_DOUBLE_EQ(sq.rect->height, 0.5);
    }
}

TEST(ApproxSquare, BedfordMcMullenCornerSquare) {
    const LGSystem s = bedford_mcmullen();
    const ApproxSquare sq = approx_square(SymbolicOrbit(s, repeat({0}, 5)), 2);
    EXPECT_EQ(sq.cut, 2u);
    ASSERT_TRUE(sq.rect);
    EXPECT_DOUBLE_EQ(sq.rect->x0, 0.0);
    EXPECT_DOUBLE_EQ(sq.rect->y0, 0.0);
    EXPECT_NEAR(sq.rect->width, 1.0 / 9, 1e-16);
    EXPECT_DOUBLE_EQ(sq.rect->height, 0.25);
    EXPECT_NEAR(std::exp(sq.log_width), 1.0 / 9, 1e-15);
    EXPECT_NEAR(std::exp(sq.log_height), 0.25, 1e-15);
}

TEST(ApproxSquare, DistinctSymbolicSquaresHaveDisjointInteriors) {
    const LGSystem g = general();
    Pcg32 rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + rng.next_u32() % 6;
        const SymbolicOrbit u(g, random_word(rng, g.digit_count(), n));
        const SymbolicOrbit v(g, random_word(rng, g.digit_count(), n));
        const ApproxSquare a = approx_square(u, n);
        const ApproxSquare b = approx_square(v, n);
        if (a.cut == b.cut && a.horizontal == b.horizontal && a.vertical == b.vertical) continue;
        EXPECT_FALSE(a.rect->interior_overlaps(*b.rect, 1e-15));
    }
}

TEST(ApproxSquare, ContainsTheProjectedPoint) {
    const LGSystem g = general();
    Pcg32 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t N = 120;
        const SymbolicOrbit orbit(g, random_word(rng, g.digit_count(), N));
        const ProjectedPoint pt = project_point(orbit);
        for (std::size_t n = 1; n <= N / 2; ++n) {
            const ApproxSquare sq = approx_square(orbit, n);
            ASSERT_TRUE(sq.rect);
            EXPECT_TRUE(sq.rect->contains(pt.x, pt.y, 1e-12)) << n;
        }
    }
}

TEST(ReturnGap, FourCycle) {
    const LGSystem s = full_square();
    const SymbolicOrbit orbit(s, repeat({0, 1, 2, 3}, 64));
    for (std::size_t n = 1; n <= 56; ++n) EXPECT_EQ(return_gap(orbit, n), 4u);
}

TEST(ReturnGap, ConstantOrbitNamesMissingDigit) {
    const LGSystem s = full_square();
    const SymbolicOrbit orbit(s, repeat({2}, 50));
    try {
        return_gap(orbit, 3);
        FAIL() << "expected NoRecurrence";
    } catch (const NoRecurrence& e) {
        EXPECT_EQ(e.digit().i, 1);
        EXPECT_EQ(e.digit().j, 1);
        EXPECT_NE(std::string(e.what()).find("never recurs"), std::string::npos);
    }
}

TEST(ReturnGap, SublinearForUniformSamples) {
    const LGSystem s = full_square();
    const std::size_t N = 100000;
    const SymbolicOrbit orbit = sample_orbit(BlockMeasure::uniform(s), N, 2024);
    EXPECT_LT(static_cast<double>(return_gap(orbit, N / 2)) / static_cast<double>(N / 2), 0.01);
}

TEST(Frequency, Examples) {
    const LGSystem s = full_square();
    const FrequencyVector constant = frequency(SymbolicOrbit(s, repeat({0}, 10)), 10);
    EXPECT_DOUBLE_EQ(constant.probability(0), 1.0);
    for (std::size_t k = 1; k < 4; ++k) EXPECT_DOUBLE_EQ(constant.probability(k), 0.0);

    const FrequencyVector cycle = frequency(SymbolicOrbit(s, repeat({0, 1, 2, 3}, 12)), 8);
    for (const double p : cycle.probabilities()) EXPECT_DOUBLE_EQ(p, 0.25);
    const auto rows = cycle.row_probabilities(s);
    EXPECT_DOUBLE_EQ(rows[0], 0.5);
    EXPECT_DOUBLE_EQ(rows[1], 0.5);

    EXPECT_THROW(frequency(SymbolicOrbit(s, {0, 1}), 3), InsufficientPrefix);
}

TEST(Frequency, SampledOrbitConverges) {
    const LGSystem s = bedford_mcmullen();
    const std::vector<double> p{0.5, 0.2, 0.3};
    const BlockMeasure nu(s, 1, p);
    const FrequencyVector f = frequency(sample_orbit(nu, 100000, 99), 100000);
    double total = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_LT(std::abs(f.probability(k) - p[k]), 0.01);
        total += f.probability(k);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(SampleOrbit, DegenerateMeasures) {
    const LGSystem s = full_square();
    const std::vector<std::size_t> digit{2};
    const SymbolicOrbit constant = sample_orbit(BlockMeasure::point_mass(s, digit), 40, 1);
    for (const std::size_t k : constant.word()) EXPECT_EQ(k, 2u);

    const std::vector<std::size_t> w{3, 1};
    const SymbolicOrbit periodic = sample_orbit(BlockMeasure::point_mass(s, w), 41, 1);
    EXPECT_EQ(periodic.size(), 41u);
    for (std::size_t v = 0; v < periodic.size(); ++v) EXPECT_EQ(periodic[v], w[v % 2]);
}

TEST(SampleOrbit, DeterministicPerSeed) {
    const LGSystem g = general();
    const BlockMeasure nu = BlockMeasure::uniform(g, 2);
    const SymbolicOrbit a = sample_orbit(nu, 5000, 77);
    const SymbolicOrbit b = sample_orbit(nu, 5000, 77);
    const SymbolicOrbit c = sample_orbit(nu, 5000, 78);
    EXPECT_TRUE(std::equal(a.word().begin(), a.word().end(), b.word().begin()));
    EXPECT_FALSE(std::equal(a.word().begin(), a.word().end(), c.word().begin()));
    EXPECT_EQ(a.seed(), std::optional<std::uint64_t>(77));
}

TEST(ProjectPoint, FixedPoints) {
    const LGSystem s = full_square();
    const std::size_t N = 70;
    const ProjectedPoint origin = project_point(SymbolicOrbit(s, repeat({0}, N)));
    EXPECT_NEAR(origin.x, 0.0, std::ldexp(1.0, -static_cast<int>(N)));
    EXPECT_NEAR(origin.y, 0.0, std::ldexp(1.0, -static_cast<int>(N)));
    EXPECT_TRUE(origin.resolved);

    // x = (x/2 + 1/2)/2 has the solution 1/3.
    const ProjectedPoint p = project_point(SymbolicOrbit(s, repeat({0, 3}, N)));
    EXPECT_NEAR(p.x, 1.0 / 3, std::ldexp(1.0, -static_cast<int>(N) + 1));
    EXPECT_NEAR(p.y, 1.0 / 3, std::ldexp(1.0, -static_cast<int>(N) + 1));
}

TEST(ProjectPoint, ErrorIsTheRectangleDiameter) {
    const LGSystem g = general();
    Pcg32 rng(9);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t N = 1 + rng.next_u32() % 40;
        const SymbolicOrbit orbit(g, random_word(rng, g.digit_count(), N));
        const ProjectedPoint pt = project_point(orbit);
        EXPECT_LE(pt.error, std::sqrt(2.0) * std::pow(g.b_max(), static_cast<double>(N)) * (1 + 1e-12));
        const Rect r = rectangle(g, orbit.word());
        EXPECT_TRUE(r.contains(pt.x, pt.y, 1e-15));
        EXPECT_FALSE(pt.resolved);
    }
}
