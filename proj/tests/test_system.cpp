#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_util.hpp"

using namespace lgcarpet;
using namespace testutil;

namespace {

std::string rejection(const SystemSpec& spec) {
    try {
        validate(spec);
    } catch (const InvalidInput& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Validate, FullSquareSaturatesEveryInequality) {
    const LGSystem s = full_square();
    EXPECT_EQ(s.digit_count(), 4u);
    EXPECT_EQ(s.row_count(), 2u);
    EXPECT_TRUE(interiors_disjoint(s));
    EXPECT_FALSE(s.has_disjoint_closure());
    EXPECT_TRUE(s.is_two_dimensional());
}

TEST(Validate, HorizontalRatioAboveVertical) {
    SystemSpec spec = full_square().spec();
    spec.rows[0].cols[0].a = 0.6;
    spec.rows[0].cols[1].c = 0.6;
    spec.rows[0].cols[1].a = 0.4;
    EXPECT_NE(rejection(spec).find("a_ij exceeds b_i"), std::string::npos) << rejection(spec);
}

TEST(Validate, BedfordMcMullenInstance) {
    const LGSystem s = bedford_mcmullen();
    EXPECT_EQ(s.digit_count(), 3u);
    EXPECT_NEAR(s.a_min(), 1.0 / 3, 1e-15);
    EXPECT_DOUBLE_EQ(s.b_max(), 0.5);
    // Hand check: row gap 1/2 >= 1/2, columns 1/3 apart with width 1/3, right edge 2/3 <= 1.
    EXPECT_TRUE(interiors_disjoint(s));
}

TEST(Validate, NamesTheViolatedInequality) {
    SystemSpec cols = full_square().spec();
    cols.rows[1].cols[1].c = 0.4;
    const auto msg = rejection(cols);
    EXPECT_NE(msg.find("column overlap in row 2"), std::string::npos) << msg;

    SystemSpec rows = full_square().spec();
    rows.rows[1].d = 0.45;
    EXPECT_NE(rejection(rows).find("row overlap"), std::string::npos) << rejection(rows);

    SystemSpec top = full_square().spec();
    top.rows[1].d = 0.55;
    EXPECT_FALSE(rejection(top).empty());

    EXPECT_NE(rejection(SystemSpec{}).find("empty digit set"), std::string::npos);
    SystemSpec empty_row{{{0.5, 0.0, {}}}};
    EXPECT_NE(rejection(empty_row).find("empty"), std::string::npos) << rejection(empty_row);
}

TEST(Validate, StrictBounds) {
    EXPECT_FALSE(rejection({{{1.0, 0.0, {{0.5, 0.0}}}}}).empty());
    EXPECT_FALSE(rejection({{{0.5, 0.0, {{0.0, 0.0}}}}}).empty());
    EXPECT_FALSE(rejection({{{0.5, 0.0, {{-0.1, 0.0}}}}}).empty());
    EXPECT_FALSE(rejection({{{0.5, -0.1, {{0.5, 0.0}}}}}).empty());
    EXPECT_FALSE(rejection({{{0.5, 0.0, {{0.5, std::nan("")}}}}}).empty());
}

TEST(Validate, SlackTowardAcceptance) {
    // a exceeds b by less than the 1e-12 slack: accepted.
    EXPECT_NO_THROW(validate({{{0.5, 0.0, {{0.5 + 1e-13, 0.0}}}}}));
    EXPECT_FALSE(rejection({{{0.5, 0.0, {{0.5 + 1e-9, 0.0}}}}}).empty());
    // Columns touching up to rounding: accepted.
    EXPECT_NO_THROW(validate({{{0.5, 0.0, {{0.1, 0.0}, {0.2, 0.1 - 1e-13}}}}}));
}

TEST(Validate, DisjointClosureQuery) {
    EXPECT_TRUE(general().has_disjoint_closure());
    EXPECT_FALSE(bedford_mcmullen().has_disjoint_closure());
}

TEST(Validate, TwoDimensionality) {
    EXPECT_FALSE(single_digit().is_two_dimensional());
    const LGSystem one_row = validate({{{0.5, 0.0, {{0.3, 0.0}, {0.3, 0.5}}}}});
    EXPECT_FALSE(one_row.is_two_dimensional());
    const LGSystem one_column = validate({{{0.5, 0.0, {{0.3, 0.0}}}, {0.5, 0.5, {{0.3, 0.2}}}}});
    EXPECT_FALSE(one_column.is_two_dimensional());
    EXPECT_TRUE(general().is_two_dimensional());
}

TEST(Iterate, LevelOneIsARelabeling) {
    for (const LGSystem& s : {full_square(), bedford_mcmullen(), general()}) {
        const IteratedSystem it = iterate(s, 1);
        ASSERT_EQ(it.system.digit_count(), s.digit_count());
        for (std::size_t k = 0; k < s.digit_count(); ++k) {
            const std::size_t src = static_cast<std::size_t>(it.word_of_digit[k]);
            EXPECT_EQ(it.system.a(k), s.a(src));
            EXPECT_EQ(it.system.b(k), s.b(src));
            EXPECT_EQ(it.system.c(k), s.c(src));
            EXPECT_EQ(it.system.d(k), s.d(src));
        }
    }
}

TEST(Iterate, FullSquareLevelTwoTiles) {
    const IteratedSystem it = iterate(full_square(), 2);
    EXPECT_EQ(it.system.digit_count(), 16u);
    EXPECT_EQ(it.system.row_count(), 4u);
    double area = 0.0;
    for (std::size_t k = 0; k < 16; ++k) {
        EXPECT_DOUBLE_EQ(it.system.a(k), 0.25);
        EXPECT_DOUBLE_EQ(it.system.b(k), 0.25);
        area += it.system.a(k) * it.system.b(k);
    }
    EXPECT_DOUBLE_EQ(area, 1.0);
    EXPECT_TRUE(interiors_disjoint(it.system));
}

TEST(Iterate, BedfordMcMullenLevelTwo) {
    const LGSystem s = bedford_mcmullen();
    const IteratedSystem it = iterate(s, 2);
    EXPECT_EQ(it.system.digit_count(), 9u);
    EXPECT_EQ(it.system.row_count(), 4u);
    for (std::size_t k = 0; k < 9; ++k) {
        EXPECT_NEAR(it.system.a(k), 1.0 / 9, 1e-16);
        EXPECT_DOUBLE_EQ(it.system.b(k), 0.25);
    }
    // Re-validate the enumerated compositions from scratch.
    EXPECT_NO_THROW(validate(it.system.spec()));
    // Independent enumeration of the nine compositions.
    std::vector<std::pair<double, double>> origins;
    for (std::size_t u = 0; u < 3; ++u) {
        for (std::size_t v = 0; v < 3; ++v) {
            const double x = s.c(u) + s.a(u) * s.c(v);
            const double y = s.d(u) + s.b(u) * s.d(v);
            origins.emplace_back(x, y);
        }
    }
    for (std::size_t k = 0; k < 9; ++k) {
        const auto [x, y] = origins[static_cast<std::size_t>(it.word_of_digit[k])];
        EXPECT_NEAR(it.system.c(k), x, 1e-15);
        EXPECT_NEAR(it.system.d(k), y, 1e-15);
    }
}

TEST(Iterate, Guards) {
    EXPECT_THROW(iterate(full_square(), 0), InvalidInput);
    EXPECT_THROW(iterate(full_square(), 12), GuardExceeded);  // 4^12 > 1e7
}

TEST(Iterate, CountsAndRowWords) {
    const LGSystem g = general();
    for (std::size_t k = 1; k <= 3; ++k) {
        const IteratedSystem it = iterate(g, k);
        EXPECT_EQ(it.system.digit_count(), static_cast<std::size_t>(std::pow(6.0, static_cast<double>(k))));
        EXPECT_EQ(it.system.row_count(), static_cast<std::size_t>(std::pow(3.0, static_cast<double>(k))));
        EXPECT_TRUE(interiors_disjoint(it.system));
    }
}

TEST(Iterate, RectanglesAreBitIdentical) {
    const LGSystem g = general();
    const IteratedSystem it = iterate(g, 3);
    for (std::size_t k = 0; k < it.system.digit_count(); ++k) {
        const auto word = decode_word(it.word_of_digit[k], g.digit_count(), 3);
        const Rect r = rectangle(g, word);
        EXPECT_EQ(r.width, it.system.a(k));
        EXPECT_EQ(r.height, it.system.b(k));
        EXPECT_EQ(r.x0, it.system.c(k));
        EXPECT_EQ(r.y0, it.system.d(k));
    }
}

TEST(Rectangle, Examples) {
    const LGSystem s = full_square();
    const std::vector<std::size_t> first{0};
    const Rect r1 = rectangle(s, first);
    EXPECT_EQ(r1.x0, 0.0);
    EXPECT_EQ(r1.y0, 0.0);
    EXPECT_EQ(r1.width, 0.5);
    EXPECT_EQ(r1.height, 0.5);

    const std::vector<std::size_t> w{s.index_of({1, 1}), s.index_of({2, 2})};
    const Rect r2 = rectangle(s, w);
    EXPECT_DOUBLE_EQ(r2.x0, 0.25);
    EXPECT_DOUBLE_EQ(r2.y0, 0.25);
    EXPECT_DOUBLE_EQ(r2.width, 0.25);
    EXPECT_DOUBLE_EQ(r2.height, 0.25);

    EXPECT_THROW(rectangle(s, std::vector<std::size_t>{}), InvalidInput);
    EXPECT_THROW(rectangle(s, std::vector<std::size_t>{7}), InvalidInput);
    EXPECT_THROW(s.index_of({3, 1}), InvalidInput);
}

TEST(Rectangle, WidthBoundedByVerticalContraction) {
    const LGSystem g = general();
    Pcg32 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.next_u32() % 30;
        const Rect r = rectangle(g, random_word(rng, g.digit_count(), n));
        EXPECT_LE(r.width, std::pow(g.b_max(), static_cast<double>(n)) * (1 + 1e-12));
        EXPECT_LE(r.width, r.height * (1 + 1e-12));
    }
}

TEST(Rectangle, Nesting) {
    const LGSystem g = general();
    Pcg32 rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        auto w1 = random_word(rng, g.digit_count(), 1 + rng.next_u32() % 8);
        const auto w2 = random_word(rng, g.digit_count(), 1 + rng.next_u32() % 8);
        const Rect outer = rectangle(g, w1);
        w1.insert(w1.end(), w2.begin(), w2.end());
        EXPECT_TRUE(outer.contains(rectangle(g, w1)));
    }
}

TEST(Rectangle, ShippedSystemsHaveDisjointInteriors) {
    for (const char* name : {"systems/full_square.json", "systems/bedford_mcmullen.json", "systems/general.json"}) {
        const LGSystem s = io::load_system(data_path(name));
        for (std::size_t u = 0; u < s.digit_count(); ++u) {
            for (std::size_t v = u + 1; v < s.digit_count(); ++v) {
                EXPECT_FALSE(s.cell(u).interior_overlaps(s.cell(v))) << name << " " << u << " " << v;
            }
        }
    }
}

TEST(SystemHash, StableAndSensitive) {
    EXPECT_EQ(system_hash(full_square()), system_hash(full_square()));
    EXPECT_NE(system_hash(full_square()), system_hash(bedford_mcmullen()));
    EXPECT_EQ(system_hash(io::load_system(data_path("systems/full_square.json"))), system_hash(full_square()));
}

TEST(RestrictDigits, DropsEmptyRows) {
    const LGSystem s = full_square();
    const std::vector<std::size_t> keep{1, 2, 3};
    const LGSystem r = restrict_digits(s, keep);
    EXPECT_EQ(r.digit_count(), 3u);
    EXPECT_EQ(r.row_count(), 2u);
    const std::vector<std::size_t> top{2, 3};
    EXPECT_EQ(restrict_digits(s, top).row_count(), 1u);
}
