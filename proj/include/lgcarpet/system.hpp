#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lgcarpet/errors.hpp"

namespace lgcarpet {

/// Slack applied toward acceptance in every validation inequality.
inline constexpr double validation_slack = 1e-12;

/// Enumeration ceiling shared by iterate, var_avg, alpha_bounds and friends.
inline constexpr std::uint64_t enumeration_guard = 10'000'000;

/// A map label (row i, column-in-row j), both 1-based.
struct Digit {
    int i = 1;
    int j = 1;

    friend bool operator==(const Digit&, const Digit&) = default;
    friend auto operator<=>(const Digit&, const Digit&) = default;
};

inline std::string to_string(const Digit& d) {
    return "(" + std::to_string(d.i) + "," + std::to_string(d.j) + ")";
}

/// x -> a*x + c horizontally, y -> b*y + d vertically.
struct AffinePair {
    double a = 1.0;
    double c = 0.0;
    double b = 1.0;
    double d = 0.0;

    /// (*this) o inner.
    constexpr AffinePair then_inner(const AffinePair& inner) const noexcept {
        return {a * inner.a, a * inner.c + c, b * inner.b, b * inner.d + d};
    }
};

/// Axis-aligned rectangle [x0, x0+width] x [y0, y0+height].
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double width = 0.0;
    double height = 0.0;

    double x1() const noexcept { return x0 + width; }
    double y1() const noexcept { return y0 + height; }

    bool contains(const Rect& inner, double tol = 1e-12) const noexcept {
        return inner.x0 >= x0 - tol && inner.x1() <= x1() + tol && inner.y0 >= y0 - tol &&
               inner.y1() <= y1() + tol;
    }
    bool contains(double x, double y, double tol = 0.0) const noexcept {
        return x >= x0 - tol && x <= x1() + tol && y >= y0 - tol && y <= y1() + tol;
    }
    /// Interiors intersect with positive area (beyond `tol` in each axis).
    bool interior_overlaps(const Rect& o, double tol = validation_slack) const noexcept {
        const double ox = std::min(x1(), o.x1()) - std::max(x0, o.x0);
        const double oy = std::min(y1(), o.y1()) - std::max(y0, o.y0);
        return ox > tol && oy > tol;
    }
};

struct ColumnSpec {
    double a = 0.0;
    double c = 0.0;
};

struct RowSpec {
    double b = 0.0;
    double d = 0.0;
    std::vector<ColumnSpec> cols;
};

/// Raw, unvalidated system description (what the JSON file holds).
struct SystemSpec {
    std::vector<RowSpec> rows;
};

class LGSystem;
LGSystem validate(SystemSpec spec);

/// A validated Lalley-Gatzouras system. Digits are numbered 0..n-1 in
/// row-major order; that flat index is what words and measures use.
class LGSystem {
public:
    std::size_t digit_count() const noexcept { return digit_row_.size(); }
    std::size_t row_count() const noexcept { return spec_.rows.size(); }
    const SystemSpec& spec() const noexcept { return spec_; }

    std::size_t row_of(std::size_t k) const { return digit_row_.at(k); }
    std::size_t row_size(std::size_t row) const { return spec_.rows.at(row).cols.size(); }
    Digit digit(std::size_t k) const {
        return {static_cast<int>(digit_row_.at(k)) + 1, static_cast<int>(digit_col_.at(k)) + 1};
    }
    std::size_t index_of(const Digit& dg) const {
        if (dg.i < 1 || static_cast<std::size_t>(dg.i) > row_count() || dg.j < 1 ||
            static_cast<std::size_t>(dg.j) > row_size(static_cast<std::size_t>(dg.i - 1))) {
            throw InvalidInput("invalid digit " + to_string(dg));
        }
        return row_start_[static_cast<std::size_t>(dg.i - 1)] + static_cast<std::size_t>(dg.j - 1);
    }
    std::size_t row_start(std::size_t row) const { return row_start_.at(row); }

    double a(std::size_t k) const { return spec_.rows[digit_row_.at(k)].cols[digit_col_[k]].a; }
    double c(std::size_t k) const { return spec_.rows[digit_row_.at(k)].cols[digit_col_[k]].c; }
    double b(std::size_t k) const { return spec_.rows[digit_row_.at(k)].b; }
    double d(std::size_t k) const { return spec_.rows[digit_row_.at(k)].d; }
    double row_b(std::size_t row) const { return spec_.rows.at(row).b; }
    double row_d(std::size_t row) const { return spec_.rows.at(row).d; }

    /// -log a and -log b per digit (positive).
    double log_inv_a(std::size_t k) const { return log_inv_a_.at(k); }
    double log_inv_b(std::size_t k) const { return log_inv_b_[digit_row_.at(k)]; }
    double row_log_inv_b(std::size_t row) const { return log_inv_b_.at(row); }

    AffinePair map(std::size_t k) const { return {a(k), c(k), b(k), d(k)}; }
    Rect cell(std::size_t k) const { return {c(k), d(k), a(k), b(k)}; }

    double a_min() const noexcept { return a_min_; }
    double b_max() const noexcept { return b_max_; }

    /// Some row has two columns and there are at least two rows.
    bool is_two_dimensional() const noexcept {
        const bool wide_row = std::any_of(spec_.rows.begin(), spec_.rows.end(),
                                          [](const RowSpec& r) { return r.cols.size() >= 2; });
        return wide_row && row_count() >= 2;
    }

    /// True when the closed rectangles are pairwise disjoint (needed for the
    /// associated expanding map); touching rectangles give false.
    bool has_disjoint_closure() const {
        for (std::size_t r = 0; r + 1 < row_count(); ++r) {
            if (!(row_d(r + 1) - row_d(r) > row_b(r))) return false;
        }
        for (const auto& row : spec_.rows) {
            for (std::size_t j = 0; j + 1 < row.cols.size(); ++j) {
                if (!(row.cols[j + 1].c - row.cols[j].c > row.cols[j].a)) return false;
            }
        }
        return true;
    }

private:
    friend LGSystem validate(SystemSpec spec);

    explicit LGSystem(SystemSpec spec) : spec_(std::move(spec)) {
        a_min_ = std::numeric_limits<double>::infinity();
        b_max_ = 0.0;
        for (std::size_t r = 0; r < spec_.rows.size(); ++r) {
            row_start_.push_back(digit_row_.size());
            log_inv_b_.push_back(-std::log(spec_.rows[r].b));
            b_max_ = std::max(b_max_, spec_.rows[r].b);
            for (std::size_t j = 0; j < spec_.rows[r].cols.size(); ++j) {
                digit_row_.push_back(r);
                digit_col_.push_back(j);
                log_inv_a_.push_back(-std::log(spec_.rows[r].cols[j].a));
                a_min_ = std::min(a_min_, spec_.rows[r].cols[j].a);
            }
        }
    }

    SystemSpec spec_;
    std::vector<std::size_t> digit_row_;
    std::vector<std::size_t> digit_col_;
    std::vector<std::size_t> row_start_;
    std::vector<double> log_inv_a_;
    std::vector<double> log_inv_b_;
    double a_min_ = 0.0;
    double b_max_ = 0.0;
};

namespace detail {

inline std::string row_label(std::size_t r) { return std::to_string(r + 1); }

[[noreturn]] inline void reject(const std::string& msg) { throw InvalidInput(msg); }

}  // namespace detail

/// Checks every defining inequality and returns the validated system.
/// The first violated inequality is reported by name.
inline LGSystem validate(SystemSpec spec) {
    using detail::reject;
    using detail::row_label;
    constexpr double eps = validation_slack;

    if (spec.rows.empty()) reject("empty digit set: no rows");
    for (std::size_t r = 0; r < spec.rows.size(); ++r) {
        const RowSpec& row = spec.rows[r];
        const std::string ri = row_label(r);
        if (row.cols.empty()) reject("empty digit set: row " + ri + " has no columns");
        if (!std::isfinite(row.b) || !std::isfinite(row.d)) reject("non-finite b_i or d_i in row " + ri);
        if (!(row.b > 0.0)) reject("b_i must be positive (row " + ri + ")");
        if (!(row.b < 1.0)) reject("b_i must be < 1 (row " + ri + ")");
        if (row.d < -eps || !(row.d < 1.0)) reject("d_i outside [0,1) (row " + ri + ")");
        for (std::size_t j = 0; j < row.cols.size(); ++j) {
            const ColumnSpec& col = row.cols[j];
            const std::string at = "(row " + ri + ", column " + std::to_string(j + 1) + ")";
            if (!std::isfinite(col.a) || !std::isfinite(col.c)) reject("non-finite a_ij or c_ij " + at);
            if (!(col.a > 0.0)) reject("a_ij must be positive " + at);
            if (col.a > row.b + eps) reject("a_ij exceeds b_i " + at);
            if (col.c < -eps || !(col.c < 1.0)) reject("c_ij outside [0,1) " + at);
        }
    }
    for (std::size_t r = 0; r + 1 < spec.rows.size(); ++r) {
        const RowSpec& lo = spec.rows[r];
        const RowSpec& hi = spec.rows[r + 1];
        if (hi.d < lo.d) reject("rows out of order: d_{i+1} < d_i (rows " + row_label(r) + ", " + row_label(r + 1) + ")");
        if (hi.d - lo.d < lo.b - eps) {
            reject("row overlap: d_{i+1} - d_i < b_i (rows " + row_label(r) + ", " + row_label(r + 1) + ")");
        }
    }
    const RowSpec& top = spec.rows.back();
    if (top.b + top.d > 1.0 + eps) reject("top row leaves the unit square: b_p + d_p > 1");
    for (std::size_t r = 0; r < spec.rows.size(); ++r) {
        const auto& cols = spec.rows[r].cols;
        for (std::size_t j = 0; j + 1 < cols.size(); ++j) {
            if (cols[j + 1].c < cols[j].c) {
                reject("columns out of order in row " + row_label(r) + ": c_{i(j+1)} < c_{ij} (column " +
                       std::to_string(j + 1) + ")");
            }
            if (cols[j + 1].c - cols[j].c < cols[j].a - eps) {
                reject("column overlap in row " + row_label(r) + ": c_{i(j+1)} - c_{ij} < a_{ij} (column " +
                       std::to_string(j + 1) + ")");
            }
        }
        if (cols.back().a + cols.back().c > 1.0 + eps) {
            reject("last column of row " + row_label(r) + " leaves the unit square: a_{im_i} + c_{im_i} > 1");
        }
    }
    return LGSystem(std::move(spec));
}

/// Exhaustive O(n^2) check that the cells have pairwise disjoint interiors.
inline bool interiors_disjoint(const LGSystem& sys) {
    for (std::size_t u = 0; u < sys.digit_count(); ++u) {
        for (std::size_t v = u + 1; v < sys.digit_count(); ++v) {
            if (sys.cell(u).interior_overlaps(sys.cell(v))) return false;
        }
    }
    return true;
}

/// Composition S_w1 o S_w2 o ... folded left to right.
inline AffinePair compose(const LGSystem& sys, std::span<const std::size_t> word) {
    AffinePair acc{};
    for (const std::size_t k : word) {
        if (k >= sys.digit_count()) throw InvalidInput("invalid digit index " + std::to_string(k));
        acc = acc.then_inner(sys.map(k));
    }
    return acc;
}

/// S_word([0,1]^2).
inline Rect rectangle(const LGSystem& sys, std::span<const std::size_t> word) {
    if (word.empty()) throw InvalidInput("rectangle of an empty word");
    if (static_cast<double>(word.size()) * std::log(sys.b_max()) < std::log(1e-300)) {
        throw GuardExceeded("word too long for linear-space rectangle coordinates");
    }
    const AffinePair s = compose(sys, word);
    return {s.c, s.d, s.a, s.b};
}

/// |D|^k with an overflow-safe guard.
inline std::uint64_t checked_power(std::uint64_t base, std::size_t k, std::uint64_t limit = enumeration_guard) {
    std::uint64_t out = 1;
    for (std::size_t i = 0; i < k; ++i) {
        if (base != 0 && out > limit / base) {
            throw GuardExceeded(std::to_string(base) + "^" + std::to_string(k) + " exceeds enumeration guard " +
                                std::to_string(limit));
        }
        out *= base;
    }
    return out;
}

/// Splits a base-n word index into its k digits (most significant first).
inline std::vector<std::size_t> decode_word(std::uint64_t index, std::size_t n, std::size_t k) {
    std::vector<std::size_t> out(k);
    for (std::size_t v = k; v-- > 0;) {
        out[v] = static_cast<std::size_t>(index % n);
        index /= n;
    }
    return out;
}

inline std::uint64_t encode_word(std::span<const std::size_t> word, std::size_t n) {
    std::uint64_t out = 0;
    for (const std::size_t k : word) out = out * n + k;
    return out;
}

/// The k-th level system: one digit per length-k word, plus the map from its
/// flat digit order back to the base-n word index.
struct IteratedSystem {
    LGSystem system;
    std::vector<std::uint64_t> word_of_digit;
    std::size_t level = 1;
};

inline IteratedSystem iterate(const LGSystem& sys, std::size_t k) {
    if (k == 0) throw InvalidInput("iterate: block length k must be >= 1");
    const std::size_t n = sys.digit_count();
    const std::size_t p = sys.row_count();
    checked_power(n, k);
    const std::uint64_t row_words = checked_power(p, k);

    SystemSpec out;
    std::vector<std::uint64_t> word_of_digit;
    word_of_digit.reserve(static_cast<std::size_t>(checked_power(n, k)));
    out.rows.reserve(static_cast<std::size_t>(row_words));

    std::vector<std::size_t> word(k);
    for (std::uint64_t rw = 0; rw < row_words; ++rw) {
        const std::vector<std::size_t> rows = decode_word(rw, p, k);
        // Odometer over the column choices, last position fastest (lexicographic).
        std::vector<std::size_t> col(k, 0);
        RowSpec row;
        bool done = false;
        while (!done) {
            for (std::size_t v = 0; v < k; ++v) word[v] = sys.row_start(rows[v]) + col[v];
            const AffinePair s = compose(sys, word);
            if (row.cols.empty()) {
                row.b = s.b;
                row.d = s.d;
            }
            row.cols.push_back({s.a, s.c});
            word_of_digit.push_back(encode_word(word, n));
            std::size_t v = k;
            for (;;) {
                if (v == 0) {
                    done = true;
                    break;
                }
                --v;
                if (++col[v] < sys.row_size(rows[v])) break;
                col[v] = 0;
            }
        }
        out.rows.push_back(std::move(row));
    }
    return {validate(std::move(out)), std::move(word_of_digit), k};
}

/// Stable 64-bit FNV-1a over a canonical text rendering; used in output headers.
inline std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char ch : text) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xfU];
        v >>= 4U;
    }
    return s;
}

inline std::string system_hash(const LGSystem& sys) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& row : sys.spec().rows) {
        os << "r" << row.b << ":" << row.d;
        for (const auto& col : row.cols) os << "c" << col.a << ":" << col.c;
        os << ";";
    }
    return hex64(fnv1a(os.str()));
}

}  // namespace lgcarpet
