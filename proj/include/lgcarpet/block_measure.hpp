#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lgcarpet/errors.hpp"
#include "lgcarpet/system.hpp"

namespace lgcarpet {

/// Above this many words a measure must be given by an explicit support list.
inline constexpr std::uint64_t dense_word_limit = 100'000;

inline constexpr double weight_sum_tolerance = 1e-12;

/// Per-word quantities for block length m, indexed by base-n word index.
struct WordTable {
    std::size_t m = 1;
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<double> log_inv_a;  ///< -sum log a over the word
    std::vector<double> log_inv_b;  ///< -sum log b over the word's rows
    std::vector<std::uint64_t> row_word;

    std::size_t size() const noexcept { return log_inv_a.size(); }
    std::uint64_t row_word_count() const noexcept {
        std::uint64_t out = 1;
        for (std::size_t i = 0; i < m; ++i) out *= p;
        return out;
    }

    static WordTable build(const LGSystem& sys, std::size_t m) {
        const std::size_t n = sys.digit_count();
        checked_power(n, m, dense_word_limit);
        WordTable t;
        t.m = m;
        t.n = n;
        t.p = sys.row_count();
        t.log_inv_a.assign(1, 0.0);
        t.log_inv_b.assign(1, 0.0);
        t.row_word.assign(1, 0);
        for (std::size_t level = 0; level < m; ++level) {
            const std::size_t prev = t.log_inv_a.size();
            std::vector<double> la(prev * n);
            std::vector<double> lb(prev * n);
            std::vector<std::uint64_t> rw(prev * n);
            for (std::size_t w = 0; w < prev; ++w) {
                for (std::size_t k = 0; k < n; ++k) {
                    la[w * n + k] = t.log_inv_a[w] + sys.log_inv_a(k);
                    lb[w * n + k] = t.log_inv_b[w] + sys.log_inv_b(k);
                    rw[w * n + k] = t.row_word[w] * t.p + sys.row_of(k);
                }
            }
            t.log_inv_a = std::move(la);
            t.log_inv_b = std::move(lb);
            t.row_word = std::move(rw);
        }
        return t;
    }
};

/// Bernoulli measure for the shift by m: i.i.d. blocks of length m drawn from
/// `weights` over D^m. Dense storage when |D|^m <= 1e5, support list otherwise.
/// The referenced system must outlive the measure.
class BlockMeasure {
public:
    using Entry = std::pair<std::uint64_t, double>;

    BlockMeasure(const LGSystem& sys, std::size_t m, std::vector<double> dense_weights)
        : sys_(&sys), m_(m), dense_(std::move(dense_weights)) {
        if (m == 0) throw InvalidInput("block length m must be >= 1");
        word_count_ = checked_power(sys.digit_count(), m, dense_word_limit);
        if (dense_.size() != word_count_) {
            throw InvalidInput("weight vector has " + std::to_string(dense_.size()) + " entries, expected " +
                               std::to_string(word_count_));
        }
        check_weights(dense_);
        is_dense_ = true;
    }

    BlockMeasure(const LGSystem& sys, std::size_t m, std::vector<Entry> support)
        : sys_(&sys), m_(m), support_(std::move(support)) {
        if (m == 0) throw InvalidInput("block length m must be >= 1");
        word_count_ = checked_power(sys.digit_count(), m, std::uint64_t{1} << 62U);
        std::sort(support_.begin(), support_.end());
        std::vector<double> w;
        w.reserve(support_.size());
        for (std::size_t i = 0; i < support_.size(); ++i) {
            if (support_[i].first >= word_count_) throw InvalidInput("support word index out of range");
            if (i > 0 && support_[i].first == support_[i - 1].first) throw InvalidInput("duplicate support word");
            w.push_back(support_[i].second);
        }
        check_weights(w);
        std::erase_if(support_, [](const Entry& e) { return e.second == 0.0; });
        is_dense_ = false;
    }

    static BlockMeasure uniform(const LGSystem& sys, std::size_t m = 1) {
        const auto K = static_cast<std::size_t>(checked_power(sys.digit_count(), m, dense_word_limit));
        return {sys, m, std::vector<double>(K, 1.0 / static_cast<double>(K))};
    }

    /// All mass on a single word (periodic orbit).
    static BlockMeasure point_mass(const LGSystem& sys, std::span<const std::size_t> word) {
        return {sys, word.size(), std::vector<Entry>{{encode_word(word, sys.digit_count()), 1.0}}};
    }

    /// nu^{(x)k}: blocks of length m*k made of k independent nu-blocks.
    static BlockMeasure product_lift(const BlockMeasure& base, std::size_t k) {
        if (k == 0) throw InvalidInput("product_lift: k must be >= 1");
        const LGSystem& sys = base.system();
        const std::uint64_t base_words = base.word_count();
        std::vector<Entry> cur{{0, 1.0}};
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<Entry> next;
            next.reserve(cur.size() * base.support_size());
            for (const auto& [w, q] : cur) {
                base.for_each([&](std::uint64_t v, double r) { next.emplace_back(w * base_words + v, q * r); });
            }
            cur = std::move(next);
        }
        const std::size_t mk = base.block_length() * k;
        const std::uint64_t limit = std::uint64_t{1} << 62U;
        const std::uint64_t words = checked_power(sys.digit_count(), mk, limit);
        if (words <= dense_word_limit) {
            std::vector<double> dense(static_cast<std::size_t>(words), 0.0);
            for (const auto& [w, q] : cur) dense[static_cast<std::size_t>(w)] = q;
            return {sys, mk, std::move(dense)};
        }
        return {sys, mk, std::move(cur)};
    }

    const LGSystem& system() const noexcept { return *sys_; }
    std::size_t block_length() const noexcept { return m_; }
    std::uint64_t word_count() const noexcept { return word_count_; }
    bool is_dense() const noexcept { return is_dense_; }

    std::size_t support_size() const noexcept {
        if (!is_dense_) return support_.size();
        return static_cast<std::size_t>(std::count_if(dense_.begin(), dense_.end(), [](double q) { return q > 0.0; }));
    }

    const std::vector<double>& dense_weights() const {
        if (!is_dense_) throw GuardExceeded("measure is stored sparsely");
        return dense_;
    }

    double weight(std::uint64_t word) const {
        if (is_dense_) return word < dense_.size() ? dense_[static_cast<std::size_t>(word)] : 0.0;
        const auto it = std::lower_bound(support_.begin(), support_.end(), Entry{word, -1.0});
        return (it != support_.end() && it->first == word) ? it->second : 0.0;
    }

    /// Visits every word with positive weight, in increasing word order.
    template <typename F>
    void for_each(F&& f) const {
        if (is_dense_) {
            for (std::size_t w = 0; w < dense_.size(); ++w) {
                if (dense_[w] > 0.0) f(static_cast<std::uint64_t>(w), dense_[w]);
            }
        } else {
            for (const auto& [w, q] : support_) f(w, q);
        }
    }

    /// Cumulative weights over the support (for inverse-CDF sampling).
    std::pair<std::vector<std::uint64_t>, std::vector<double>> cumulative() const {
        std::vector<std::uint64_t> words;
        std::vector<double> cum;
        double acc = 0.0;
        for_each([&](std::uint64_t w, double q) {
            acc += q;
            words.push_back(w);
            cum.push_back(acc);
        });
        return {std::move(words), std::move(cum)};
    }

private:
    static void check_weights(const std::vector<double>& w) {
        double total = 0.0;
        for (const double q : w) {
            if (!std::isfinite(q) || q < 0.0) throw InvalidInput("measure weights must be finite and >= 0");
            total += q;
        }
        if (std::abs(total - 1.0) > weight_sum_tolerance) {
            throw InvalidInput("measure weights sum to " + std::to_string(total) + ", not 1");
        }
    }

    const LGSystem* sys_;
    std::size_t m_;
    std::uint64_t word_count_ = 0;
    bool is_dense_ = true;
    std::vector<double> dense_;
    std::vector<Entry> support_;
};

}  // namespace lgcarpet
