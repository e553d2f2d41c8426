#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgcarpet/block_measure.hpp"
#include "lgcarpet/errors.hpp"
#include "lgcarpet/rng.hpp"
#include "lgcarpet/system.hpp"

namespace lgcarpet {

/// Some digit does not occur again after the requested position.
class NoRecurrence : public std::out_of_range {
public:
    NoRecurrence(const std::string& what, Digit digit) : std::out_of_range(what), digit_(digit) {}
    Digit digit() const noexcept { return digit_; }

private:
    Digit digit_;
};

/// A finite prefix omega_1..omega_N of a point of the shift space. Positions
/// in the public API are 1-based like the symbolic notation; storage is 0-based.
class SymbolicOrbit {
public:
    SymbolicOrbit(const LGSystem& sys, std::vector<std::size_t> word, std::optional<std::uint64_t> seed = std::nullopt)
        : sys_(&sys), word_(std::move(word)), seed_(seed) {
        if (word_.empty()) throw InvalidInput("orbit must contain at least one symbol");
        for (const std::size_t k : word_) {
            if (k >= sys.digit_count()) throw InvalidInput("orbit digit index out of range: " + std::to_string(k));
        }
    }

    const LGSystem& system() const noexcept { return *sys_; }
    std::size_t size() const noexcept { return word_.size(); }
    std::span<const std::size_t> word() const noexcept { return word_; }
    std::size_t operator[](std::size_t pos0) const { return word_.at(pos0); }
    std::optional<std::uint64_t> seed() const noexcept { return seed_; }

    /// Row word i_1..i_n (0-based rows).
    std::vector<std::size_t> rows(std::size_t n) const {
        std::vector<std::size_t> out(n);
        for (std::size_t v = 0; v < n; ++v) out[v] = sys_->row_of(word_.at(v));
        return out;
    }

private:
    const LGSystem* sys_;
    std::vector<std::size_t> word_;
    std::optional<std::uint64_t> seed_;
};

namespace detail {

/// cum[l] = sum_{nu <= l} log x_nu, cum[0] = 0.
template <typename F>
std::vector<double> cumulative_logs(const SymbolicOrbit& orbit, std::size_t len, F&& log_of) {
    std::vector<double> cum(len + 1, 0.0);
    for (std::size_t v = 0; v < len; ++v) cum[v + 1] = cum[v] + log_of(orbit[v]);
    return cum;
}

inline bool log_le(double lhs, double rhs) noexcept {
    return lhs <= rhs + 1e-12 * std::max(1.0, std::abs(rhs));
}

}  // namespace detail

/// L_n for every n = 1..n_max in one pass (L_n is nondecreasing).
inline std::vector<std::size_t> cutting_indices(const SymbolicOrbit& orbit, std::size_t n_max) {
    if (n_max == 0) throw InvalidInput("cutting index depth must be >= 1");
    if (n_max > orbit.size()) throw InsufficientPrefix("orbit shorter than cutting depth", n_max - orbit.size());
    const LGSystem& sys = orbit.system();
    const auto la = detail::cumulative_logs(orbit, n_max, [&](std::size_t k) { return -sys.log_inv_a(k); });
    const auto lb = detail::cumulative_logs(orbit, n_max, [&](std::size_t k) { return -sys.log_inv_b(k); });
    std::vector<std::size_t> out(n_max + 1, 0);
    std::size_t l = 1;
    for (std::size_t n = 1; n <= n_max; ++n) {
        // a_ij <= b_i gives L_n <= n, so the search never leaves the prefix.
        while (l < n && !detail::log_le(la[l], lb[n])) ++l;
        out[n] = l;
    }
    return out;
}

/// Minimal l >= 1 with prod_{nu<=l} a_{omega_nu} <= prod_{nu<=n} b_{i_nu}.
inline std::size_t cutting_index(const SymbolicOrbit& orbit, std::size_t n) { return cutting_indices(orbit, n)[n]; }

/// The n-th approximate square: horizontal word omega_1..omega_{L_n} and
/// vertical row word i_{L_n+1}..i_n.
struct ApproxSquare {
    std::size_t n = 0;
    std::size_t cut = 0;                   ///< L_n
    std::vector<std::size_t> horizontal;   ///< digits omega_1..omega_{L_n}
    std::vector<std::size_t> vertical;     ///< rows i_{L_n+1}..i_n (0-based)
    double log_width = 0.0;
    double log_height = 0.0;
    std::optional<Rect> rect;              ///< present while coordinates are representable

    /// log(width/height); lies in (log a_min, 0].
    double log_ratio() const noexcept { return log_width - log_height; }
};

inline ApproxSquare approx_square(const SymbolicOrbit& orbit, std::size_t n) {
    const LGSystem& sys = orbit.system();
    ApproxSquare sq;
    sq.n = n;
    sq.cut = cutting_index(orbit, n);
    sq.horizontal.assign(orbit.word().begin(), orbit.word().begin() + static_cast<std::ptrdiff_t>(sq.cut));
    for (std::size_t v = sq.cut; v < n; ++v) sq.vertical.push_back(sys.row_of(orbit[v]));
    for (std::size_t v = 0; v < sq.cut; ++v) sq.log_width -= sys.log_inv_a(orbit[v]);
    for (std::size_t v = 0; v < n; ++v) sq.log_height -= sys.log_inv_b(orbit[v]);
    if (sq.log_width > std::log(1e-300)) {
        // f_{omega|L_n}([0,1]) x g_{i|n}([0,1])
        const AffinePair horiz = compose(sys, sq.horizontal);
        const AffinePair vert = compose(sys, orbit.word().first(n));
        sq.rect = Rect{horiz.c, vert.d, horiz.a, vert.b};
    }
    return sq;
}

/// R_n: how far past position n every digit has reappeared.
inline std::size_t return_gap(const SymbolicOrbit& orbit, std::size_t n) {
    const LGSystem& sys = orbit.system();
    const std::size_t D = sys.digit_count();
    std::vector<std::size_t> first(D, 0);
    std::size_t seen = 0;
    std::size_t gap = 0;
    for (std::size_t pos = n + 1; pos <= orbit.size() && seen < D; ++pos) {
        const std::size_t k = orbit[pos - 1];
        if (first[k] == 0) {
            first[k] = pos;
            ++seen;
            gap = pos - n;
        }
    }
    if (seen < D) {
        for (std::size_t k = 0; k < D; ++k) {
            if (first[k] == 0) {
                throw NoRecurrence("digit " + to_string(sys.digit(k)) + " never recurs in available prefix after position " +
                                       std::to_string(n),
                                   sys.digit(k));
            }
        }
    }
    return gap;
}

/// Digit counts N_ij(omega|n) and their normalization.
struct FrequencyVector {
    std::size_t n = 0;
    std::vector<std::size_t> counts;

    double probability(std::size_t k) const { return static_cast<double>(counts.at(k)) / static_cast<double>(n); }
    std::vector<double> probabilities() const {
        std::vector<double> out(counts.size());
        for (std::size_t k = 0; k < counts.size(); ++k) out[k] = probability(k);
        return out;
    }
    std::vector<double> row_probabilities(const LGSystem& sys) const {
        std::vector<double> out(sys.row_count(), 0.0);
        for (std::size_t k = 0; k < counts.size(); ++k) out[sys.row_of(k)] += probability(k);
        return out;
    }
};

inline FrequencyVector frequency(const SymbolicOrbit& orbit, std::size_t n) {
    if (n == 0) throw InvalidInput("frequency: n must be >= 1");
    if (n > orbit.size()) throw InsufficientPrefix("orbit shorter than frequency depth", n - orbit.size());
    FrequencyVector f;
    f.n = n;
    f.counts.assign(orbit.system().digit_count(), 0);
    for (std::size_t v = 0; v < n; ++v) ++f.counts[orbit[v]];
    return f;
}

/// i.i.d. blocks drawn from the block distribution, concatenated and cut to N.
inline SymbolicOrbit sample_orbit(const BlockMeasure& nu, std::size_t N, std::uint64_t seed) {
    if (N == 0) throw InvalidInput("sample_orbit: N must be >= 1");
    const LGSystem& sys = nu.system();
    const std::size_t n = sys.digit_count();
    const std::size_t m = nu.block_length();
    const auto [words, cum] = nu.cumulative();
    Pcg32 rng(seed);
    std::vector<std::size_t> out;
    out.reserve(N + m);
    std::vector<std::size_t> block(m);
    while (out.size() < N) {
        std::uint64_t w = words[sample_index(cum, rng.uniform())];
        for (std::size_t v = m; v-- > 0;) {
            block[v] = static_cast<std::size_t>(w % n);
            w /= n;
        }
        out.insert(out.end(), block.begin(), block.end());
    }
    out.resize(N);
    return {sys, std::move(out), seed};
}

/// Centre of S_word([0,1]^2) with the rectangle's diameter as error bound.
struct ProjectedPoint {
    double x = 0.0;
    double y = 0.0;
    double error = 0.0;      ///< diameter of the enclosing rectangle
    bool resolved = false;   ///< b_max^N < 2^-60
};

inline ProjectedPoint project_point(const SymbolicOrbit& orbit) {
    const LGSystem& sys = orbit.system();
    AffinePair acc{};
    // Beyond 2^-80 the rectangle is below double resolution of its corner.
    for (const std::size_t k : orbit.word()) {
        acc = acc.then_inner(sys.map(k));
        if (acc.b < 0x1p-80) break;
    }
    ProjectedPoint pt;
    pt.x = acc.c + 0.5 * acc.a;
    pt.y = acc.d + 0.5 * acc.b;
    pt.error = std::hypot(acc.a, acc.b);
    pt.resolved = static_cast<double>(orbit.size()) * std::log(sys.b_max()) < -60.0 * std::log(2.0);
    return pt;
}

}  // namespace lgcarpet
