#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lgcarpet/block_measure.hpp"
#include "lgcarpet/errors.hpp"
#include "lgcarpet/measures.hpp"
#include "lgcarpet/parallel.hpp"
#include "lgcarpet/rng.hpp"
#include "lgcarpet/spectrum.hpp"
#include "lgcarpet/symbolic.hpp"
#include "lgcarpet/system.hpp"

namespace lgcarpet {

// ---------------------------------------------------------------------------
// Dense lattice search

inline constexpr std::uint64_t grid_evaluation_guard = 1'000'000'000ULL;

struct GridResult {
    bool found = false;
    double value = -std::numeric_limits<double>::infinity();
    std::vector<double> argmax;
    std::uint64_t evaluated = 0;  ///< lattice points visited
    std::uint64_t admitted = 0;   ///< points inside the constraint slab
};

/// Number of lattice points {k in N^K : sum k = N}, saturating at guard+1.
inline std::uint64_t lattice_size(std::uint64_t N, std::size_t K) {
    // C(N+K-1, K-1), computed incrementally (each prefix is an integer).
    std::uint64_t c = 1;
    for (std::size_t i = 1; i < K; ++i) {
        const unsigned __int128 next = static_cast<unsigned __int128>(c) * (N + i) / i;
        if (next > grid_evaluation_guard) return grid_evaluation_guard + 1;
        c = static_cast<std::uint64_t>(next);
    }
    return c;
}

/// Exhaustive maximum of the dimension functional over level-m weight
/// vectors whose coordinates are multiples of `step`. With a potential and
/// alpha, only points with |integral - alpha| <= step are admitted.
inline GridResult grid_search_dly(const LGSystem& sys, std::size_t m, double step, const Potential* pot = nullptr,
                                  std::optional<double> alpha = std::nullopt) {
    if (!(step > 0.0) || step > 1.0) throw InvalidInput("grid step must lie in (0, 1]");
    if ((pot == nullptr) != !alpha.has_value()) throw InvalidInput("grid search needs both a potential and alpha, or neither");
    const std::size_t K = static_cast<std::size_t>(checked_power(sys.digit_count(), m));
    if (K > 4) throw GuardExceeded("grid search supports at most 4 words (simplex dimension 3)");
    const auto N = static_cast<std::uint64_t>(std::llround(1.0 / step));
    if (lattice_size(N, K) > grid_evaluation_guard) throw GuardExceeded("grid search would exceed 1e9 evaluations");

    const LyObjective obj(WordTable::build(sys, m));
    std::optional<AveragedPotential> con;
    if (pot != nullptr) con.emplace(*pot, m);

    GridResult out;
    std::vector<std::uint64_t> k(K, 0);
    std::vector<double> q(K);
    const double inv = 1.0 / static_cast<double>(N);
    auto visit = [&] {
        ++out.evaluated;
        for (std::size_t i = 0; i < K; ++i) q[i] = static_cast<double>(k[i]) * inv;
        if (con && std::abs(con->value(q) - *alpha) > step) return;
        ++out.admitted;
        const double v = obj.value(q);
        if (v > out.value) {
            out.value = v;
            out.argmax = q;
            out.found = true;
        }
    };
    auto recurse = [&](auto&& self, std::size_t pos, std::uint64_t left) -> void {
        if (pos + 1 == K) {
            k[pos] = left;
            visit();
            return;
        }
        for (std::uint64_t x = 0; x <= left; ++x) {
            k[pos] = x;
            self(self, pos + 1, left - x);
        }
    };
    recurse(recurse, 0, N);
    return out;
}

// ---------------------------------------------------------------------------
// Box counting

enum class BoxSampler {
    stratified,  ///< leading digits decoded from stratified uniforms
    iid,         ///< plain i.i.d. orbits
};

struct BoxCountReport {
    std::vector<int> exponents;              ///< j, box side 2^-j
    std::vector<double> scales;              ///< 2^-j
    std::vector<std::uint64_t> counts;       ///< occupied boxes per scale
    double slope = 0.0;                      ///< least-squares slope of log2 count vs j
    double intercept = 0.0;
    double residual = 0.0;                   ///< RMS residual of that fit
    std::size_t points_used = 0;
    std::size_t depth = 0;
    double measure_dimension = 0.0;          ///< dimension value of the sampling measure
};

struct BoxCountOptions {
    std::size_t samples = 100'000;
    std::size_t depth = 64;
    int j_min = 3;
    int j_max = 8;
    std::uint64_t seed = 1;
    BoxSampler sampler = BoxSampler::stratified;
    std::size_t threads = 1;
};

namespace detail {

/// (slope, intercept, rms residual) of y against x.
inline std::array<double, 3> least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    const double icpt = my - slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (icpt + slope * x[i]);
        ss += e * e;
    }
    return {slope, icpt, std::sqrt(ss / n)};
}

}  // namespace detail

/// Monte-Carlo box count of the attractor, sampling points from the
/// dimension-maximizing Bernoulli measure (or the supplied one).
///
/// The stratified sampler splits [0,1) into `samples` equal strata, draws one
/// uniform in each and decodes it arithmetically into leading digits while
/// the cylinder is wider than 1e-10; remaining digits are i.i.d. Empirical
/// cylinder frequencies stay within one point of their expectation.
inline BoxCountReport box_count(const LGSystem& sys, const BoxCountOptions& o,
                                const std::optional<BlockMeasure>& measure = std::nullopt) {
    if (o.samples < 10'000) throw InvalidInput("box_count needs at least 1e4 samples");
    if (o.j_min < 0 || o.j_max < o.j_min || o.j_max > 30) throw InvalidInput("box_count scale range must satisfy 0 <= j_min <= j_max <= 30");
    if (o.j_max - o.j_min < 1) throw InvalidInput("box_count needs at least two scales");
    // Require point error b_max^depth three decades below the finest box.
    const double log_err = static_cast<double>(o.depth) * std::log(sys.b_max());
    if (log_err > -static_cast<double>(o.j_max) * std::log(2.0) - std::log(1e3)) {
        throw InvalidInput("resolution violation: b_max^depth is not small against 2^-j_max; increase depth");
    }

    BoxCountReport rep;
    rep.depth = o.depth;
    rep.points_used = o.samples;
    std::vector<double> p;
    if (measure) {
        if (measure->block_length() != 1) throw InvalidInput("box_count samples Bernoulli (block length 1) measures");
        p.resize(sys.digit_count());
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = measure->weight(k);
        rep.measure_dimension = thermo(*measure).dly;
    } else {
        const DimensionResult dim = carpet_dimension(sys);
        p = dim.argmax;
        rep.measure_dimension = dim.value;
    }
    std::vector<double> cum(p.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) cum[k] = (acc += p[k]);

    std::vector<double> xs(o.samples), ys(o.samples);
    const std::size_t chunk = 4096;
    const std::size_t chunks = (o.samples + chunk - 1) / chunk;
    parallel_for(chunks, o.threads, [&](std::size_t c) {
        Pcg32 rng(derive_seed(o.seed, c));
        for (std::size_t s = c * chunk; s < std::min(o.samples, (c + 1) * chunk); ++s) {
            AffinePair acc_map{};
            double u = o.sampler == BoxSampler::stratified
                           ? (static_cast<double>(s) + rng.uniform()) / static_cast<double>(o.samples)
                           : -1.0;
            double width = 1.0;
            for (std::size_t v = 0; v < o.depth; ++v) {
                std::size_t k;
                if (u >= 0.0 && width > 1e-10) {
                    k = sample_index(cum, u);
                    const double lo = k == 0 ? 0.0 : cum[k - 1];
                    u = std::clamp((u - lo) / p[k], 0.0, std::nextafter(1.0, 0.0));
                    width *= p[k];
                } else {
                    k = sample_index(cum, rng.uniform());
                }
                acc_map = acc_map.then_inner(sys.map(k));
            }
            xs[s] = acc_map.c;
            ys[s] = acc_map.d;
        }
    });

    std::vector<std::uint64_t> keys(o.samples);
    std::vector<double> jx, ly;
    for (int j = o.j_min; j <= o.j_max; ++j) {
        const double side = std::ldexp(1.0, j);
        const auto cells = static_cast<std::uint64_t>(side);
        for (std::size_t s = 0; s < o.samples; ++s) {
            const auto bx = std::min<std::uint64_t>(static_cast<std::uint64_t>(xs[s] * side), cells - 1);
            const auto by = std::min<std::uint64_t>(static_cast<std::uint64_t>(ys[s] * side), cells - 1);
            keys[s] = (bx << 32U) | by;
        }
        std::sort(keys.begin(), keys.end());
        const auto count = static_cast<std::uint64_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
        rep.exponents.push_back(j);
        rep.scales.push_back(1.0 / side);
        rep.counts.push_back(count);
        jx.push_back(static_cast<double>(j));
        ly.push_back(std::log2(static_cast<double>(count)));
    }
    const auto fit = detail::least_squares(jx, ly);
    rep.slope = fit[0];
    rep.intercept = fit[1];
    rep.residual = fit[2];
    return rep;
}

// ---------------------------------------------------------------------------
// Birkhoff averages along sampled orbits

struct LevelSetReport {
    double fraction = 0.0;        ///< share of orbits with |A_N phi - alpha| <= tolerance
    double mean_deviation = 0.0;  ///< mean of |A_N phi - alpha|
    std::vector<double> averages; ///< A_N phi per orbit
    std::size_t samples = 0;
    std::size_t length = 0;
};

/// Birkhoff average (1/N) sum_{l<N} phi(omega_{l+1} ... omega_{l+r}).
inline double birkhoff_average(const SymbolicOrbit& orbit, const Potential& pot, std::size_t N) {
    const std::size_t r = pot.order();
    if (orbit.size() < N + r - 1) throw InsufficientPrefix("orbit too short for Birkhoff average", N + r - 1 - orbit.size());
    const std::size_t n = pot.alphabet();
    const std::uint64_t mod = detail::ipow(n, r);
    std::uint64_t x = 0;
    for (std::size_t v = 0; v + 1 < r; ++v) x = x * n + orbit[v];
    double s = 0.0;
    for (std::size_t l = 0; l < N; ++l) {
        x = (x * n + orbit[l + r - 1]) % mod;
        s += pot(x);
    }
    return s / static_cast<double>(N);
}

/// Level-set membership under a given sampling measure.
inline LevelSetReport empirical_level_set(const BlockMeasure& nu, const Potential& pot, double alpha, double tolerance,
                                          std::size_t S, std::size_t N, std::uint64_t seed, std::size_t threads = 1) {
    if (S == 0 || N == 0) throw InvalidInput("empirical_level_set needs S >= 1 and N >= 1");
    LevelSetReport rep;
    rep.samples = S;
    rep.length = N;
    rep.averages.resize(S);
    parallel_for(S, threads, [&](std::size_t s) {
        const SymbolicOrbit orbit = sample_orbit(nu, N + pot.order() - 1, derive_seed(seed, s));
        rep.averages[s] = birkhoff_average(orbit, pot, N);
    });
    std::size_t hits = 0;
    for (const double a : rep.averages) {
        const double dev = std::abs(a - alpha);
        rep.mean_deviation += dev;
        if (dev <= tolerance) ++hits;
    }
    rep.mean_deviation /= static_cast<double>(S);
    rep.fraction = static_cast<double>(hits) / static_cast<double>(S);
    return rep;
}

/// Same, sampling from the level-m spectrum maximizer at alpha.
inline LevelSetReport empirical_level_set(const LGSystem& sys, const Potential& pot, double alpha, double tolerance,
                                          std::size_t S, std::size_t N, std::uint64_t seed, std::size_t m = 1,
                                          const OptimizerOptions& opts = {}) {
    const SpectrumPoint pt = spectrum_point(sys, pot, alpha, m, opts);
    if (!pt.feasible) throw InvalidInput("alpha infeasible at level " + std::to_string(m));
    return empirical_level_set(pt.measure(sys), pot, alpha, tolerance, S, N, seed, opts.threads);
}

// ---------------------------------------------------------------------------
// Local dimension through approximate squares

struct LocalDimReport {
    std::vector<std::size_t> n;
    std::vector<double> log_measure;   ///< log mu(B_n)
    std::vector<double> log_height;    ///< log prod_{v<=n} b_{i_v}
    std::vector<double> quotient;      ///< log mu(B_n) / log height
    std::size_t tail_start = 0;        ///< first n of the tail window
    double tail_min = 0.0;             ///< liminf proxy: min quotient over the tail
    double tail_mean = 0.0;
};

/// Quotients log mu(B_n(omega)) / log prod b for n = 1..n_max. mu(B_n) is exact
/// for the block product: digit-fixed positions 1..L_n, row-fixed positions
/// L_n+1..n, free afterwards, multiplied block by block.
inline LocalDimReport local_dimension(const BlockMeasure& nu, const SymbolicOrbit& orbit, std::size_t n_max) {
    const LGSystem& sys = nu.system();
    if (&orbit.system() != &sys && system_hash(orbit.system()) != system_hash(sys)) {
        throw InvalidInput("orbit and measure belong to different systems");
    }
    if (n_max == 0) throw InvalidInput("local_dimension: n_max must be >= 1");
    if (n_max > orbit.size()) throw InsufficientPrefix("orbit shorter than n_max", n_max - orbit.size());
    const std::size_t m = nu.block_length();
    const std::size_t n_sym = sys.digit_count();
    const std::size_t p = sys.row_count();

    std::vector<std::pair<std::uint64_t, double>> support;
    std::unordered_map<std::uint64_t, double> word_mass;
    std::unordered_map<std::uint64_t, double> row_mass;
    nu.for_each([&](std::uint64_t w, double q) {
        if (q <= 0.0) return;
        support.emplace_back(w, q);
        word_mass[w] += q;
        std::uint64_t rw = 0;
        for (const std::size_t k : decode_word(w, n_sym, m)) rw = rw * p + sys.row_of(k);
        row_mass[rw] += q;
    });

    const std::size_t blocks = (n_max + m - 1) / m;
    auto block_word = [&](std::size_t b) {
        std::uint64_t w = 0;
        for (std::size_t v = 0; v < m; ++v) w = w * n_sym + orbit[b * m + v];
        return w;
    };
    auto block_rows = [&](std::size_t b) {
        std::uint64_t rw = 0;
        for (std::size_t v = 0; v < m; ++v) rw = rw * p + sys.row_of(orbit[b * m + v]);
        return rw;
    };
    auto log_of = [&](double mass, std::size_t n) {
        if (!(mass > 0.0)) throw InvalidInput("zero-probability cylinder at n = " + std::to_string(n) + ": orbit left the measure's support");
        return std::log(mass);
    };
    // Blocks that are complete inside the orbit prefix.
    const std::size_t full_blocks = std::min(blocks, orbit.size() / m);
    std::vector<double> digit_prefix(full_blocks + 1, 0.0), row_prefix(full_blocks + 1, 0.0);
    std::vector<bool> digit_ok(full_blocks, true), row_ok(full_blocks, true);
    for (std::size_t b = 0; b < full_blocks; ++b) {
        const auto it = word_mass.find(block_word(b));
        const double wq = it == word_mass.end() ? 0.0 : it->second;
        const auto jt = row_mass.find(block_rows(b));
        const double rq = jt == row_mass.end() ? 0.0 : jt->second;
        digit_ok[b] = wq > 0.0;
        row_ok[b] = rq > 0.0;
        digit_prefix[b + 1] = digit_prefix[b] + (wq > 0.0 ? std::log(wq) : 0.0);
        row_prefix[b + 1] = row_prefix[b] + (rq > 0.0 ? std::log(rq) : 0.0);
    }
    // Probability of block b where positions < cut are digit-fixed, positions
    // in [cut, end) row-fixed and the rest free (positions relative to block).
    auto mixed_block = [&](std::size_t b, std::size_t cut, std::size_t end) {
        double mass = 0.0;
        for (const auto& [w, q] : support) {
            const auto digits = decode_word(w, n_sym, m);
            bool ok = true;
            for (std::size_t v = 0; v < end && ok; ++v) {
                const std::size_t k = orbit[b * m + v];
                ok = v < cut ? digits[v] == k : sys.row_of(digits[v]) == sys.row_of(k);
            }
            if (ok) mass += q;
        }
        return mass;
    };

    const auto cuts = cutting_indices(orbit, n_max);
    LocalDimReport rep;
    double log_height = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        log_height -= sys.log_inv_b(orbit[n - 1]);
        const std::size_t L = cuts[n];
        const std::size_t bl = L / m;               // blocks fully digit-fixed
        const std::size_t bn = n / m;               // blocks fully inside [1, n]
        double lm = 0.0;
        for (std::size_t b = 0; b < bl; ++b) {
            if (!digit_ok[b]) log_of(0.0, n);
        }
        lm += digit_prefix[bl];
        if (bl == bn) {
            if (n % m != 0) lm += log_of(mixed_block(bl, L % m, n % m), n);
        } else {
            std::size_t first_row_block = bl;
            if (L % m != 0) {
                lm += log_of(mixed_block(bl, L % m, m), n);
                first_row_block = bl + 1;
            }
            for (std::size_t b = first_row_block; b < bn; ++b) {
                if (!row_ok[b]) log_of(0.0, n);
            }
            lm += row_prefix[bn] - row_prefix[first_row_block];
            if (n % m != 0) lm += log_of(mixed_block(bn, 0, n % m), n);
        }
        rep.n.push_back(n);
        rep.log_measure.push_back(lm);
        rep.log_height.push_back(log_height);
        rep.quotient.push_back(lm / log_height);
    }
    rep.tail_start = n_max - n_max / 4;
    rep.tail_min = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = rep.tail_start - 1; i < n_max; ++i) {
        rep.tail_min = std::min(rep.tail_min, rep.quotient[i]);
        sum += rep.quotient[i];
        ++count;
    }
    rep.tail_mean = sum / static_cast<double>(count);
    return rep;
}

}  // namespace lgcarpet
