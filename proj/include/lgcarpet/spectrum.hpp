#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "lgcarpet/block_measure.hpp"
#include "lgcarpet/measures.hpp"
#include "lgcarpet/optimize.hpp"
#include "lgcarpet/rng.hpp"
#include "lgcarpet/system.hpp"

namespace lgcarpet {

/// Largest level-m word count the dense optimizer accepts.
inline constexpr std::uint64_t optimizer_word_limit = 20'000;

struct DimensionResult {
    double value = 0.0;
    std::vector<double> argmax;  ///< digit weights (block length 1)
    double kkt_residual = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    std::size_t restarts_used = 0;

    BlockMeasure measure(const LGSystem& sys) const { return {sys, 1, argmax}; }
};

namespace detail {

inline std::vector<std::vector<double>> random_starts(std::size_t K, const OptimizerOptions& opts, std::uint64_t seed) {
    std::vector<std::vector<double>> starts;
    starts.emplace_back(K, 1.0 / static_cast<double>(K));
    Pcg32 rng(seed);
    for (std::size_t i = 0; i < opts.restarts; ++i) starts.push_back(rng.dirichlet1(K));
    return starts;
}

/// Same, supported on `face` only.
inline std::vector<std::vector<double>> face_starts(std::size_t K, std::span<const std::size_t> face, std::size_t count,
                                                    std::uint64_t seed) {
    std::vector<std::vector<double>> starts;
    std::vector<double> u(K, 0.0);
    for (const std::size_t w : face) u[w] = 1.0 / static_cast<double>(face.size());
    starts.push_back(u);
    Pcg32 rng(seed);
    for (std::size_t i = 0; i < count && face.size() > 1; ++i) {
        const auto draw = rng.dirichlet1(face.size());
        std::vector<double> q(K, 0.0);
        for (std::size_t j = 0; j < face.size(); ++j) q[face[j]] = draw[j];
        starts.push_back(std::move(q));
    }
    return starts;
}

inline DimensionResult to_dimension(const Solution& s) {
    return {s.value, s.weights, s.kkt_residual, s.converged, s.iterations, s.restarts_used};
}

}  // namespace detail

/// Hausdorff dimension of the carpet: the maximum of the dimension functional
/// over Bernoulli measures, by multi-start scaled gradient ascent.
inline DimensionResult carpet_dimension(const LGSystem& sys, const OptimizerOptions& opts = {}) {
    const LyObjective obj(WordTable::build(sys, 1));
    const SimplexAscent ascent(obj, nullptr, opts);
    const auto starts = detail::random_starts(sys.digit_count(), opts, derive_seed(opts.seed, 0xd1ULL));
    return detail::to_dimension(ascent.best_of(starts, 0.0));
}

/// The subsystem keeping only the listed digits (rows left empty are dropped).
inline LGSystem restrict_digits(const LGSystem& sys, std::span<const std::size_t> keep) {
    SystemSpec spec;
    for (std::size_t r = 0; r < sys.row_count(); ++r) {
        RowSpec row{sys.row_b(r), sys.row_d(r), {}};
        for (std::size_t k = sys.row_start(r); k < sys.row_start(r) + sys.row_size(r); ++k) {
            if (std::find(keep.begin(), keep.end(), k) != keep.end()) row.cols.push_back({sys.a(k), sys.c(k)});
        }
        if (!row.cols.empty()) spec.rows.push_back(std::move(row));
    }
    return validate(std::move(spec));
}

struct AlphaRange {
    double min = 0.0;
    double max = 0.0;
};

namespace detail {

/// Karp's minimum mean cycle on the de Bruijn graph of order-r words
/// (vertices: (r-1)-words, edges: r-words weighted by sign*phi).
inline double min_mean_cycle(const Potential& pot, double sign) {
    const std::size_t n = pot.alphabet();
    const std::size_t r = pot.order();
    const std::uint64_t V = checked_power(n, r - 1);
    const std::uint64_t E = V * n;
    if (V > 0 && E > enumeration_guard / std::max<std::uint64_t>(1, V)) {
        throw GuardExceeded("minimum mean cycle needs V*E <= 1e7");
    }
    const auto Vs = static_cast<std::size_t>(V);
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> D(Vs + 1, std::vector<double>(Vs, inf));
    std::fill(D[0].begin(), D[0].end(), 0.0);
    for (std::size_t k = 1; k <= Vs; ++k) {
        for (std::uint64_t x = 0; x < E; ++x) {
            const auto u = static_cast<std::size_t>(x / n);
            const auto v = static_cast<std::size_t>(x % V);
            if (D[k - 1][u] < inf) D[k][v] = std::min(D[k][v], D[k - 1][u] + sign * pot(x));
        }
    }
    double best = inf;
    for (std::size_t v = 0; v < Vs; ++v) {
        if (D[Vs][v] == inf) continue;
        double worst = -inf;
        for (std::size_t k = 0; k < Vs; ++k) {
            if (D[k][v] == inf) continue;
            worst = std::max(worst, (D[Vs][v] - D[k][v]) / static_cast<double>(Vs - k));
        }
        best = std::min(best, worst);
    }
    return best;
}

/// Marks r-words that lie on the zero-slack subgraph after subtracting the
/// extreme cycle mean and a Bellman-Ford vertex potential.
inline std::vector<bool> critical_words(const Potential& pot, double sign, double mean, double tol) {
    const std::size_t n = pot.alphabet();
    const std::uint64_t V = checked_power(n, pot.order() - 1);
    const std::uint64_t E = V * n;
    std::vector<double> h(static_cast<std::size_t>(V), 0.0);
    for (std::uint64_t it = 0; it < V; ++it) {
        bool changed = false;
        for (std::uint64_t x = 0; x < E; ++x) {
            const auto u = static_cast<std::size_t>(x / n);
            const auto v = static_cast<std::size_t>(x % V);
            const double cand = h[u] + sign * pot(x) - mean;
            if (cand < h[v] - 1e-15) {
                h[v] = cand;
                changed = true;
            }
        }
        if (!changed) break;
    }
    std::vector<bool> out(static_cast<std::size_t>(E));
    for (std::uint64_t x = 0; x < E; ++x) {
        const auto u = static_cast<std::size_t>(x / n);
        const auto v = static_cast<std::size_t>(x % V);
        out[static_cast<std::size_t>(x)] = sign * pot(x) - mean + h[u] - h[v] <= tol;
    }
    return out;
}

}  // namespace detail

/// Range of integrals of phi over invariant measures: extreme cycle means.
inline AlphaRange alpha_bounds(const LGSystem& sys, const Potential& pot) {
    if (pot.alphabet() != sys.digit_count()) throw InvalidInput("potential alphabet does not match system");
    return {detail::min_mean_cycle(pot, 1.0), -detail::min_mean_cycle(pot, -1.0)};
}

struct SpectrumPoint {
    double alpha = 0.0;
    bool feasible = false;
    double lower = 0.0;   ///< best dimension value with the exact constraint
    double upper = 0.0;   ///< best value with the var_avg slack
    double slack = 0.0;   ///< var_m(A_m phi)
    std::size_t level = 1;
    std::vector<double> argmax;  ///< level-m block weights achieving `lower`
    std::size_t restarts_used = 0;
    std::size_t iterations = 0;
    double kkt_residual = 0.0;
    bool converged = true;

    BlockMeasure measure(const LGSystem& sys) const { return {sys, level, argmax}; }
};

/// Everything that depends only on (system, potential, m): word tables, the
/// averaged-potential constraint, its range over the level-m simplex, the
/// oscillation slack, and the endpoint faces. Reused across alpha values.
class LevelProblem {
public:
    LevelProblem(const LGSystem& sys, const Potential& pot, std::size_t m, const OptimizerOptions& opts)
        : sys_(&sys), pot_(pot), m_(m), opts_(opts), objective_(WordTable::build(sys, m)), constraint_(pot_, m),
          scale_(std::max({1.0, std::abs(pot.min_value()), std::abs(pot.max_value())})),
          ascent_(objective_, &constraint_, opts, scale_), free_ascent_(objective_, nullptr, opts) {
        if (m == 0) throw InvalidInput("level m must be >= 1");
        if (pot.alphabet() != sys.digit_count()) throw InvalidInput("potential alphabet does not match system");
        checked_power(sys.digit_count(), m, optimizer_word_limit);
        bounds_ = alpha_bounds(sys, pot);
        const std::size_t K = objective_.size();
        auto [lo, qlo] = ascent_.constraint_extreme(-1, K);
        auto [hi, qhi] = ascent_.constraint_extreme(+1, K);
        level_lo_ = lo;
        level_hi_ = hi;
        anchor_lo_ = std::move(qlo);
        anchor_hi_ = std::move(qhi);
        slack_ = var_avg(sys, pot, m);
    }

    LevelProblem(const LevelProblem&) = delete;
    LevelProblem& operator=(const LevelProblem&) = delete;

    std::size_t level() const noexcept { return m_; }
    std::size_t word_count() const noexcept { return objective_.size(); }
    const AlphaRange& bounds() const noexcept { return bounds_; }
    double slack() const noexcept { return slack_; }
    std::pair<double, double> level_range() const noexcept { return {level_lo_, level_hi_}; }
    const LyObjective& objective() const noexcept { return objective_; }
    const AveragedPotential& constraint() const noexcept { return constraint_; }

    double endpoint_tolerance() const noexcept { return 1e-12 * scale_; }

    /// max D subject to the exact constraint. Warm starts that already satisfy
    /// the constraint are used as they are; others are pulled onto the slice.
    Solution maximize_at(double alpha, std::uint64_t seed, std::span<const std::vector<double>> warm = {}) const {
        const double tol_end = endpoint_tolerance();
        if (alpha < bounds_.min - tol_end || alpha > bounds_.max + tol_end) return {};
        if (std::abs(alpha - bounds_.min) <= tol_end) return solve_endpoint(-1, seed);
        if (std::abs(alpha - bounds_.max) <= tol_end) return solve_endpoint(+1, seed);
        const double tol = ascent_.feasibility_tolerance();
        if (alpha < level_lo_ - tol || alpha > level_hi_ + tol) return {};

        const std::size_t K = objective_.size();
        std::vector<std::vector<double>> feasible;
        auto admit = [&](const std::vector<double>& start) {
            const double c = constraint_.value(start);
            if (std::abs(c - alpha) <= tol) {
                feasible.push_back(start);
                return;
            }
            const auto& anchor = c > alpha ? anchor_lo_ : anchor_hi_;
            if (auto q = ascent_.make_feasible(start, anchor, alpha)) feasible.push_back(std::move(*q));
        };
        for (const auto& w : warm) {
            if (w.size() != K) continue;
            if (std::abs(constraint_.value(w) - alpha) <= tol) {
                feasible.push_back(w);
            } else {
                std::vector<double> mixed(K);
                for (std::size_t i = 0; i < K; ++i) mixed[i] = 0.999 * w[i] + 0.001 / static_cast<double>(K);
                admit(mixed);
            }
        }
        for (const auto& s : detail::random_starts(K, opts_, seed)) admit(s);
        if (std::abs(constraint_.value(anchor_lo_) - alpha) <= tol) feasible.push_back(anchor_lo_);
        if (std::abs(constraint_.value(anchor_hi_) - alpha) <= tol) feasible.push_back(anchor_hi_);
        if (feasible.empty()) return {};
        return ascent_.best_of(feasible, alpha);
    }

    /// max D subject to |integral - alpha| <= slack, by enumerating the three
    /// active sets: none (unconstrained optimum, if inside the band), and
    /// each band edge as an equality. `inside` is a known feasible solution.
    Solution maximize_band(double alpha, double slack, std::uint64_t seed, const Solution& inside) const {
        Solution best = inside;
        best.iterations = 0;
        best.restarts_used = 0;
        if (slack <= 0.0) return best;
        const Solution& free = unconstrained();
        if (free.feasible && std::abs(constraint_.value(free.weights) - alpha) <= slack) best.absorb(free);
        const std::vector<double> edges{alpha - slack, alpha + slack};
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const double a = edges[e];
            if (a < bounds_.min - endpoint_tolerance() || a > bounds_.max + endpoint_tolerance()) continue;
            std::vector<std::vector<double>> warm;
            if (inside.feasible) warm.push_back(inside.weights);
            best.absorb(maximize_at(a, derive_seed(seed, 0xed9e0ULL + e), warm));
        }
        return best;
    }

    /// Level-m maximum with no constraint (cached).
    const Solution& unconstrained() const {
        std::call_once(free_once_, [&] {
            free_best_ = free_ascent_.best_of(detail::random_starts(objective_.size(), opts_, derive_seed(opts_.seed, 0xf1ULL)), 0.0);
        });
        return free_best_;
    }

    /// Maximal supports on which the averaged integral is identically the
    /// extreme value: sets of level-m words all of whose concatenations only
    /// use zero-slack windows of the extreme cycle mean.
    std::vector<std::vector<std::size_t>> endpoint_faces(int sign) const {
        const double mean = sign < 0 ? bounds_.min : -bounds_.max;
        const auto critical = detail::critical_words(pot_, sign < 0 ? 1.0 : -1.0, mean, 1e-9 * scale_);
        const std::size_t n = sys_->digit_count();
        const std::size_t r = pot_.order();
        const std::size_t span = 1 + (r - 1 + m_ - 1) / m_;
        const std::size_t K = objective_.size();
        const std::uint64_t rmod = detail::ipow(n, r);

        auto tuple_ok = [&](std::span<const std::size_t> blocks) {
            std::vector<std::size_t> seq;
            for (const std::size_t w : blocks) {
                const auto digits = decode_word(w, n, m_);
                seq.insert(seq.end(), digits.begin(), digits.end());
            }
            for (std::size_t l = 0; l < m_; ++l) {
                std::uint64_t x = 0;
                for (std::size_t v = 0; v < r; ++v) x = x * n + seq[l + v];
                if (!critical[static_cast<std::size_t>(x % rmod)]) return false;
            }
            return true;
        };
        auto all_tuples_ok = [&](std::span<const std::size_t> set) {
            if (checked_power(set.size(), span, std::uint64_t{1} << 40U) > 1'000'000) return false;
            std::vector<std::size_t> idx(span, 0);
            std::vector<std::size_t> blocks(span);
            for (;;) {
                for (std::size_t i = 0; i < span; ++i) blocks[i] = set[idx[i]];
                if (!tuple_ok(blocks)) return false;
                std::size_t i = span;
                while (i > 0 && ++idx[i - 1] == set.size()) idx[--i] = 0;
                if (i == 0) return true;
            }
        };

        std::vector<std::size_t> base;
        for (std::size_t w = 0; w < K; ++w) {
            const std::vector<std::size_t> self(span, w);
            if (tuple_ok(self)) base.push_back(w);
        }
        const std::size_t B = base.size();
        if (B == 0) return {};
        std::vector<std::vector<bool>> adj(B, std::vector<bool>(B, false));
        for (std::size_t i = 0; i < B; ++i) {
            for (std::size_t j = i + 1; j < B; ++j) {
                const std::size_t pair[2] = {base[i], base[j]};
                adj[i][j] = adj[j][i] = all_tuples_ok(pair);
            }
        }

        // Bron-Kerbosch with pivoting, capped.
        std::vector<std::vector<std::size_t>> cliques;
        constexpr std::size_t max_cliques = 256;
        auto bk = [&](auto&& self, std::vector<std::size_t> R, std::vector<std::size_t> P, std::vector<std::size_t> X) -> void {
            if (cliques.size() >= max_cliques) return;
            if (P.empty() && X.empty()) {
                cliques.push_back(R);
                return;
            }
            std::size_t pivot = P.empty() ? X.front() : P.front();
            std::vector<std::size_t> cand;
            for (const std::size_t v : P) {
                if (!adj[pivot][v]) cand.push_back(v);
            }
            for (const std::size_t v : cand) {
                std::vector<std::size_t> R2 = R, P2, X2;
                R2.push_back(v);
                for (const std::size_t u : P) {
                    if (adj[v][u]) P2.push_back(u);
                }
                for (const std::size_t u : X) {
                    if (adj[v][u]) X2.push_back(u);
                }
                self(self, R2, P2, X2);
                std::erase(P, v);
                X.push_back(v);
            }
        };
        std::vector<std::size_t> all(B);
        for (std::size_t i = 0; i < B; ++i) all[i] = i;
        bk(bk, {}, all, {});

        std::vector<std::vector<std::size_t>> faces;
        for (const auto& c : cliques) {
            std::vector<std::size_t> words;
            for (const std::size_t i : c) words.push_back(base[i]);
            std::sort(words.begin(), words.end());
            if (span <= 2 || all_tuples_ok(words)) {
                faces.push_back(std::move(words));
            } else {
                for (const std::size_t w : words) faces.push_back({w});
            }
        }
        std::sort(faces.begin(), faces.end());
        faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
        return faces;
    }

private:
    Solution solve_endpoint(int sign, std::uint64_t seed) const {
        const auto faces = endpoint_faces(sign);
        const std::size_t K = objective_.size();
        Solution best;
        for (std::size_t f = 0; f < faces.size(); ++f) {
            const auto starts = detail::face_starts(K, faces[f], opts_.restarts / 4 + 1, derive_seed(seed, 0xfaceULL + f));
            best.absorb(free_ascent_.best_of(starts, 0.0));
        }
        return best;
    }

    const LGSystem* sys_;
    Potential pot_;
    std::size_t m_;
    OptimizerOptions opts_;
    LyObjective objective_;
    AveragedPotential constraint_;
    double scale_;
    SimplexAscent ascent_;
    SimplexAscent free_ascent_;
    AlphaRange bounds_;
    double level_lo_ = 0.0;
    double level_hi_ = 0.0;
    std::vector<double> anchor_lo_;
    std::vector<double> anchor_hi_;
    double slack_ = 0.0;
    mutable std::once_flag free_once_;
    mutable Solution free_best_;
};

namespace detail {

inline SpectrumPoint evaluate_point(const LevelProblem& prob, double alpha, std::uint64_t seed,
                                    std::span<const std::vector<double>> warm) {
    SpectrumPoint pt;
    pt.alpha = alpha;
    pt.level = prob.level();
    pt.slack = prob.slack();
    const Solution low = prob.maximize_at(alpha, seed, warm);
    if (!low.feasible) {
        pt.feasible = false;
        pt.converged = true;
        pt.restarts_used = low.restarts_used;
        pt.iterations = low.iterations;
        return pt;
    }
    const Solution up = prob.maximize_band(alpha, prob.slack(), derive_seed(seed, 0xb4ULL), low);
    pt.feasible = true;
    pt.lower = low.value;
    pt.upper = std::max(up.value, low.value);
    pt.argmax = low.weights;
    pt.restarts_used = low.restarts_used + up.restarts_used;
    pt.iterations = low.iterations + up.iterations;
    pt.kkt_residual = std::max(low.kkt_residual, prob.slack() > 0.0 ? up.kkt_residual : 0.0);
    pt.converged = low.converged && (prob.slack() <= 0.0 || up.converged);
    return pt;
}

}  // namespace detail

/// Lower and upper brackets for the Birkhoff spectrum at alpha using level-m
/// block measures.
inline SpectrumPoint spectrum_point(const LGSystem& sys, const Potential& pot, double alpha, std::size_t m,
                                    const OptimizerOptions& opts = {}) {
    const LevelProblem prob(sys, pot, m, opts);
    return detail::evaluate_point(prob, alpha, opts.seed, {});
}

struct SpectrumCurve {
    std::size_t level = 1;
    double alpha_min = 0.0;
    double alpha_max = 0.0;
    std::vector<SpectrumPoint> points;

    bool all_converged() const {
        return std::all_of(points.begin(), points.end(), [](const SpectrumPoint& p) { return p.converged; });
    }
    /// Largest |f(alpha_{g+1}) - f(alpha_g)| over adjacent feasible points.
    double max_adjacent_gap() const {
        double gap = 0.0;
        for (std::size_t g = 0; g + 1 < points.size(); ++g) {
            if (points[g].feasible && points[g + 1].feasible) {
                gap = std::max(gap, std::abs(points[g + 1].lower - points[g].lower));
            }
        }
        return gap;
    }
};

/// Uniform alpha grid over [alpha_min, alpha_max], endpoints included; each
/// point warm-starts from its left neighbour's maximizer. A potential with a
/// single achievable average gives a single point.
inline SpectrumCurve spectrum_curve(const LGSystem& sys, const Potential& pot, std::size_t grid, std::size_t m,
                                    const OptimizerOptions& opts = {}) {
    if (grid < 3) throw InvalidInput("spectrum grid needs at least 3 points");
    const LevelProblem prob(sys, pot, m, opts);
    SpectrumCurve curve;
    curve.level = m;
    curve.alpha_min = prob.bounds().min;
    curve.alpha_max = prob.bounds().max;
    const double width = curve.alpha_max - curve.alpha_min;
    const std::size_t count = width <= prob.endpoint_tolerance() ? 1 : grid;
    std::vector<std::vector<double>> warm;
    for (std::size_t g = 0; g < count; ++g) {
        double alpha = curve.alpha_min + width * static_cast<double>(g) / static_cast<double>(grid - 1);
        if (g + 1 == grid) alpha = curve.alpha_max;
        SpectrumPoint pt = detail::evaluate_point(prob, alpha, derive_seed(opts.seed, g), warm);
        warm.clear();
        if (pt.feasible) warm.push_back(pt.argmax);
        curve.points.push_back(std::move(pt));
    }
    return curve;
}

struct BracketLevel {
    std::size_t level = 1;
    bool feasible = false;
    double lower = 0.0;       ///< this level's lower bound
    double upper = 0.0;       ///< this level's upper bound
    double slack = 0.0;
    double best_lower = 0.0;  ///< max of lower bounds over levels <= m
    double best_upper = 0.0;  ///< min of upper bounds over levels <= m
    double kkt_residual = 0.0;
    bool converged = true;
};

/// spectrum_point for m = 1..m_max. Level m is warm-started from the product
/// lifts of every divisor level's maximizer, which are feasible at level m.
inline std::vector<BracketLevel> bracket_refine(const LGSystem& sys, const Potential& pot, double alpha,
                                                std::size_t m_max, const OptimizerOptions& opts = {}) {
    if (m_max == 0) throw InvalidInput("bracket_refine: m_max must be >= 1");
    std::vector<BracketLevel> out;
    std::vector<std::optional<BlockMeasure>> argmax(m_max + 1);
    double best_lower = -std::numeric_limits<double>::infinity();
    double best_upper = std::numeric_limits<double>::infinity();
    for (std::size_t m = 1; m <= m_max; ++m) {
        const LevelProblem prob(sys, pot, m, opts);
        std::vector<std::vector<double>> warm;
        for (std::size_t d = 1; d < m; ++d) {
            if (m % d != 0 || !argmax[d]) continue;
            warm.push_back(BlockMeasure::product_lift(*argmax[d], m / d).dense_weights());
        }
        const SpectrumPoint pt = detail::evaluate_point(prob, alpha, derive_seed(opts.seed, m), warm);
        BracketLevel lv;
        lv.level = m;
        lv.feasible = pt.feasible;
        lv.slack = pt.slack;
        lv.kkt_residual = pt.kkt_residual;
        lv.converged = pt.converged;
        if (pt.feasible) {
            lv.lower = pt.lower;
            lv.upper = pt.upper;
            argmax[m] = pt.measure(sys);
            best_lower = std::max(best_lower, pt.lower);
            best_upper = std::min(best_upper, pt.upper);
        }
        lv.best_lower = best_lower;
        lv.best_upper = best_upper;
        out.push_back(lv);
    }
    return out;
}

}  // namespace lgcarpet
