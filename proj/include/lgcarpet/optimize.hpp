#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "lgcarpet/measures.hpp"
#include "lgcarpet/parallel.hpp"
#include "lgcarpet/rng.hpp"

namespace lgcarpet {

struct OptimizerOptions {
    std::size_t restarts = 32;  ///< Dirichlet(1) starts on top of the uniform point
    std::size_t max_iterations = 100'000;
    double kkt_tolerance = 1e-8;
    std::uint64_t seed = 0x5eedULL;
    std::size_t threads = 1;    ///< 0 = hardware concurrency
};

/// Best point found by a multi-start run.
struct Solution {
    bool feasible = false;
    double value = -std::numeric_limits<double>::infinity();
    std::vector<double> weights;
    double kkt_residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    std::size_t restarts_used = 0;
    bool converged = false;

    /// Value first, then lexicographically smaller weights; independent of
    /// the order in which candidates arrive.
    bool better_than(const Solution& o) const {
        if (!feasible) return false;
        if (!o.feasible) return true;
        if (value != o.value) return value > o.value;
        return weights < o.weights;
    }

    void absorb(const Solution& o) {
        const std::size_t it = iterations + o.iterations;
        const std::size_t used = restarts_used + o.restarts_used;
        if (o.better_than(*this)) *this = o;
        iterations = it;
        restarts_used = used;
    }
};

/// Euclidean projection onto the probability simplex (sort-based).
inline void project_to_simplex(std::span<double> v) {
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cum += u[i];
        const double t = (cum - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) theta = t;
    }
    for (auto& x : v) x = std::max(0.0, x - theta);
}

inline void normalize(std::span<double> q) {
    const double s = std::accumulate(q.begin(), q.end(), 0.0);
    for (auto& x : q) x /= s;
}

/// Maximizes the dimension functional over the level-m simplex, optionally
/// restricted to the slice {A_m phi integral = alpha}.
///
/// The ascent direction is the gradient scaled by diag(q) and projected onto
/// the tangent space of the active constraints (sum of weights, and the
/// constraint gradient when present). With that scaling the entropy part of
/// the Hessian is close to a multiple of the identity, which keeps step sizes
/// O(1). After each trial step a Newton correction along diag(q) times the
/// centred constraint gradient puts the iterate back on the slice, then an
/// Armijo test on the objective decides acceptance. Near the optimum, where
/// value differences drop below rounding, a secant step on the reduced
/// directional derivative replaces the Armijo test.
///
/// Weights that shrink below 1e-15 with a negative reduced gradient are
/// dropped from the support and the run continues on the face.
class SimplexAscent {
public:
    SimplexAscent(const LyObjective& objective, const AveragedPotential* constraint, OptimizerOptions opts,
                  double constraint_scale = 1.0)
        : obj_(&objective), con_(constraint), opts_(opts),
          feas_tol_(1e-13 * std::max(1.0, constraint_scale)) {}

    double feasibility_tolerance() const noexcept { return feas_tol_; }

    double constraint_value(std::span<const double> q) const { return con_->value(q); }

    /// Local ascent from a feasible starting point.
    Solution ascend(std::vector<double> q, double alpha) const {
        const std::size_t K = q.size();
        std::vector<double> g(K), gc(K, 0.0), r(K, 0.0), d(K), trial(K), gt(K), gct(K, 0.0), rt(K);
        Solution run;
        run.restarts_used = 1;
        double f = obj_->gradient(q, g);
        if (con_ != nullptr) con_->gradient(q, gc);
        double step = 1.0;
        double kkt = std::numeric_limits<double>::infinity();
        std::size_t it = 0;
        for (; it < opts_.max_iterations; ++it) {
            kkt = reduced_gradient(q, g, gc, r);
            if (kkt <= opts_.kkt_tolerance) break;

            bool dropped = false;
            for (std::size_t w = 0; w < K; ++w) {
                if (q[w] > 0.0 && q[w] < 1e-15 && r[w] < 0.0) {
                    q[w] = 0.0;
                    dropped = true;
                }
            }
            if (dropped) {
                normalize(q);
                if (con_ != nullptr && !restore(q, alpha)) break;
                f = obj_->gradient(q, g);
                if (con_ != nullptr) con_->gradient(q, gc);
                continue;
            }

            double slope = 0.0;
            double t_max = std::numeric_limits<double>::infinity();
            for (std::size_t w = 0; w < K; ++w) {
                d[w] = q[w] * r[w];
                slope += d[w] * r[w];
                if (d[w] < 0.0) t_max = std::min(t_max, -q[w] / d[w]);
            }
            double t = std::min(std::max(2.0 * step, 1e-8), 0.99 * t_max);
            bool accepted = false;
            while (t > 1e-20) {
                for (std::size_t w = 0; w < K; ++w) trial[w] = q[w] + t * d[w];
                normalize(trial);
                if (con_ != nullptr && !restore(trial, alpha)) {
                    t *= 0.5;
                    continue;
                }
                if (t * slope < 1e-11 * std::max(1.0, std::abs(f))) {
                    // Secant step on the directional derivative.
                    obj_->gradient(trial, gt);
                    if (con_ != nullptr) con_->gradient(trial, gct);
                    reduced_gradient(trial, gt, gct, rt);
                    double dt = 0.0;
                    for (std::size_t w = 0; w < K; ++w) dt += rt[w] * d[w];
                    if (dt < 0.0) {
                        t *= slope / (slope - dt);
                        for (std::size_t w = 0; w < K; ++w) trial[w] = q[w] + t * d[w];
                        normalize(trial);
                        if (con_ != nullptr && !restore(trial, alpha)) break;
                    }
                    accepted = true;
                    break;
                }
                if (obj_->value(trial) - f >= 1e-4 * t * slope) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) break;
            step = t;
            q.swap(trial);
            f = obj_->gradient(q, g);
            if (con_ != nullptr) con_->gradient(q, gc);
        }
        run.feasible = true;
        run.value = f;
        run.weights = std::move(q);
        run.kkt_residual = kkt;
        run.iterations = it;
        run.converged = kkt <= opts_.kkt_tolerance;
        return run;
    }

    /// Moves q back onto {c(q) = alpha} along diag(q)(grad c - mean).
    bool restore(std::span<double> q, double alpha) const {
        const std::size_t K = q.size();
        std::vector<double> gc(K);
        for (int iter = 0; iter < 50; ++iter) {
            const double err = con_->gradient(q, gc) - alpha;
            if (std::abs(err) <= feas_tol_) return true;
            double mass = 0.0;
            double mean = 0.0;
            for (std::size_t w = 0; w < K; ++w) {
                mass += q[w];
                mean += q[w] * gc[w];
            }
            mean /= mass;
            double de = 0.0;
            for (std::size_t w = 0; w < K; ++w) de += q[w] * (gc[w] - mean) * (gc[w] - mean);
            if (!(de > 0.0)) return false;
            const double s = -err / de;
            for (std::size_t w = 0; w < K; ++w) {
                q[w] += s * q[w] * (gc[w] - mean);
                if (q[w] < 0.0) return false;
            }
        }
        return std::abs(con_->value(q) - alpha) <= feas_tol_;
    }

    /// Point on the segment from `start` toward `anchor` where the constraint
    /// equals alpha; the anchor must lie on the other side of alpha.
    std::optional<std::vector<double>> make_feasible(const std::vector<double>& start, const std::vector<double>& anchor,
                                                     double alpha) const {
        const double c0 = con_->value(start) - alpha;
        if (std::abs(c0) <= feas_tol_) return start;
        const double c1 = con_->value(anchor) - alpha;
        if (c0 * c1 > 0.0) return std::nullopt;
        const std::size_t K = start.size();
        std::vector<double> q(K);
        auto at = [&](double t) {
            for (std::size_t w = 0; w < K; ++w) q[w] = (1.0 - t) * start[w] + t * anchor[w];
            return con_->value(q) - alpha;
        };
        double lo = 0.0;
        double hi = 1.0;
        for (int i = 0; i < 200 && hi - lo > 1e-17; ++i) {
            const double mid = 0.5 * (lo + hi);
            const double v = at(mid);
            if (std::abs(v) <= feas_tol_) {
                lo = hi = mid;
                break;
            }
            if ((v > 0.0) == (c0 > 0.0)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        const double t = 0.5 * (lo + hi);
        if (t > 1.0 - 1e-9) return std::nullopt;  // start collapses onto the anchor's face
        at(t);
        if (!restore(q, alpha)) return std::nullopt;
        return q;
    }

    /// Extreme value of the constraint over the simplex: sign=+1 for max,
    /// -1 for min. Linear constraints are extremal at a vertex; otherwise
    /// projected gradient runs from the best vertices and a few random points.
    std::pair<double, std::vector<double>> constraint_extreme(int sign, std::size_t K) const {
        std::vector<double> best(K, 0.0);
        double best_val = -std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, std::size_t>> vertices;
        std::vector<double> e(K, 0.0);
        for (std::size_t w = 0; w < K; ++w) {
            e[w] = 1.0;
            vertices.emplace_back(sign * con_->value(e), w);
            e[w] = 0.0;
        }
        std::sort(vertices.begin(), vertices.end(), [](const auto& x, const auto& y) {
            return x.first != y.first ? x.first > y.first : x.second < y.second;
        });
        best[vertices.front().second] = 1.0;
        best_val = vertices.front().first;
        if (con_->is_linear()) return {sign * best_val, best};

        std::vector<std::vector<double>> starts;
        for (std::size_t i = 0; i < std::min<std::size_t>(8, K); ++i) {
            std::vector<double> v(K, 0.0);
            v[vertices[i].second] = 1.0;
            starts.push_back(std::move(v));
        }
        starts.emplace_back(K, 1.0 / static_cast<double>(K));
        Pcg32 rng(derive_seed(opts_.seed, 0xc0ffeeULL));
        for (int i = 0; i < 8; ++i) starts.push_back(rng.dirichlet1(K));

        std::vector<double> grad(K), trial(K);
        for (auto& q : starts) {
            double val = sign * con_->gradient(q, grad);
            double step = 1.0;
            for (int it = 0; it < 5000; ++it) {
                bool moved = false;
                for (double t = std::min(4.0 * step, 1e3); t > 1e-14; t *= 0.5) {
                    for (std::size_t w = 0; w < K; ++w) trial[w] = q[w] + t * sign * grad[w];
                    project_to_simplex(trial);
                    const double tv = sign * con_->value(trial);
                    if (tv > val + 1e-16 * std::max(1.0, std::abs(val))) {
                        q.swap(trial);
                        val = sign * con_->gradient(q, grad);
                        step = t;
                        moved = true;
                        break;
                    }
                }
                if (!moved) break;
            }
            if (val > best_val) {
                best_val = val;
                best = q;
            }
        }
        return {sign * best_val, best};
    }

    /// Runs ascend from every start (in parallel) and keeps the best.
    Solution best_of(const std::vector<std::vector<double>>& starts, double alpha) const {
        std::vector<Solution> runs(starts.size());
        parallel_for(starts.size(), opts_.threads, [&](std::size_t i) { runs[i] = ascend(starts[i], alpha); });
        Solution best;
        for (const auto& run : runs) best.absorb(run);
        return best;
    }

    const OptimizerOptions& options() const noexcept { return opts_; }

private:
    /// r = g - nu - eta*gc on the support with (nu, eta) the diag(q)-weighted
    /// least-squares multipliers; returns max |r|.
    double reduced_gradient(std::span<const double> q, std::span<const double> g, std::span<const double> gc,
                            std::span<double> r) const {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
        for (std::size_t w = 0; w < q.size(); ++w) {
            if (q[w] <= 0.0) continue;
            s0 += q[w];
            s1 += q[w] * gc[w];
            s2 += q[w] * gc[w] * gc[w];
            t0 += q[w] * g[w];
            t1 += q[w] * g[w] * gc[w];
        }
        double nu = t0 / s0;
        double eta = 0.0;
        if (con_ != nullptr) {
            const double det = s0 * s2 - s1 * s1;
            if (det > 1e-13 * s0 * s2 && s2 > 0.0) {
                nu = (t0 * s2 - t1 * s1) / det;
                eta = (s0 * t1 - s1 * t0) / det;
            }
        }
        double kkt = 0.0;
        for (std::size_t w = 0; w < q.size(); ++w) {
            r[w] = q[w] > 0.0 ? g[w] - nu - eta * gc[w] : 0.0;
            kkt = std::max(kkt, std::abs(r[w]));
        }
        return kkt;
    }

    const LyObjective* obj_;
    const AveragedPotential* con_;
    OptimizerOptions opts_;
    double feas_tol_;
};

}  // namespace lgcarpet
