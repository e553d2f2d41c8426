#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lgcarpet/block_measure.hpp"
#include "lgcarpet/errors.hpp"
#include "lgcarpet/system.hpp"

namespace lgcarpet {

/// Entropies, Lyapunov exponents (nats) and the Ledrappier-Young value of a
/// block measure, all with respect to the shift by the block length.
struct ThermoReport {
    double h = 0.0;
    double h_v = 0.0;
    double lambda = 0.0;
    double lambda_v = 0.0;
    double dly = 0.0;
};

/// h/lambda + (1/lambda_v - 1/lambda) h_v.
inline double ly_dimension(double h, double h_v, double lambda, double lambda_v) noexcept {
    return h / lambda + (1.0 / lambda_v - 1.0 / lambda) * h_v;
}

inline double xlogx(double x) noexcept { return x > 0.0 ? x * std::log(x) : 0.0; }

inline ThermoReport thermo(const BlockMeasure& nu) {
    const LGSystem& sys = nu.system();
    const std::size_t n = sys.digit_count();
    const std::size_t p = sys.row_count();
    const std::size_t m = nu.block_length();
    ThermoReport out;
    std::map<std::uint64_t, double> rows;
    std::vector<std::size_t> word(m);
    nu.for_each([&](std::uint64_t w, double q) {
        std::uint64_t rest = w;
        double la = 0.0;
        double lb = 0.0;
        std::uint64_t rw = 0;
        for (std::size_t v = m; v-- > 0;) {
            word[v] = static_cast<std::size_t>(rest % n);
            rest /= n;
        }
        for (std::size_t v = 0; v < m; ++v) {
            la += sys.log_inv_a(word[v]);
            lb += sys.log_inv_b(word[v]);
            rw = rw * p + sys.row_of(word[v]);
        }
        out.h -= xlogx(q);
        out.lambda += q * la;
        out.lambda_v += q * lb;
        rows[rw] += q;
    });
    for (const auto& [rw, q] : rows) out.h_v -= xlogx(q);
    out.dly = ly_dimension(out.h, out.h_v, out.lambda, out.lambda_v);
    return out;
}

/// Same quantities for the shift-invariant average of nu over one block
/// period: rates divide by m, the dimension value is unchanged.
inline ThermoReport average_lift(const BlockMeasure& nu) {
    ThermoReport t = thermo(nu);
    const double m = static_cast<double>(nu.block_length());
    t.h /= m;
    t.h_v /= m;
    t.lambda /= m;
    t.lambda_v /= m;
    return t;
}

/// Dimension value and its gradient for dense weight vectors over one word
/// table. The formulas are the literal extension of the closed form to the
/// positive orthant, so the gradient is checkable by finite differences.
class LyObjective {
public:
    explicit LyObjective(WordTable table) : table_(std::move(table)), row_words_(table_.row_word_count()) {}

    const WordTable& table() const noexcept { return table_; }
    std::size_t size() const noexcept { return table_.size(); }

    ThermoReport report(std::span<const double> q) const {
        std::vector<double> rows;
        return report(q, rows);
    }

    double value(std::span<const double> q) const { return report(q).dly; }

    /// Writes dD/dq into grad and returns D(q). Zero weights are clamped to
    /// 1e-300 inside the logarithms.
    double gradient(std::span<const double> q, std::span<double> grad) const {
        std::vector<double> rows;
        const ThermoReport t = report(q, rows);
        const double inv_l = 1.0 / t.lambda;
        const double inv_lv = 1.0 / t.lambda_v;
        const double coef_v = inv_lv - inv_l;
        for (std::size_t w = 0; w < q.size(); ++w) {
            const double dh = -std::log(std::max(q[w], 1e-300)) - 1.0;
            const double row = rows[static_cast<std::size_t>(table_.row_word[w])];
            const double dhv = -std::log(std::max(row, 1e-300)) - 1.0;
            const double la = table_.log_inv_a[w];
            const double lb = table_.log_inv_b[w];
            grad[w] = dh * inv_l - t.h * la * inv_l * inv_l + (-lb * inv_lv * inv_lv + la * inv_l * inv_l) * t.h_v +
                      coef_v * dhv;
        }
        return t.dly;
    }

private:
    ThermoReport report(std::span<const double> q, std::vector<double>& rows) const {
        ThermoReport t;
        rows.assign(static_cast<std::size_t>(row_words_), 0.0);
        for (std::size_t w = 0; w < q.size(); ++w) {
            t.h -= xlogx(q[w]);
            t.lambda += q[w] * table_.log_inv_a[w];
            t.lambda_v += q[w] * table_.log_inv_b[w];
            rows[static_cast<std::size_t>(table_.row_word[w])] += q[w];
        }
        for (const double r : rows) t.h_v -= xlogx(r);
        t.dly = ly_dimension(t.h, t.h_v, t.lambda, t.lambda_v);
        return t;
    }

    WordTable table_;
    std::uint64_t row_words_;
};

/// A locally constant potential of order r: one value per word in D^r,
/// indexed by base-n word index.
class Potential {
public:
    Potential(const LGSystem& sys, std::size_t order, std::vector<double> values)
        : n_(sys.digit_count()), order_(order), values_(std::move(values)) {
        if (order == 0) throw InvalidInput("potential order must be >= 1");
        const std::uint64_t words = checked_power(n_, order);
        if (values_.size() != words) {
            throw InvalidInput("potential of order " + std::to_string(order) + " needs " + std::to_string(words) +
                               " values, got " + std::to_string(values_.size()));
        }
        for (const double v : values_) {
            if (!std::isfinite(v)) throw InvalidInput("potential values must be finite");
        }
    }

    static Potential constant(const LGSystem& sys, double value, std::size_t order = 1) {
        return {sys, order, std::vector<double>(static_cast<std::size_t>(checked_power(sys.digit_count(), order)), value)};
    }

    static Potential indicator(const LGSystem& sys, std::size_t digit) {
        std::vector<double> v(sys.digit_count(), 0.0);
        v.at(digit) = 1.0;
        return {sys, 1, std::move(v)};
    }

    std::size_t order() const noexcept { return order_; }
    std::size_t alphabet() const noexcept { return n_; }
    double operator()(std::uint64_t word) const { return values_[static_cast<std::size_t>(word)]; }
    const std::vector<double>& values() const noexcept { return values_; }

    double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
    double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

    /// s*phi + c.
    Potential affine(double s, double c) const {
        Potential out = *this;
        for (auto& v : out.values_) v = s * v + c;
        return out;
    }

    std::string hash() const {
        std::ostringstream os;
        os.precision(17);
        os << "r" << order_ << "n" << n_;
        for (const double v : values_) os << ":" << v;
        return hex64(fnv1a(os.str()));
    }

private:
    std::size_t n_;
    std::size_t order_;
    std::vector<double> values_;
};

namespace detail {

inline std::uint64_t ipow(std::uint64_t base, std::size_t e) {
    std::uint64_t out = 1;
    for (std::size_t i = 0; i < e; ++i) out *= base;
    return out;
}

/// Symbols [s, e) of a length-m base-n word.
inline std::uint64_t sub_word(std::uint64_t w, std::size_t n, std::size_t m, std::size_t s, std::size_t e) {
    return (w / ipow(n, m - e)) % ipow(n, e - s);
}

}  // namespace detail

/// Exact value of the integral of phi o sigma^l against the infinite product of
/// m-blocks, plus its gradient with respect to the block weights. The window
/// of r symbols starting at offset l mod m is split into per-block segments;
/// the integrand's law is the product of the segment marginals.
class WindowIntegral {
public:
    WindowIntegral(std::shared_ptr<const Potential> pot, std::size_t m, std::size_t shift)
        : pot_(std::move(pot)), n_(pot_->alphabet()), m_(m) {
        if (m == 0) throw InvalidInput("block length must be >= 1");
        const std::size_t r = pot_->order();
        std::size_t pos = shift % m;
        std::size_t left = r;
        while (left > 0) {
            const std::size_t len = std::min(left, m - pos);
            segments_.push_back({pos, pos + len});
            left -= len;
            pos = 0;
        }
        const std::size_t B = segments_.size();
        const std::uint64_t windows = detail::ipow(n_, r);
        parts_.resize(static_cast<std::size_t>(windows) * B);
        for (std::uint64_t x = 0; x < windows; ++x) {
            std::size_t offset = 0;
            for (std::size_t b = 0; b < B; ++b) {
                const std::size_t len = segments_[b].second - segments_[b].first;
                parts_[static_cast<std::size_t>(x) * B + b] =
                    static_cast<std::uint32_t>(detail::sub_word(x, n_, r, offset, offset + len));
                offset += len;
            }
        }
    }

    std::size_t block_span() const noexcept { return segments_.size(); }

    /// Value for an arbitrary (dense or sparse) block measure.
    double value(const BlockMeasure& nu) const {
        auto marg = marginals([&](auto&& visit) { nu.for_each(visit); });
        return evaluate(marg, nullptr);
    }

    /// Value and (optionally) gradient for a dense weight vector.
    double value(std::span<const double> q, std::span<double> grad = {}) const {
        auto marg = marginals([&](auto&& visit) {
            for (std::size_t w = 0; w < q.size(); ++w) visit(static_cast<std::uint64_t>(w), q[w]);
        });
        if (grad.empty()) return evaluate(marg, nullptr);
        std::vector<std::vector<double>> partial;
        const double v = evaluate(marg, &partial);
        for (std::size_t w = 0; w < q.size(); ++w) {
            double g = 0.0;
            for (std::size_t b = 0; b < segments_.size(); ++b) {
                const auto y = detail::sub_word(w, n_, m_, segments_[b].first, segments_[b].second);
                g += partial[b][static_cast<std::size_t>(y)];
            }
            grad[w] += g;
        }
        return v;
    }

private:
    template <typename ForEach>
    std::vector<std::vector<double>> marginals(ForEach&& for_each) const {
        std::vector<std::vector<double>> marg(segments_.size());
        for (std::size_t b = 0; b < segments_.size(); ++b) {
            marg[b].assign(static_cast<std::size_t>(detail::ipow(n_, segments_[b].second - segments_[b].first)), 0.0);
        }
        for_each([&](std::uint64_t w, double q) {
            for (std::size_t b = 0; b < segments_.size(); ++b) {
                marg[b][static_cast<std::size_t>(detail::sub_word(w, n_, m_, segments_[b].first, segments_[b].second))] += q;
            }
        });
        return marg;
    }

    double evaluate(const std::vector<std::vector<double>>& marg, std::vector<std::vector<double>>* partial) const {
        const std::size_t B = segments_.size();
        const std::size_t windows = pot_->values().size();
        if (partial != nullptr) {
            partial->resize(B);
            for (std::size_t b = 0; b < B; ++b) (*partial)[b].assign(marg[b].size(), 0.0);
        }
        double total = 0.0;
        for (std::size_t x = 0; x < windows; ++x) {
            const double phi = (*pot_)(x);
            const std::uint32_t* part = &parts_[x * B];
            double prob = 1.0;
            for (std::size_t b = 0; b < B; ++b) prob *= marg[b][part[b]];
            total += phi * prob;
            if (partial != nullptr) {
                for (std::size_t b = 0; b < B; ++b) {
                    double others = phi;
                    for (std::size_t c = 0; c < B; ++c) {
                        if (c != b) others *= marg[c][part[c]];
                    }
                    (*partial)[b][part[b]] += others;
                }
            }
        }
        return total;
    }

    std::shared_ptr<const Potential> pot_;
    std::size_t n_;
    std::size_t m_;
    std::vector<std::pair<std::size_t, std::size_t>> segments_;
    std::vector<std::uint32_t> parts_;
};

/// Integral of phi o sigma^shift against the product of nu-blocks.
inline double integrate(const BlockMeasure& nu, const Potential& pot, std::size_t shift = 0) {
    if (pot.alphabet() != nu.system().digit_count()) throw InvalidInput("potential and measure alphabets differ");
    return WindowIntegral(std::make_shared<const Potential>(pot), nu.block_length(), shift).value(nu);
}

/// The block-averaged potential A_m(phi) as a smooth function of dense
/// level-m block weights: (1/m) sum_{l<m} of the window integrals.
class AveragedPotential {
public:
    AveragedPotential(const Potential& pot, std::size_t m) : m_(m) {
        auto shared = std::make_shared<const Potential>(pot);
        for (std::size_t l = 0; l < m; ++l) windows_.emplace_back(shared, m, l);
    }

    double value(std::span<const double> q) const {
        double s = 0.0;
        for (const auto& w : windows_) s += w.value(q);
        return s / static_cast<double>(m_);
    }

    double gradient(std::span<const double> q, std::span<double> grad) const {
        std::fill(grad.begin(), grad.end(), 0.0);
        double s = 0.0;
        for (const auto& w : windows_) s += w.value(q, grad);
        const double inv = 1.0 / static_cast<double>(m_);
        for (auto& g : grad) g *= inv;
        return s * inv;
    }

    /// True when every window lies inside one block (the value is linear in q).
    bool is_linear() const noexcept {
        return std::all_of(windows_.begin(), windows_.end(), [](const WindowIntegral& w) { return w.block_span() == 1; });
    }

private:
    std::size_t m_;
    std::vector<WindowIntegral> windows_;
};

/// Integral of A_m(phi) against nu, m = block length of nu.
inline double integrate_avg(const BlockMeasure& nu, const Potential& pot) {
    double s = 0.0;
    for (std::size_t l = 0; l < nu.block_length(); ++l) s += integrate(nu, pot, l);
    return s / static_cast<double>(nu.block_length());
}

/// Oscillation of A_m(phi) over m-cylinders. A_m(phi) has order m-1+r, so the
/// maximum is a finite enumeration grouped by the first m symbols.
inline double var_avg(const LGSystem& sys, const Potential& pot, std::size_t m) {
    if (m == 0) throw InvalidInput("var_avg: m must be >= 1");
    const std::size_t n = sys.digit_count();
    const std::size_t r = pot.order();
    const std::size_t len = m - 1 + r;
    const std::uint64_t total = checked_power(n, len);
    const std::uint64_t tail = detail::ipow(n, len - m);
    const std::uint64_t groups = total / tail;
    std::vector<double> lo(static_cast<std::size_t>(groups), std::numeric_limits<double>::infinity());
    std::vector<double> hi(static_cast<std::size_t>(groups), -std::numeric_limits<double>::infinity());
    const std::uint64_t rmod = detail::ipow(n, r);
    for (std::uint64_t x = 0; x < total; ++x) {
        double s = 0.0;
        for (std::size_t l = 0; l < m; ++l) s += pot((x / detail::ipow(n, len - l - r)) % rmod);
        s /= static_cast<double>(m);
        const auto g = static_cast<std::size_t>(x / tail);
        lo[g] = std::min(lo[g], s);
        hi[g] = std::max(hi[g], s);
    }
    double out = 0.0;
    for (std::size_t g = 0; g < lo.size(); ++g) out = std::max(out, hi[g] - lo[g]);
    return out;
}

}  // namespace lgcarpet
