#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace lgcarpet {

/// Name recorded in output metadata so ports can replay the same streams.
inline constexpr const char* rng_name = "pcg32 (PCG-XSH-RR 64/32, pcg-c-basic 0.9)";

/// SplitMix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(base) ^ (index * 0xd1342543de82ef95ULL + 1));
}

/// O'Neill's pcg32 with the reference seeding procedure, plus hand-rolled
/// distributions.
class Pcg32 {
public:
    using result_type = std::uint32_t;

    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0x5851f42d4c957f2dULL) noexcept {
        state_ = 0;
        inc_ = (stream << 1U) | 1U;
        next_u32();
        state_ += seed;
        next_u32();
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return 0xffffffffU; }
    result_type operator()() noexcept { return next_u32(); }

    std::uint32_t next_u32() noexcept {
        const std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
        const auto rot = static_cast<std::uint32_t>(old >> 59U);
        return (xorshifted >> rot) | (xorshifted << ((0U - rot) & 31U));
    }

    /// Uniform on [0,1) with 53 random bits.
    double uniform() noexcept {
        const std::uint64_t a = next_u32() >> 5U;
        const std::uint64_t b = next_u32() >> 6U;
        return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) * (1.0 / 9007199254740992.0);
    }

    /// Uniform on (0,1].
    double uniform_open0() noexcept { return 1.0 - uniform(); }

    double exponential() noexcept { return -std::log(uniform_open0()); }

    /// Flat Dirichlet(1,...,1) draw of dimension k.
    std::vector<double> dirichlet1(std::size_t k) {
        std::vector<double> v(k);
        double total = 0.0;
        for (auto& x : v) {
            x = exponential();
            total += x;
        }
        for (auto& x : v) x /= total;
        return v;
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

/// Inverse-CDF lookup: smallest index with cumulative[index] > u.
inline std::size_t sample_index(std::span<const double> cumulative, double u) noexcept {
    std::size_t lo = 0;
    std::size_t hi = cumulative.size();
    const double target = u * cumulative.back();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (cumulative[mid] > target) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo < cumulative.size() ? lo : cumulative.size() - 1;
}

}  // namespace lgcarpet
