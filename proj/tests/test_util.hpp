#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lgcarpet/lgcarpet.hpp"

namespace testutil {

using namespace lgcarpet;

inline std::string data_path(const std::string& rel) { return std::string(LGCARPET_DATA_DIR) + "/" + rel; }

inline LGSystem full_square() {
    return validate({{{0.5, 0.0, {{0.5, 0.0}, {0.5, 0.5}}}, {0.5, 0.5, {{0.5, 0.0}, {0.5, 0.5}}}}});
}

/// Rows with two and one cells, a = 1/3, b = 1/2.
inline LGSystem bedford_mcmullen() {
    return validate({{{0.5, 0.0, {{1.0 / 3, 0.0}, {1.0 / 3, 1.0 / 3}}}, {0.5, 0.5, {{1.0 / 3, 0.0}}}}});
}

inline LGSystem general() { return io::load_system(data_path("systems/general.json")); }

inline LGSystem single_digit() { return validate({{{0.5, 0.25, {{0.4, 0.3}}}}}); }

/// McMullen's column-count formula for the instance above.
inline double bm_closed_form() { return std::log2(std::pow(2.0, std::log(2.0) / std::log(3.0)) + 1.0); }

inline std::vector<double> random_interior(Pcg32& rng, std::size_t K) {
    std::vector<double> q = rng.dirichlet1(K);
    for (auto& x : q) x = 0.9 * x + 0.1 / static_cast<double>(K);
    return q;
}

inline std::vector<std::size_t> random_word(Pcg32& rng, std::size_t n, std::size_t len) {
    std::vector<std::size_t> w(len);
    for (auto& k : w) k = static_cast<std::size_t>(rng.next_u32() % n);
    return w;
}

}  // namespace testutil
