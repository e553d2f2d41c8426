#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lgcarpet/errors.hpp"
#include "lgcarpet/measures.hpp"
#include "lgcarpet/oracle.hpp"
#include "lgcarpet/rng.hpp"
#include "lgcarpet/spectrum.hpp"
#include "lgcarpet/symbolic.hpp"
#include "lgcarpet/system.hpp"

namespace lgcarpet {

inline constexpr const char* tool_version = "lgcarpet 0.3.1";

namespace io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out << text;
}

inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

/// A number given as a JSON number, a decimal string ("0.25", "1e-3") or a
/// ratio string ("1/3").
inline double parse_real(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (!v.is_string()) throw ParseError(where + ": expected a number or numeric string");
    const auto s = v.get<std::string>();
    auto to_double = [&](std::string_view part) {
        double out = 0.0;
        const auto* first = part.data();
        const auto* last = part.data() + part.size();
        while (first < last && *first == ' ') ++first;
        while (last > first && last[-1] == ' ') --last;
        const auto res = std::from_chars(first, last, out);
        if (res.ec != std::errc() || res.ptr != last || first == last) {
            throw ParseError(where + ": bad number literal \"" + s + "\"");
        }
        return out;
    };
    const auto slash = s.find('/');
    if (slash == std::string::npos) return to_double(s);
    const double num = to_double(std::string_view(s).substr(0, slash));
    const double den = to_double(std::string_view(s).substr(slash + 1));
    if (den == 0.0) throw ParseError(where + ": zero denominator in \"" + s + "\"");
    return num / den;
}

inline const json& member(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + ": expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + ": missing \"" + key + "\"");
    return *it;
}

inline SystemSpec system_spec_from_json(const json& j) {
    SystemSpec spec;
    const json& rows = member(j, "rows", "system");
    if (!rows.is_array()) throw ParseError("system: \"rows\" must be an array");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::string where = "rows[" + std::to_string(r) + "]";
        RowSpec row;
        row.b = parse_real(member(rows[r], "b", where), where + ".b");
        row.d = parse_real(member(rows[r], "d", where), where + ".d");
        const json& cols = member(rows[r], "cols", where);
        if (!cols.is_array()) throw ParseError(where + ": \"cols\" must be an array");
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const std::string cw = where + ".cols[" + std::to_string(c) + "]";
            row.cols.push_back({parse_real(member(cols[c], "a", cw), cw + ".a"), parse_real(member(cols[c], "c", cw), cw + ".c")});
        }
        spec.rows.push_back(std::move(row));
    }
    return spec;
}

inline LGSystem parse_system(const std::string& text, const std::string& origin = "system") {
    return validate(system_spec_from_json(parse_json(text, origin)));
}

inline LGSystem load_system(const std::string& path) { return parse_system(read_file(path), path); }

inline json system_to_json(const LGSystem& sys) {
    json rows = json::array();
    for (const auto& row : sys.spec().rows) {
        json cols = json::array();
        for (const auto& c : row.cols) cols.push_back({{"a", c.a}, {"c", c.c}});
        rows.push_back({{"b", row.b}, {"d", row.d}, {"cols", cols}});
    }
    return {{"rows", rows}};
}

/// Digits of a key such as "(1,2)(2,1)".
inline std::vector<std::size_t> parse_word_key(const LGSystem& sys, const std::string& key) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    auto bad = [&] { return ParseError("potential: malformed word key \"" + key + "\""); };
    auto read_int = [&](int& v) {
        const auto res = std::from_chars(key.data() + pos, key.data() + key.size(), v);
        if (res.ec != std::errc()) throw bad();
        pos = static_cast<std::size_t>(res.ptr - key.data());
    };
    while (pos < key.size()) {
        if (key[pos] == ' ') {
            ++pos;
            continue;
        }
        if (key[pos] != '(') throw bad();
        ++pos;
        Digit d{};
        read_int(d.i);
        if (pos >= key.size() || key[pos] != ',') throw bad();
        ++pos;
        read_int(d.j);
        if (pos >= key.size() || key[pos] != ')') throw bad();
        ++pos;
        out.push_back(sys.index_of(d));
    }
    return out;
}

inline Potential potential_from_json(const LGSystem& sys, const json& j) {
    const json& order_v = member(j, "order", "potential");
    if (!order_v.is_number_integer() || order_v.get<long long>() < 1) throw ParseError("potential: \"order\" must be a positive integer");
    const auto r = static_cast<std::size_t>(order_v.get<long long>());
    const std::uint64_t words = checked_power(sys.digit_count(), r);
    const json& vals = member(j, "values", "potential");
    if (!vals.is_object()) throw ParseError("potential: \"values\" must be an object keyed by words");
    std::vector<double> values(static_cast<std::size_t>(words), 0.0);
    std::vector<bool> seen(values.size(), false);
    for (const auto& [key, v] : vals.items()) {
        const auto word = parse_word_key(sys, key);
        if (word.size() != r) {
            throw InvalidInput("potential: word \"" + key + "\" has length " + std::to_string(word.size()) + ", order is " + std::to_string(r));
        }
        const auto idx = static_cast<std::size_t>(encode_word(word, sys.digit_count()));
        if (seen[idx]) throw InvalidInput("potential: word \"" + key + "\" given twice");
        values[idx] = parse_real(v, "potential value \"" + key + "\"");
        seen[idx] = true;
    }
    for (std::size_t idx = 0; idx < seen.size(); ++idx) {
        if (!seen[idx]) {
            std::string key;
            for (const std::size_t k : decode_word(idx, sys.digit_count(), r)) key += to_string(sys.digit(k));
            throw InvalidInput("potential: missing value for word " + key);
        }
    }
    return {sys, r, std::move(values)};
}

inline Potential load_potential(const LGSystem& sys, const std::string& path) {
    return potential_from_json(sys, parse_json(read_file(path), path));
}

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest text that reads back to the same double.
inline std::string round_trip(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

/// Fixed nine decimals for console output.
inline std::string fixed9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// CSV writers

inline void write_spectrum_csv(std::ostream& os, const SpectrumCurve& curve, const LGSystem& sys, const Potential& pot,
                               std::uint64_t seed) {
    os << "# system_hash=" << system_hash(sys) << " potential_hash=" << pot.hash() << " m=" << curve.level
       << " seed=" << seed << " alpha_min=" << round_trip(curve.alpha_min) << " alpha_max=" << round_trip(curve.alpha_max)
       << "\n";
    os << "alpha,lower,upper,feasible,kkt_residual,restarts_used\n";
    for (const auto& p : curve.points) {
        os << round_trip(p.alpha) << ',';
        if (p.feasible) {
            os << round_trip(p.lower) << ',' << round_trip(p.upper) << ",true," << round_trip(p.kkt_residual);
        } else {
            os << ",,false,";
        }
        os << ',' << p.restarts_used << '\n';
    }
}

inline void write_bracket_csv(std::ostream& os, const std::vector<BracketLevel>& levels, double alpha, const LGSystem& sys,
                              const Potential& pot, std::uint64_t seed) {
    os << "# system_hash=" << system_hash(sys) << " potential_hash=" << pot.hash() << " alpha=" << round_trip(alpha)
       << " seed=" << seed << "\n";
    os << "m,lower,upper,slack,best_lower,best_upper,feasible,kkt_residual\n";
    for (const auto& l : levels) {
        os << l.level << ',';
        if (l.feasible) {
            os << round_trip(l.lower) << ',' << round_trip(l.upper) << ',';
        } else {
            os << ",,";
        }
        os << round_trip(l.slack) << ',';
        if (std::isfinite(l.best_lower)) os << round_trip(l.best_lower);
        os << ',';
        if (std::isfinite(l.best_upper)) os << round_trip(l.best_upper);
        os << ',' << (l.feasible ? "true" : "false") << ',';
        if (l.feasible) os << round_trip(l.kkt_residual);
        os << '\n';
    }
}

inline void write_boxcount_csv(std::ostream& os, const BoxCountReport& rep, const LGSystem& sys, std::uint64_t seed,
                               const char* sampler) {
    os << "# system_hash=" << system_hash(sys) << " seed=" << seed << " samples=" << rep.points_used
       << " depth=" << rep.depth << " sampler=" << sampler << " rng=" << rng_name << "\n";
    os << "j,scale,count,slope,residual\n";
    for (std::size_t i = 0; i < rep.counts.size(); ++i) {
        os << rep.exponents[i] << ',' << round_trip(rep.scales[i]) << ',' << rep.counts[i] << ',' << round_trip(rep.slope)
           << ',' << round_trip(rep.residual) << '\n';
    }
}

inline void write_localdim_csv(std::ostream& os, const LocalDimReport& rep, const std::vector<std::size_t>& cuts,
                               const LGSystem& sys, std::uint64_t seed) {
    os << "# system_hash=" << system_hash(sys) << " seed=" << seed << " tail_start=" << rep.tail_start
       << " tail_min=" << round_trip(rep.tail_min) << " tail_mean=" << round_trip(rep.tail_mean) << "\n";
    os << "n,L_n,log_measure,log_height,quotient\n";
    for (std::size_t i = 0; i < rep.n.size(); ++i) {
        os << rep.n[i] << ',' << cuts[rep.n[i]] << ',' << round_trip(rep.log_measure[i]) << ','
           << round_trip(rep.log_height[i]) << ',' << round_trip(rep.quotient[i]) << '\n';
    }
}

/// One "(i,j)" per line after a comment header.
inline void write_orbit(std::ostream& os, const SymbolicOrbit& orbit) {
    const LGSystem& sys = orbit.system();
    os << "# seed=" << (orbit.seed() ? std::to_string(*orbit.seed()) : std::string("none"))
       << " system_hash=" << system_hash(sys) << " rng=" << rng_name << " length=" << orbit.size() << "\n";
    for (const std::size_t k : orbit.word()) os << to_string(sys.digit(k)) << '\n';
}

/// Reads the format written by write_orbit; '#' lines are skipped.
inline SymbolicOrbit read_orbit(const LGSystem& sys, const std::string& text) {
    std::vector<std::size_t> word;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto digits = parse_word_key(sys, line);
        word.insert(word.end(), digits.begin(), digits.end());
    }
    return {sys, std::move(word)};
}

// ---------------------------------------------------------------------------
// SVG

inline constexpr std::uint64_t render_guard = 1'000'000;

/// Level-n rectangles S_w([0,1]^2) for all words of length n, y axis flipped
/// so the origin sits bottom-left. The unit square frame is a <path>, so the
/// document has exactly |D|^n <rect> elements.
inline void write_svg(std::ostream& os, const LGSystem& sys, std::size_t depth, double size = 800.0) {
    if (depth == 0) throw InvalidInput("render depth must be >= 1");
    const std::uint64_t count = checked_power(sys.digit_count(), depth, render_guard);
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(size) << "\" height=\"" << num(size)
       << "\" viewBox=\"0 0 " << num(size) << ' ' << num(size) << "\">\n";
    os << "<path d=\"M0 0H" << num(size) << "V" << num(size) << "H0Z\" fill=\"white\" stroke=\"#888\" stroke-width=\"1\"/>\n";
    os << "<g fill=\"#1f4e79\" stroke=\"none\">\n";
    const std::size_t n = sys.digit_count();
    for (std::uint64_t w = 0; w < count; ++w) {
        const auto word = decode_word(w, n, depth);
        const Rect r = rectangle(sys, word);
        os << "<rect x=\"" << num(r.x0 * size) << "\" y=\"" << num((1.0 - r.y0 - r.height) * size) << "\" width=\""
           << num(r.width * size) << "\" height=\"" << num(r.height * size) << "\"/>\n";
    }
    os << "</g>\n</svg>\n";
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
    std::string command;
    json inputs = json::object();      ///< path -> content hash
    json parameters = json::object();
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;

    json to_json() const {
        return {{"command", command}, {"tool_version", tool_version}, {"inputs", inputs}, {"parameters", parameters},
                {"seed", seed}, {"rng", rng_name}, {"wall_time_seconds", wall_seconds}};
    }
};

inline std::string content_hash(const std::string& path) { return hex64(fnv1a(read_file(path))); }

/// `<out>.manifest.json` next to the artifact.
inline void write_manifest(const std::string& out_path, const RunManifest& m) {
    write_file(out_path + ".manifest.json", m.to_json().dump(2) + "\n");
}

}  // namespace io
}  // namespace lgcarpet
