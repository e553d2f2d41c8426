#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <regex>
#include <set>
#include <sstream>

#include "test_util.hpp"

using namespace lgcarpet;
using namespace testutil;
namespace fs = std::filesystem;
using lgcarpet::io::json;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(LGCARPET_CLI) + " " + args + " 2>/dev/null";
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("lgcarpet_test_io_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

std::string write_temp(const std::string& name, const std::string& text) {
    const fs::path p = scratch(name);
    io::write_file(p.string(), text);
    return p.string();
}

std::vector<std::string> csv_rows(const std::string& text) {
    std::vector<std::string> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') rows.push_back(line);
    }
    return rows;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t c = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++c;
    return c;
}

}  // namespace

TEST(Parse, ShippedSystems) {
    const LGSystem bm = io::load_system(data_path("systems/bedford_mcmullen.json"));
    EXPECT_EQ(bm.digit_count(), 3u);
    EXPECT_NEAR(bm.a(0), 1.0 / 3, 1e-16);
    EXPECT_EQ(system_hash(bm), system_hash(bedford_mcmullen()));
    const LGSystem again = io::parse_system(io::system_to_json(general()).dump());
    EXPECT_EQ(system_hash(again), system_hash(general()));
}

TEST(Parse, Reals) {
    EXPECT_EQ(io::parse_real(json(0.25), "x"), 0.25);
    EXPECT_EQ(io::parse_real(json("0.25"), "x"), 0.25);
    EXPECT_EQ(io::parse_real(json("1/4"), "x"), 0.25);
    EXPECT_THROW(io::parse_real(json("1/0"), "x"), ParseError);
    EXPECT_THROW(io::parse_real(json("abc"), "x"), ParseError);
    EXPECT_THROW(io::parse_real(json(true), "x"), ParseError);
}

TEST(Parse, Errors) {
    EXPECT_THROW(io::parse_system("{\"rows\": ["), ParseError);
    EXPECT_THROW(io::parse_system("{\"cols\": []}"), ParseError);
    EXPECT_THROW(io::parse_system("{\"rows\": [{\"b\": 0.5, \"d\": 0, \"cols\": [{\"a\": 0.6, \"c\": 0}]}]}"), InvalidInput);
    EXPECT_THROW(io::load_system("/nonexistent/system.json"), ParseError);
    try {
        io::parse_system("{\"rows\": [1, 2,, ]}");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos) << e.what();
    }
}

TEST(Parse, Potentials) {
    const LGSystem s = bedford_mcmullen();
    const Potential rep = io::load_potential(s, data_path("potentials/bm_repeat.json"));
    EXPECT_EQ(rep.order(), 2u);
    EXPECT_EQ(rep(0), 1.0);
    EXPECT_EQ(rep(1), 0.0);
    EXPECT_EQ(rep(8), 1.0);
    EXPECT_EQ(io::parse_word_key(s, "(2,1)(1,2)"), (std::vector<std::size_t>{2, 1}));
    EXPECT_THROW(io::parse_word_key(s, "(3,1)"), InvalidInput);
    EXPECT_THROW(io::parse_word_key(s, "(1,1"), ParseError);

    const json missing = json::parse(R"j({"order": 1, "values": {"(1,1)": 1, "(1,2)": 0}})j");
    try {
        io::potential_from_json(s, missing);
        FAIL();
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("(2,1)"), std::string::npos) << e.what();
    }
    const json wrong = json::parse(R"j({"order": 1, "values": {"(1,1)(1,1)": 1, "(1,2)": 0, "(2,1)": 0}})j");
    EXPECT_THROW(io::potential_from_json(s, wrong), InvalidInput);
}

TEST(Csv, InfeasibleRowKeepsAlignment) {
    SpectrumCurve curve;
    curve.alpha_min = 0.0;
    curve.alpha_max = 1.0;
    SpectrumPoint bad;
    bad.alpha = 0.0;
    bad.feasible = false;
    bad.restarts_used = 3;
    curve.points.push_back(bad);
    const LGSystem s = full_square();
    std::ostringstream os;
    io::write_spectrum_csv(os, curve, s, Potential::indicator(s, 0), 1);
    const auto rows = csv_rows(os.str());
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], "alpha,lower,upper,feasible,kkt_residual,restarts_used");
    EXPECT_EQ(rows[1], "0,,,false,,3");
}

TEST(Csv, RoundTripFormatting) {
    EXPECT_EQ(io::round_trip(0.1), "0.1");
    EXPECT_EQ(std::stod(io::round_trip(1.0 / 3)), 1.0 / 3);
    EXPECT_EQ(io::fixed9(2.0), "2.000000000");
}

TEST(Svg, RectCountAndTiling) {
    const LGSystem s = full_square();
    std::ostringstream os;
    io::write_svg(os, s, 3, 800);
    const std::string svg = os.str();
    EXPECT_EQ(count_of(svg, "<rect"), 64u);
    const std::regex rect(R"re(<rect x="([0-9.]+)" y="([0-9.]+)" width="([0-9.]+)" height="([0-9.]+)")re");
    double area = 0.0;
    std::set<std::pair<long, long>> corners;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), rect); it != std::sregex_iterator(); ++it) {
        const double w = std::stod((*it)[3]), h = std::stod((*it)[4]);
        EXPECT_EQ(w, 100.0);
        EXPECT_EQ(h, 100.0);
        area += w * h;
        corners.insert({std::lround(std::stod((*it)[1])), std::lround(std::stod((*it)[2]))});
    }
    EXPECT_EQ(area, 800.0 * 800.0);
    EXPECT_EQ(corners.size(), 64u);

    std::ostringstream g;
    io::write_svg(g, general(), 2);
    EXPECT_EQ(count_of(g.str(), "<rect"), 36u);
    EXPECT_THROW(io::write_svg(g, general(), 9), GuardExceeded);
}

TEST(Svg, DepthOneUsesFlippedCells) {
    const LGSystem g = general();
    std::ostringstream os;
    io::write_svg(os, g, 1, 1000);
    // Digit (1,1): x = 0, y flipped from d = 0 with height 400.
    EXPECT_NE(os.str().find(R"(<rect x="0.000000" y="600.000000" width="300.000000" height="400.000000"/>)"),
              std::string::npos);
}

TEST(Orbit, RoundTripAndFrequencyRecount) {
    const LGSystem g = general();
    const SymbolicOrbit orbit = sample_orbit(BlockMeasure::uniform(g), 3000, 17);
    std::ostringstream os;
    io::write_orbit(os, orbit);
    const std::string text = os.str();
    EXPECT_EQ(text.rfind("# seed=17 system_hash=" + system_hash(g), 0), 0u);
    const SymbolicOrbit back = io::read_orbit(g, text);
    ASSERT_EQ(back.size(), orbit.size());
    EXPECT_TRUE(std::equal(back.word().begin(), back.word().end(), orbit.word().begin()));
    const FrequencyVector f = frequency(orbit, 3000);
    for (std::size_t k = 0; k < g.digit_count(); ++k) {
        EXPECT_EQ(count_of(text, to_string(g.digit(k)) + "\n"), f.counts[k]);
    }
}

TEST(Manifest, Fields) {
    io::RunManifest m;
    m.command = "dim";
    m.seed = 5;
    const json j = m.to_json();
    EXPECT_EQ(j["tool_version"], tool_version);
    EXPECT_EQ(j["rng"], rng_name);
    EXPECT_EQ(j["seed"], 5);
    EXPECT_TRUE(j.contains("wall_time_seconds"));
}

TEST(Cli, ValidateExitCodes) {
    const CliResult ok = run_cli("validate " + data_path("systems/general.json"));
    EXPECT_EQ(ok.code, 0);
    const json report = json::parse(ok.out);
    EXPECT_EQ(report["valid"], true);
    EXPECT_EQ(report["digits"], 6);

    const std::string overlap =
        write_temp("overlap.json", R"j({"rows": [{"b": 0.5, "d": 0, "cols": [{"a": 0.5, "c": 0}, {"a": 0.5, "c": 0.4}]}]})j");
    const CliResult bad = run_cli("validate " + overlap);
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("column overlap in row 1"), std::string::npos) << bad.out;

    const CliResult parse = run_cli("validate " + write_temp("broken.json", "{\"rows\": [ }"));
    EXPECT_EQ(parse.code, 3);
    EXPECT_EQ(run_cli("dim " + data_path("systems/full_square.json") + " --no-such-flag").code, 2);
    EXPECT_EQ(run_cli("render " + data_path("systems/general.json") + " --depth 9").code, 4);
}

TEST(Cli, DimFullSquare) {
    const CliResult r = run_cli("dim " + data_path("systems/full_square.json"));
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "2.000000000");
}

TEST(Cli, DimRestartCountsAgree) {
    for (const char* sys : {"systems/bedford_mcmullen.json", "systems/general.json"}) {
        const CliResult one = run_cli("dim " + data_path(sys) + " --restarts 1");
        const CliResult many = run_cli("dim " + data_path(sys) + " --restarts 64");
        ASSERT_EQ(one.code, 0);
        ASSERT_EQ(many.code, 0);
        EXPECT_NEAR(std::stod(one.out), std::stod(many.out), 1e-6) << sys;
    }
}

TEST(Cli, SpectrumCsv) {
    const std::string out = scratch("spectrum.csv").string();
    const CliResult r = run_cli("spectrum " + data_path("systems/full_square.json") + " " +
                                data_path("potentials/full_square_indicator.json") + " --grid 9 --out " + out);
    ASSERT_EQ(r.code, 0);
    const auto rows = csv_rows(io::read_file(out));
    ASSERT_EQ(rows.size(), 10u);
    EXPECT_EQ(rows[1].rfind("0,", 0), 0u);
    EXPECT_NEAR(std::stod(rows[1].substr(2)), std::log(3.0) / std::log(2.0), 1e-4);
    EXPECT_EQ(rows[9].rfind("1,0,0,true,", 0), 0u) << rows[9];
    EXPECT_TRUE(fs::exists(out + ".manifest.json"));

    const CliResult c = run_cli("spectrum " + data_path("systems/full_square.json") + " " +
                                data_path("potentials/full_square_constant.json"));
    ASSERT_EQ(c.code, 0);
    EXPECT_EQ(csv_rows(c.out).size(), 2u);

    const CliResult inf = run_cli("spectrum " + data_path("systems/bedford_mcmullen.json") + " " +
                                  data_path("potentials/bm_repeat.json") + " --grid 3 --level 1 --restarts 4");
    ASSERT_EQ(inf.code, 0);
    const auto irows = csv_rows(inf.out);
    ASSERT_EQ(irows.size(), 4u);
    EXPECT_EQ(irows[1].rfind("0,,,false,,", 0), 0u) << irows[1];
}

TEST(Cli, SampleIsByteIdentical) {
    const std::string args = "sample " + data_path("systems/general.json") + " --length 2000 --seed 9";
    const CliResult a = run_cli(args);
    const CliResult b = run_cli(args);
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out, run_cli("sample " + data_path("systems/general.json") + " --length 2000 --seed 10").out);
    const LGSystem g = general();
    const SymbolicOrbit orbit = io::read_orbit(g, a.out);
    EXPECT_EQ(orbit.size(), 2000u);
    const FrequencyVector f = frequency(orbit, 2000);
    for (std::size_t k = 0; k < g.digit_count(); ++k) {
        EXPECT_EQ(count_of(a.out, to_string(g.digit(k)) + "\n"), f.counts[k]);
    }
}

TEST(Cli, BoxcountSlopeColumn) {
    const CliResult r = run_cli("boxcount " + data_path("systems/full_square.json"));
    ASSERT_EQ(r.code, 0);
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 7u);
    std::istringstream line(rows[1]);
    std::string field;
    for (int i = 0; i < 4; ++i) std::getline(line, field, ',');
    EXPECT_NEAR(std::stod(field), 2.0, 0.05);
}
