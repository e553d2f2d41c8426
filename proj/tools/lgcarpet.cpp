// Command-line front end for the lgcarpet library.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lgcarpet/lgcarpet.hpp"

namespace {

using namespace lgcarpet;
using nlohmann::json;

enum ExitCode : int { ok = 0, invalid = 2, parse = 3, guard = 4, not_converged = 5 };

struct Common {
    std::string out;
    std::uint64_t seed = 1;
    std::size_t threads = 0;
    std::size_t restarts = 32;
};

OptimizerOptions optimizer(const Common& c) {
    OptimizerOptions o;
    o.seed = c.seed;
    o.threads = c.threads;
    o.restarts = c.restarts;
    return o;
}

/// Writes `body` to --out (plus manifest) or to stdout.
void emit(const Common& c, const std::string& body, io::RunManifest manifest,
          std::chrono::steady_clock::time_point start) {
    if (c.out.empty()) {
        std::cout << body;
        return;
    }
    io::write_file(c.out, body);
    manifest.seed = c.seed;
    manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_manifest(c.out, manifest);
}

io::RunManifest manifest_for(const std::string& command, const std::vector<std::string>& inputs) {
    io::RunManifest m;
    m.command = command;
    for (const auto& path : inputs) m.inputs[path] = io::content_hash(path);
    return m;
}

std::vector<double> parse_weights(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(io::parse_real(json(item), "--weights"));
    return out;
}

/// The measure a sampling command draws from: explicit weights or the
/// dimension maximizer.
BlockMeasure sampling_measure(const LGSystem& sys, const std::string& weights, const Common& c) {
    if (!weights.empty()) return {sys, 1, parse_weights(weights)};
    return carpet_dimension(sys, optimizer(c)).measure(sys);
}

void add_common(CLI::App* cmd, Common& c, bool optimizer_flags) {
    cmd->add_option("--out", c.out, "Output file (stdout when omitted)");
    cmd->add_option("--seed", c.seed, "Base seed")->capture_default_str();
    cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->capture_default_str();
    if (optimizer_flags) cmd->add_option("--restarts", c.restarts, "Random restarts per solve")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dimensions and Birkhoff spectra of Lalley-Gatzouras carpets"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    Common common;
    std::string system_path;
    std::string potential_path;
    std::size_t grid = 17;
    std::size_t level = 1;
    std::size_t max_level = 3;
    std::size_t depth = 3;
    std::size_t samples = 100'000;
    std::size_t point_depth = 64;
    int j_min = 3;
    int j_max = 8;
    std::string sampler = "stratified";
    std::size_t length = 10'000;
    std::string weights;
    double alpha = 0.0;

    auto* validate_cmd = app.add_subcommand("validate", "Check a system file and print derived quantities");
    validate_cmd->add_option("system", system_path, "System JSON")->required();
    add_common(validate_cmd, common, false);

    auto* dim_cmd = app.add_subcommand("dim", "Carpet dimension and its maximizing Bernoulli weights");
    dim_cmd->add_option("system", system_path, "System JSON")->required();
    add_common(dim_cmd, common, true);

    auto* spectrum_cmd = app.add_subcommand("spectrum", "Birkhoff spectrum brackets on a uniform alpha grid");
    spectrum_cmd->add_option("system", system_path, "System JSON")->required();
    spectrum_cmd->add_option("potential", potential_path, "Potential JSON")->required();
    spectrum_cmd->add_option("--grid", grid, "Grid points")->capture_default_str();
    spectrum_cmd->add_option("--level", level, "Block length m")->capture_default_str();
    add_common(spectrum_cmd, common, true);

    auto* bracket_cmd = app.add_subcommand("bracket", "Lower/upper spectrum brackets for m = 1..max-level");
    bracket_cmd->add_option("system", system_path, "System JSON")->required();
    bracket_cmd->add_option("potential", potential_path, "Potential JSON")->required();
    bracket_cmd->add_option("--alpha", alpha, "Target Birkhoff average")->required();
    bracket_cmd->add_option("--max-level", max_level, "Largest block length")->capture_default_str();
    add_common(bracket_cmd, common, true);

    auto* render_cmd = app.add_subcommand("render", "SVG of the level-n rectangles");
    render_cmd->add_option("system", system_path, "System JSON")->required();
    render_cmd->add_option("--depth", depth, "Word length n")->capture_default_str();
    add_common(render_cmd, common, false);

    auto* box_cmd = app.add_subcommand("boxcount", "Monte-Carlo box-counting slope");
    box_cmd->add_option("system", system_path, "System JSON")->required();
    box_cmd->add_option("--samples", samples, "Sample points")->capture_default_str();
    box_cmd->add_option("--depth", point_depth, "Digits per point")->capture_default_str();
    box_cmd->add_option("--jmin", j_min, "Coarsest scale exponent")->capture_default_str();
    box_cmd->add_option("--jmax", j_max, "Finest scale exponent")->capture_default_str();
    box_cmd->add_option("--sampler", sampler, "stratified or iid")
        ->check(CLI::IsMember({"stratified", "iid"}))
        ->capture_default_str();
    add_common(box_cmd, common, false);

    auto* sample_cmd = app.add_subcommand("sample", "Sample a symbolic orbit");
    sample_cmd->add_option("system", system_path, "System JSON")->required();
    sample_cmd->add_option("--length", length, "Orbit length")->capture_default_str();
    sample_cmd->add_option("--weights", weights, "Comma-separated digit weights (default: dimension maximizer)");
    add_common(sample_cmd, common, false);

    auto* localdim_cmd = app.add_subcommand("localdim", "Local-dimension quotients along a sampled orbit");
    localdim_cmd->add_option("system", system_path, "System JSON")->required();
    localdim_cmd->add_option("--length", length, "Orbit length n_max")->capture_default_str();
    localdim_cmd->add_option("--weights", weights, "Comma-separated digit weights (default: dimension maximizer)");
    add_common(localdim_cmd, common, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return invalid;
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        if (*validate_cmd) {
            json report;
            try {
                const LGSystem sys = io::load_system(system_path);
                report = {{"valid", true},
                          {"digits", sys.digit_count()},
                          {"rows", sys.row_count()},
                          {"a_min", sys.a_min()},
                          {"b_max", sys.b_max()},
                          {"two_dimensional", sys.is_two_dimensional()},
                          {"disjoint_closure", sys.has_disjoint_closure()},
                          {"system_hash", system_hash(sys)}};
            } catch (const InvalidInput& e) {
                std::cout << json{{"valid", false}, {"error", e.what()}}.dump(2) << "\n";
                std::cerr << "invalid: " << e.what() << "\n";
                return invalid;
            }
            emit(common, report.dump(2) + "\n", manifest_for("validate", {system_path}), start);
            if (!common.out.empty()) std::cout << "valid\n";
            return ok;
        }

        const LGSystem sys = io::load_system(system_path);

        if (*dim_cmd) {
            const DimensionResult d = carpet_dimension(sys, optimizer(common));
            std::ostringstream text;
            text << io::fixed9(d.value) << "\n";
            json argmax = json::object();
            for (std::size_t k = 0; k < sys.digit_count(); ++k) {
                text << to_string(sys.digit(k)) << ' ' << io::fixed9(d.argmax[k]) << "\n";
                argmax[to_string(sys.digit(k))] = d.argmax[k];
            }
            if (!common.out.empty()) {
                const json doc{{"dimension", d.value},     {"argmax", argmax},
                               {"kkt_residual", d.kkt_residual}, {"converged", d.converged},
                               {"restarts_used", d.restarts_used}, {"system_hash", system_hash(sys)}};
                auto m = manifest_for("dim", {system_path});
                m.parameters = {{"restarts", common.restarts}};
                emit(common, doc.dump(2) + "\n", m, start);
            }
            std::cout << text.str();
            if (!d.converged) {
                std::cerr << "warning: KKT residual " << d.kkt_residual << " above tolerance\n";
                return not_converged;
            }
            return ok;
        }

        if (*spectrum_cmd) {
            const Potential pot = io::load_potential(sys, potential_path);
            const SpectrumCurve curve = spectrum_curve(sys, pot, grid, level, optimizer(common));
            std::ostringstream csv;
            io::write_spectrum_csv(csv, curve, sys, pot, common.seed);
            auto m = manifest_for("spectrum", {system_path, potential_path});
            m.parameters = {{"grid", grid}, {"level", level}, {"restarts", common.restarts}};
            emit(common, csv.str(), m, start);
            if (!common.out.empty()) {
                std::cout << "alpha_range " << io::fixed9(curve.alpha_min) << ' ' << io::fixed9(curve.alpha_max) << "\n";
                std::cout << "points " << curve.points.size() << "\n";
            }
            if (!curve.all_converged()) {
                std::cerr << "warning: some grid points did not reach the KKT tolerance\n";
                return not_converged;
            }
            return ok;
        }

        if (*bracket_cmd) {
            const Potential pot = io::load_potential(sys, potential_path);
            const auto levels = bracket_refine(sys, pot, alpha, max_level, optimizer(common));
            std::ostringstream csv;
            io::write_bracket_csv(csv, levels, alpha, sys, pot, common.seed);
            auto m = manifest_for("bracket", {system_path, potential_path});
            m.parameters = {{"alpha", alpha}, {"max_level", max_level}, {"restarts", common.restarts}};
            emit(common, csv.str(), m, start);
            const bool all = std::all_of(levels.begin(), levels.end(), [](const BracketLevel& l) { return l.converged; });
            if (!all) {
                std::cerr << "warning: some levels did not reach the KKT tolerance\n";
                return not_converged;
            }
            return ok;
        }

        if (*render_cmd) {
            std::ostringstream svg;
            io::write_svg(svg, sys, depth);
            auto m = manifest_for("render", {system_path});
            m.parameters = {{"depth", depth}};
            emit(common, svg.str(), m, start);
            return ok;
        }

        if (*box_cmd) {
            BoxCountOptions o;
            o.samples = samples;
            o.depth = point_depth;
            o.j_min = j_min;
            o.j_max = j_max;
            o.seed = common.seed;
            o.threads = common.threads;
            o.sampler = sampler == "iid" ? BoxSampler::iid : BoxSampler::stratified;
            const BoxCountReport rep = box_count(sys, o);
            std::ostringstream csv;
            io::write_boxcount_csv(csv, rep, sys, common.seed, sampler.c_str());
            auto m = manifest_for("boxcount", {system_path});
            m.parameters = {{"samples", samples}, {"depth", point_depth}, {"jmin", j_min}, {"jmax", j_max}, {"sampler", sampler}};
            emit(common, csv.str(), m, start);
            if (!common.out.empty()) std::cout << "slope " << io::fixed9(rep.slope) << "\n";
            return ok;
        }

        if (*sample_cmd) {
            const BlockMeasure nu = sampling_measure(sys, weights, common);
            const SymbolicOrbit orbit = sample_orbit(nu, length, common.seed);
            std::ostringstream text;
            io::write_orbit(text, orbit);
            auto m = manifest_for("sample", {system_path});
            m.parameters = {{"length", length}, {"weights", weights}};
            emit(common, text.str(), m, start);
            return ok;
        }

        if (*localdim_cmd) {
            const BlockMeasure nu = sampling_measure(sys, weights, common);
            const SymbolicOrbit orbit = sample_orbit(nu, length, common.seed);
            const LocalDimReport rep = local_dimension(nu, orbit, length);
            std::ostringstream csv;
            io::write_localdim_csv(csv, rep, cutting_indices(orbit, length), sys, common.seed);
            auto m = manifest_for("localdim", {system_path});
            m.parameters = {{"length", length}, {"weights", weights}};
            emit(common, csv.str(), m, start);
            if (!common.out.empty()) {
                std::cout << "tail_min " << io::fixed9(rep.tail_min) << "\n";
                std::cout << "measure_dimension " << io::fixed9(thermo(nu).dly) << "\n";
            }
            return ok;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return parse;
    } catch (const GuardExceeded& e) {
        std::cerr << "guard exceeded: " << e.what() << "\n";
        return guard;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return invalid;
    } catch (const std::out_of_range& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return invalid;
    }
    return ok;
}
