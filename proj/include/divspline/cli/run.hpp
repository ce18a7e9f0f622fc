#pragma once

// Command-line parsing and the per-command drivers.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "divspline/cases.hpp"
#include "divspline/cli/config.hpp"
#include "divspline/cli/io.hpp"

namespace divspline::cli {

namespace detail {

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& key) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            if constexpr (std::is_same_v<T, int>)
                out.push_back(std::stoi(item, &used));
            else
                out.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ParameterError(key + ": cannot parse '" + item + "'");
        }
    }
    return out;
}

}  // namespace detail

/// Parses flags (and the optional --config file they point to). Flags override the file;
/// DIVSPLINE_OUT overrides --out. Returns a validated config with defaults applied.
inline CaseConfig parse_args(int argc, const char* const* argv) {
    CLI::App app{"divspline: divergence-conforming B-spline Navier-Stokes driver"};
    std::string configPath, command, mesh, re, out;
    std::optional<int> kPrime, threads;
    std::optional<double> delta, gamma, cnit, dt, tend, rhoInf;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", configPath, "flat JSON config file");
    app.add_option("--command", command, "convergence | robustness | pressure-robustness | cavity | taylor-green-2d");
    app.add_option("--kprime", kPrime, "pressure degree k'");
    app.add_option("--mesh", mesh, "elements per direction, comma separated list for convergence");
    app.add_option("--re", re, "Reynolds number(s), comma separated");
    app.add_option("--delta", delta, "stabilization multiplier (gamma = delta 10^-(k'+1))");
    app.add_option("--gamma", gamma, "explicit gamma, 0 disables the skeleton term");
    app.add_option("--cnit", cnit, "Nitsche constant (default 5(k'+1))");
    app.add_option("--dt", dt, "time step");
    app.add_option("--tend", tend, "final time");
    app.add_option("--rho-inf", rhoInf, "generalized-alpha spectral radius");
    app.add_option("--out", out, "output directory");
    app.add_option("--threads", threads, "assembly threads");
    app.add_option("--seed", seed, "seed for randomized checks");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        std::exit(0);
    } catch (const CLI::ParseError& e) {
        throw ParameterError(std::string("flags: ") + e.what());
    }

    if (delta && gamma)
        throw ParameterError("gamma: mutually exclusive with delta");
    CaseConfig c;
    if (!configPath.empty())
        c = load_config_file(configPath);
    if (!command.empty())
        c.command = command;
    if (kPrime)
        c.kPrime = *kPrime;
    if (!mesh.empty())
        c.meshes = detail::parse_list<int>(mesh, "mesh");
    if (!re.empty())
        c.reynolds = detail::parse_list<double>(re, "re");
    if (delta) {
        c.delta = *delta;
        c.gamma.reset();
    }
    if (gamma)
        c.gamma = *gamma;
    if (cnit)
        c.cNit = *cnit;
    if (dt)
        c.dt = *dt;
    if (tend)
        c.tEnd = *tend;
    if (rhoInf)
        c.rhoInf = *rhoInf;
    if (!out.empty())
        c.outputDir = out;
    if (threads)
        c.threads = *threads;
    if (seed)
        c.seed = *seed;
    if (const char* env = std::getenv("DIVSPLINE_OUT"); env && *env)
        c.outputDir = env;
    apply_defaults(c);
    validate(c);
    return c;
}

/// Runs one command, writing CSVs, VTK fields and manifest.json into c.outputDir.
/// Returns the artifact file names.
inline std::vector<std::string> run_command(CaseConfig c, std::ostream& log = std::cout) {
    namespace fs = std::filesystem;
    apply_defaults(c);
    validate(c);
    const fs::path dir(c.outputDir);
    fs::create_directories(dir);
    set_assembly_threads(c.threads);
    std::vector<std::string> artifacts;
    const StabSettings stab = c.stab();

    if (c.command == "convergence") {
        const auto rows = run_convergence_study(c.kPrime, std::nullopt, c.meshes, c.reynolds.front(), stab);
        CsvWriter csv(dir / "convergence.csv", {"h", "L2", "L2order", "H1", "H1order"});
        for (const auto& r : rows) {
            csv.row({r.h, r.l2, r.l2Order, r.h1, r.h1Order});
            log << "h = " << r.h << "  L2 = " << r.l2 << "  H1 = " << r.h1 << "\n";
        }
        artifacts.push_back("convergence.csv");
    } else if (c.command == "robustness") {
        const auto rows = run_reynolds_robustness(c.kPrime, c.meshes.front(), c.reynolds, stab);
        CsvWriter csv(dir / "robustness.csv", {"Re", "L2", "H1"});
        for (const auto& r : rows) {
            csv.row({r.reynolds, r.l2, r.h1});
            log << "Re = " << r.reynolds << "  L2 = " << r.l2 << "  H1 = " << r.h1 << "\n";
        }
        artifacts.push_back("robustness.csv");
    } else if (c.command == "pressure-robustness") {
        ManufacturedOptions opt;
        opt.kPrime = c.kPrime;
        opt.elements = c.meshes.front();
        opt.reynolds = c.reynolds.front();
        opt.stab = stab;
        const auto r = run_pressure_robustness(opt);
        CsvWriter csv(dir / "pressure_robustness.csv", {"L2_base", "L2_perturbed", "absDiff"});
        const double diff = std::abs(r.base.errors.l2 - r.perturbed.errors.l2);
        csv.row({r.base.errors.l2, r.perturbed.errors.l2, diff});
        log << "L2 base = " << r.base.errors.l2 << "  perturbed = " << r.perturbed.errors.l2 << "  diff = " << diff
            << "\n";
        artifacts.push_back("pressure_robustness.csv");
    } else if (c.command == "cavity") {
        CavityOptions opt;
        opt.kPrime = c.kPrime;
        opt.elements = c.meshes.front();
        opt.reynolds = c.reynolds.front();
        opt.stab = stab;
        opt.newton.continuationReSteps = default_reynolds_ladder();
        const Discretization disc(opt.elements, opt.kPrime);
        const auto r = solve_cavity(disc, opt);
        CsvWriter csv(dir / "centerline.csv", {"y", "u1", "x", "u2"});
        for (std::size_t i = 0; i < r.y.size(); ++i)
            csv.row({r.y[i], r.u1[i], r.x[i], r.u2[i]});
        write_state_vtk(dir / "fields.vtk", disc.pair, r.state, true);
        log << "cavity Re = " << opt.reynolds << "  Newton residual = " << r.newton.residual
            << "  divMax = " << r.diagnostics.divMax << "  J(u,u) = " << r.skeletonEnergy << "\n";
        artifacts.insert(artifacts.end(), {"centerline.csv", "fields.vtk"});
    } else if (c.command == "taylor-green-2d") {
        TaylorGreenOptions opt;
        opt.kPrime = c.kPrime;
        opt.elements = c.meshes.front();
        opt.reynolds = c.reynolds.front();
        opt.stab = stab;
        opt.time.dt = c.dt;
        opt.time.tEnd = c.tEnd;
        opt.time.rhoInf = c.rhoInf;
        const auto r = run_taylor_green(opt);
        CsvWriter csv(dir / "diagnostics.csv", {"t", "Ek", "eps", "eps_r", "eps_m", "divMax"});
        for (const auto& d : r.series)
            csv.row({d.time, d.Ek, d.epsTotal, d.epsResolved, d.epsModel, d.divMax});
        log << "taylor-green: " << r.series.size() << " records, E_k(end) = " << r.series.back().Ek << "\n";
        artifacts.push_back("diagnostics.csv");
    } else {
        throw ParameterError("command: unknown command '" + c.command + "'");
    }
    return artifacts;
}

/// Full run: command + manifest. Returns the process exit status.
inline int run(const CaseConfig& c, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> artifacts;
    try {
        artifacts = run_command(c, log);
    } catch (const std::exception& e) {
        err << "divspline: command '" << c.command << "' failed: " << e.what() << "\n";
        return 2;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        write_json(std::filesystem::path(c.outputDir) / "manifest.json", make_manifest(c, wall, artifacts));
    } catch (const std::exception& e) {
        err << "divspline: writing manifest failed: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace divspline::cli
