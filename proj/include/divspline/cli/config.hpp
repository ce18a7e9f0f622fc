#pragma once

// Run configuration: flat JSON file plus command-line overrides.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "divspline/errors.hpp"
#include "divspline/cases.hpp"

namespace divspline::cli {

inline const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> c{"convergence", "robustness", "pressure-robustness", "cavity",
                                            "taylor-green-2d"};
    return c;
}

struct CaseConfig {
    std::string command;
    int kPrime = 1;
    std::vector<int> meshes;        // elements per direction
    std::vector<double> reynolds;
    double delta = 1.0;
    std::optional<double> gamma;
    std::optional<double> cNit;
    double dt = 1e-2;
    double tEnd = 1.0;
    double rhoInf = 0.5;
    std::string outputDir = "out";
    int threads = 1;
    std::uint64_t seed = 0;

    double resolved_gamma() const { return gamma ? *gamma : delta * std::pow(10.0, -(kPrime + 1)); }
    double resolved_cnit() const { return cNit ? *cNit : 5.0 * (kPrime + 1); }

    StabSettings stab() const {
        StabSettings s;
        s.delta = delta;
        s.gamma = gamma;
        s.cNit = cNit;
        return s;
    }

    bool operator==(const CaseConfig&) const = default;
};

/// Per-command defaults for meshes and Reynolds numbers when not given.
inline void apply_defaults(CaseConfig& c) {
    if (c.command == "convergence") {
        if (c.meshes.empty())
            c.meshes = {4, 8, 16, 32};
        if (c.reynolds.empty())
            c.reynolds = {10.0};
    } else if (c.command == "robustness") {
        if (c.meshes.empty())
            c.meshes = {16};
        if (c.reynolds.empty())
            c.reynolds = {1.0, 10.0, 100.0, 1000.0};
    } else if (c.command == "pressure-robustness") {
        if (c.meshes.empty())
            c.meshes = {16};
        if (c.reynolds.empty())
            c.reynolds = {10.0};
    } else if (c.command == "cavity") {
        if (c.meshes.empty())
            c.meshes = {16};
        if (c.reynolds.empty())
            c.reynolds = {100.0};
    } else if (c.command == "taylor-green-2d") {
        if (c.meshes.empty())
            c.meshes = {32};
        if (c.reynolds.empty())
            c.reynolds = {100.0};
    }
}

inline void validate(const CaseConfig& c) {
    auto bad = [](const std::string& key, const std::string& why) { throw ParameterError(key + ": " + why); };
    if (c.command.empty())
        bad("command", "missing");
    if (std::find(known_commands().begin(), known_commands().end(), c.command) == known_commands().end())
        bad("command", "unknown command '" + c.command + "'");
    if (c.kPrime < 1)
        bad("kPrime", "must be >= 1");
    if (c.meshes.empty())
        bad("mesh", "empty list");
    for (int n : c.meshes)
        if (n < 1)
            bad("mesh", "element counts must be positive");
    if (c.reynolds.empty())
        bad("re", "empty list");
    for (double r : c.reynolds)
        if (!(r > 0.0))
            bad("re", "Reynolds numbers must be positive");
    if (!(c.delta > 0.0))
        bad("delta", "must be positive");
    if (c.gamma && !(*c.gamma >= 0.0))
        bad("gamma", "must be nonnegative");
    if (c.cNit && !(*c.cNit > 0.0))
        bad("cnit", "must be positive");
    if (!(c.dt > 0.0))
        bad("dt", "must be positive");
    if (!(c.tEnd > 0.0))
        bad("tend", "must be positive");
    if (c.rhoInf < 0.0 || c.rhoInf > 1.0)
        bad("rho-inf", "must lie in [0, 1]");
    if (c.threads < 1)
        bad("threads", "must be >= 1");
    if (c.command != "convergence" && c.meshes.size() != 1)
        bad("mesh", "command '" + c.command + "' takes a single mesh");
}

namespace detail {

template <class T>
T get_as(const nlohmann::json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParameterError(key + ": type mismatch (got " + std::string(v.type_name()) + ")");
    }
}

template <class T>
std::vector<T> get_list(const nlohmann::json& v, const std::string& key) {
    if (v.is_array())
        return get_as<std::vector<T>>(v, key);
    return {get_as<T>(v, key)};
}

}  // namespace detail

/// Reads a flat object. Unknown keys and wrong types raise ParameterError naming the key.
/// No defaults or validation are applied here.
inline CaseConfig config_from_json(const nlohmann::json& j, CaseConfig c = {}) {
    using detail::get_as;
    using detail::get_list;
    if (!j.is_object())
        throw ParameterError("config: expected a JSON object");
    bool hasDelta = false;
    for (const auto& [key, v] : j.items()) {
        if (key == "command")
            c.command = get_as<std::string>(v, key);
        else if (key == "kPrime")
            c.kPrime = get_as<int>(v, key);
        else if (key == "mesh")
            c.meshes = get_list<int>(v, key);
        else if (key == "re")
            c.reynolds = get_list<double>(v, key);
        else if (key == "delta") {
            c.delta = get_as<double>(v, key);
            hasDelta = true;
        } else if (key == "gamma")
            c.gamma = get_as<double>(v, key);
        else if (key == "cNit")
            c.cNit = get_as<double>(v, key);
        else if (key == "dt")
            c.dt = get_as<double>(v, key);
        else if (key == "tEnd")
            c.tEnd = get_as<double>(v, key);
        else if (key == "rhoInf")
            c.rhoInf = get_as<double>(v, key);
        else if (key == "out")
            c.outputDir = get_as<std::string>(v, key);
        else if (key == "threads")
            c.threads = get_as<int>(v, key);
        else if (key == "seed")
            c.seed = get_as<std::uint64_t>(v, key);
        else
            throw ParameterError(key + ": unknown key");
    }
    if (hasDelta && j.contains("gamma"))
        throw ParameterError("gamma: mutually exclusive with delta");
    return c;
}

inline nlohmann::json config_to_json(const CaseConfig& c) {
    nlohmann::json j;
    j["command"] = c.command;
    j["kPrime"] = c.kPrime;
    j["mesh"] = c.meshes;
    j["re"] = c.reynolds;
    if (c.gamma)
        j["gamma"] = *c.gamma;
    else
        j["delta"] = c.delta;
    if (c.cNit)
        j["cNit"] = *c.cNit;
    j["dt"] = c.dt;
    j["tEnd"] = c.tEnd;
    j["rhoInf"] = c.rhoInf;
    j["out"] = c.outputDir;
    j["threads"] = c.threads;
    j["seed"] = c.seed;
    return j;
}

inline CaseConfig load_config_file(const std::string& path, CaseConfig base = {}) {
    std::ifstream in(path);
    if (!in)
        throw ParameterError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParameterError("config: malformed JSON in '" + path + "': " + e.what());
    }
    return config_from_json(j, std::move(base));
}

}  // namespace divspline::cli
