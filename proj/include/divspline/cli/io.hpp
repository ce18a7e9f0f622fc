#pragma once

// CSV tables, legacy-VTK field dumps and the run manifest.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "divspline/cli/config.hpp"
#include "divspline/space.hpp"

#ifndef DIVSPLINE_VERSION
#define DIVSPLINE_VERSION "0.1.0-unknown"
#endif

namespace divspline::cli {

inline std::string version_string() { return DIVSPLINE_VERSION; }

/// 17 significant digits, enough to round-trip a double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

using CsvCell = std::optional<double>;  // empty prints as an empty field

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_)
            throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << "\n";
        columns_ = header.size();
    }

    void row(const std::vector<CsvCell>& cells) {
        if (cells.size() != columns_)
            throw UsageError("CsvWriter: row width does not match header");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i)
                out_ << ",";
            if (cells[i])
                out_ << format_double(*cells[i]);
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
    std::size_t columns_ = 0;
};

/// Reads a CSV written by CsvWriter back into header + rows (empty cells -> nullopt).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<CsvCell>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path.string() + "'");
    auto split = [](const std::string& line) {
        std::vector<std::string> f;
        std::size_t start = 0;
        for (;;) {
            const auto pos = line.find(',', start);
            f.push_back(line.substr(start, pos - start));
            if (pos == std::string::npos)
                break;
            start = pos + 1;
        }
        return f;
    };
    CsvTable t;
    std::string line;
    if (std::getline(in, line))
        t.header = split(line);
    while (std::getline(in, line)) {
        std::vector<CsvCell> r;
        for (const auto& s : split(line))
            r.push_back(s.empty() ? CsvCell{} : CsvCell{std::stod(s)});
        t.rows.push_back(std::move(r));
    }
    return t;
}

struct GridField {
    std::string name;
    int components = 1;  // 1 or 3
    std::vector<double> data;
};

/// Legacy VTK STRUCTURED_POINTS file with point data.
inline void write_vtk_structured_points(const std::filesystem::path& path, int nx, int ny, Point origin,
                                        Point spacing, const std::vector<GridField>& fields,
                                        const std::string& title = "divspline fields") {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << nx << " " << ny << " 1\n";
    out << "ORIGIN " << format_double(origin[0]) << " " << format_double(origin[1]) << " 0\n";
    out << "SPACING " << format_double(spacing[0]) << " " << format_double(spacing[1]) << " 1\n";
    out << "POINT_DATA " << nx * ny << "\n";
    for (const auto& f : fields) {
        if (f.data.size() != static_cast<std::size_t>(nx * ny * f.components))
            throw UsageError("write_vtk_structured_points: field '" + f.name + "' has wrong size");
        if (f.components == 3)
            out << "VECTORS " << f.name << " double\n";
        else
            out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
        for (std::size_t i = 0; i < f.data.size(); i += f.components) {
            for (int c = 0; c < f.components; ++c)
                out << (c ? " " : "") << format_double(f.data[i + c]);
            out << "\n";
        }
    }
}

/// Samples u, p and div u on a uniform (4n+1)^2 point grid (n = elements per side).
/// With `withStreamfunction`, psi(x, y) = int_0^y u1(x, s) ds is added (trapezoid rule).
inline void write_state_vtk(const std::filesystem::path& path, const DivConformingPair& pair,
                            const StateVector& state, bool withStreamfunction = false) {
    const auto& mesh = pair.mesh();
    const int nx = 4 * static_cast<int>(mesh.num_elements_x()) + 1;
    const int ny = 4 * static_cast<int>(mesh.num_elements_y()) + 1;
    const Point lo = mesh.lower(), hi = mesh.upper();
    const Point sp{(hi[0] - lo[0]) / (nx - 1), (hi[1] - lo[1]) / (ny - 1)};
    GridField u{"u", 3, {}}, p{"p", 1, {}}, div{"div", 1, {}}, psi{"psi", 1, {}};
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Point x{i == nx - 1 ? hi[0] : lo[0] + i * sp[0], j == ny - 1 ? hi[1] : lo[1] + j * sp[1]};
            const auto s = eval_velocity(pair, state, x, 1);
            const Vec2 v = s.value();
            u.data.insert(u.data.end(), {v[0], v[1], 0.0});
            p.data.push_back(eval_pressure(pair, state, x));
            div.data.push_back(s.divergence());
        }
    }
    std::vector<GridField> fields{u, p, div};
    if (withStreamfunction) {
        psi.data.assign(static_cast<std::size_t>(nx * ny), 0.0);
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const auto a = static_cast<std::size_t>(i + nx * (j - 1)), b = static_cast<std::size_t>(i + nx * j);
                psi.data[b] = psi.data[a] + 0.5 * sp[1] * (u.data[3 * a] + u.data[3 * b]);
            }
        fields.push_back(psi);
    }
    write_vtk_structured_points(path, nx, ny, lo, sp, fields);
}

/// Manifest: resolved config (parseable), derived parameters, version, wall time, artifacts.
inline nlohmann::json make_manifest(const CaseConfig& c, double wallSeconds, const std::vector<std::string>& artifacts) {
    nlohmann::json m;
    m["config"] = config_to_json(c);
    m["derived"] = {{"gamma", c.resolved_gamma()}, {"cNit", c.resolved_cnit()}, {"alphaPrime", c.kPrime - 1}};
    m["version"] = version_string();
    m["wallTimeSeconds"] = wallSeconds;
    m["artifacts"] = artifacts;
    return m;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << "\n";
}

}  // namespace divspline::cli
