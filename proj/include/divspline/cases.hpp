#pragma once

// Benchmark problems and diagnostics: manufactured solution, lid-driven cavity,
// 2D Taylor-Green vortex, error norms, kinetic energy and dissipation rates.

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "divspline/dual.hpp"
#include "divspline/solver.hpp"

namespace divspline {

// ---------------------------------------------------------------------------
// Manufactured solution on [0,1]^2.
//
// Velocity derives from the stream function g(x) psi(y) with g = e^x x^2 (x-1)^2,
// psi = y^2 (y-1)^2, so it is solenoidal and vanishes on the boundary.
// ---------------------------------------------------------------------------
namespace manufactured {

template <class S>
S u1(const S& x, const S& y) {
    using std::exp;
    return 2.0 * exp(x) * (x - 1.0) * (x - 1.0) * x * x * (y * y - y) * (2.0 * y - 1.0);
}

template <class S>
S u2(const S& x, const S& y) {
    using std::exp;
    return -1.0 * exp(x) * (x - 1.0) * x * (x * x + 3.0 * x - 2.0) * (y - 1.0) * (y - 1.0) * y * y;
}

template <class S>
S p(const S& x, const S& y) {
    using std::exp;
    const S s = y * y - y;
    const S x2 = x * x, x3 = x2 * x, x4 = x3 * x;
    return -424.0 + 156.0 * std::numbers::e +
           s * (-456.0 + exp(x) * (456.0 + x2 * (228.0 - 5.0 * s) + 2.0 * x * (-228.0 + s) +
                                   2.0 * x3 * (-36.0 + s) + x4 * (12.0 + s)));
}

inline Vec2 velocity(const Point& x) { return {u1(x[0], x[1]), u2(x[0], x[1])}; }

inline double pressure(const Point& x) { return p(x[0], x[1]); }

inline Mat2 velocity_gradient(const Point& x) {
    const auto g1 = ad_gradient([](auto a, auto b) { return u1(a, b); }, x[0], x[1]);
    const auto g2 = ad_gradient([](auto a, auto b) { return u2(a, b); }, x[0], x[1]);
    return {{g1, g2}};
}

/// f = div(u (x) u) + grad p - 2 nu div(sym grad u), all derivatives by AD.
inline Vec2 forcing(const Point& x, double nu) {
    const auto grad = velocity_gradient(x);
    const auto gp = ad_gradient([](auto a, auto b) { return p(a, b); }, x[0], x[1]);
    const auto h1 = ad_hessian([](auto a, auto b) { return u1(a, b); }, x[0], x[1]);
    const auto h2 = ad_hessian([](auto a, auto b) { return u2(a, b); }, x[0], x[1]);
    const Vec2 u = velocity(x);
    const double div = grad[0][0] + grad[1][1];
    const std::array<Mat2, 2> hess{h1, h2};
    Vec2 f{};
    for (std::size_t i = 0; i < 2; ++i) {
        // d_j (u_i u_j) = u_j d_j u_i + u_i div u
        double adv = u[i] * div;
        for (std::size_t j = 0; j < 2; ++j)
            adv += u[j] * grad[i][j];
        // 2 div(sym grad u)_i = lap u_i + d_i div u
        double visc = hess[i][0][0] + hess[i][1][1];
        for (std::size_t j = 0; j < 2; ++j)
            visc += hess[j][i][j];
        f[i] = adv + gp[i] - nu * visc;
    }
    return f;
}

}  // namespace manufactured

/// Irrotational perturbation grad(sin(pi x y)).
inline Vec2 pressure_perturbation(const Point& x) {
    const double c = std::numbers::pi * std::cos(std::numbers::pi * x[0] * x[1]);
    return {c * x[1], c * x[0]};
}

/// Lid-driven cavity data: (1, 0) on the lid y = 1, no slip elsewhere.
inline Vec2 cavity_lid(const Point& x) { return x[1] >= 1.0 - 1e-12 ? Vec2{1.0, 0.0} : Vec2{0.0, 0.0}; }

namespace taylor_green {

inline Vec2 velocity(const Point& x, double t = 0.0, double nu = 0.0) {
    const double decay = std::exp(-2.0 * nu * t);
    return {decay * std::sin(x[0]) * std::cos(x[1]), -decay * std::cos(x[0]) * std::sin(x[1])};
}

inline double energy(double t, double nu) { return 0.25 * std::exp(-4.0 * nu * t); }

}  // namespace taylor_green

// ---------------------------------------------------------------------------
// Norms and diagnostics
// ---------------------------------------------------------------------------

struct ErrorNorms {
    double l2 = 0.0;
    double h1semi = 0.0;
};

using GradientField = std::function<Mat2(const Point&)>;

/// ||u - u_h||_L2 and |u - u_h|_H1 with (k'+3) Gauss points per direction.
inline ErrorNorms error_norms(const DivConformingPair& pair, const StateVector& state, const VectorField& exact,
                              const GradientField& exactGrad, std::optional<int> npts = std::nullopt) {
    const auto rule = gauss_rule(npts.value_or(pair.k_prime() + 3));
    double l2 = 0.0, h1 = 0.0;
    for (const auto& e : pair.mesh().elements()) {
        const auto q = element_quadrature(e, rule);
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto s = sample_velocity(eval_velocity_basis(pair, e, q.points[k], 1), state.u, 1);
            const Vec2 u = exact(q.points[k]);
            const Mat2 g = exactGrad(q.points[k]);
            const Vec2 uh = s.value();
            const Mat2 gh = s.gradient();
            for (std::size_t i = 0; i < 2; ++i) {
                l2 += q.weights[k] * (u[i] - uh[i]) * (u[i] - uh[i]);
                for (std::size_t j = 0; j < 2; ++j)
                    h1 += q.weights[k] * (g[i][j] - gh[i][j]) * (g[i][j] - gh[i][j]);
            }
        }
    }
    return {std::sqrt(l2), std::sqrt(h1)};
}

struct DiagnosticsRecord {
    double time = 0.0;
    double Ek = 0.0;
    double epsTotal = 0.0;
    double epsResolved = 0.0;
    double epsModel = 0.0;
    double divMax = 0.0;
    std::optional<double> L2err;
    std::optional<double> H1semiErr;
};

/// Pointwise quantities of one state (everything except epsTotal).
struct InstantDiagnostics {
    double Ek = 0.0;
    double epsResolved = 0.0;
    double epsModel = 0.0;
    double divMax = 0.0;
    double l2Norm = 0.0;
    double symGradNorm = 0.0;  // ||sym grad u_h||
};

inline InstantDiagnostics instant_diagnostics(const DivConformingPair& pair, const StateVector& state,
                                              const StabParams& params) {
    const auto& mesh = pair.mesh();
    const auto rule = gauss_rule(default_quadrature_points(pair));
    double l2 = 0.0, sg = 0.0, divMax = 0.0;
    for (const auto& e : mesh.elements()) {
        const auto q = element_quadrature(e, rule);
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto s = sample_velocity(eval_velocity_basis(pair, e, q.points[k], 1), state.u, 1);
            const Vec2 u = s.value();
            const Mat2 g = s.gradient();
            l2 += q.weights[k] * (u[0] * u[0] + u[1] * u[1]);
            const double off = 0.5 * (g[0][1] + g[1][0]);
            sg += q.weights[k] * (g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * off * off);
            divMax = std::max(divMax, std::abs(s.divergence()));
        }
    }
    const double vol = mesh.area();
    InstantDiagnostics d;
    d.l2Norm = std::sqrt(l2);
    d.symGradNorm = std::sqrt(sg);
    d.Ek = l2 / (2.0 * vol);
    d.epsResolved = 2.0 * params.nu * sg / vol;
    d.epsModel = params.gamma == 0.0 ? 0.0 : state.u.dot(assemble_skeleton(pair, state.u, params) * state.u) / vol;
    d.divMax = divMax;
    return d;
}

/// Fills epsTotal from the E_k series.
inline void fill_total_dissipation(std::vector<DiagnosticsRecord>& recs) {
    if (recs.size() < 3)
        throw InsufficientDataError("energy_and_dissipation: need at least 3 time levels for eps");
    const std::size_t n = recs.size();
    const double dt = recs[1].time - recs[0].time;
    recs[0].epsTotal = -(-3.0 * recs[0].Ek + 4.0 * recs[1].Ek - recs[2].Ek) / (2.0 * dt);
    for (std::size_t i = 1; i + 1 < n; ++i)
        recs[i].epsTotal = -(recs[i + 1].Ek - recs[i - 1].Ek) / (2.0 * dt);
    recs[n - 1].epsTotal = -(3.0 * recs[n - 1].Ek - 4.0 * recs[n - 2].Ek + recs[n - 3].Ek) / (2.0 * dt);
}

/// E_k, eps_r, eps_m per state and eps = -dE_k/dt by centered differences
/// (second-order one-sided at the ends). Assumes uniform spacing in time.
inline std::vector<DiagnosticsRecord> energy_and_dissipation(const DivConformingPair& pair,
                                                             const std::vector<StateVector>& history,
                                                             const StabParams& params) {
    std::vector<DiagnosticsRecord> out;
    for (const auto& s : history) {
        const auto d = instant_diagnostics(pair, s, params);
        DiagnosticsRecord r;
        r.time = s.time;
        r.Ek = d.Ek;
        r.epsResolved = d.epsResolved;
        r.epsModel = d.epsModel;
        r.divMax = d.divMax;
        out.push_back(r);
    }
    fill_total_dissipation(out);
    return out;
}

// ---------------------------------------------------------------------------
// Case runners
// ---------------------------------------------------------------------------

/// Stabilization settings shared by all cases.
struct StabSettings {
    std::optional<double> gamma;  // overrides delta
    double delta = 1.0;
    std::optional<double> cNit;

    StabParams resolve(int kPrime, double nu) const {
        StabParams p = StabParams::from_delta(kPrime, nu, delta);
        if (gamma)
            p.gamma = *gamma;
        if (cNit)
            p.cNit = *cNit;
        return p;
    }
};

struct Discretization {
    CartesianMesh mesh;
    DivConformingPair pair;

    Discretization(int n, int kPrime, std::array<double, 2> lo = {0.0, 0.0}, std::array<double, 2> hi = {1.0, 1.0})
        : mesh(uniform_mesh(n, n, lo, hi)), pair(mesh, kPrime) {}
    Discretization(const Discretization&) = delete;
    Discretization& operator=(const Discretization&) = delete;
};

struct ManufacturedOptions {
    int kPrime = 1;
    int elements = 16;
    double reynolds = 10.0;
    StabSettings stab;
    bool addGradientPerturbation = false;
    bool convection = true;
    NewtonConfig newton;
    int loadQuadPoints = 0;
};

struct ManufacturedResult {
    StateVector state;
    ErrorNorms errors;
    NewtonReport newton;
    double h = 0.0;
    InstantDiagnostics diagnostics;
};

inline FlowProblem manufactured_problem(const DivConformingPair& pair, const ManufacturedOptions& opt, double nu) {
    FlowProblem prob;
    prob.pair = &pair;
    prob.params = opt.stab.resolve(opt.kPrime, nu);
    prob.convection = opt.convection;
    prob.loadQuadPoints = opt.loadQuadPoints;
    const bool perturb = opt.addGradientPerturbation;
    const bool conv = opt.convection;
    prob.forcing = [nu, perturb, conv](const Point& x) {
        Vec2 f = manufactured::forcing(x, nu);
        if (!conv) {
            // Stokes: drop the advective part of the manufactured forcing.
            const Vec2 u = manufactured::velocity(x);
            const Mat2 g = manufactured::velocity_gradient(x);
            for (std::size_t i = 0; i < 2; ++i)
                f[i] -= u[0] * g[i][0] + u[1] * g[i][1];
        }
        if (perturb) {
            const Vec2 d = pressure_perturbation(x);
            f[0] += d[0];
            f[1] += d[1];
        }
        return f;
    };
    return prob;
}

inline ManufacturedResult solve_manufactured(const ManufacturedOptions& opt) {
    const Discretization disc(opt.elements, opt.kPrime);
    ManufacturedResult res;
    res.state = newton_steady(
        [&](double nu) { return FlowSystem(manufactured_problem(disc.pair, opt, nu)); }, opt.reynolds, opt.newton,
        std::nullopt, &res.newton);
    res.errors = error_norms(disc.pair, res.state, manufactured::velocity, manufactured::velocity_gradient);
    res.h = disc.mesh.h();
    res.diagnostics = instant_diagnostics(disc.pair, res.state, opt.stab.resolve(opt.kPrime, 1.0 / opt.reynolds));
    return res;
}

/// gamma table per degree for the manufactured convergence study.
inline double table_gamma(int kPrime) { return std::pow(10.0, -(kPrime + 1)); }

struct ConvergenceRow {
    int elements = 0;
    double h = 0.0;
    double l2 = 0.0;
    std::optional<double> l2Order;
    double h1 = 0.0;
    std::optional<double> h1Order;
};

inline std::vector<ConvergenceRow> run_convergence_study(int kPrime, std::optional<double> gamma,
                                                         const std::vector<int>& meshes, double reynolds,
                                                         const StabSettings& base = {},
                                                         const NewtonConfig& newton = {}) {
    std::vector<ConvergenceRow> rows;
    for (int n : meshes) {
        ManufacturedOptions opt;
        opt.kPrime = kPrime;
        opt.elements = n;
        opt.reynolds = reynolds;
        opt.stab = base;
        if (gamma)
            opt.stab.gamma = gamma;
        opt.newton = newton;
        ManufacturedResult r;
        try {
            r = solve_manufactured(opt);
        } catch (const std::exception& e) {
            throw std::runtime_error("convergence study failed on mesh " + std::to_string(n) + "x" +
                                     std::to_string(n) + ": " + e.what());
        }
        ConvergenceRow row;
        row.elements = n;
        row.h = r.h;
        row.l2 = r.errors.l2;
        row.h1 = r.errors.h1semi;
        if (!rows.empty()) {
            const auto& prev = rows.back();
            const double ratio = std::log(prev.h / row.h);
            row.l2Order = std::log(prev.l2 / row.l2) / ratio;
            row.h1Order = std::log(prev.h1 / row.h1) / ratio;
        }
        rows.push_back(row);
    }
    return rows;
}

struct RobustnessRow {
    double reynolds = 0.0;
    double l2 = 0.0;
    double h1 = 0.0;
};

inline std::vector<RobustnessRow> run_reynolds_robustness(int kPrime, int elements, const std::vector<double>& reList,
                                                          const StabSettings& stab, NewtonConfig newton = {}) {
    std::vector<RobustnessRow> rows;
    if (newton.continuationReSteps.empty())
        newton.continuationReSteps = {1.0, 10.0, 100.0};
    for (double re : reList) {
        ManufacturedOptions opt;
        opt.kPrime = kPrime;
        opt.elements = elements;
        opt.reynolds = re;
        opt.stab = stab;
        opt.newton = newton;
        const auto r = solve_manufactured(opt);
        rows.push_back({re, r.errors.l2, r.errors.h1semi});
    }
    return rows;
}

struct PressureRobustnessResult {
    ManufacturedResult base, perturbed;
    double coefficientChange = 0.0;  // ||u_pert - u_base|| / ||u_base||
};

inline PressureRobustnessResult run_pressure_robustness(ManufacturedOptions opt) {
    PressureRobustnessResult r;
    opt.addGradientPerturbation = false;
    r.base = solve_manufactured(opt);
    opt.addGradientPerturbation = true;
    r.perturbed = solve_manufactured(opt);
    r.coefficientChange = (r.perturbed.state.u - r.base.state.u).norm() / r.base.state.u.norm();
    return r;
}

struct CavityOptions {
    int kPrime = 1;
    int elements = 16;
    double reynolds = 100.0;
    StabSettings stab;
    bool convection = true;
    NewtonConfig newton;
    int profilePoints = 257;
};

struct CavityResult {
    StateVector state;
    NewtonReport newton;
    InstantDiagnostics diagnostics;
    double skeletonEnergy = 0.0;  // J(u, u)
    std::vector<double> y, u1;    // u1(0.5, y)
    std::vector<double> x, u2;    // u2(x, 0.5)
};

inline FlowProblem cavity_problem(const DivConformingPair& pair, const CavityOptions& opt, double nu) {
    FlowProblem prob;
    prob.pair = &pair;
    prob.params = opt.stab.resolve(opt.kPrime, nu);
    prob.bc.uD = cavity_lid;
    prob.convection = opt.convection;
    return prob;
}

/// Steady cavity on an existing discretization (so callers can sample the field).
inline CavityResult solve_cavity(const Discretization& disc, const CavityOptions& opt) {
    CavityResult res;
    res.state = newton_steady([&](double nu) { return FlowSystem(cavity_problem(disc.pair, opt, nu)); },
                              opt.reynolds, opt.newton, std::nullopt, &res.newton);
    const auto params = opt.stab.resolve(opt.kPrime, 1.0 / opt.reynolds);
    res.diagnostics = instant_diagnostics(disc.pair, res.state, params);
    res.skeletonEnergy = res.diagnostics.epsModel * disc.mesh.area();
    const int np = opt.profilePoints;
    for (int i = 0; i < np; ++i) {
        const double t = static_cast<double>(i) / (np - 1);
        res.y.push_back(t);
        res.u1.push_back(eval_velocity(disc.pair, res.state, {0.5, t}, 0).value()[0]);
        res.x.push_back(t);
        res.u2.push_back(eval_velocity(disc.pair, res.state, {t, 0.5}, 0).value()[1]);
    }
    return res;
}

struct TaylorGreenOptions {
    int kPrime = 1;
    int elements = 32;
    double reynolds = 100.0;
    StabSettings stab;
    TimeConfig time;
};

struct TaylorGreenResult {
    std::vector<DiagnosticsRecord> series;
    std::vector<StateVector> history;
};

/// Unforced 2D Taylor-Green vortex on [0, 2pi]^2 with free-slip walls (the
/// walls are symmetry lines of the exact solution).
inline FlowProblem taylor_green_problem(const DivConformingPair& pair, const TaylorGreenOptions& opt) {
    FlowProblem prob;
    prob.pair = &pair;
    prob.params = opt.stab.resolve(opt.kPrime, 1.0 / opt.reynolds);
    prob.bc.kind.fill(TangentialCondition::FreeSlip);
    return prob;
}

inline TaylorGreenResult run_taylor_green(const TaylorGreenOptions& opt, bool keepHistory = false) {
    const double twoPi = 2.0 * std::numbers::pi;
    const Discretization disc(opt.elements, opt.kPrime, {0.0, 0.0}, {twoPi, twoPi});
    const FlowSystem sys(taylor_green_problem(disc.pair, opt));
    const double nu = 1.0 / opt.reynolds;

    TimeLevel level = initial_time_level(sys, project_solenoidal(sys, [](const Point& x) {
                                             return taylor_green::velocity(x);
                                         }));
    const int steps = static_cast<int>(std::llround(opt.time.tEnd / opt.time.dt));
    TaylorGreenResult res;
    auto record = [&](const StateVector& s) {
        const auto d = instant_diagnostics(disc.pair, s, sys.problem().params);
        DiagnosticsRecord r;
        r.time = s.time;
        r.Ek = d.Ek;
        r.epsResolved = d.epsResolved;
        r.epsModel = d.epsModel;
        r.divMax = d.divMax;
        const auto err = error_norms(
            disc.pair, s, [&](const Point& x) { return taylor_green::velocity(x, s.time, nu); },
            [&](const Point& x) {
                const double a = std::exp(-2.0 * nu * s.time);
                return Mat2{{{a * std::cos(x[0]) * std::cos(x[1]), -a * std::sin(x[0]) * std::sin(x[1])},
                             {a * std::sin(x[0]) * std::sin(x[1]), -a * std::cos(x[0]) * std::cos(x[1])}}};
            });
        r.L2err = err.l2;
        r.H1semiErr = err.h1semi;
        res.series.push_back(r);
        if (keepHistory)
            res.history.push_back(s);
    };
    record(level.state);
    for (int n = 0; n < steps; ++n) {
        level = generalized_alpha_step(sys, level, opt.time);
        level.state.time = (n + 1) * opt.time.dt;
        record(level.state);
    }
    fill_total_dissipation(res.series);
    return res;
}

}  // namespace divspline
