#pragma once

// Saddle-point solves, steady Newton iteration with Reynolds continuation,
// and generalized-alpha time stepping.

#include <Eigen/SparseLU>

#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "divspline/forms.hpp"

namespace divspline {

/// Linearized saddle-point system on the velocity DOFs left free by the strong
/// normal trace:
///   [ K_uu  -B^T   0 ] [du]   [rhs_u]
///   [ B      0     m ] [dp] = [rhs_p]
///   [ 0      m^T   0 ] [l ]   [-m.p ]
/// Rows/columns of `constrained` velocity DOFs are dropped (their update is zero).
struct AssembledSystem {
    SparseMatrix K_uu;
    SparseMatrix B;
    Eigen::VectorXd rhs_u;
    Eigen::VectorXd rhs_p;
    Eigen::VectorXd meanConstraint;
    double meanTarget = 0.0;
    std::vector<int> constrained;
};

struct SaddleSolution {
    Eigen::VectorXd du;
    Eigen::VectorXd dp;
    double relativeResidual = 0.0;
};

namespace detail {

// Unpivoted LU of the bordered matrix with eps on the (p, l) diagonal, ordered
// by AMD on the symmetric pattern, then iterative refinement against the exact
// matrix. Returns false if refinement does not reach full accuracy.
inline bool solve_regularized(const SparseMatrix& a, int nf, const Eigen::VectorXd& rhs, Eigen::VectorXd& x) {
    const int n = static_cast<int>(a.rows());
    double scale = 0.0;
    for (int k = 0; k < nf; ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it)
            if (it.row() < nf)
                scale = std::max(scale, std::abs(it.value()));
    if (!(scale > 0.0) || !std::isfinite(scale))
        return false;
    SparseMatrix reg(n, n);
    {
        Triplets d;
        for (int i = nf; i < n; ++i)
            d.emplace_back(i, i, 1e-8 * scale);
        reg.setFromTriplets(d.begin(), d.end());
    }
    const SparseMatrix p = a + reg;
    const SparseMatrix sym = SparseMatrix(p.transpose()) + p;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
    Eigen::AMDOrdering<int>()(sym, perm);
    const SparseMatrix pp = perm.inverse() * p * perm;
    const SparseMatrix ap = perm.inverse() * a * perm;
    const Eigen::VectorXd bp = perm.inverse() * rhs;

    Eigen::SparseLU<SparseMatrix, Eigen::NaturalOrdering<int>> lu;
    lu.setPivotThreshold(0.0);
    lu.compute(pp);
    if (lu.info() != Eigen::Success)
        return false;
    const double bn = bp.norm() > 0.0 ? bp.norm() : 1.0;
    Eigen::VectorXd y = lu.solve(bp);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 30; ++it) {
        const Eigen::VectorXd r = bp - ap * y;
        const double rn = r.norm() / bn;
        if (!std::isfinite(rn))
            return false;
        if (rn < 1e-14 || rn > 0.5 * prev)
            break;
        prev = rn;
        y += lu.solve(r);
    }
    if (!((ap * y - bp).norm() / bn < 1e-11))
        return false;
    x = perm * y;
    return true;
}

}  // namespace detail

inline SaddleSolution solve_saddle(const AssembledSystem& sys) {
    const int nv = static_cast<int>(sys.K_uu.rows());
    const int nq = static_cast<int>(sys.B.rows());
    std::vector<int> map(static_cast<std::size_t>(nv), 0);
    for (int c : sys.constrained)
        map[static_cast<std::size_t>(c)] = -1;
    int nf = 0;
    for (auto& m : map)
        if (m == 0)
            m = nf++;
        else
            m = -1;
    const int n = nf + nq + 1;

    // The mean row is negated so the (p, l) coupling is skew like (u, p).
    Triplets t;
    t.reserve(static_cast<std::size_t>(sys.K_uu.nonZeros() + 2 * sys.B.nonZeros() + 2 * nq));
    for (int k = 0; k < sys.K_uu.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(sys.K_uu, k); it; ++it) {
            const int r = map[static_cast<std::size_t>(it.row())], c = map[static_cast<std::size_t>(it.col())];
            if (r >= 0 && c >= 0)
                t.emplace_back(r, c, it.value());
        }
    for (int k = 0; k < sys.B.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(sys.B, k); it; ++it) {
            const int c = map[static_cast<std::size_t>(it.col())];
            if (c < 0)
                continue;
            t.emplace_back(nf + static_cast<int>(it.row()), c, it.value());
            t.emplace_back(c, nf + static_cast<int>(it.row()), -it.value());
        }
    for (int q = 0; q < nq; ++q) {
        t.emplace_back(nf + q, n - 1, sys.meanConstraint[q]);
        t.emplace_back(n - 1, nf + q, -sys.meanConstraint[q]);
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(t.begin(), t.end());

    Eigen::VectorXd rhs(n);
    for (int i = 0; i < nv; ++i)
        if (map[static_cast<std::size_t>(i)] >= 0)
            rhs[map[static_cast<std::size_t>(i)]] = sys.rhs_u[i];
    rhs.segment(nf, nq) = sys.rhs_p;
    rhs[n - 1] = -sys.meanTarget;

    Eigen::VectorXd x;
    if (!detail::solve_regularized(a, nf, rhs, x)) {
        Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
        lu.analyzePattern(a);
        lu.factorize(a);
        if (lu.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "solve_saddle: factorization failed (" << n << " unknowns, " << nf << " free velocity DOFs): "
                << lu.lastErrorMessage();
            throw SingularSystemError(msg.str());
        }
        x = lu.solve(rhs);
    }
    if (!x.allFinite())
        throw SingularSystemError("solve_saddle: non-finite solution");

    SaddleSolution s;
    s.du = Eigen::VectorXd::Zero(nv);
    for (int i = 0; i < nv; ++i)
        if (map[static_cast<std::size_t>(i)] >= 0)
            s.du[i] = x[map[static_cast<std::size_t>(i)]];
    s.dp = x.segment(nf, nq);
    const double rn = rhs.norm();
    s.relativeResidual = (a * x - rhs).norm() / (rn > 0.0 ? rn : 1.0);
    return s;
}

/// Everything that defines one discrete flow problem on a pair.
struct FlowProblem {
    const DivConformingPair* pair = nullptr;
    StabParams params;
    BoundaryData bc;
    VectorField forcing;   // empty means f = 0
    bool convection = true;
    int quadPoints = 0;      // 0: k'+2
    int loadQuadPoints = 0;  // 0: same as quadPoints

    int quad() const { return quadPoints > 0 ? quadPoints : default_quadrature_points(*pair); }
    int load_quad() const { return loadQuadPoints > 0 ? loadQuadPoints : quad(); }
};

struct NewtonConfig {
    double absTol = 1e-10;
    double relTol = 1e-8;
    int maxIter = 50;
    double damping = 0.5;
    int maxBacktracks = 8;
    std::vector<double> continuationReSteps;
    bool verbose = false;
};

struct NewtonReport {
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> history;
};

/// Time-independent operators of a FlowProblem, plus the strong normal trace.
class FlowSystem {
public:
    explicit FlowSystem(FlowProblem problem) : prob_(std::move(problem)) {
        const auto& pair = *prob_.pair;
        auto parts = assemble_viscous_nitsche_parts(pair, prob_.params, prob_.bc, prob_.quad());
        A_ = parts.total();
        load_ = parts.load;
        if (prob_.forcing)
            load_ += assemble_body_force(pair, prob_.forcing, prob_.load_quad());
        B_ = assemble_divergence(pair, prob_.quad());
        mean_ = assemble_pressure_mean(pair, prob_.quad());
        constrained_ = classify_boundary_dofs(pair);
        boundaryValues_ = normal_trace_values();
    }

    const FlowProblem& problem() const { return prob_; }
    const DivConformingPair& pair() const { return *prob_.pair; }
    const SparseMatrix& viscous() const { return A_; }
    const SparseMatrix& divergence() const { return B_; }
    const Eigen::VectorXd& load() const { return load_; }
    const Eigen::VectorXd& pressure_mean() const { return mean_; }
    std::span<const int> constrained() const { return constrained_; }

    const SparseMatrix& mass() const {
        if (mass_.rows() == 0)
            mass_ = assemble_velocity_mass(pair(), prob_.quad());
        return mass_;
    }

    /// Copies the strong normal-trace values into u.
    void apply_strong_normal(Eigen::VectorXd& u) const {
        for (std::size_t i = 0; i < constrained_.size(); ++i)
            u[constrained_[i]] = boundaryValues_[i];
    }

    StateVector initial_state() const {
        StateVector s = pair().zero_state();
        apply_strong_normal(s.u);
        return s;
    }

    SparseMatrix skeleton(const Eigen::VectorXd& w) const {
        return assemble_skeleton(pair(), w, prob_.params, prob_.quad());
    }

    /// State-dependent operators at w, shared by the residual and the tangent.
    struct Linearization {
        SparseMatrix skeleton;
        std::optional<ConvectionOperators> convection;
    };

    Linearization linearize(const Eigen::VectorXd& w) const {
        Linearization lin{skeleton(w), std::nullopt};
        if (prob_.convection)
            lin.convection = assemble_convection(pair(), w, prob_.quad());
        return lin;
    }

    /// Steady momentum residual (full velocity numbering) with eta frozen from etaSource.
    Eigen::VectorXd momentum_residual(const StateVector& s, const Eigen::VectorXd& etaSource) const {
        Eigen::VectorXd r = A_ * s.u + skeleton(etaSource) * s.u - B_.transpose() * s.p - load_;
        if (prob_.convection)
            r += assemble_convection(pair(), s.u, prob_.quad()).advection * s.u;
        return r;
    }

    /// Same residual with eta frozen from s.u, given lin = linearize(s.u).
    Eigen::VectorXd momentum_residual(const StateVector& s, const Linearization& lin) const {
        Eigen::VectorXd r = A_ * s.u + lin.skeleton * s.u - B_.transpose() * s.p - load_;
        if (lin.convection)
            r += lin.convection->advection * s.u;
        return r;
    }

    SparseMatrix tangent(const Linearization& lin) const {
        SparseMatrix k = A_ + lin.skeleton;
        if (lin.convection)
            k += lin.convection->jacobian();
        return k;
    }

    /// Euclidean norm over free momentum rows and continuity rows.
    double residual_norm(const Eigen::VectorXd& ru, const Eigen::VectorXd& rp) const {
        Eigen::VectorXd masked = ru;
        for (int c : constrained_)
            masked[c] = 0.0;
        return std::sqrt(masked.squaredNorm() + rp.squaredNorm());
    }

    /// Linearization K = A_h + J(eta frozen) + dC at w.
    SparseMatrix tangent(const Eigen::VectorXd& w) const { return tangent(linearize(w)); }

    AssembledSystem linear_system(SparseMatrix k, const Eigen::VectorXd& ru, const Eigen::VectorXd& rp,
                                  const Eigen::VectorXd& p) const {
        return {std::move(k), B_, -ru, -rp, mean_, -mean_.dot(p), constrained_};
    }

private:
    std::vector<double> normal_trace_values() const {
        // Open knots make the boundary row of each normal component interpolatory,
        // so the trace is the 1D L2 projection of the normal data on that row.
        const auto& pair = *prob_.pair;
        std::vector<double> vals(constrained_.size(), 0.0);
        if (!prob_.bc.uD)
            return vals;
        const auto& mesh = pair.mesh();
        const auto rule = gauss_rule(pair.k_prime() + 3);
        auto project = [&](const KnotVector& kv, auto&& g) {
            const int n = kv.size();
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
            for (int e = 0; e < kv.num_elements(); ++e) {
                const double a = kv.unique_knots()[static_cast<std::size_t>(e)];
                const double b = kv.unique_knots()[static_cast<std::size_t>(e + 1)];
                for (int k = 0; k < rule.size(); ++k) {
                    const double t = a + (b - a) * rule.points[static_cast<std::size_t>(k)];
                    const double w = (b - a) * rule.weights[static_cast<std::size_t>(k)];
                    const auto be = eval_basis_in_span(kv, kv.element_span(e), t, 0);
                    const double gv = g(t);
                    for (int i = 0; i <= kv.degree(); ++i) {
                        rhs[be.first_index() + i] += w * gv * be(0, i);
                        for (int j = 0; j <= kv.degree(); ++j)
                            m(be.first_index() + i, be.first_index() + j) += w * be(0, i) * be(0, j);
                    }
                }
            }
            return Eigen::VectorXd(m.ldlt().solve(rhs));
        };
        const auto lo = mesh.lower(), hi = mesh.upper();
        const auto left = project(pair.vx().ky(), [&](double y) { return prob_.bc.uD({lo[0], y})[0]; });
        const auto right = project(pair.vx().ky(), [&](double y) { return prob_.bc.uD({hi[0], y})[0]; });
        const auto bottom = project(pair.vy().kx(), [&](double x) { return prob_.bc.uD({x, lo[1]})[1]; });
        const auto top = project(pair.vy().kx(), [&](double x) { return prob_.bc.uD({x, hi[1]})[1]; });
        for (std::size_t k = 0; k < constrained_.size(); ++k) {
            const int d = constrained_[k];
            if (d < pair.vy_offset()) {
                const int i = d % pair.vx().nx(), j = d / pair.vx().nx();
                vals[k] = i == 0 ? left[j] : right[j];
            } else {
                const int l = d - pair.vy_offset();
                const int i = l % pair.vy().nx(), j = l / pair.vy().nx();
                vals[k] = j == 0 ? bottom[i] : top[i];
            }
        }
        return vals;
    }

    FlowProblem prob_;
    SparseMatrix A_, B_;
    mutable SparseMatrix mass_;
    Eigen::VectorXd load_, mean_;
    std::vector<int> constrained_;
    std::vector<double> boundaryValues_;
};

namespace detail {

inline ConvergenceError newton_failure(double re, int it, double res, const std::string& where) {
    std::ostringstream msg;
    msg << where << ": Newton failed to converge at Re = " << re << " after " << it
        << " iterations (residual " << res << ")";
    return ConvergenceError(msg.str(), re, it, res);
}

}  // namespace detail

/// Damped Newton for the steady problem from `guess`; eta is frozen from the
/// current iterate in each linearization.
inline StateVector newton_solve(const FlowSystem& sys, StateVector guess, const NewtonConfig& cfg,
                                NewtonReport* report = nullptr) {
    StateVector s = std::move(guess);
    sys.apply_strong_normal(s.u);
    FlowSystem::Linearization lin, trialLin;
    auto residual = [&](const StateVector& st, double& norm, FlowSystem::Linearization& l) {
        l = sys.linearize(st.u);
        Eigen::VectorXd ru = sys.momentum_residual(st, l);
        Eigen::VectorXd rp = sys.divergence() * st.u;
        norm = sys.residual_norm(ru, rp);
        return std::pair{std::move(ru), std::move(rp)};
    };
    double norm = 0.0;
    auto [ru, rp] = residual(s, norm, lin);
    const double norm0 = norm;
    NewtonReport rep;
    rep.history.push_back(norm);
    double prev = norm;
    for (int it = 0; it <= cfg.maxIter; ++it) {
        const bool stagnated = it > 0 && norm < cfg.relTol * norm0 && norm >= 0.5 * prev;
        if (norm < cfg.absTol || stagnated) {
            rep.iterations = it;
            rep.residual = norm;
            if (report)
                *report = rep;
            return s;
        }
        if (it == cfg.maxIter)
            break;
        const auto step = solve_saddle(sys.linear_system(sys.tangent(lin), ru, rp, s.p));
        double scale = 1.0;
        StateVector trial;
        double trialNorm = 0.0;
        std::pair<Eigen::VectorXd, Eigen::VectorXd> trialRes;
        for (int bt = 0; bt <= cfg.maxBacktracks; ++bt) {
            trial = s;
            trial.u += scale * step.du;
            trial.p += scale * step.dp;
            trialRes = residual(trial, trialNorm, trialLin);
            if (std::isfinite(trialNorm) && trialNorm < (1.0 - 1e-4 * scale) * norm)
                break;
            scale *= cfg.damping;
        }
        if (!std::isfinite(trialNorm))
            break;
        if (cfg.verbose)
            std::cerr << "  newton " << it + 1 << ": |R| = " << trialNorm << " (step " << scale << ")\n";
        prev = norm;
        s = std::move(trial);
        lin = std::move(trialLin);
        ru = std::move(trialRes.first);
        rp = std::move(trialRes.second);
        norm = trialNorm;
        rep.history.push_back(norm);
    }
    throw detail::newton_failure(1.0 / sys.problem().params.nu, cfg.maxIter, norm, "newton_steady");
}

/// Steady solve, walking the Reynolds ladder (steps below the target Re) first.
/// `makeSystem(nu)` builds the discrete problem at a given viscosity.
template <class MakeSystem>
StateVector newton_steady(MakeSystem&& makeSystem, double reynolds, const NewtonConfig& cfg,
                          std::optional<StateVector> guess = std::nullopt, NewtonReport* report = nullptr) {
    std::optional<StateVector> current = std::move(guess);
    std::vector<double> ladder;
    for (double re : cfg.continuationReSteps)
        if (re < reynolds)
            ladder.push_back(re);
    ladder.push_back(reynolds);
    for (double re : ladder) {
        const FlowSystem sys = makeSystem(1.0 / re);
        if (cfg.verbose)
            std::cerr << "continuation: Re = " << re << "\n";
        try {
            current = newton_solve(sys, current ? *current : sys.initial_state(), cfg, report);
        } catch (const ConvergenceError& e) {
            throw detail::newton_failure(re, e.iterations(), e.residual(), "newton_steady (continuation)");
        }
    }
    return *current;
}

/// Default Reynolds ladder for high-Re steady runs.
inline std::vector<double> default_reynolds_ladder() { return {100, 400, 1000, 2500, 5000, 7500, 10000}; }

/// Constrained L2 projection onto the discretely solenoidal subspace with the
/// problem's strong normal trace.
inline StateVector project_solenoidal(const FlowSystem& sys, const VectorField& field) {
    const auto& pair = sys.pair();
    StateVector s = interpolate_field(pair, field);
    const Eigen::VectorXd target = s.u;
    sys.apply_strong_normal(s.u);
    const auto& m = sys.mass();
    const Eigen::VectorXd ru = m * (s.u - target);
    const Eigen::VectorXd rp = sys.divergence() * s.u;
    const auto step = solve_saddle(sys.linear_system(m, ru, rp, Eigen::VectorXd::Zero(pair.num_pressure_dofs())));
    s.u += step.du;
    s.p.setZero();
    return s;
}

struct TimeConfig {
    double dt = 1e-2;
    double tEnd = 1.0;
    double rhoInf = 0.5;
    NewtonConfig newton;
};

/// First-order-system generalized-alpha parameters from the spectral radius.
struct GeneralizedAlphaCoefficients {
    double alphaM, alphaF, gamma;

    static GeneralizedAlphaCoefficients from_rho(double rhoInf) {
        if (rhoInf < 0.0 || rhoInf > 1.0)
            throw ParameterError("generalized-alpha: rhoInf must lie in [0, 1]");
        const double am = 0.5 * (3.0 - rhoInf) / (1.0 + rhoInf);
        const double af = 1.0 / (1.0 + rhoInf);
        return {am, af, 0.5 + am - af};
    }
};

/// Velocity state plus its time derivative, as carried by the integrator.
struct TimeLevel {
    StateVector state;
    Eigen::VectorXd rate;
};

/// Consistent initial rate: M a - B^T pi = L - N(u), B a = 0.
inline TimeLevel initial_time_level(const FlowSystem& sys, StateVector u0) {
    sys.apply_strong_normal(u0.u);
    StateVector zeroP = u0;
    zeroP.p.setZero();
    const Eigen::VectorXd n = sys.momentum_residual(zeroP, u0.u);
    const auto step = solve_saddle(sys.linear_system(sys.mass(), n, Eigen::VectorXd::Zero(sys.pair().num_pressure_dofs()),
                                                     Eigen::VectorXd::Zero(sys.pair().num_pressure_dofs())));
    return {std::move(u0), step.du};
}

/// One generalized-alpha step; the stage unknown is the alpha_f-level velocity and
/// the returned pressure is the stage pressure.
inline TimeLevel generalized_alpha_step(const FlowSystem& sys, const TimeLevel& level, const TimeConfig& cfg,
                                        NewtonReport* report = nullptr) {
    if (!(cfg.dt > 0.0))
        throw ParameterError("generalized_alpha_step: dt must be positive");
    const auto c = GeneralizedAlphaCoefficients::from_rho(cfg.rhoInf);
    const double dt = cfg.dt;
    const Eigen::VectorXd& un = level.state.u;
    const Eigen::VectorXd& an = level.rate;
    const auto& m = sys.mass();

    auto rates = [&](const Eigen::VectorXd& stage) {
        Eigen::VectorXd u1 = un + (stage - un) / c.alphaF;
        Eigen::VectorXd a1 = (u1 - un - dt * (1.0 - c.gamma) * an) / (c.gamma * dt);
        Eigen::VectorXd am = an + c.alphaM * (a1 - an);
        return std::tuple{std::move(u1), std::move(a1), std::move(am)};
    };
    FlowSystem::Linearization lin;
    auto residual = [&](const StateVector& st, double& norm) {
        const auto [u1, a1, am] = rates(st.u);
        lin = sys.linearize(st.u);
        Eigen::VectorXd ru = sys.momentum_residual(st, lin) + m * am;
        Eigen::VectorXd rp = sys.divergence() * st.u;
        norm = sys.residual_norm(ru, rp);
        return std::pair{std::move(ru), std::move(rp)};
    };
    const double massScale = c.alphaM / (c.gamma * dt * c.alphaF);

    StateVector stage = level.state;
    double norm = 0.0;
    auto [ru, rp] = residual(stage, norm);
    const double norm0 = norm;
    double prev = norm;
    int it = 0;
    for (; it <= cfg.newton.maxIter; ++it) {
        const bool stagnated = it > 0 && norm < cfg.newton.relTol * norm0 && norm >= 0.5 * prev;
        if (norm < cfg.newton.absTol || stagnated)
            break;
        if (it == cfg.newton.maxIter) {
            std::ostringstream msg;
            msg << "generalized_alpha_step: stage Newton did not converge at t = " << level.state.time
                << " (residual " << norm << "); reduce dt";
            throw TimeStepError(msg.str());
        }
        SparseMatrix k = sys.tangent(lin) + massScale * m;
        const auto step = solve_saddle(sys.linear_system(std::move(k), ru, rp, stage.p));
        stage.u += step.du;
        stage.p += step.dp;
        prev = norm;
        std::tie(ru, rp) = residual(stage, norm);
        if (!std::isfinite(norm))
            throw TimeStepError("generalized_alpha_step: non-finite residual; reduce dt");
    }
    if (report) {
        report->iterations = it;
        report->residual = norm;
    }
    auto [u1, a1, am] = rates(stage.u);
    TimeLevel next;
    next.state.u = std::move(u1);
    next.state.p = stage.p;
    next.state.time = level.state.time + dt;
    next.rate = std::move(a1);
    return next;
}

}  // namespace divspline
