#pragma once

// Variational forms of the skeleton-stabilized discretization:
//   A_h  viscous + Nitsche (tangential Dirichlet data)
//   B    divergence
//   C    convection (Picard and Newton blocks)
//   J_h  skeleton penalty on jumps of (alpha'+1)-th normal derivatives
//   L_h  body force + Nitsche boundary data

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "divspline/space.hpp"

namespace divspline {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct StabParams {
    double gamma = 0.0;
    double delta = 1.0;
    double cNit = 10.0;
    double nu = 1.0;
    int alphaPrime = 0;

    /// gamma = delta * 10^-(alpha'+2), C_Nit = 5 (k'+1).
    static StabParams from_delta(int kPrime, double nu, double delta = 1.0) {
        StabParams p;
        p.alphaPrime = kPrime - 1;
        p.delta = delta;
        p.gamma = delta * std::pow(10.0, -(p.alphaPrime + 2));
        p.cNit = 5.0 * (kPrime + 1);
        p.nu = nu;
        return p;
    }
};

/// eta = gamma * min(Re_h, 1) * h^(2 alpha' + 2) * |u.n|, Re_h = |u| h / nu.
inline double compute_eta(double uDotN, double uMag, double h, const StabParams& params) {
    const double reH = uMag * h / params.nu;
    return params.gamma * std::min(reH, 1.0) * std::pow(h, 2 * params.alphaPrime + 2) * std::abs(uDotN);
}

enum class TangentialCondition { Nitsche, FreeSlip };

/// Boundary treatment: normal trace is always strong; the tangential part is
/// either imposed weakly (Nitsche, data uD) or left natural (free slip).
struct BoundaryData {
    std::array<TangentialCondition, 4> kind{TangentialCondition::Nitsche, TangentialCondition::Nitsche,
                                            TangentialCondition::Nitsche, TangentialCondition::Nitsche};
    VectorField uD;  // empty means homogeneous

    bool nitsche(Side s) const { return kind[static_cast<std::size_t>(s)] == TangentialCondition::Nitsche; }
    Vec2 data(const Point& x) const { return uD ? uD(x) : Vec2{0.0, 0.0}; }
};

namespace detail {

inline int& assembly_threads() {
    static int n = 1;
    return n;
}

/// Runs fn(element, triplets) over all elements; per-worker buffers are concatenated
/// in worker order so the result is independent of scheduling.
template <class Fn>
Triplets for_each_element(const CartesianMesh& mesh, Fn&& fn) {
    const auto elems = mesh.elements();
    const int workers = std::max(1, std::min(assembly_threads(), static_cast<int>(elems.size())));
    std::vector<Triplets> buffers(static_cast<std::size_t>(workers));
    auto run = [&](int w) {
        const std::size_t lo = elems.size() * static_cast<std::size_t>(w) / static_cast<std::size_t>(workers);
        const std::size_t hi = elems.size() * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(workers);
        for (std::size_t e = lo; e < hi; ++e)
            fn(elems[e], buffers[static_cast<std::size_t>(w)]);
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(run, w);
    }
    Triplets all;
    for (auto& b : buffers)
        all.insert(all.end(), b.begin(), b.end());
    return all;
}

/// Scatters a dense local matrix (rows/cols by global index) into triplets.
inline void scatter(const Eigen::MatrixXd& local, const std::vector<int>& rows, const std::vector<int>& cols,
                    Triplets& out) {
    for (int j = 0; j < local.cols(); ++j)
        for (int i = 0; i < local.rows(); ++i)
            if (local(i, j) != 0.0)
                out.emplace_back(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)], local(i, j));
}

inline std::vector<int> global_indices(const VelocityBasis& b) {
    std::vector<int> g(static_cast<std::size_t>(b.local_size()));
    for (int l = 0; l < b.local_size(); ++l)
        g[static_cast<std::size_t>(l)] = b.global(l);
    return g;
}

inline SparseMatrix to_sparse(int rows, int cols, const Triplets& t) {
    SparseMatrix m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

/// (sym grad phi) n for a velocity basis function: 1/2 (e_c (g.n) + g n_c).
inline Vec2 sym_grad_dot_n(const VelocityBasis& b, int l, const Point& n) {
    const int c = b.component(l);
    const Vec2 g{b.grad(l, 0), b.grad(l, 1)};
    const double gn = g[0] * n[0] + g[1] * n[1];
    Vec2 r{0.5 * g[0] * n[static_cast<std::size_t>(c)], 0.5 * g[1] * n[static_cast<std::size_t>(c)]};
    r[static_cast<std::size_t>(c)] += 0.5 * gn;
    return r;
}

}  // namespace detail

/// Number of worker threads for element loops (1 = sequential and deterministic).
inline void set_assembly_threads(int n) { detail::assembly_threads() = std::max(1, n); }

/// The pieces of A_h without J_h; A_h = volume + consistency + penalty.
struct ViscousNitscheParts {
    SparseMatrix volume;       // (2 nu sym grad u, sym grad v)
    SparseMatrix consistency;  // -(2 nu n.sym grad u, v) - (2 nu n.sym grad v, u) on Nitsche sides
    SparseMatrix penalty;      // (2 nu C_Nit / h u, v) on Nitsche sides
    Eigen::VectorXd load;      // matching u_D terms of L_h

    SparseMatrix total() const { return volume + consistency + penalty; }
};

inline ViscousNitscheParts assemble_viscous_nitsche_parts(const DivConformingPair& pair, const StabParams& params,
                                                           const BoundaryData& bc, int npts) {
    const auto& mesh = pair.mesh();
    const int nv = pair.num_velocity_dofs();
    const auto rule = gauss_rule(npts);
    const double twoNu = 2.0 * params.nu;

    auto volume = detail::for_each_element(mesh, [&](const Element& e, Triplets& out) {
        const auto q = element_quadrature(e, rule);
        Eigen::MatrixXd local;
        std::vector<int> dofs;
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto b = eval_velocity_basis(pair, e, q.points[k], 1);
            const int n = b.local_size();
            if (k == 0) {
                local = Eigen::MatrixXd::Zero(n, n);
                dofs = detail::global_indices(b);
            }
            for (int i = 0; i < n; ++i) {
                const int ci = b.component(i);
                const Vec2 gi{b.grad(i, 0), b.grad(i, 1)};
                for (int j = 0; j < n; ++j) {
                    const int cj = b.component(j);
                    const Vec2 gj{b.grad(j, 0), b.grad(j, 1)};
                    // sym grad a : sym grad b = 1/2 (delta_cd g.h + g_d h_c)
                    double s = 0.5 * gi[static_cast<std::size_t>(cj)] * gj[static_cast<std::size_t>(ci)];
                    if (ci == cj)
                        s += 0.5 * (gi[0] * gj[0] + gi[1] * gj[1]);
                    local(i, j) += q.weights[k] * twoNu * s;
                }
            }
        }
        detail::scatter(local, dofs, dofs, out);
    });

    Triplets cons, pen;
    Eigen::VectorXd load = Eigen::VectorXd::Zero(nv);
    const double penalty = twoNu * params.cNit / mesh.h();
    for (const auto& f : mesh.boundary_facets()) {
        if (!bc.nitsche(*f.side))
            continue;
        const auto& e = mesh.element(f.plusElement);
        const auto fq = facet_quadrature(f, rule);
        for (std::size_t k = 0; k < fq.points.size(); ++k) {
            const auto& x = fq.points[k];
            const double w = fq.weights[k];
            const auto b = eval_velocity_basis(pair, e, x, 1);
            const Vec2 uD = bc.data(x);
            const int n = b.local_size();
            std::vector<Vec2> tn(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i)
                tn[static_cast<std::size_t>(i)] = detail::sym_grad_dot_n(b, i, f.normal);
            for (int i = 0; i < n; ++i) {
                const int ci = b.component(i);
                const auto& ti = tn[static_cast<std::size_t>(i)];
                load[b.global(i)] += w * (-twoNu * (ti[0] * uD[0] + ti[1] * uD[1]) +
                                          penalty * uD[static_cast<std::size_t>(ci)] * b.value(i));
                for (int j = 0; j < n; ++j) {
                    const int cj = b.component(j);
                    const auto& tj = tn[static_cast<std::size_t>(j)];
                    // row i (test), column j (trial)
                    const double c = -twoNu * (tj[static_cast<std::size_t>(ci)] * b.value(i) +
                                               ti[static_cast<std::size_t>(cj)] * b.value(j));
                    cons.emplace_back(b.global(i), b.global(j), w * c);
                    if (ci == cj)
                        pen.emplace_back(b.global(i), b.global(j), w * penalty * b.value(i) * b.value(j));
                }
            }
        }
    }
    return {detail::to_sparse(nv, nv, volume), detail::to_sparse(nv, nv, cons), detail::to_sparse(nv, nv, pen),
            std::move(load)};
}

/// Symmetric A_h operator (without J_h) and its Nitsche load contribution.
struct OperatorWithLoad {
    SparseMatrix op;
    Eigen::VectorXd load;
};

inline OperatorWithLoad assemble_viscous_nitsche(const DivConformingPair& pair, const StabParams& params,
                                                 const BoundaryData& bc, std::optional<int> npts = std::nullopt) {
    auto parts = assemble_viscous_nitsche_parts(pair, params, bc, npts.value_or(default_quadrature_points(pair)));
    return {parts.total(), std::move(parts.load)};
}

/// B[q, i] = (div phi_i, q_q).
inline SparseMatrix assemble_divergence(const DivConformingPair& pair, std::optional<int> npts = std::nullopt) {
    const auto& mesh = pair.mesh();
    const auto rule = gauss_rule(npts.value_or(default_quadrature_points(pair)));
    auto t = detail::for_each_element(mesh, [&](const Element& e, Triplets& out) {
        const auto q = element_quadrature(e, rule);
        Eigen::MatrixXd local;
        std::vector<int> rows, cols;
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto b = eval_velocity_basis(pair, e, q.points[k], 1);
            const auto tq = eval_tensor(pair.q(), e, q.points[k], 0);
            if (k == 0) {
                local = Eigen::MatrixXd::Zero(tq.local_size(), b.local_size());
                cols = detail::global_indices(b);
                for (int a = 0; a < tq.local_size(); ++a)
                    rows.push_back(tq.global(a));
            }
            for (int a = 0; a < tq.local_size(); ++a) {
                const double qa = q.weights[k] * tq.deriv(a, 0, 0);
                for (int i = 0; i < b.local_size(); ++i)
                    local(a, i) += qa * b.grad(i, b.component(i));
            }
        }
        detail::scatter(local, rows, cols, out);
    });
    return detail::to_sparse(pair.num_pressure_dofs(), pair.num_velocity_dofs(), t);
}

/// Integrals of the pressure basis functions (the zero-mean constraint row).
inline Eigen::VectorXd assemble_pressure_mean(const DivConformingPair& pair, std::optional<int> npts = std::nullopt) {
    const auto& mesh = pair.mesh();
    const auto rule = gauss_rule(npts.value_or(default_quadrature_points(pair)));
    Eigen::VectorXd m = Eigen::VectorXd::Zero(pair.num_pressure_dofs());
    for (const auto& e : mesh.elements()) {
        const auto q = element_quadrature(e, rule);
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto tq = eval_tensor(pair.q(), e, q.points[k], 0);
            for (int a = 0; a < tq.local_size(); ++a)
                m[tq.global(a)] += q.weights[k] * tq.deriv(a, 0, 0);
        }
    }
    return m;
}

/// Convection with C(w; u, v) = -(w . grad v, u): w advects u.
struct ConvectionOperators {
    SparseMatrix advection;   // u -> C(w; u, .)
    SparseMatrix derivative;  // u -> C(u; w, .)

    /// Newton Jacobian of u -> C(u; u, .) at u = w.
    SparseMatrix jacobian() const { return advection + derivative; }
};

inline ConvectionOperators assemble_convection(const DivConformingPair& pair, const Eigen::VectorXd& w,
                                               std::optional<int> npts = std::nullopt) {
    const auto& mesh = pair.mesh();
    const int nv = pair.num_velocity_dofs();
    const auto rule = gauss_rule(npts.value_or(default_quadrature_points(pair)));
    Triplets adv, der;
    for (const auto& e : mesh.elements()) {
        const auto q = element_quadrature(e, rule);
        Eigen::MatrixXd la, ld;
        std::vector<int> dofs;
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto b = eval_velocity_basis(pair, e, q.points[k], 1);
            const int n = b.local_size();
            if (k == 0) {
                la = Eigen::MatrixXd::Zero(n, n);
                ld = Eigen::MatrixXd::Zero(n, n);
                dofs = detail::global_indices(b);
            }
            const auto ws = sample_velocity(b, w, 0);
            const Vec2 wv = ws.value();
            const double wt = q.weights[k];
            for (int i = 0; i < n; ++i) {
                const int ci = b.component(i);
                const Vec2 gi{b.grad(i, 0), b.grad(i, 1)};
                const double wDotG = wv[0] * gi[0] + wv[1] * gi[1];
                for (int j = 0; j < n; ++j) {
                    const int cj = b.component(j);
                    const double phj = b.value(j);
                    if (ci == cj)
                        la(i, j) -= wt * wDotG * phj;
                    // C(phi_j; w, phi_i) = -(phi_j . g_i) w_ci
                    ld(i, j) -= wt * phj * gi[static_cast<std::size_t>(cj)] * wv[static_cast<std::size_t>(ci)];
                }
            }
        }
        detail::scatter(la, dofs, dofs, adv);
        detail::scatter(ld, dofs, dofs, der);
    }
    return {detail::to_sparse(nv, nv, adv), detail::to_sparse(nv, nv, der)};
}

/// eta at a point of an interior facet, from the advecting field w.
/// |w| is averaged over the two sides; w.n uses the single-valued normal trace.
inline double facet_eta(const VelocitySample& plus, const VelocitySample& minus, const Facet& f, double h,
                        const StabParams& params) {
    const Vec2 wp = plus.value(), wm = minus.value();
    const double uDotN = wp[0] * f.normal[0] + wp[1] * f.normal[1];
    const double mag = 0.5 * (std::hypot(wp[0], wp[1]) + std::hypot(wm[0], wm[1]));
    return compute_eta(uDotN, mag, h, params);
}

/// J[u, v] = sum_e (eta [[d_n^(a'+1) u]], [[d_n^(a'+1) v]])_e with eta frozen from w.
inline SparseMatrix assemble_skeleton(const DivConformingPair& pair, const Eigen::VectorXd& w,
                                      const StabParams& params, std::optional<int> npts = std::nullopt) {
    const auto& mesh = pair.mesh();
    const int nv = pair.num_velocity_dofs();
    SparseMatrix out(nv, nv);
    if (params.gamma == 0.0)
        return out;
    const int m = params.alphaPrime + 1;
    const auto rule = gauss_rule(npts.value_or(default_quadrature_points(pair)));
    Triplets t;
    Eigen::MatrixXd local;
    std::vector<int> dofs, comps;
    Eigen::VectorXd jump;
    for (const auto& f : mesh.interior_facets()) {
        const auto& ep = mesh.element(f.plusElement);
        const auto& em = mesh.element(*f.minusElement);
        const auto fq = facet_quadrature(f, rule);
        const double sign = std::pow(f.normal[static_cast<std::size_t>(f.axis)], m);
        bool any = false;
        for (std::size_t k = 0; k < fq.points.size(); ++k) {
            const auto bp = eval_velocity_basis(pair, ep, fq.points[k], m);
            const auto bm = eval_velocity_basis(pair, em, fq.points[k], m);
            const int np = bp.local_size(), nl = np + bm.local_size();
            if (k == 0) {
                local = Eigen::MatrixXd::Zero(nl, nl);
                dofs.assign(static_cast<std::size_t>(nl), 0);
                comps.assign(static_cast<std::size_t>(nl), 0);
                for (int l = 0; l < nl; ++l) {
                    const auto& b = l < np ? bp : bm;
                    const int ll = l < np ? l : l - np;
                    dofs[static_cast<std::size_t>(l)] = b.global(ll);
                    comps[static_cast<std::size_t>(l)] = b.component(ll);
                }
                jump.resize(nl);
            }
            const double eta = facet_eta(sample_velocity(bp, w, 0), sample_velocity(bm, w, 0), f, mesh.h(), params);
            if (eta == 0.0)
                continue;
            any = true;
            for (int l = 0; l < np; ++l)
                jump[l] = sign * normal_derivative(bp, l, f.axis, m);
            for (int l = np; l < nl; ++l)
                jump[l] = -sign * normal_derivative(bm, l - np, f.axis, m);
            const double scale = fq.weights[k] * eta;
            for (int b = 0; b < nl; ++b) {
                if (jump[b] == 0.0)
                    continue;
                for (int a = 0; a < nl; ++a)
                    if (comps[static_cast<std::size_t>(a)] == comps[static_cast<std::size_t>(b)])
                        local(a, b) += scale * jump[a] * jump[b];
            }
        }
        if (any)
            detail::scatter(local, dofs, dofs, t);
    }
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

/// Body-force part of L_h only (no boundary terms).
inline Eigen::VectorXd assemble_body_force(const DivConformingPair& pair, const VectorField& f, int npts) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(pair.num_velocity_dofs());
    const auto rule = gauss_rule(npts);
    for (const auto& e : pair.mesh().elements()) {
        const auto q = element_quadrature(e, rule);
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto b = eval_velocity_basis(pair, e, q.points[k], 0);
            const Vec2 fv = f(q.points[k]);
            for (int i = 0; i < b.local_size(); ++i)
                rhs[b.global(i)] += q.weights[k] * fv[static_cast<std::size_t>(b.component(i))] * b.value(i);
        }
    }
    return rhs;
}

/// L_h: body force (f, v) plus the Nitsche boundary data terms.
inline Eigen::VectorXd assemble_load(const DivConformingPair& pair, const VectorField& f, const StabParams& params,
                                     const BoundaryData& bc, std::optional<int> npts = std::nullopt) {
    const int nq = npts.value_or(default_quadrature_points(pair));
    Eigen::VectorXd rhs = assemble_viscous_nitsche_parts(pair, params, bc, nq).load;
    if (f)
        rhs += assemble_body_force(pair, f, nq);
    return rhs;
}

}  // namespace divspline
