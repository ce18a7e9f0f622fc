#pragma once

// Divergence-conforming velocity/pressure B-spline pairs on Cartesian meshes.
//
// With k = k' + 1 and maximal smoothness the 2D pair is
//   Vx : degrees (k,   k-1)     Vy : degrees (k-1, k)     Q : degrees (k-1, k-1)
// so d/dx Vx and d/dy Vy both land in Q and div V_h = Q_h exactly.
//
// Velocity DOFs are stored as [Vx block | Vy block]; each block is numbered
// lexicographically with the x index running fastest.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <functional>
#include <vector>

#include "divspline/bspline.hpp"
#include "divspline/errors.hpp"
#include "divspline/mesh.hpp"

namespace divspline {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;  // m[i][j] = d u_i / d x_j
using VectorField = std::function<Vec2(const Point&)>;

class TensorSpace {
public:
    TensorSpace() = default;
    TensorSpace(KnotVector kx, KnotVector ky) : kx_(std::move(kx)), ky_(std::move(ky)) {}

    const KnotVector& kx() const { return kx_; }
    const KnotVector& ky() const { return ky_; }
    int nx() const { return kx_.size(); }
    int ny() const { return ky_.size(); }
    int size() const { return nx() * ny(); }
    int index(int i, int j) const { return i + nx() * j; }
    std::array<int, 2> degrees() const { return {kx_.degree(), ky_.degree()}; }

private:
    KnotVector kx_, ky_;
};

/// Nonzero tensor-product basis functions of one space on one element.
struct TensorEval {
    BasisEval ex, ey;
    int nx = 0;  // univariate dimension in x (for global numbering)

    int local_size() const { return (ex.degree + 1) * (ey.degree + 1); }
    int global(int l) const {
        const int a = l % (ex.degree + 1), b = l / (ex.degree + 1);
        return (ex.first_index() + a) + nx * (ey.first_index() + b);
    }
    /// d^(dx+dy) phi_l / dx^dx dy^dy; orders beyond maxDeriv read as zero.
    double deriv(int l, int dx, int dy) const {
        if (dx > ex.maxDeriv || dy > ey.maxDeriv)
            return 0.0;
        const int a = l % (ex.degree + 1), b = l / (ex.degree + 1);
        return ex(dx, a) * ey(dy, b);
    }
};

inline TensorEval eval_tensor(const TensorSpace& s, const Element& e, const Point& x, int maxDeriv) {
    TensorEval t;
    t.ex = eval_basis_in_span(s.kx(), s.kx().element_span(e.ix), x[0], maxDeriv);
    t.ey = eval_basis_in_span(s.ky(), s.ky().element_span(e.iy), x[1], maxDeriv);
    t.nx = s.nx();
    return t;
}

struct StateVector {
    Eigen::VectorXd u;  // velocity coefficients [Vx | Vy]
    Eigen::VectorXd p;  // pressure coefficients
    double time = 0.0;
};

class DivConformingPair {
public:
    DivConformingPair(const CartesianMesh& mesh, int kPrime) : mesh_(&mesh), kPrime_(kPrime) {
        if (kPrime < 1)
            throw ParameterError("build_pair: kPrime must be >= 1 (need alpha' = k' - 1 >= 0)");
        const int k = kPrime + 1;
        auto kv = [&](std::span<const double> u, int degree) {
            std::vector<double> knots(static_cast<std::size_t>(degree), u.front());
            knots.insert(knots.end(), u.begin(), u.end());
            knots.insert(knots.end(), static_cast<std::size_t>(degree), u.back());
            return KnotVector(degree, std::move(knots));
        };
        const auto ux = mesh.unique_knots_x(), uy = mesh.unique_knots_y();
        vx_ = TensorSpace(kv(ux, k), kv(uy, k - 1));
        vy_ = TensorSpace(kv(ux, k - 1), kv(uy, k));
        q_ = TensorSpace(kv(ux, k - 1), kv(uy, k - 1));

        for (int j = 0; j < vx_.ny(); ++j) {
            normalBoundary_.push_back(vx_.index(0, j));
            normalBoundary_.push_back(vx_.index(vx_.nx() - 1, j));
        }
        for (int i = 0; i < vy_.nx(); ++i) {
            normalBoundary_.push_back(vx_.size() + vy_.index(i, 0));
            normalBoundary_.push_back(vx_.size() + vy_.index(i, vy_.ny() - 1));
        }
        std::sort(normalBoundary_.begin(), normalBoundary_.end());
    }

    const CartesianMesh& mesh() const { return *mesh_; }
    const TensorSpace& vx() const { return vx_; }
    const TensorSpace& vy() const { return vy_; }
    const TensorSpace& q() const { return q_; }
    int k_prime() const { return kPrime_; }
    int alpha_prime() const { return kPrime_ - 1; }
    int num_velocity_dofs() const { return vx_.size() + vy_.size(); }
    int num_pressure_dofs() const { return q_.size(); }
    int vy_offset() const { return vx_.size(); }

    /// Vx DOFs on the left/right sides and Vy DOFs on bottom/top (velocity numbering).
    std::span<const int> normal_boundary_dofs() const { return normalBoundary_; }

    StateVector zero_state() const {
        return {Eigen::VectorXd::Zero(num_velocity_dofs()), Eigen::VectorXd::Zero(num_pressure_dofs()), 0.0};
    }

private:
    const CartesianMesh* mesh_;
    int kPrime_;
    TensorSpace vx_, vy_, q_;
    std::vector<int> normalBoundary_;
};

inline DivConformingPair build_pair(const CartesianMesh& mesh, int kPrime) { return DivConformingPair(mesh, kPrime); }

inline std::vector<int> classify_boundary_dofs(const DivConformingPair& pair) {
    const auto d = pair.normal_boundary_dofs();
    return {d.begin(), d.end()};
}

/// Velocity basis on one element: local functions 0..nx-1 are (phi, 0) from Vx,
/// the rest (0, phi) from Vy.
struct VelocityBasis {
    TensorEval x, y;
    int yOffset = 0;

    int local_size() const { return x.local_size() + y.local_size(); }
    int component(int l) const { return l < x.local_size() ? 0 : 1; }
    int global(int l) const {
        return l < x.local_size() ? x.global(l) : yOffset + y.global(l - x.local_size());
    }
    double deriv(int l, int dx, int dy) const {
        return l < x.local_size() ? x.deriv(l, dx, dy) : y.deriv(l - x.local_size(), dx, dy);
    }
    double value(int l) const { return deriv(l, 0, 0); }
    /// d phi_c / d x_j of the nonzero component c.
    double grad(int l, int j) const { return j == 0 ? deriv(l, 1, 0) : deriv(l, 0, 1); }
};

inline VelocityBasis eval_velocity_basis(const DivConformingPair& pair, const Element& e, const Point& x,
                                         int maxDeriv = 1) {
    return {eval_tensor(pair.vx(), e, x, maxDeriv), eval_tensor(pair.vy(), e, x, maxDeriv), pair.vy_offset()};
}

/// Velocity value and derivatives at a point: d(c, dx, dy) = d^(dx+dy) u_c / dx^dx dy^dy.
struct VelocitySample {
    int order = 1;
    std::vector<double> data;

    double d(int c, int dx, int dy) const {
        return data[static_cast<std::size_t>((c * (order + 1) + dx) * (order + 1) + dy)];
    }
    double& d(int c, int dx, int dy) {
        return data[static_cast<std::size_t>((c * (order + 1) + dx) * (order + 1) + dy)];
    }
    Vec2 value() const { return {d(0, 0, 0), d(1, 0, 0)}; }
    Mat2 gradient() const { return {{{d(0, 1, 0), d(0, 0, 1)}, {d(1, 1, 0), d(1, 0, 1)}}}; }
    double divergence() const { return d(0, 1, 0) + d(1, 0, 1); }
};

inline VelocitySample sample_velocity(const VelocityBasis& b, const Eigen::VectorXd& u, int order) {
    VelocitySample s;
    s.order = order;
    s.data.assign(static_cast<std::size_t>(2 * (order + 1) * (order + 1)), 0.0);
    for (int l = 0; l < b.local_size(); ++l) {
        const double c = u[b.global(l)];
        if (c == 0.0)
            continue;
        const int comp = b.component(l);
        for (int dx = 0; dx <= order; ++dx)
            for (int dy = 0; dy + dx <= order; ++dy)
                s.d(comp, dx, dy) += c * b.deriv(l, dx, dy);
    }
    return s;
}

/// Evaluates u_h and all derivatives of total order <= derivOrder at x, on the element
/// owning x (or on `element` when given, for one-sided limits).
inline VelocitySample eval_velocity(const DivConformingPair& pair, const StateVector& state, const Point& x,
                                    int derivOrder = 1, std::optional<int> element = std::nullopt) {
    const auto& mesh = pair.mesh();
    if (!mesh.contains(x))
        throw DomainError("eval_velocity: point outside domain");
    const int id = element.value_or(mesh.locate(x));
    const auto b = eval_velocity_basis(pair, mesh.element(id), x, derivOrder);
    return sample_velocity(b, state.u, derivOrder);
}

inline double eval_pressure(const DivConformingPair& pair, const StateVector& state, const Point& x) {
    const auto& mesh = pair.mesh();
    const auto t = eval_tensor(pair.q(), mesh.element(mesh.locate(x)), x, 0);
    double p = 0.0;
    for (int l = 0; l < t.local_size(); ++l)
        p += state.p[t.global(l)] * t.deriv(l, 0, 0);
    return p;
}

/// Pure normal derivative of order m of velocity basis function l along axis.
inline double normal_derivative(const VelocityBasis& b, int l, int axis, int m) {
    return axis == 0 ? b.deriv(l, m, 0) : b.deriv(l, 0, m);
}

/// [[d^order_n u_h]] = plus-side minus minus-side, at a point on an interior facet.
inline Vec2 facet_normal_derivative_jump(const DivConformingPair& pair, const StateVector& state, const Facet& f,
                                         const Point& qp, std::optional<int> order = std::nullopt) {
    if (!f.is_interior())
        throw UsageError("facet_normal_derivative_jump: boundary facet has no jump");
    const int m = order.value_or(pair.alpha_prime() + 1);
    const auto& mesh = pair.mesh();
    const auto plus = eval_velocity_basis(pair, mesh.element(f.plusElement), qp, m);
    const auto minus = eval_velocity_basis(pair, mesh.element(*f.minusElement), qp, m);
    // n = +e_axis for interior facets; (n . grad)^m carries the sign n^m.
    const double sign = std::pow(f.normal[static_cast<std::size_t>(f.axis)], m);
    Vec2 jump{0.0, 0.0};
    for (int l = 0; l < plus.local_size(); ++l)
        jump[static_cast<std::size_t>(plus.component(l))] +=
            sign * state.u[plus.global(l)] * normal_derivative(plus, l, f.axis, m);
    for (int l = 0; l < minus.local_size(); ++l)
        jump[static_cast<std::size_t>(minus.component(l))] -=
            sign * state.u[minus.global(l)] * normal_derivative(minus, l, f.axis, m);
    return jump;
}

/// Number of Gauss points per direction used for element and facet integrals.
inline int default_quadrature_points(const DivConformingPair& pair) { return pair.k_prime() + 2; }

/// Velocity mass matrix (block diagonal in components).
inline Eigen::SparseMatrix<double> assemble_velocity_mass(const DivConformingPair& pair, int npts) {
    const auto& mesh = pair.mesh();
    const auto rule = gauss_rule(npts);
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto& e : mesh.elements()) {
        const auto q = element_quadrature(e, rule);
        Eigen::MatrixXd local;
        std::vector<int> dofs;
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto b = eval_velocity_basis(pair, e, q.points[k], 0);
            const int n = b.local_size();
            if (k == 0) {
                local = Eigen::MatrixXd::Zero(n, n);
                for (int l = 0; l < n; ++l)
                    dofs.push_back(b.global(l));
            }
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (b.component(i) == b.component(j))
                        local(i, j) += q.weights[k] * b.value(i) * b.value(j);
        }
        for (int j = 0; j < local.cols(); ++j)
            for (int i = 0; i < local.rows(); ++i)
                if (local(i, j) != 0.0)
                    trip.emplace_back(dofs[static_cast<std::size_t>(i)], dofs[static_cast<std::size_t>(j)], local(i, j));
    }
    Eigen::SparseMatrix<double> m(pair.num_velocity_dofs(), pair.num_velocity_dofs());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

/// Global L2 projection of an analytic field onto the (unconstrained) velocity space.
inline StateVector interpolate_field(const DivConformingPair& pair, const VectorField& field,
                                     std::optional<int> npts = std::nullopt) {
    const int nq = npts.value_or(pair.k_prime() + 3);
    const auto& mesh = pair.mesh();
    const auto rule = gauss_rule(nq);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(pair.num_velocity_dofs());
    for (const auto& e : mesh.elements()) {
        const auto q = element_quadrature(e, rule);
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto b = eval_velocity_basis(pair, e, q.points[k], 0);
            const Vec2 f = field(q.points[k]);
            for (int i = 0; i < b.local_size(); ++i)
                rhs[b.global(i)] += q.weights[k] * f[static_cast<std::size_t>(b.component(i))] * b.value(i);
        }
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(assemble_velocity_mass(pair, nq));
    if (solver.info() != Eigen::Success)
        throw SingularSystemError("interpolate_field: mass matrix factorization failed");
    StateVector s = pair.zero_state();
    s.u = solver.solve(rhs);
    return s;
}

}  // namespace divspline
