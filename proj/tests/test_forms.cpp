#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "divspline/forms.hpp"

using namespace divspline;

namespace {

Eigen::VectorXd random_vector(int n, std::mt19937& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = dist(rng);
    return v;
}

double quad_form(const SparseMatrix& a, const Eigen::VectorXd& u) { return u.dot(a * u); }

double max_asymmetry(const SparseMatrix& a) {
    const Eigen::MatrixXd d(a);
    return (d - d.transpose()).cwiseAbs().maxCoeff() / std::max(1e-300, d.cwiseAbs().maxCoeff());
}

// Integral of a univariate B-spline: (t_{i+p+1} - t_i) / (p + 1).
double basis_integral(const KnotVector& kv, int i) {
    const auto t = kv.knots();
    return (t[static_cast<std::size_t>(i + kv.degree() + 1)] - t[static_cast<std::size_t>(i)]) / (kv.degree() + 1);
}

}  // namespace

TEST(Eta, HandValues) {
    StabParams p;
    p.alphaPrime = 0;
    p.gamma = 1e-2;
    p.nu = 1e-3;
    EXPECT_NEAR(compute_eta(1.0, 1.0, 1.0 / 16, p), 3.90625e-5, 1e-18);
    p.nu = 0.25;
    EXPECT_NEAR(compute_eta(1.0, 1.0, 1.0 / 16, p), 9.765625e-6, 1e-18);
    EXPECT_EQ(compute_eta(0.0, 1.0, 1.0 / 16, p), 0.0);
    EXPECT_NEAR(compute_eta(-1.0, 1.0, 1.0 / 16, p), 9.765625e-6, 1e-18);
}

TEST(Eta, GammaFromDelta) {
    EXPECT_NEAR(StabParams::from_delta(1, 1.0).gamma, 1e-2, 1e-18);
    EXPECT_NEAR(StabParams::from_delta(2, 1.0).gamma, 1e-3, 1e-18);
    EXPECT_NEAR(StabParams::from_delta(3, 1.0).gamma, 1e-4, 1e-18);
    EXPECT_NEAR(StabParams::from_delta(2, 1.0, 3.0).gamma, 3e-3, 1e-18);
    EXPECT_DOUBLE_EQ(StabParams::from_delta(3, 1.0).cNit, 20.0);
}

TEST(Viscous, SymmetricAndMatchesDirectQuadrature) {
    std::mt19937 rng(1);
    const auto mesh = uniform_mesh(4, 3, {0.0, 0.0}, {1.0, 0.75});
    for (int kp : {1, 2}) {
        const DivConformingPair pair(mesh, kp);
        auto params = StabParams::from_delta(kp, 0.3);
        const auto parts = assemble_viscous_nitsche_parts(pair, params, {}, kp + 2);
        EXPECT_LT(max_asymmetry(parts.total()), 1e-10);
        EXPECT_EQ(parts.load.norm(), 0.0);

        const Eigen::VectorXd u = random_vector(pair.num_velocity_dofs(), rng);
        const StateVector s{u, Eigen::VectorXd::Zero(pair.num_pressure_dofs()), 0.0};
        double vol = 0.0, bnd = 0.0;
        const auto rule = gauss_rule(kp + 3);
        for (const auto& e : mesh.elements()) {
            const auto q = element_quadrature(e, rule);
            for (std::size_t k = 0; k < q.points.size(); ++k) {
                const auto g = eval_velocity(pair, s, q.points[k], 1, mesh.element_id(e.ix, e.iy)).gradient();
                const double off = 0.5 * (g[0][1] + g[1][0]);
                vol += q.weights[k] * (g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2 * off * off);
            }
        }
        for (const auto& f : mesh.boundary_facets()) {
            const auto q = facet_quadrature(f, rule);
            for (std::size_t k = 0; k < q.points.size(); ++k) {
                const Vec2 v = eval_velocity(pair, s, q.points[k], 0, f.plusElement).value();
                bnd += q.weights[k] * (v[0] * v[0] + v[1] * v[1]);
            }
        }
        EXPECT_NEAR(quad_form(parts.volume, u), 2 * params.nu * vol, 1e-10 * vol);
        EXPECT_NEAR(quad_form(parts.penalty, u), 2 * params.nu * params.cNit / mesh.h() * bnd, 1e-10 * bnd);
    }
}

TEST(Viscous, CoercivityWithStrongNormalTrace) {
    std::mt19937 rng(2);
    const auto mesh = uniform_mesh(8, 8);
    for (int kp : {1, 2}) {
        const DivConformingPair pair(mesh, kp);
        const auto params = StabParams::from_delta(kp, 0.01);
        const auto parts = assemble_viscous_nitsche_parts(pair, params, {}, kp + 2);
        const auto a = parts.total();
        const Eigen::VectorXd w = random_vector(pair.num_velocity_dofs(), rng);
        const auto j = assemble_skeleton(pair, w, params);
        for (int trial = 0; trial < 100; ++trial) {
            Eigen::VectorXd u = random_vector(pair.num_velocity_dofs(), rng);
            for (int d : pair.normal_boundary_dofs())
                u[d] = 0.0;
            const double triple = quad_form(parts.volume, u) + quad_form(parts.penalty, u) + quad_form(j, u);
            EXPECT_GE(quad_form(a, u) + quad_form(j, u), 0.5 * triple);
        }
    }
}

TEST(Divergence, AnalyticOracles) {
    const auto mesh = uniform_mesh(3, 4);
    for (int kp : {1, 2}) {
        const DivConformingPair pair(mesh, kp);
        const auto b = assemble_divergence(pair);
        ASSERT_EQ(b.rows(), pair.num_pressure_dofs());
        ASSERT_EQ(b.cols(), pair.num_velocity_dofs());
        const auto sol = interpolate_field(pair, [](const Point& x) { return Vec2{x[0], -x[1]}; });
        EXPECT_LT((b * sol.u).lpNorm<Eigen::Infinity>(), 1e-12);
        const auto dx = interpolate_field(pair, [](const Point& x) { return Vec2{x[0], 0.0}; });
        const Eigen::VectorXd r = b * dx.u;
        const auto& q = pair.q();
        for (int j = 0; j < q.ny(); ++j)
            for (int i = 0; i < q.nx(); ++i)
                EXPECT_NEAR(r[q.index(i, j)], basis_integral(q.kx(), i) * basis_integral(q.ky(), j), 1e-12);
    }
}

TEST(Convection, ZeroAdvectorGivesZero) {
    const auto mesh = uniform_mesh(3, 3);
    const DivConformingPair pair(mesh, 1);
    const auto ops = assemble_convection(pair, Eigen::VectorXd::Zero(pair.num_velocity_dofs()));
    EXPECT_EQ(Eigen::MatrixXd(ops.advection).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(Eigen::MatrixXd(ops.derivative).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Convection, SkewSymmetricForSolenoidalAdvector) {
    // w = curl of a discrete stream function with zero boundary values lies in V_h,
    // is pointwise solenoidal and has w.n = 0, so C(w; v, v) = 0.
    std::mt19937 rng(4);
    const auto mesh = uniform_mesh(5, 4);
    for (int kp : {1, 2}) {
        const DivConformingPair pair(mesh, kp);
        const int k = kp + 1;
        const auto kx = make_open_uniform(k, 5, 0.0, 1.0), ky = make_open_uniform(k, 4, 0.0, 1.0);
        const TensorSpace psi(kx, ky);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(psi.size());
        for (int j = 1; j < psi.ny() - 1; ++j)
            for (int i = 1; i < psi.nx() - 1; ++i)
                c[psi.index(i, j)] = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        const VectorField field = [&](const Point& x) {
            const auto& e = mesh.element(mesh.locate(x));
            const auto t = eval_tensor(psi, e, x, 1);
            Vec2 v{0.0, 0.0};
            for (int l = 0; l < t.local_size(); ++l) {
                v[0] += c[t.global(l)] * t.deriv(l, 0, 1);
                v[1] -= c[t.global(l)] * t.deriv(l, 1, 0);
            }
            return v;
        };
        const auto w = interpolate_field(pair, field, k + 2);
        for (int d : pair.normal_boundary_dofs())
            EXPECT_NEAR(w.u[d], 0.0, 1e-10);
        EXPECT_LT((assemble_divergence(pair) * w.u).lpNorm<Eigen::Infinity>(), 1e-10);
        // Integrand degree is about 3k per direction.
        const auto ops = assemble_convection(pair, w.u, (3 * k + 2) / 2 + 1);
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::VectorXd v = random_vector(pair.num_velocity_dofs(), rng);
            EXPECT_NEAR(quad_form(ops.advection, v), 0.0, 1e-10 * v.squaredNorm());
        }
    }
}

TEST(Convection, JacobianMatchesFiniteDifferences) {
    std::mt19937 rng(6);
    const auto mesh = uniform_mesh(4, 4);
    for (int kp : {1, 2}) {
        const DivConformingPair pair(mesh, kp);
        const Eigen::VectorXd u = random_vector(pair.num_velocity_dofs(), rng);
        const Eigen::VectorXd v = random_vector(pair.num_velocity_dofs(), rng);
        auto residual = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(assemble_convection(pair, x).advection * x); };
        const double eps = 1e-6;
        const Eigen::VectorXd fd = (residual(u + eps * v) - residual(u - eps * v)) / (2 * eps);
        const Eigen::VectorXd jv = assemble_convection(pair, u).jacobian() * v;
        EXPECT_LT((fd - jv).norm() / jv.norm(), 1e-6);
    }
}

TEST(Skeleton, ZeroWhenGammaZero) {
    std::mt19937 rng(8);
    const auto mesh = uniform_mesh(3, 3);
    const DivConformingPair pair(mesh, 1);
    auto params = StabParams::from_delta(1, 1e-3);
    params.gamma = 0.0;
    const auto j = assemble_skeleton(pair, random_vector(pair.num_velocity_dofs(), rng), params);
    EXPECT_EQ(j.nonZeros(), 0);
}

TEST(Skeleton, SymmetricPositiveSemidefinite) {
    std::mt19937 rng(10);
    const auto mesh = uniform_mesh(5, 5);
    for (int kp : {1, 2, 3}) {
        const DivConformingPair pair(mesh, kp);
        const auto params = StabParams::from_delta(kp, 1e-3);
        const auto j = assemble_skeleton(pair, random_vector(pair.num_velocity_dofs(), rng), params);
        EXPECT_GT(j.nonZeros(), 0);
        EXPECT_LT(max_asymmetry(j), 1e-12);
        for (int trial = 0; trial < 100; ++trial) {
            const Eigen::VectorXd u = random_vector(pair.num_velocity_dofs(), rng);
            EXPECT_GE(quad_form(j, u) / u.squaredNorm(), -1e-12);
        }
    }
}

TEST(Skeleton, PolynomialsAreNotPenalized) {
    std::mt19937 rng(12);
    const auto mesh = uniform_mesh(4, 4);
    for (int kp : {1, 2}) {
        const DivConformingPair pair(mesh, kp);
        const auto params = StabParams::from_delta(kp, 1e-3);
        const auto j = assemble_skeleton(pair, random_vector(pair.num_velocity_dofs(), rng), params);
        const auto s = interpolate_field(pair, [kp](const Point& x) {
            return Vec2{std::pow(x[0] - x[1], kp) + x[1], std::pow(2 * x[0] + x[1], kp)};
        });
        const auto r = random_vector(pair.num_velocity_dofs(), rng);
        EXPECT_LT(std::abs(quad_form(j, s.u)), 1e-12 * quad_form(j, r));
    }
}

TEST(Skeleton, ActsOnlyOnTangentialComponents) {
    // On an n x 1 mesh every interior facet is vertical, where Vx is the normal
    // component: a Vx-only state is never penalized, a Vy-only state is.
    std::mt19937 rng(14);
    const auto mesh = uniform_mesh(6, 1);
    for (int kp : {1, 2, 3}) {
        const DivConformingPair pair(mesh, kp);
        const auto params = StabParams::from_delta(kp, 1e-3);
        const auto j = assemble_skeleton(pair, random_vector(pair.num_velocity_dofs(), rng), params);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd u = random_vector(pair.num_velocity_dofs(), rng);
            Eigen::VectorXd normalOnly = u, tangentialOnly = u;
            normalOnly.tail(pair.vy().size()).setZero();
            tangentialOnly.head(pair.vx().size()).setZero();
            EXPECT_LT(std::abs(quad_form(j, normalOnly)), 1e-14 * quad_form(j, tangentialOnly));
            EXPECT_GT(quad_form(j, tangentialOnly), 0.0);
        }
    }
}

TEST(Skeleton, EtaVanishesForTangentialFlow) {
    // w = (1, 0) is tangential on horizontal facets and normal on vertical ones.
    const auto mesh = uniform_mesh(1, 5);
    const DivConformingPair pair(mesh, 1);
    const auto params = StabParams::from_delta(1, 1e-3);
    const auto w = interpolate_field(pair, [](const Point&) { return Vec2{1.0, 0.0}; });
    const auto j = assemble_skeleton(pair, w.u, params);
    EXPECT_LT(Eigen::MatrixXd(j).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Load, ZeroAndConstantForcing) {
    const auto mesh = uniform_mesh(3, 2);
    for (int kp : {1, 2}) {
        const DivConformingPair pair(mesh, kp);
        const auto params = StabParams::from_delta(kp, 1.0);
        EXPECT_EQ(assemble_load(pair, [](const Point&) { return Vec2{0.0, 0.0}; }, params, {}).norm(), 0.0);
        const auto rhs = assemble_load(pair, [](const Point&) { return Vec2{1.0, 0.0}; }, params, {});
        const auto& vx = pair.vx();
        for (int j = 0; j < vx.ny(); ++j)
            for (int i = 0; i < vx.nx(); ++i)
                EXPECT_NEAR(rhs[vx.index(i, j)], basis_integral(vx.kx(), i) * basis_integral(vx.ky(), j), 1e-12);
        EXPECT_LT(rhs.tail(pair.vy().size()).lpNorm<Eigen::Infinity>(), 1e-15);
    }
}

TEST(Load, NitscheDataConsistency) {
    // For u in V_h matching uD on the boundary, A_h(u, v) - L_h(v) reduces to the
    // volume form minus the consistency term (v, 2 nu n.sym grad u): zero penalty mismatch.
    const auto mesh = uniform_mesh(4, 4);
    const DivConformingPair pair(mesh, 2);
    const auto params = StabParams::from_delta(2, 0.1);
    const VectorField uD = [](const Point& x) { return Vec2{x[1] * x[1], x[0] - x[1]}; };
    BoundaryData bc;
    bc.uD = uD;
    const auto s = interpolate_field(pair, uD);
    const auto parts = assemble_viscous_nitsche_parts(pair, params, bc, 4);
    // Penalty and symmetric-consistency data terms cancel their operator counterparts.
    const BoundaryData none;
    const auto hom = assemble_viscous_nitsche_parts(pair, params, none, 4);
    const Eigen::VectorXd lhs = hom.total() * s.u - parts.load;
    const Eigen::VectorXd volumeOnly = hom.volume * s.u;
    // The remaining term -(2 nu n.sym grad u, v) is what a consistent method keeps;
    // check it against the difference of total and volume on the constrained-free part.
    const Eigen::VectorXd cons = lhs - volumeOnly;
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(pair.num_velocity_dofs());
    const auto rule = gauss_rule(4);
    for (const auto& f : mesh.boundary_facets()) {
        const auto q = facet_quadrature(f, rule);
        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const auto b = eval_velocity_basis(pair, mesh.element(f.plusElement), q.points[k], 1);
            const auto g = sample_velocity(b, s.u, 1).gradient();
            for (int l = 0; l < b.local_size(); ++l) {
                const int c = b.component(l);
                const double tr = (g[c][0] + g[0][c]) * 0.5 * f.normal[0] + (g[c][1] + g[1][c]) * 0.5 * f.normal[1];
                direct[b.global(l)] -= q.weights[k] * 2 * params.nu * tr * b.value(l);
            }
        }
    }
    EXPECT_LT((cons - direct).lpNorm<Eigen::Infinity>(), 1e-11);
}
