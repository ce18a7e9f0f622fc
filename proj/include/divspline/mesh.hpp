#pragma once

// Cartesian parametric mesh, skeleton facets and Gauss-Legendre quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "divspline/bspline.hpp"
#include "divspline/errors.hpp"

namespace divspline {

using Point = std::array<double, 2>;

/// Gauss-Legendre rule on the reference interval [0, 1].
struct QuadratureRule {
    std::vector<double> points;
    std::vector<double> weights;

    int size() const { return static_cast<int>(points.size()); }
};

inline QuadratureRule gauss_rule(int npts) {
    if (npts < 1 || npts > 10)
        throw ParameterError("gauss_rule: npts must be in [1, 10]");
    QuadratureRule rule;
    rule.points.resize(static_cast<std::size_t>(npts));
    rule.weights.resize(static_cast<std::size_t>(npts));
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    for (int i = 0; i < (npts + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (npts + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= npts; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = npts * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16)
                break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(npts - 1 - i);
        rule.points[lo] = 0.5 * (1.0 - z);
        rule.points[hi] = 0.5 * (1.0 + z);
        rule.weights[lo] = 0.5 * w;
        rule.weights[hi] = 0.5 * w;
    }
    return rule;
}

enum class Side { Left = 0, Right = 1, Bottom = 2, Top = 3 };

struct Element {
    int ix = 0, iy = 0;
    std::array<double, 2> lo{}, hi{};

    double width(int axis) const { return hi[static_cast<std::size_t>(axis)] - lo[static_cast<std::size_t>(axis)]; }
    double area() const { return width(0) * width(1); }
};

/// Facet between elements; n = outward normal of the plus element.
/// Interior vertical facets take the left element as plus, horizontal ones the lower.
struct Facet {
    int axis = 0;          // normal axis: 0 for x = const, 1 for y = const
    double coordinate = 0;
    std::array<double, 2> span{};  // extent along the other axis
    int plusElement = -1;
    std::optional<int> minusElement;
    Point normal{};
    std::optional<Side> side;  // boundary facets only

    bool is_interior() const { return minusElement.has_value(); }
    double length() const { return span[1] - span[0]; }
    Point point_at(double t) const {
        Point p{};
        p[static_cast<std::size_t>(axis)] = coordinate;
        p[static_cast<std::size_t>(1 - axis)] = t;
        return p;
    }
};

struct FacetQuadrature {
    std::vector<Point> points;
    std::vector<double> weights;
};

class CartesianMesh {
public:
    CartesianMesh(KnotVector kvX, KnotVector kvY) : kvX_(std::move(kvX)), kvY_(std::move(kvY)) {
        const auto ux = kvX_.unique_knots();
        const auto uy = kvY_.unique_knots();
        nx_ = static_cast<int>(ux.size()) - 1;
        ny_ = static_cast<int>(uy.size()) - 1;
        xs_.assign(ux.begin(), ux.end());
        ys_.assign(uy.begin(), uy.end());

        elements_.reserve(static_cast<std::size_t>(nx_ * ny_));
        for (int j = 0; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i) {
                Element e;
                e.ix = i;
                e.iy = j;
                e.lo = {xs_[i], ys_[j]};
                e.hi = {xs_[i + 1], ys_[j + 1]};
                h_ = std::max({h_, e.width(0), e.width(1)});
                elements_.push_back(e);
            }

        for (int j = 0; j < ny_; ++j)
            for (int i = 1; i < nx_; ++i)
                interior_.push_back(Facet{0, xs_[i], {ys_[j], ys_[j + 1]}, element_id(i - 1, j),
                                          element_id(i, j), {1.0, 0.0}, std::nullopt});
        for (int j = 1; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i)
                interior_.push_back(Facet{1, ys_[j], {xs_[i], xs_[i + 1]}, element_id(i, j - 1),
                                          element_id(i, j), {0.0, 1.0}, std::nullopt});

        for (int j = 0; j < ny_; ++j) {
            boundary_.push_back(Facet{0, xs_.front(), {ys_[j], ys_[j + 1]}, element_id(0, j),
                                      std::nullopt, {-1.0, 0.0}, Side::Left});
            boundary_.push_back(Facet{0, xs_.back(), {ys_[j], ys_[j + 1]}, element_id(nx_ - 1, j),
                                      std::nullopt, {1.0, 0.0}, Side::Right});
        }
        for (int i = 0; i < nx_; ++i) {
            boundary_.push_back(Facet{1, ys_.front(), {xs_[i], xs_[i + 1]}, element_id(i, 0),
                                      std::nullopt, {0.0, -1.0}, Side::Bottom});
            boundary_.push_back(Facet{1, ys_.back(), {xs_[i], xs_[i + 1]}, element_id(i, ny_ - 1),
                                      std::nullopt, {0.0, 1.0}, Side::Top});
        }
    }

    const KnotVector& knots_x() const { return kvX_; }
    const KnotVector& knots_y() const { return kvY_; }
    std::span<const double> unique_knots_x() const { return xs_; }
    std::span<const double> unique_knots_y() const { return ys_; }
    int num_elements_x() const { return nx_; }
    int num_elements_y() const { return ny_; }
    std::span<const Element> elements() const { return elements_; }
    const Element& element(int id) const { return elements_[static_cast<std::size_t>(id)]; }
    int element_id(int ix, int iy) const { return ix + nx_ * iy; }
    std::span<const Facet> interior_facets() const { return interior_; }
    std::span<const Facet> boundary_facets() const { return boundary_; }

    /// Global mesh size: the largest element edge length.
    double h() const { return h_; }
    std::array<double, 2> lower() const { return {xs_.front(), ys_.front()}; }
    std::array<double, 2> upper() const { return {xs_.back(), ys_.back()}; }
    double area() const { return (xs_.back() - xs_.front()) * (ys_.back() - ys_.front()); }

    bool contains(const Point& p) const {
        return p[0] >= xs_.front() && p[0] <= xs_.back() && p[1] >= ys_.front() && p[1] <= ys_.back();
    }

    /// Element owning p (half-open convention, closed at the upper boundary).
    int locate(const Point& p) const {
        if (!contains(p))
            throw DomainError("CartesianMesh: point outside domain");
        auto index = [](std::span<const double> u, double x) {
            auto it = std::upper_bound(u.begin(), u.end(), x);
            int i = static_cast<int>(it - u.begin()) - 1;
            return std::min(i, static_cast<int>(u.size()) - 2);
        };
        return element_id(index(xs_, p[0]), index(ys_, p[1]));
    }

private:
    KnotVector kvX_, kvY_;
    int nx_ = 0, ny_ = 0;
    std::vector<double> xs_, ys_;
    double h_ = 0.0;
    std::vector<Element> elements_;
    std::vector<Facet> interior_, boundary_;
};

inline CartesianMesh build_mesh(const KnotVector& kvX, const KnotVector& kvY) { return CartesianMesh(kvX, kvY); }

/// Uniform mesh of nx x ny elements on [a1,b1] x [a2,b2].
inline CartesianMesh uniform_mesh(int nx, int ny, std::array<double, 2> lo = {0.0, 0.0},
                                  std::array<double, 2> hi = {1.0, 1.0}) {
    return CartesianMesh(make_open_uniform(1, nx, lo[0], hi[0]), make_open_uniform(1, ny, lo[1], hi[1]));
}

inline FacetQuadrature facet_quadrature(const Facet& f, const QuadratureRule& rule) {
    FacetQuadrature q;
    const double len = f.length();
    for (int i = 0; i < rule.size(); ++i) {
        q.points.push_back(f.point_at(f.span[0] + len * rule.points[static_cast<std::size_t>(i)]));
        q.weights.push_back(len * rule.weights[static_cast<std::size_t>(i)]);
    }
    return q;
}

/// Tensor Gauss points of an element; weights carry the element area.
struct ElementQuadrature {
    std::vector<Point> points;
    std::vector<double> weights;
};

inline ElementQuadrature element_quadrature(const Element& e, const QuadratureRule& rule) {
    ElementQuadrature q;
    const double wx = e.width(0), wy = e.width(1);
    for (int j = 0; j < rule.size(); ++j)
        for (int i = 0; i < rule.size(); ++i) {
            q.points.push_back({e.lo[0] + wx * rule.points[static_cast<std::size_t>(i)],
                                e.lo[1] + wy * rule.points[static_cast<std::size_t>(j)]});
            q.weights.push_back(wx * wy * rule.weights[static_cast<std::size_t>(i)] *
                                rule.weights[static_cast<std::size_t>(j)]);
        }
    return q;
}

}  // namespace divspline
