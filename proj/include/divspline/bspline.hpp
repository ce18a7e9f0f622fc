#pragma once

// Univariate B-spline knot vectors and Cox-de Boor basis evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "divspline/errors.hpp"

namespace divspline {

/// Open, nondecreasing knot vector with degree and per-unique-knot
/// multiplicity/regularity metadata (regularity = degree - multiplicity).
class KnotVector {
public:
    KnotVector() = default;

    KnotVector(int degree, std::vector<double> knots) : degree_(degree), knots_(std::move(knots)) {
        if (degree_ < 0)
            throw ParameterError("KnotVector: negative degree");
        const auto m = knots_.size();
        if (m < 2 * static_cast<std::size_t>(degree_ + 1))
            throw ParameterError("KnotVector: too few knots for degree " + std::to_string(degree_));
        if (!std::is_sorted(knots_.begin(), knots_.end()))
            throw ParameterError("KnotVector: knots must be nondecreasing");
        if (!(knots_.front() < knots_.back()))
            throw ParameterError("KnotVector: empty parametric range");

        for (std::size_t i = 0; i < m;) {
            std::size_t j = i;
            while (j < m && knots_[j] == knots_[i])
                ++j;
            unique_.push_back(knots_[i]);
            multiplicity_.push_back(static_cast<int>(j - i));
            i = j;
        }
        if (multiplicity_.front() != degree_ + 1 || multiplicity_.back() != degree_ + 1)
            throw ParameterError("KnotVector: end knots must be repeated degree+1 times (open)");
        for (std::size_t j = 1; j + 1 < multiplicity_.size(); ++j)
            if (multiplicity_[j] > degree_ + 1)
                throw ParameterError("KnotVector: interior multiplicity exceeds degree+1");
    }

    int degree() const { return degree_; }
    std::span<const double> knots() const { return knots_; }
    std::span<const double> unique_knots() const { return unique_; }
    std::span<const int> multiplicities() const { return multiplicity_; }

    /// alpha_j = k - beta_j; -1 at the (open) ends.
    std::vector<int> regularity() const {
        std::vector<int> r(multiplicity_.size());
        for (std::size_t j = 0; j < r.size(); ++j)
            r[j] = degree_ - multiplicity_[j];
        return r;
    }

    /// Number of basis functions.
    int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    int num_elements() const { return static_cast<int>(unique_.size()) - 1; }
    double front() const { return knots_.front(); }
    double back() const { return knots_.back(); }

    /// Knot index s of the span [xi_s, xi_{s+1}) that coincides with unique interval e.
    int element_span(int e) const {
        if (e < 0 || e >= num_elements())
            throw DomainError("KnotVector: element index out of range");
        int s = degree_;
        for (int j = 1; j <= e; ++j)
            s += multiplicity_[static_cast<std::size_t>(j)];
        return s;
    }

    /// Span containing x; half-open intervals with closure at the right end.
    int find_span(double x) const {
        if (x < front() || x > back() || std::isnan(x))
            throw DomainError("KnotVector: x = " + std::to_string(x) + " outside [" +
                              std::to_string(front()) + ", " + std::to_string(back()) + "]");
        const int n = size();
        if (x >= knots_[static_cast<std::size_t>(n)])
            return n - 1;
        auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n, x);
        return static_cast<int>(it - knots_.begin()) - 1;
    }

    bool operator==(const KnotVector&) const = default;

private:
    int degree_ = 0;
    std::vector<double> knots_;
    std::vector<double> unique_;
    std::vector<int> multiplicity_;
};

/// Values and derivatives of the degree+1 basis functions that are nonzero on one span.
struct BasisEval {
    int spanIndex = 0;
    int degree = 0;
    int maxDeriv = 0;
    std::vector<double> values;  // (maxDeriv+1) x (degree+1), row-major

    /// Global index of the first nonzero function.
    int first_index() const { return spanIndex - degree; }
    double operator()(int d, int i) const {
        return values[static_cast<std::size_t>(d * (degree + 1) + i)];
    }
    double& operator()(int d, int i) { return values[static_cast<std::size_t>(d * (degree + 1) + i)]; }
    std::span<const double> row(int d) const {
        return {values.data() + static_cast<std::size_t>(d * (degree + 1)),
                static_cast<std::size_t>(degree + 1)};
    }
};

inline KnotVector make_open_uniform(int degree, int numElements, double a, double b) {
    if (degree < 1)
        throw ParameterError("make_open_uniform: degree must be >= 1");
    if (numElements < 1)
        throw ParameterError("make_open_uniform: numElements must be >= 1");
    if (!(a < b))
        throw ParameterError("make_open_uniform: interval must satisfy a < b");
    std::vector<double> knots;
    knots.reserve(static_cast<std::size_t>(2 * degree + numElements + 1));
    knots.insert(knots.end(), static_cast<std::size_t>(degree), a);
    for (int e = 0; e <= numElements; ++e)
        knots.push_back(e == numElements ? b : a + (b - a) * e / numElements);
    knots.insert(knots.end(), static_cast<std::size_t>(degree), b);
    return KnotVector(degree, std::move(knots));
}

/// Cox-de Boor evaluation with derivatives on a prescribed span (used directly
/// for one-sided limits at knots). Derivatives of order > degree are zero.
inline BasisEval eval_basis_in_span(const KnotVector& kv, int span, double x, int maxDeriv) {
    const int p = kv.degree();
    const auto U = kv.knots();
    BasisEval out;
    out.spanIndex = span;
    out.degree = p;
    out.maxDeriv = maxDeriv;
    out.values.assign(static_cast<std::size_t>((maxDeriv + 1) * (p + 1)), 0.0);

    // ndu holds basis values (upper triangle) and knot differences (lower).
    thread_local std::vector<double> ndu, left, right, a;
    ndu.assign(static_cast<std::size_t>((p + 1) * (p + 1)), 0.0);
    auto NDU = [&](int r, int c) -> double& { return ndu[static_cast<std::size_t>(r * (p + 1) + c)]; };
    left.assign(static_cast<std::size_t>(p + 1), 0.0);
    right.assign(static_cast<std::size_t>(p + 1), 0.0);
    NDU(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - U[static_cast<std::size_t>(span + 1 - j)];
        right[j] = U[static_cast<std::size_t>(span + j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            NDU(j, r) = right[r + 1] + left[j - r];
            const double temp = NDU(r, j - 1) / NDU(j, r);
            NDU(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        NDU(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j)
        out(0, j) = NDU(j, p);

    const int nd = std::min(maxDeriv, p);
    a.assign(static_cast<std::size_t>(2 * (p + 1)), 0.0);
    auto A = [&](int s, int c) -> double& { return a[static_cast<std::size_t>(s * (p + 1) + c)]; };
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        A(0, 0) = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                A(s2, 0) = A(s1, 0) / NDU(pk + 1, rk);
                d = A(s2, 0) * NDU(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                A(s2, j) = (A(s1, j) - A(s1, j - 1)) / NDU(pk + 1, rk + j);
                d += A(s2, j) * NDU(rk + j, pk);
            }
            if (r <= pk) {
                A(s2, k) = -A(s1, k - 1) / NDU(pk + 1, r);
                d += A(s2, k) * NDU(r, pk);
            }
            out(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= nd; ++k) {
        for (int j = 0; j <= p; ++j)
            out(k, j) *= factor;
        factor *= (p - k);
    }
    return out;
}

/// Nonzero basis functions (and derivatives up to maxDeriv) at x.
inline BasisEval eval_nonzero_basis(const KnotVector& kv, double x, int maxDeriv) {
    if (maxDeriv < 0)
        throw ParameterError("eval_nonzero_basis: maxDeriv must be >= 0");
    return eval_basis_in_span(kv, kv.find_span(x), x, maxDeriv);
}

/// Value of the d-th derivative of a single basis function (global index i) at x.
inline double eval_single_basis(const KnotVector& kv, int i, double x, int d) {
    const auto be = eval_nonzero_basis(kv, x, d);
    const int local = i - be.first_index();
    if (local < 0 || local > kv.degree())
        return 0.0;
    return be(d, local);
}

}  // namespace divspline
