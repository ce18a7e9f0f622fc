#pragma once

// Minimal forward-mode dual numbers. Nest Dual<Dual<double>> for second derivatives.

#include <array>
#include <cmath>

namespace divspline {

template <class T>
struct Dual {
    T v{};
    T d{};

    Dual() = default;
    Dual(double c) : v(c), d(0.0) {}  // NOLINT(google-explicit-constructor)
    Dual(T value, T deriv) : v(value), d(deriv) {}

    friend Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
    friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
    friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
    friend Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
    friend Dual operator/(const Dual& a, const Dual& b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
    friend Dual operator+(const Dual& a, double b) { return {a.v + b, a.d}; }
    friend Dual operator+(double a, const Dual& b) { return {a + b.v, b.d}; }
    friend Dual operator-(const Dual& a, double b) { return {a.v - b, a.d}; }
    friend Dual operator-(double a, const Dual& b) { return {a - b.v, -b.d}; }
    friend Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
    friend Dual operator*(double a, const Dual& b) { return {a * b.v, a * b.d}; }
};

inline double value_of(double x) { return x; }
template <class T>
double value_of(const Dual<T>& x) {
    return value_of(x.v);
}

template <class T>
Dual<T> exp(const Dual<T>& a) {
    using std::exp;
    const T e = exp(a.v);
    return {e, a.d * e};
}
template <class T>
Dual<T> sin(const Dual<T>& a) {
    using std::cos;
    using std::sin;
    return {sin(a.v), a.d * cos(a.v)};
}
template <class T>
Dual<T> cos(const Dual<T>& a) {
    using std::cos;
    using std::sin;
    return {cos(a.v), -(a.d * sin(a.v))};
}

/// Gradient of a scalar field f(x, y) templated on the scalar type.
template <class F>
std::array<double, 2> ad_gradient(F&& f, double x, double y) {
    using D = Dual<double>;
    return {f(D{x, 1.0}, D{y, 0.0}).d, f(D{x, 0.0}, D{y, 1.0}).d};
}

/// Hessian [[fxx, fxy], [fxy, fyy]] by nested duals.
template <class F>
std::array<std::array<double, 2>, 2> ad_hessian(F&& f, double x, double y) {
    using D = Dual<double>;
    using DD = Dual<D>;
    auto second = [&](int i, int j) {
        const DD X{D{x, i == 0 ? 1.0 : 0.0}, D{j == 0 ? 1.0 : 0.0, 0.0}};
        const DD Y{D{y, i == 1 ? 1.0 : 0.0}, D{j == 1 ? 1.0 : 0.0, 0.0}};
        return f(X, Y).d.d;
    };
    const double xy = second(0, 1);
    return {{{second(0, 0), xy}, {xy, second(1, 1)}}};
}

}  // namespace divspline
