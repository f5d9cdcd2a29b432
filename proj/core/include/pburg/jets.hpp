#pragma once

#include <array>
#include <cmath>
#include <functional>

#include "pburg/errors.hpp"
#include "pburg/numbers.hpp"

namespace pburg {

// ---------------------------------------------------------------------------
// Jet1: second-order Taylor data of a univariate function, (v, v', v'').
// Used for t-only building blocks of transformations (antiderivatives and
// friends), where the fundamental theorem supplies exact derivatives.
// ---------------------------------------------------------------------------

struct Jet1 {
    double v = 0.0, d1 = 0.0, d2 = 0.0;

    static Jet1 constant(double c) { return {c, 0.0, 0.0}; }
    static Jet1 seed(double t) { return {t, 1.0, 0.0}; }
};

inline Jet1 operator+(const Jet1& a, const Jet1& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
inline Jet1 operator-(const Jet1& a, const Jet1& b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
inline Jet1 operator-(const Jet1& a) { return {-a.v, -a.d1, -a.d2}; }
inline Jet1 operator*(const Jet1& a, const Jet1& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
inline Jet1 operator*(double c, const Jet1& a) { return {c * a.v, c * a.d1, c * a.d2}; }
inline Jet1 operator*(const Jet1& a, double c) { return c * a; }
inline Jet1 operator+(const Jet1& a, double c) { return {a.v + c, a.d1, a.d2}; }
inline Jet1 operator+(double c, const Jet1& a) { return a + c; }
inline Jet1 operator-(const Jet1& a, double c) { return a + (-c); }
inline Jet1 operator-(double c, const Jet1& a) { return (-a) + c; }

/// Compose a scalar function given by its value and first two derivatives at
/// u.v with the inner jet u (univariate chain rule).
inline Jet1 chain(const Jet1& u, double f0, double f1, double f2) {
    return {f0, f1 * u.d1, f1 * u.d2 + f2 * u.d1 * u.d1};
}

inline Jet1 inv(const Jet1& u) {
    double r = 1.0 / u.v;
    return chain(u, r, -r * r, 2.0 * r * r * r);
}
inline Jet1 operator/(const Jet1& a, const Jet1& b) { return a * inv(b); }
inline Jet1 operator/(const Jet1& a, double c) { return (1.0 / c) * a; }
inline Jet1 operator/(double c, const Jet1& a) { return c * inv(a); }

inline Jet1 exp(const Jet1& u) {
    double e = std::exp(u.v);
    return chain(u, e, e, e);
}
inline Jet1 sqrt(const Jet1& u) {
    double s = std::sqrt(u.v);
    return chain(u, s, 0.5 / s, -0.25 / (s * u.v));
}
inline Jet1 sq(const Jet1& u) { return u * u; }

/// A smooth function of t carrying its 2-jet; the common currency for
/// transformation components built from antiderivatives.
using CurveFn = std::function<Jet1(double)>;

// ---------------------------------------------------------------------------
// D2: second-order Taylor data of a scalar function of (t, x, w): value,
// gradient and symmetric Hessian. Transformation components are evaluated on
// D2 seeds, which yields every partial derivative the jet pushforward and the
// classifying equations need, exactly and in one pass.
// ---------------------------------------------------------------------------

struct D2 {
    double v = 0.0;
    std::array<double, 3> g{};   // d/dt, d/dx, d/dw
    std::array<double, 6> h{};   // tt, tx, tw, xx, xw, ww

    enum : int { TT = 0, TX = 1, TW = 2, XX = 3, XW = 4, WW = 5 };
    enum : int { T = 0, X = 1, W = 2 };

    static D2 constant(double c) {
        D2 r;
        r.v = c;
        return r;
    }
    static D2 seed(double value, int var) {
        D2 r;
        r.v = value;
        r.g[var] = 1.0;
        return r;
    }

    double dt() const { return g[T]; }
    double dx() const { return g[X]; }
    double dw() const { return g[W]; }
};

inline int d2_pair(int i, int j) {
    static constexpr int idx[3][3] = {{D2::TT, D2::TX, D2::TW},
                                      {D2::TX, D2::XX, D2::XW},
                                      {D2::TW, D2::XW, D2::WW}};
    return idx[i][j];
}

inline D2 operator+(const D2& a, const D2& b) {
    D2 r;
    r.v = a.v + b.v;
    for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] + b.g[i];
    for (int i = 0; i < 6; ++i) r.h[i] = a.h[i] + b.h[i];
    return r;
}
inline D2 operator-(const D2& a, const D2& b) {
    D2 r;
    r.v = a.v - b.v;
    for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] - b.g[i];
    for (int i = 0; i < 6; ++i) r.h[i] = a.h[i] - b.h[i];
    return r;
}
inline D2 operator-(const D2& a) {
    D2 r;
    r.v = -a.v;
    for (int i = 0; i < 3; ++i) r.g[i] = -a.g[i];
    for (int i = 0; i < 6; ++i) r.h[i] = -a.h[i];
    return r;
}

inline D2 operator*(const D2& a, const D2& b) {
    D2 r;
    r.v = a.v * b.v;
    for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            int k = d2_pair(i, j);
            r.h[k] = a.h[k] * b.v + a.v * b.h[k] + a.g[i] * b.g[j] + a.g[j] * b.g[i];
        }
    return r;
}
inline D2 operator*(double c, const D2& a) {
    D2 r;
    r.v = c * a.v;
    for (int i = 0; i < 3; ++i) r.g[i] = c * a.g[i];
    for (int i = 0; i < 6; ++i) r.h[i] = c * a.h[i];
    return r;
}
inline D2 operator*(const D2& a, double c) { return c * a; }
inline D2 operator+(const D2& a, double c) {
    D2 r = a;
    r.v += c;
    return r;
}
inline D2 operator+(double c, const D2& a) { return a + c; }
inline D2 operator-(const D2& a, double c) { return a + (-c); }
inline D2 operator-(double c, const D2& a) { return (-a) + c; }

/// Univariate outer function (value and first two derivatives at u.v)
/// composed with the inner multivariate jet u.
inline D2 chain(const D2& u, double f0, double f1, double f2) {
    D2 r;
    r.v = f0;
    for (int i = 0; i < 3; ++i) r.g[i] = f1 * u.g[i];
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            int k = d2_pair(i, j);
            r.h[k] = f1 * u.h[k] + f2 * u.g[i] * u.g[j];
        }
    return r;
}

inline D2 inv(const D2& u) {
    double r = 1.0 / u.v;
    return chain(u, r, -r * r, 2.0 * r * r * r);
}
inline D2 operator/(const D2& a, const D2& b) { return a * inv(b); }
inline D2 operator/(const D2& a, double c) { return (1.0 / c) * a; }
inline D2 operator/(double c, const D2& a) { return c * inv(a); }

inline D2 exp(const D2& u) {
    double e = std::exp(u.v);
    return chain(u, e, e, e);
}
inline D2 ln(const D2& u) {
    double r = 1.0 / u.v;
    return chain(u, std::log(u.v), r, -r * r);
}
inline D2 sqrt(const D2& u) {
    double s = std::sqrt(u.v);
    return chain(u, s, 0.5 / s, -0.25 / (s * u.v));
}
/// |u| away from u = 0 (derivative sign(u), second derivative 0).
inline D2 abs(const D2& u) {
    double s = u.v < 0.0 ? -1.0 : 1.0;
    return chain(u, s * u.v, s, 0.0);
}
inline D2 sq(const D2& u) { return u * u; }

inline D2 pow(const D2& u, double r) {
    double p = std::pow(u.v, r);
    double p1 = r * std::pow(u.v, r - 1.0);
    double p2 = r * (r - 1.0) * std::pow(u.v, r - 2.0);
    return chain(u, p, p1, p2);
}

/// Embed the 2-jet of a t-only function (a CurveFn evaluation) into a D2
/// argument; this is how antiderivative-backed factors enter component maps.
inline D2 apply_curve(const Jet1& phi, const D2& t) { return chain(t, phi.v, phi.d1, phi.d2); }

}  // namespace pburg
