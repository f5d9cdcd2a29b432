#include "pburg/transforms.hpp"

#include <cmath>

#include "pburg/errors.hpp"

namespace pburg {

namespace {

constexpr double kPoleMargin = 1e-9;

CurveFn expr_curve(const Expr& g) {
    Expr dg = simplify(differentiate(g, Var::t));
    Expr ddg = simplify(differentiate(dg, Var::t));
    return [g, dg, ddg](double t) {
        Bindings b{t, std::nullopt, std::nullopt};
        return Jet1{evaluate(g, b), evaluate(dg, b), evaluate(ddg, b)};
    };
}

}  // namespace

double solve_monotone(const std::function<double(double)>& fn, double target, double lo,
                      double hi) {
    auto probe = [&](double t, bool& ok) -> double {
        ok = true;
        try {
            double v = fn(t);
            if (!std::isfinite(v)) ok = false;
            return v;
        } catch (const Error&) {
            ok = false;
            return 0.0;
        }
    };
    for (int expansion = 0; expansion < 9; ++expansion) {
        const int grid = 64;
        double prev_t = 0, prev_v = 0;
        bool have_prev = false;
        for (int i = 0; i <= grid; ++i) {
            double t = lo + (hi - lo) * i / grid;
            bool ok;
            double v = probe(t, ok);
            if (!ok) {
                have_prev = false;
                continue;
            }
            if (v == target) return t;
            if (have_prev && (prev_v - target) * (v - target) < 0.0) {
                double a = prev_t, b = t;
                double fa = prev_v;
                for (int it = 0; it < 100; ++it) {
                    double m = 0.5 * (a + b);
                    bool okm;
                    double vm = probe(m, okm);
                    if (!okm) break;
                    if ((fa - target) * (vm - target) <= 0.0)
                        b = m;
                    else {
                        a = m;
                        fa = vm;
                    }
                }
                double root = 0.5 * (a + b);
                bool okr;
                double vr = probe(root, okr);
                if (okr && std::fabs(vr - target) <= 1e-7 * (1.0 + std::fabs(target)))
                    return root;
            }
            prev_t = t;
            prev_v = v;
            have_prev = true;
        }
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        lo = mid - 2.0 * half;
        hi = mid + 2.0 * half;
    }
    throw InversionError("could not bracket a preimage for target " + std::to_string(target));
}

namespace {

constexpr auto bracket_solve = solve_monotone;

Interval expanded(Interval iv, double frac) {
    double m = frac * iv.width();
    return {iv.lo - m, iv.hi + m};
}

/// Composes a scalar function of up to three arguments, given by its value,
/// gradient and (symmetric) Hessian at the point, with incoming jets.
D2 compose_jets(double value, const std::array<double, 3>& grad,
                const std::array<std::array<double, 3>, 3>& hess,
                const std::array<const D2*, 3>& in) {
    D2 r;
    r.v = value;
    for (int k = 0; k < 3; ++k) {
        double g = 0;
        for (int i = 0; i < 3; ++i) g += grad[i] * in[i]->g[k];
        r.g[k] = g;
    }
    for (int k = 0; k < 3; ++k)
        for (int l = k; l < 3; ++l) {
            double h = 0;
            for (int i = 0; i < 3; ++i) h += grad[i] * in[i]->h[d2_pair(k, l)];
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) h += hess[i][j] * in[i]->g[k] * in[j]->g[l];
            r.h[d2_pair(k, l)] = h;
        }
    return r;
}

}  // namespace

std::string group_name(const AnyParams& p) {
    struct Visitor {
        std::string operator()(const UsualPotParams&) const { return "usual-pot"; }
        std::string operator()(const P3Params&) const { return "p3"; }
        std::string operator()(const P2Params&) const { return "p2"; }
        std::string operator()(const P2LinearParams&) const { return "p2-linear"; }
        std::string operator()(const CUsualParams&) const { return "c-usual"; }
        std::string operator()(const C2Params&) const { return "c2"; }
        std::string operator()(const GbeParams&) const { return "gbe"; }
    };
    return std::visit(Visitor{}, p);
}

// ---------------------------------------------------------------------------
// Heat solutions for the p3 builder
// ---------------------------------------------------------------------------

HeatSolution heat_solution(const F2Spec& spec, double f_const, const SampleBox* validate_box) {
    if (f_const == 0.0) throw ParamError("heat solution requires a nonzero constant f");
    Expr fe = Expr::real(f_const);
    Expr x2 = Expr::pow(Expr::x(), Number::integer(2));
    Expr x3 = Expr::pow(Expr::x(), Number::integer(3));
    switch (spec.kind) {
        case F2Spec::Kind::zero: return {Expr(), f_const};
        case F2Spec::Kind::constant: return {Expr::real(spec.value), f_const};
        case F2Spec::Kind::linear: return {Expr::x(), f_const};
        case F2Spec::Kind::quadratic:
            return {simplify(x2 - Expr::integer(2) * fe * Expr::t()), f_const};
        case F2Spec::Kind::cubic:
            return {simplify(x3 - Expr::integer(6) * fe * Expr::t() * Expr::x()), f_const};
        case F2Spec::Kind::exponential: {
            double a = spec.value;
            Expr arg = simplify(Expr::real(a) * Expr::x() - Expr::real(a * a * f_const) * Expr::t());
            return {Expr::exp(arg), f_const};
        }
        case F2Spec::Kind::custom: {
            if (!spec.expr) throw ParamError("custom heat solution needs an expression");
            Expr e = *spec.expr;
            if (e.depends_on(Var::w))
                throw ParamError("heat solution must be a function of (t, x)");
            if (validate_box) {
                Expr res = differentiate(e, Var::t) +
                           fe * differentiate(differentiate(e, Var::x), Var::x);
                if (!probably_zero(res, *validate_box))
                    throw ParamError("expression does not solve F2_t + f F2_xx = 0");
            }
            return {e, f_const};
        }
    }
    throw ParamError("unknown heat solution kind");
}

// ---------------------------------------------------------------------------
// FRule
// ---------------------------------------------------------------------------

Coefficient FRule::pushforward(const Coefficient& f) const {
    if (auto sym = f.expr() ? pushforward_expr(*f.expr()) : std::nullopt) return Coefficient(*sym);
    FRule self = *this;
    Coefficient fc = f;
    auto preimage = [self](double tt, double xx) {
        double tau = self.t_inverse(tt);
        double xi = (xx - self.x_shift(tau).v) / self.x_slope(tau).v;
        return std::array<double, 2>{tau, xi};
    };
    Field out;
    out.value = [self, fc, preimage](double tt, double xx) {
        auto p = preimage(tt, xx);
        return self.scale * fc(p[0], p[1]);
    };
    out.dx = [self, fc, preimage](double tt, double xx) {
        auto p = preimage(tt, xx);
        return self.scale * fc.dx(p[0], p[1]) / self.x_slope(p[0]).v;
    };
    out.dxx = [self, fc, preimage](double tt, double xx) {
        auto p = preimage(tt, xx);
        double s = self.x_slope(p[0]).v;
        return self.scale * fc.dxx(p[0], p[1]) / (s * s);
    };
    out.dxxx = [self, fc, preimage](double tt, double xx) {
        auto p = preimage(tt, xx);
        double s = self.x_slope(p[0]).v;
        return self.scale * fc.dxxx(p[0], p[1]) / (s * s * s);
    };
    out.dt = [self, fc, preimage](double tt, double xx) {
        auto p = preimage(tt, xx);
        double tau_prime = 1.0 / self.t_slope(p[0]).v;
        Jet1 sl = self.x_slope(p[0]), sh = self.x_shift(p[0]);
        double dxi_dtau = (-sh.d1 - p[1] * sl.d1) / sl.v;
        return self.scale * (fc.dt(p[0], p[1]) + fc.dx(p[0], p[1]) * dxi_dtau) * tau_prime;
    };
    return Coefficient(out);
}

std::optional<Expr> FRule::pushforward_expr(const Expr& f) const {
    if (!t_inverse_expr || !x_inverse_expr) return std::nullopt;
    Expr sub = substitute(f, {{Var::t, *t_inverse_expr}, {Var::x, *x_inverse_expr}});
    return simplify(Expr::real(scale) * sub);
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

BuiltTransformation build_usual_pot(const UsualPotParams& p) {
    if (p.alpha == 0.0 || p.kappa == 0.0) throw ParamError("usual-pot requires alpha, kappa != 0");
    const double a = p.alpha, b = p.beta, k = p.kappa, m1 = p.mu1, m0 = p.mu0, nu = p.nu;
    const double scale = k * k / a;

    PointTransformation T;
    T.group = "usual-pot";
    T.params = p;
    T.T = [a, b](const D2& t) { return a * t + b; };
    T.X = [k, m1, m0](const D2& t, const D2& x) { return k * (x + m1 * t + m0); };
    T.W = [scale, m1, nu](const D2& t, const D2& x, const D2& w) {
        return scale * (w + 0.5 * m1 * x + 0.25 * m1 * m1 * t + nu);
    };

    FRule rule;
    rule.scale = scale;
    rule.t_inverse = [a, b](double tt) { return (tt - b) / a; };
    rule.t_slope = [a](double) { return Jet1{a, 0.0, 0.0}; };
    rule.x_slope = [k](double) { return Jet1{k, 0.0, 0.0}; };
    rule.x_shift = [k, m1, m0](double t) { return Jet1{k * (m1 * t + m0), k * m1, 0.0}; };
    Expr ti = simplify((Expr::t() - Expr::real(b)) / Expr::real(a));
    rule.t_inverse_expr = ti;
    rule.x_inverse_expr = simplify(Expr::x() / Expr::real(k) - Expr::real(m1) * ti - Expr::real(m0));
    return {std::move(T), std::move(rule)};
}

BuiltTransformation build_p3(const P3Params& p, double f_const) {
    const double det = p.alpha * p.delta - p.beta * p.gamma;
    if (det == 0.0) throw ParamError("p3 requires alpha*delta - beta*gamma != 0");
    if (p.kappa == 0.0 || p.k == 0.0) throw ParamError("p3 requires kappa, k != 0");
    if (f_const == 0.0) throw ParamError("p3 requires constant f != 0");
    HeatSolution F2 = heat_solution(p.f2, f_const);

    const double al = p.alpha, be = p.beta, ga = p.gamma, de = p.delta;
    const double ka = p.kappa, m1 = p.mu1, m0 = p.mu0, kc = p.k, f = f_const;
    const double scale = ka * ka / det;
    Expr F2e = F2.expr;

    PointTransformation T;
    T.group = "p3";
    T.params = p;
    T.T = [al, be, ga, de](const D2& t) { return (al * t + be) / (ga * t + de); };
    T.X = [ka, m1, m0, ga, de](const D2& t, const D2& x) {
        return ka * (x + m1 * t + m0) / (ga * t + de);
    };
    T.W = [=](const D2& t, const D2& x, const D2& w) {
        D2 denom = ga * t + de;
        D2 f1;
        if (ga != 0.0) {
            D2 z = ga * x - (m1 * de - m0 * ga);
            f1 = kc * sqrt(abs(denom)) * exp(-(z * z) / (4.0 * f * ga * denom));
        } else {
            f1 = kc * exp((2.0 * m1 * x + m1 * m1 * t) / (4.0 * f));
        }
        D2 inner = exp(w / f) + evaluate_jet(F2e, t, x, w);
        return (scale * f) * ln(abs(f1 * inner));
    };
    T.domain = [=](double t, double x, double w) {
        double denom = ga * t + de;
        if (std::fabs(denom) < kPoleMargin) return false;
        try {
            double inner = std::exp(w / f) + evaluate(F2e, Bindings{t, x, w});
            return std::fabs(inner) > kPoleMargin;
        } catch (const Error&) {
            return false;
        }
    };

    FRule rule;
    rule.scale = scale;
    rule.t_inverse = [al, be, ga, de](double tt) { return (de * tt - be) / (al - ga * tt); };
    rule.t_slope = [al, be, ga, de](double t) {
        Jet1 num{al * t + be, al, 0.0}, den{ga * t + de, ga, 0.0};
        Jet1 v = num / den;
        return Jet1{v.d1, v.d2, 0.0};  // T', T'', (T''' unused)
    };
    rule.x_slope = [ka, ga, de](double t) {
        Jet1 den{ga * t + de, ga, 0.0};
        return ka * inv(den);
    };
    rule.x_shift = [ka, m1, m0, ga, de](double t) {
        Jet1 num{ka * (m1 * t + m0), ka * m1, 0.0}, den{ga * t + de, ga, 0.0};
        return num / den;
    };
    Expr ti = simplify((Expr::real(de) * Expr::t() - Expr::real(be)) /
                       (Expr::real(al) - Expr::real(ga) * Expr::t()));
    rule.t_inverse_expr = ti;
    rule.x_inverse_expr =
        simplify(Expr::x() * (Expr::real(ga) * ti + Expr::real(de)) / Expr::real(ka) -
                 Expr::real(m1) * ti - Expr::real(m0));
    return {std::move(T), std::move(rule)};
}

namespace {

/// Shared t-only building blocks of the quadratic-case builders.
struct QuadBlocks {
    ExpAntiderivative lambda;   // e^{2 int f2 dt}
    Antiderivative inv_lambda;  // int dt / lambda
    Antiderivative a2;          // int f1 / lambda dt
    double c1, c2;

    Jet1 x1(double t) const { return inv(c1 * inv_lambda.jet(t) + c2); }

    static QuadBlocks make(const QuadraticDecomposition& dec, double c1, double c2, double t0,
                           double tol) {
        if (c1 == 0.0 && c2 == 0.0) throw ParamError("(c1, c2) may not both vanish");
        ExpAntiderivative lambda(dec.f2, 2.0, t0, tol);
        auto inv_l = Antiderivative::from_function(
            [lambda](double t) { return inv(lambda.jet(t)); }, t0, tol);
        CurveFn f1c = expr_curve(dec.f1);
        auto a2 = Antiderivative::from_function(
            [lambda, f1c](double t) { return f1c(t) / lambda.jet(t); }, t0, tol);
        return {std::move(lambda), std::move(inv_l), std::move(a2), c1, c2};
    }
};

}  // namespace

BuiltTransformation build_p2(const P2Params& p, const QuadraticDecomposition& dec,
                             double quad_tol) {
    if (p.c0 == 0.0) throw ParamError("p2 requires c0 != 0");
    QuadBlocks q = QuadBlocks::make(dec, p.c1, p.c2, p.t0, quad_tol);
    const double c0 = p.c0, c1 = p.c1, c3 = p.c3, c4 = p.c4, c5 = p.c5, c6 = p.c6;

    auto x1sq = Antiderivative::from_function([q](double t) { return sq(q.x1(t)); }, p.t0,
                                              quad_tol);
    auto drift = Antiderivative::from_function(
        [q, c3](double t) { return sq(q.x1(t)) * (q.a2.jet(t) + c3); }, p.t0, quad_tol);
    auto x2 = [q, c1, c3](double t) { return (0.5 * c1) * q.x1(t) * (q.a2.jet(t) + c3); };
    auto x2sq = Antiderivative::from_function([x2](double t) { return sq(x2(t)); }, p.t0,
                                              quad_tol);
    CurveFn f0c = expr_curve(dec.f0);
    auto f0term = Antiderivative::from_function(
        [q, f0c](double t) { return (f0c(t) / q.lambda.jet(t)) * q.x1(t); }, p.t0, quad_tol);

    PointTransformation T;
    T.group = "p2";
    T.params = p;
    T.T = [x1sq, c0, c5](const D2& t) {
        return (1.0 / c0) * apply_curve(x1sq.jet(t.v), t) + c5;
    };
    T.X = [q, drift, c1, c4](const D2& t, const D2& x) {
        return apply_curve(q.x1(t.v), t) * x + c1 * apply_curve(drift.jet(t.v), t) + c4;
    };
    T.W = [q, x2, x2sq, f0term, c0, c1, c6](const D2& t, const D2& x, const D2& w) {
        D2 x1t = apply_curve(q.x1(t.v), t);
        D2 lam = apply_curve(q.lambda.jet(t.v), t);
        D2 x2t = apply_curve(x2(t.v), t);
        D2 tail = apply_curve(x2sq.jet(t.v), t) + (0.5 * c1) * apply_curve(f0term.jet(t.v), t);
        return c0 * (w - (0.25 * c1) * (x1t / lam) * sq(x) + x2t * x + tail) + c6;
    };
    T.domain = [q](double t, double, double) {
        try {
            return std::fabs(q.c1 * q.inv_lambda.value(t) + q.c2) > kPoleMargin;
        } catch (const Error&) {
            return false;
        }
    };

    FRule rule;
    rule.scale = c0;
    double t0 = p.t0;
    auto tval = [x1sq, c0, c5](double t) { return (1.0 / c0) * x1sq.value(t) + c5; };
    rule.t_inverse = [tval, t0](double tt) {
        return bracket_solve(tval, tt, t0 - 1.0, t0 + 1.0);
    };
    rule.t_slope = [x1sq](double t) {
        Jet1 j = x1sq.jet(t);
        return Jet1{j.d1, j.d2, 0.0};  // (X1)^2 / c0 scaled below
    };
    // fold the 1/c0 into the slope curve
    {
        CurveFn base = rule.t_slope;
        rule.t_slope = [base, c0](double t) { return (1.0 / c0) * base(t); };
    }
    rule.x_slope = [q](double t) { return q.x1(t); };
    rule.x_shift = [drift, c1, c4](double t) { return c1 * drift.jet(t) + c4; };
    return {std::move(T), std::move(rule)};
}

BuiltTransformation build_p2_linear(const P2LinearParams& p, const QuadraticDecomposition& dec,
                                    double quad_tol) {
    const double det = p.alpha * p.delta - p.beta * p.gamma;
    if (det == 0.0) throw ParamError("p2-linear requires alpha*delta - beta*gamma != 0");
    if (p.kappa == 0.0) throw ParamError("p2-linear requires kappa != 0");
    if (!simplify(dec.f2).is_zero())
        throw ParamError("p2-linear applies to f with f_xx = 0 (f2 must vanish)");

    const double al = p.alpha, be = p.beta, ga = p.gamma, de = p.delta;
    const double ka = p.kappa, nu = p.nu, c4 = p.c4, c5 = p.c5;
    const double scale = ka * ka / det;

    auto b1 = Antiderivative::from_expr(dec.f1, p.t0, quad_tol);  // int f1 dt
    auto gam = [ga, de](double t) { return Jet1{ga * t + de, ga, 0.0}; };
    auto dshift = Antiderivative::from_function(
        [b1, gam](double t) { return b1.jet(t) / sq(gam(t)); }, p.t0, quad_tol);
    auto qterm = Antiderivative::from_function(
        [b1, gam, ga, nu](double t) { return sq((ga * b1.jet(t) + nu) / gam(t)); }, p.t0,
        quad_tol);
    CurveFn f0c = expr_curve(dec.f0);
    auto rterm = Antiderivative::from_function([f0c, gam](double t) { return f0c(t) / gam(t); },
                                               p.t0, quad_tol);

    PointTransformation T;
    T.group = "p2-linear";
    T.params = p;
    T.T = [al, be, ga, de](const D2& t) { return (al * t + be) / (ga * t + de); };
    T.X = [=](const D2& t, const D2& x) {
        D2 denom = ga * t + de;
        return ka * (x + (nu / det) * (al * t + be)) / denom +
               (ga * ka) * apply_curve(dshift.jet(t.v), t) + c4;
    };
    T.W = [=](const D2& t, const D2& x, const D2& w) {
        D2 denom = ga * t + de;
        D2 b1t = apply_curve(b1.jet(t.v), t);
        // linear-in-x part carries + (gamma B1 + nu) x / (2 Gamma): the sign
        // consistent with the quadratic-case group (see decisions ledger)
        D2 bracket = w - (ga * sq(x) - 2.0 * (ga * b1t + nu) * x) / (4.0 * denom) +
                     0.25 * apply_curve(qterm.jet(t.v), t) +
                     (0.5 * ga) * apply_curve(rterm.jet(t.v), t);
        return scale * bracket + c5;
    };
    T.domain = [ga, de](double t, double, double) {
        return std::fabs(ga * t + de) > kPoleMargin;
    };

    FRule rule;
    rule.scale = scale;
    rule.t_inverse = [al, be, ga, de](double tt) { return (de * tt - be) / (al - ga * tt); };
    rule.t_slope = [al, be, ga, de](double t) {
        Jet1 v = Jet1{al * t + be, al, 0.0} / Jet1{ga * t + de, ga, 0.0};
        return Jet1{v.d1, v.d2, 0.0};
    };
    rule.x_slope = [ka, gam](double t) { return ka * inv(gam(t)); };
    rule.x_shift = [=](double t) {
        Jet1 shift = ka * (nu / det) * Jet1{al * t + be, al, 0.0} / gam(t) +
                     (ga * ka) * dshift.jet(t) + c4;
        return shift;
    };
    return {std::move(T), std::move(rule)};
}

BuiltTransformation build_c_usual(const CUsualParams& p) {
    if (p.alpha == 0.0 || p.kappa == 0.0) throw ParamError("c-usual requires alpha, kappa != 0");
    const double a = p.alpha, b = p.beta, k = p.kappa, m1 = p.mu1, m0 = p.mu0;
    const double scale = k * k / a;

    PointTransformation T;
    T.group = "c-usual";
    T.params = p;
    T.T = [a, b](const D2& t) { return a * t + b; };
    T.X = [k, m1, m0](const D2& t, const D2& x) { return k * (x + m1 * t + m0); };
    // u-shift mu1/2 pairs with drift velocity mu1 for the 2uu_x form of the
    // conserved equation (see decisions ledger)
    T.W = [k, a, m1](const D2&, const D2&, const D2& w) { return (k / a) * (w + 0.5 * m1); };

    FRule rule;
    rule.scale = scale;
    rule.t_inverse = [a, b](double tt) { return (tt - b) / a; };
    rule.t_slope = [a](double) { return Jet1{a, 0.0, 0.0}; };
    rule.x_slope = [k](double) { return Jet1{k, 0.0, 0.0}; };
    rule.x_shift = [k, m1, m0](double t) { return Jet1{k * (m1 * t + m0), k * m1, 0.0}; };
    Expr ti = simplify((Expr::t() - Expr::real(b)) / Expr::real(a));
    rule.t_inverse_expr = ti;
    rule.x_inverse_expr = simplify(Expr::x() / Expr::real(k) - Expr::real(m1) * ti - Expr::real(m0));
    return {std::move(T), std::move(rule)};
}

BuiltTransformation build_c2(const C2Params& p, const QuadraticDecomposition& dec,
                             double quad_tol) {
    if (p.c0 == 0.0) throw ParamError("c2 requires c0 != 0");
    QuadBlocks q = QuadBlocks::make(dec, p.c1, p.c2, p.t0, quad_tol);
    const double c0 = p.c0, c1 = p.c1, c3 = p.c3, c4 = p.c4, c5 = p.c5;

    auto x1sq = Antiderivative::from_function([q](double t) { return sq(q.x1(t)); }, p.t0,
                                              quad_tol);
    auto drift = Antiderivative::from_function(
        [q, c1, c3](double t) { return sq(q.x1(t)) * (c1 * q.a2.jet(t) + c3); }, p.t0, quad_tol);

    PointTransformation T;
    T.group = "c2";
    T.params = p;
    T.T = [x1sq, c0, c5](const D2& t) {
        return (1.0 / c0) * apply_curve(x1sq.jet(t.v), t) + c5;
    };
    T.X = [q, drift, c4](const D2& t, const D2& x) {
        return apply_curve(q.x1(t.v), t) * x + apply_curve(drift.jet(t.v), t) + c4;
    };
    // the affine part is half the drift integrand, matching u = v_x under the
    // quadratic-case potential group (see decisions ledger)
    T.W = [q, c0, c1, c3](const D2& t, const D2& x, const D2& w) {
        D2 x1t = apply_curve(q.x1(t.v), t);
        D2 lam = apply_curve(q.lambda.jet(t.v), t);
        D2 a2t = apply_curve(q.a2.jet(t.v), t);
        return c0 * (w / x1t - (0.5 * c1) * x / lam + 0.5 * (c1 * a2t + c3));
    };
    T.domain = [q](double t, double, double) {
        try {
            return std::fabs(q.c1 * q.inv_lambda.value(t) + q.c2) > kPoleMargin;
        } catch (const Error&) {
            return false;
        }
    };

    FRule rule;
    rule.scale = c0;
    double t0 = p.t0;
    auto tval = [x1sq, c0, c5](double t) { return (1.0 / c0) * x1sq.value(t) + c5; };
    rule.t_inverse = [tval, t0](double tt) {
        return bracket_solve(tval, tt, t0 - 1.0, t0 + 1.0);
    };
    rule.t_slope = [x1sq, c0](double t) {
        Jet1 j = x1sq.jet(t);
        return Jet1{j.d1 / c0, j.d2 / c0, 0.0};
    };
    rule.x_slope = [q](double t) { return q.x1(t); };
    rule.x_shift = [drift, c4](double t) { return drift.jet(t) + c4; };
    return {std::move(T), std::move(rule)};
}

BuiltTransformation build_gbe(const GbeParams& p) {
    const double det = p.alpha * p.delta - p.beta * p.gamma;
    if (det == 0.0) throw ParamError("gbe requires alpha*delta - beta*gamma != 0");
    if (p.kappa == 0.0) throw ParamError("gbe requires kappa != 0");
    const double al = p.alpha, be = p.beta, ga = p.gamma, de = p.delta;
    const double ka = p.kappa, m1 = p.mu1, m0 = p.mu0;
    const double scale = ka * ka / det;

    PointTransformation T;
    T.group = "gbe";
    T.params = p;
    T.T = [al, be, ga, de](const D2& t) { return (al * t + be) / (ga * t + de); };
    T.X = [ka, m1, m0, ga, de](const D2& t, const D2& x) {
        return (ka * x + m1 * t + m0) / (ga * t + de);
    };
    T.W = [=](const D2& t, const D2& x, const D2& w) {
        return (ka * (ga * t + de) * w - (ka * ga) * x + (m1 * de - m0 * ga)) / det;
    };
    T.domain = [ga, de](double t, double, double) {
        return std::fabs(ga * t + de) > kPoleMargin;
    };

    FRule rule;
    rule.scale = scale;
    rule.t_inverse = [al, be, ga, de](double tt) { return (de * tt - be) / (al - ga * tt); };
    rule.t_slope = [al, be, ga, de](double t) {
        Jet1 v = Jet1{al * t + be, al, 0.0} / Jet1{ga * t + de, ga, 0.0};
        return Jet1{v.d1, v.d2, 0.0};
    };
    rule.x_slope = [ka, ga, de](double t) { return ka * inv(Jet1{ga * t + de, ga, 0.0}); };
    rule.x_shift = [m1, m0, ga, de](double t) {
        return Jet1{m1 * t + m0, m1, 0.0} / Jet1{ga * t + de, ga, 0.0};
    };
    Expr ti = simplify((Expr::real(de) * Expr::t() - Expr::real(be)) /
                       (Expr::real(al) - Expr::real(ga) * Expr::t()));
    rule.t_inverse_expr = ti;
    rule.x_inverse_expr =
        simplify((Expr::x() * (Expr::real(ga) * ti + Expr::real(de)) - Expr::real(m1) * ti -
                  Expr::real(m0)) /
                 Expr::real(ka));
    return {std::move(T), std::move(rule)};
}

BuiltTransformation build(const AnyParams& p, const std::optional<Expr>& f,
                          const SampleBox& box) {
    if (std::holds_alternative<UsualPotParams>(p))
        return build_usual_pot(std::get<UsualPotParams>(p));
    if (std::holds_alternative<CUsualParams>(p)) return build_c_usual(std::get<CUsualParams>(p));
    if (std::holds_alternative<GbeParams>(p)) return build_gbe(std::get<GbeParams>(p));
    if (!f) throw ParamError(group_name(p) + " needs the arbitrary element f");
    if (std::holds_alternative<P3Params>(p)) {
        auto c = as_constant(*f, {Var::t, Var::x}, box);
        if (!c) throw ParamError("p3 requires a constant arbitrary element");
        return build_p3(std::get<P3Params>(p), *c);
    }
    QuadraticDecomposition dec = decompose_quadratic(*f, box);
    if (std::holds_alternative<P2Params>(p)) return build_p2(std::get<P2Params>(p), dec);
    if (std::holds_alternative<P2LinearParams>(p))
        return build_p2_linear(std::get<P2LinearParams>(p), dec);
    return build_c2(std::get<C2Params>(p), dec);
}

// ---------------------------------------------------------------------------
// Composition and the closed-form group laws
// ---------------------------------------------------------------------------

std::optional<AnyParams> compose_params(const AnyParams& first, const AnyParams& second) {
    if (std::holds_alternative<UsualPotParams>(first) &&
        std::holds_alternative<UsualPotParams>(second)) {
        const auto& a = std::get<UsualPotParams>(first);
        const auto& b = std::get<UsualPotParams>(second);
        UsualPotParams c;
        c.alpha = a.alpha * b.alpha;
        c.beta = b.alpha * a.beta + b.beta;
        c.kappa = a.kappa * b.kappa;
        c.mu1 = a.mu1 + a.alpha * b.mu1 / a.kappa;
        c.mu0 = a.mu0 + (b.mu1 * a.beta + b.mu0) / a.kappa;
        c.nu = a.nu + (a.alpha / (a.kappa * a.kappa)) *
                          (0.5 * b.mu1 * a.kappa * a.mu0 + 0.25 * b.mu1 * b.mu1 * a.beta + b.nu);
        return AnyParams{c};
    }
    if (std::holds_alternative<CUsualParams>(first) &&
        std::holds_alternative<CUsualParams>(second)) {
        const auto& a = std::get<CUsualParams>(first);
        const auto& b = std::get<CUsualParams>(second);
        CUsualParams c;
        c.alpha = a.alpha * b.alpha;
        c.beta = b.alpha * a.beta + b.beta;
        c.kappa = a.kappa * b.kappa;
        c.mu1 = a.mu1 + a.alpha * b.mu1 / a.kappa;
        c.mu0 = a.mu0 + (b.mu1 * a.beta + b.mu0) / a.kappa;
        return AnyParams{c};
    }
    if (std::holds_alternative<GbeParams>(first) && std::holds_alternative<GbeParams>(second)) {
        const auto& a = std::get<GbeParams>(first);
        const auto& b = std::get<GbeParams>(second);
        GbeParams c;
        c.alpha = b.alpha * a.alpha + b.beta * a.gamma;
        c.beta = b.alpha * a.beta + b.beta * a.delta;
        c.gamma = b.gamma * a.alpha + b.delta * a.gamma;
        c.delta = b.gamma * a.beta + b.delta * a.delta;
        c.kappa = a.kappa * b.kappa;
        c.mu1 = b.kappa * a.mu1 + b.mu1 * a.alpha + b.mu0 * a.gamma;
        c.mu0 = b.kappa * a.mu0 + b.mu1 * a.beta + b.mu0 * a.delta;
        return AnyParams{c};
    }
    return std::nullopt;
}

PointTransformation compose(const PointTransformation& first, const PointTransformation& second) {
    PointTransformation a = first, b = second;
    PointTransformation out;
    out.T = [a, b](const D2& t) { return b.T(a.T(t)); };
    out.X = [a, b](const D2& t, const D2& x) { return b.X(a.T(t), a.X(t, x)); };
    out.W = [a, b](const D2& t, const D2& x, const D2& w) {
        return b.W(a.T(t), a.X(t, x), a.W(t, x, w));
    };
    out.domain = [a, b](double t, double x, double w) {
        if (!a.in_domain(t, x, w)) return false;
        try {
            double tt = a.t_value(t), xx = a.x_value(t, x), ww = a.w_value(t, x, w);
            return b.in_domain(tt, xx, ww);
        } catch (const Error&) {
            return false;
        }
    };
    out.group = "compose(" + first.group + "," + second.group + ")";
    if (first.params && second.params)
        if (auto cp = compose_params(*first.params, *second.params)) {
            out.params = cp;
            out.group = group_name(*cp);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Numeric inversion
// ---------------------------------------------------------------------------

PointTransformation invert(const PointTransformation& T, const SampleBox& source_box) {
    PointTransformation fwd = T;
    Interval tr = expanded(source_box.t, 0.35);
    Interval xr = expanded(source_box.x, 0.35);
    Interval wr = expanded(source_box.w, 0.35);
    wr.lo -= 0.5;
    wr.hi += 0.5;

    auto solve_t = [fwd, tr](double tt) {
        return bracket_solve([&fwd](double t) { return fwd.t_value(t); }, tt, tr.lo, tr.hi);
    };
    auto solve_x = [fwd, xr](double tau, double xx) {
        return bracket_solve([&fwd, tau](double x) { return fwd.x_value(tau, x); }, xx, xr.lo,
                             xr.hi);
    };
    auto solve_w = [fwd, wr](double tau, double xi, double ww) {
        return bracket_solve([&fwd, tau, xi](double w) { return fwd.w_value(tau, xi, w); }, ww,
                             wr.lo, wr.hi);
    };

    struct InverseData {
        double tau, tau1, tau2;
        double xi, xi_t, xi_x, xi_tt, xi_tx, xi_xx;
    };
    auto tx_data = [fwd, solve_t, solve_x](double tt, double xx) {
        InverseData d{};
        d.tau = solve_t(tt);
        d.xi = solve_x(d.tau, xx);
        D2 jt = D2::seed(d.tau, D2::T), jx = D2::seed(d.xi, D2::X);
        D2 Tj = fwd.T(jt);
        D2 Xj = fwd.X(jt, jx);
        double Tt = Tj.g[D2::T], Ttt = Tj.h[D2::TT];
        double Xt = Xj.g[D2::T], Xx = Xj.g[D2::X];
        double Xtt = Xj.h[D2::TT], Xtx = Xj.h[D2::TX], Xxx = Xj.h[D2::XX];
        if (Tt == 0.0 || Xx == 0.0) throw InversionError("degenerate Jacobian at preimage");
        d.tau1 = 1.0 / Tt;
        d.tau2 = -Ttt * d.tau1 * d.tau1 * d.tau1;
        d.xi_x = 1.0 / Xx;
        d.xi_t = -Xt * d.tau1 / Xx;
        d.xi_xx = -Xxx / (Xx * Xx * Xx);
        d.xi_tx = -(Xtx * d.tau1 + Xxx * d.xi_t) / (Xx * Xx);
        d.xi_tt = -(Xtt * d.tau1 * d.tau1 + 2.0 * Xtx * d.tau1 * d.xi_t + Xxx * d.xi_t * d.xi_t +
                    Xt * d.tau2) /
                  Xx;
        return d;
    };

    PointTransformation inv_map;
    inv_map.group = "inverse(" + T.group + ")";
    inv_map.T = [solve_t, fwd](const D2& in_t) {
        double tau = solve_t(in_t.v);
        D2 Tj = fwd.T(D2::seed(tau, D2::T));
        double Tt = Tj.g[D2::T], Ttt = Tj.h[D2::TT];
        if (Tt == 0.0) throw InversionError("degenerate T_t at preimage");
        double tau1 = 1.0 / Tt;
        return chain(in_t, tau, tau1, -Ttt * tau1 * tau1 * tau1);
    };
    inv_map.X = [tx_data](const D2& in_t, const D2& in_x) {
        InverseData d = tx_data(in_t.v, in_x.v);
        D2 zero = D2::constant(0.0);
        return compose_jets(d.xi, {d.xi_t, d.xi_x, 0.0},
                            {{{d.xi_tt, d.xi_tx, 0.0}, {d.xi_tx, d.xi_xx, 0.0}, {0.0, 0.0, 0.0}}},
                            {&in_t, &in_x, &zero});
    };
    inv_map.W = [tx_data, solve_w, fwd](const D2& in_t, const D2& in_x, const D2& in_w) {
        InverseData d = tx_data(in_t.v, in_x.v);
        double omega = solve_w(d.tau, d.xi, in_w.v);
        auto J = fwd.jets_at(d.tau, d.xi, omega);
        double Wt = J.W.g[D2::T], Wx = J.W.g[D2::X], Ww = J.W.g[D2::W];
        if (Ww == 0.0) throw InversionError("degenerate W_w at preimage");
        auto HW = [&](const std::array<double, 3>& u, const std::array<double, 3>& v) {
            double s = 0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) s += J.W.h[d2_pair(i, j)] * u[i] * v[j];
            return s;
        };
        double om_w = 1.0 / Ww;
        double om_x = -Wx * d.xi_x / Ww;
        double om_t = -(Wt * d.tau1 + Wx * d.xi_t) / Ww;
        std::array<double, 3> Jt{d.tau1, d.xi_t, om_t};
        std::array<double, 3> Jx{0.0, d.xi_x, om_x};
        std::array<double, 3> Jw{0.0, 0.0, om_w};
        // second partials of (tau, xi) in target coordinates; zero for any
        // direction involving w~
        auto second = [&](const std::array<double, 3>& A, const std::array<double, 3>& B,
                          double tau_ab, double xi_ab) {
            return -(HW(A, B) + Wt * tau_ab + Wx * xi_ab) / Ww;
        };
        double om_tt = second(Jt, Jt, d.tau2, d.xi_tt);
        double om_tx = second(Jt, Jx, 0.0, d.xi_tx);
        double om_xx = second(Jx, Jx, 0.0, d.xi_xx);
        double om_tw = second(Jt, Jw, 0.0, 0.0);
        double om_xw = second(Jx, Jw, 0.0, 0.0);
        double om_ww = second(Jw, Jw, 0.0, 0.0);
        return compose_jets(omega, {om_t, om_x, om_w},
                            {{{om_tt, om_tx, om_tw}, {om_tx, om_xx, om_xw}, {om_tw, om_xw, om_ww}}},
                            {&in_t, &in_x, &in_w});
    };
    inv_map.domain = [solve_t, solve_x, solve_w, fwd](double tt, double xx, double ww) {
        try {
            double tau = solve_t(tt);
            double xi = solve_x(tau, xx);
            double omega = solve_w(tau, xi, ww);
            return fwd.in_domain(tau, xi, omega);
        } catch (const Error&) {
            return false;
        }
    };
    return inv_map;
}

// ---------------------------------------------------------------------------
// Pushforward of the arbitrary element
// ---------------------------------------------------------------------------

Coefficient pushforward_f(const PointTransformation& T, const Coefficient& f,
                          const SampleBox& box) {
    PointTransformation fwd = T;
    Coefficient fc = f;
    Interval tr = expanded(box.t, 0.35), xr = expanded(box.x, 0.35);

    auto value = [fwd, fc, tr, xr](double tt, double xx) {
        double tau =
            bracket_solve([&fwd](double t) { return fwd.t_value(t); }, tt, tr.lo, tr.hi);
        double xi = bracket_solve([&fwd, tau](double x) { return fwd.x_value(tau, x); }, xx,
                                  xr.lo, xr.hi);
        D2 jt = D2::seed(tau, D2::T), jx = D2::seed(xi, D2::X);
        double Tt = fwd.T(jt).g[D2::T];
        double Xx = fwd.X(jt, jx).g[D2::X];
        return (Xx * Xx / Tt) * fc(tau, xi);
    };
    double ht = 1e-5 * (1.0 + box.t.width()), hx = 1e-5 * (1.0 + box.x.width());
    Field out;
    out.value = value;
    out.dt = [value, ht](double tt, double xx) {
        return (value(tt + ht, xx) - value(tt - ht, xx)) / (2 * ht);
    };
    out.dx = [value, hx](double tt, double xx) {
        return (value(tt, xx + hx) - value(tt, xx - hx)) / (2 * hx);
    };
    out.dxx = [value](double tt, double xx) {
        const double h = 1e-4;
        return (value(tt, xx + h) - 2.0 * value(tt, xx) + value(tt, xx - h)) / (h * h);
    };
    out.dxxx = [value](double tt, double xx) {
        const double h = 1e-3;
        return (value(tt, xx + 2 * h) - 2.0 * value(tt, xx + h) + 2.0 * value(tt, xx - h) -
                value(tt, xx - 2 * h)) /
               (2.0 * h * h * h);
    };
    return Coefficient(out);
}

double compare_pushforward(const BuiltTransformation& bt, const PointTransformation& map,
                           const Coefficient& f, const SampleBox& box, int n) {
    Coefficient generic = pushforward_f(map, f, box);
    Coefficient closed = bt.frule.pushforward(f);
    double worst = 0.0;
    int got = 0;
    for (std::uint64_t i = 0; got < n && i < 50ull * (std::uint64_t)n; ++i) {
        auto p = box.point(i);
        if (!box.admitted(p) || !map.in_domain(p[0], p[1], p[2])) continue;
        double tt, xx;
        try {
            tt = map.t_value(p[0]);
            xx = map.x_value(p[0], p[1]);
            worst = std::max(worst, std::fabs(generic(tt, xx) - closed(tt, xx)));
        } catch (const Error&) {
            continue;
        }
        ++got;
    }
    if (got < n) throw SamplingError("compare_pushforward: domain starvation");
    return worst;
}

// ---------------------------------------------------------------------------
// Projective parameter handling
// ---------------------------------------------------------------------------

AnyParams rescale_projective(const AnyParams& p, double s) {
    if (s == 0.0) throw ParamError("projective rescale factor must be nonzero");
    if (std::holds_alternative<P3Params>(p)) {
        P3Params q = std::get<P3Params>(p);
        q.alpha *= s;
        q.beta *= s;
        q.gamma *= s;
        q.delta *= s;
        q.kappa *= s;
        // sqrt|gamma t + delta| in F1 picks up sqrt|s|; k absorbs it
        if (q.gamma != 0.0) q.k /= std::sqrt(std::fabs(s));
        return q;
    }
    if (std::holds_alternative<P2LinearParams>(p)) {
        P2LinearParams q = std::get<P2LinearParams>(p);
        q.alpha *= s;
        q.beta *= s;
        q.gamma *= s;
        q.delta *= s;
        q.kappa *= s;
        q.nu *= s;
        return q;
    }
    if (std::holds_alternative<GbeParams>(p)) {
        GbeParams q = std::get<GbeParams>(p);
        q.alpha *= s;
        q.beta *= s;
        q.gamma *= s;
        q.delta *= s;
        q.kappa *= s;
        q.mu1 *= s;
        q.mu0 *= s;
        return q;
    }
    throw ParamError(group_name(p) + " has no projective tuple");
}

AnyParams normalize_projective(const AnyParams& p) {
    auto tuple_head = [&]() -> std::array<double, 4> {
        if (std::holds_alternative<P3Params>(p)) {
            const auto& q = std::get<P3Params>(p);
            return {q.alpha, q.beta, q.gamma, q.delta};
        }
        if (std::holds_alternative<P2LinearParams>(p)) {
            const auto& q = std::get<P2LinearParams>(p);
            return {q.alpha, q.beta, q.gamma, q.delta};
        }
        if (std::holds_alternative<GbeParams>(p)) {
            const auto& q = std::get<GbeParams>(p);
            return {q.alpha, q.beta, q.gamma, q.delta};
        }
        throw ParamError(group_name(p) + " has no projective tuple");
    }();
    for (double v : tuple_head)
        if (v != 0.0) return rescale_projective(p, 1.0 / v);
    throw ParamError("projective tuple is identically zero");
}

}  // namespace pburg
