#include "pburg/maps.hpp"

#include <cmath>

#include "pburg/errors.hpp"

namespace pburg {

namespace {

Jet2 random_third_order_jet(const SampleBox& box, std::uint64_t i) {
    auto p = box.point(i);
    SplitMix64 rng = SplitMix64::substream(box.seed ^ 0x3A7E, i);
    Jet2 j;
    j.t = p[0];
    j.x = p[1];
    j.w = p[2];
    j.w_t = rng.uniform(-2, 2);
    j.w_x = rng.uniform(-2, 2);
    j.w_xx = rng.uniform(-2, 2);
    j.w_tx = rng.uniform(-2, 2);
    j.w_xxx = rng.uniform(-2, 2);
    return j;
}

VerificationReport finish_report(VerificationReport rep, int n, double tol) {
    rep.samples = n;
    rep.mean_abs = n ? rep.mean_abs / n : 0.0;
    rep.tolerance = tol;
    rep.pass = rep.max_abs <= tol;
    return rep;
}

void record(VerificationReport& rep, const Jet2& jet, double value) {
    double a = std::fabs(value);
    rep.mean_abs += a;
    if (a >= rep.max_abs) {
        rep.max_abs = a;
        rep.worst_jet = jet;
        rep.worst_value = value;
    }
}

}  // namespace

double residual_intermediate(const Coefficient& f, const Jet1& lambda_jet, const Jet2& jet) {
    return jet.w_t + jet.w_x * jet.w_x / (2.0 * lambda_jet.v) + f(jet.t, jet.x) * jet.w_xx -
           f.dx(jet.t, jet.x) * jet.w_x;
}

double residual_heat(double f_const, const Jet2& jet) { return jet.w_t + f_const * jet.w_xx; }

PotentialLink potentialize_C(const Expr& f, const SampleBox& box, int n) {
    Coefficient cf(f);
    PotentialLink link{Family::C, f, std::nullopt, std::nullopt, std::nullopt, {}};
    VerificationReport rep;
    for (int i = 0; i < n; ++i) {
        Jet2 v = random_third_order_jet(box, (std::uint64_t)i);
        Jet2 u;
        u.t = v.t;
        u.x = v.x;
        u.w = v.w_x;
        u.w_t = *v.w_tx;
        u.w_x = v.w_xx;
        u.w_xx = *v.w_xxx;
        double dx_res_p = *v.w_tx + 2.0 * v.w_x * v.w_xx + cf.dx(v.t, v.x) * v.w_xx +
                          cf(v.t, v.x) * *v.w_xxx;
        record(rep, v, residual(Family::C, cf, u) - dx_res_p);
    }
    link.report = finish_report(rep, n, 1e-9);
    link.report.note = "u = v_x identification";
    return link;
}

PotentialLink potentialize_L(const Expr& f, const SampleBox& box, double t0, int n) {
    Coefficient cf(f);
    QuadraticDecomposition dec = decompose_quadratic(f, box);  // rejects f_xxx != 0

    // lambda = e^{int f_xx dt}, f_xx = 2 f2(t)
    ExpAntiderivative lambda(dec.f2, 2.0, t0);
    auto half_t = Antiderivative::from_function(lambda.as_curve(), t0);
    CurveFn f1c = [dec](double t) {
        Bindings b{t, std::nullopt, std::nullopt};
        Expr df1 = differentiate(dec.f1, Var::t);
        return Jet1{evaluate(dec.f1, b), evaluate(df1, b), 0.0};
    };
    auto bshift = Antiderivative::from_function(
        [lambda, f1c](double t) { return f1c(t) * lambda.jet(t); }, t0);

    PointTransformation hat;
    hat.group = "potentialize-L";
    hat.T = [half_t](const D2& t) { return 0.5 * apply_curve(half_t.jet(t.v), t); };
    hat.X = [lambda, bshift](const D2& t, const D2& x) {
        return apply_curve(lambda.jet(t.v), t) * x + apply_curve(bshift.jet(t.v), t);
    };
    hat.W = [](const D2&, const D2&, const D2& w) { return w; };

    // f^ = 2 lambda f as a function of the hat coordinates
    Interval tr{box.t.lo - 0.35 * box.t.width(), box.t.hi + 0.35 * box.t.width()};
    auto preimage = [half_t, lambda, bshift, tr](double th, double xh) {
        double tau = solve_monotone([&](double t) { return 0.5 * half_t.value(t); }, th, tr.lo,
                                    tr.hi);
        double xi = (xh - bshift.value(tau)) / lambda(tau);
        return std::array<double, 2>{tau, xi};
    };
    Field fh;
    fh.value = [preimage, lambda, cf](double th, double xh) {
        auto p = preimage(th, xh);
        return 2.0 * lambda(p[0]) * cf(p[0], p[1]);
    };
    fh.dx = [preimage, cf](double th, double xh) {
        auto p = preimage(th, xh);
        return 2.0 * cf.dx(p[0], p[1]);
    };
    fh.dxx = [preimage, lambda, cf](double th, double xh) {
        auto p = preimage(th, xh);
        return 2.0 * cf.dxx(p[0], p[1]) / lambda(p[0]);
    };
    fh.dxxx = [](double, double) { return 0.0; };
    fh.dt = [preimage, lambda, bshift, cf](double th, double xh) {
        auto p = preimage(th, xh);
        Jet1 l = lambda.jet(p[0]), b = bshift.jet(p[0]);
        double tau_prime = 2.0 / l.v;
        double dxi = (-b.d1 - p[1] * l.d1) / l.v;
        return (2.0 * l.d1 * cf(p[0], p[1]) +
                2.0 * l.v * (cf.dt(p[0], p[1]) + cf.dx(p[0], p[1]) * dxi)) *
               tau_prime;
    };
    Coefficient f_hat{fh};

    // off-shell conformal identity + rule check + current identity
    VerificationReport rep;
    for (int i = 0; i < n; ++i) {
        Jet2 v = random_third_order_jet(box, (std::uint64_t)i ^ 0x11);
        Jet1 l = lambda.jet(v.t);
        Jet2 pushed = pushforward_jet(hat, v);
        double lhs = residual(Family::P, f_hat, pushed);
        double rhs = (2.0 / l.v) * residual_intermediate(cf, l, v);
        record(rep, v, lhs - rhs);
        double rule = f_hat(pushed.t, pushed.x) - 2.0 * l.v * cf(v.t, v.x);
        record(rep, v, rule);
    }
    VerificationReport current = conserved_current_check(Family::L, f, box, n, t0);
    VerificationReport merged = finish_report(rep, 2 * n, 1e-6);
    merged.max_abs = std::max(merged.max_abs, current.max_abs);
    merged.pass = merged.pass && current.pass;
    merged.note = "hat map with f^ = 2 lambda f; includes the lambda-current identity";

    PotentialLink link{Family::L, f, lambda, hat, f_hat, merged};
    return link;
}

Linearization linearize_p3(double f_const, const SampleBox& box, int n) {
    if (f_const == 0.0) throw ParamError("linearization requires constant f != 0");
    const double f = f_const;
    PointTransformation map;
    map.group = "linearize-p3";
    map.T = [](const D2& t) { return t; };
    map.X = [](const D2&, const D2& x) { return x; };
    map.W = [f](const D2&, const D2&, const D2& w) { return exp(w / f); };

    Coefficient cf(Expr::real(f));
    VerificationReport rep;
    for (int i = 0; i < n; ++i) {
        Jet2 v = random_third_order_jet(box, (std::uint64_t)i ^ 0x22);
        Jet2 pushed = pushforward_jet(map, v);
        double lhs = residual_heat(f, pushed);
        double rhs = (pushed.w / f) * residual(Family::P, cf, v);
        record(rep, v, lhs - rhs);
    }
    return {map, f, finish_report(rep, n, 1e-9)};
}

VerificationReport potentialization_triangle(const Expr& f, const UsualPotParams& p,
                                             const SampleBox& box, int n) {
    Coefficient cf(f);
    CUsualParams cp;
    cp.alpha = p.alpha;
    cp.beta = p.beta;
    cp.kappa = p.kappa;
    cp.mu1 = p.mu1;
    cp.mu0 = p.mu0;
    auto cu = build_c_usual(cp);

    VerificationReport rep;
    for (int i = 0; i < n; ++i) {
        Jet2 v = random_third_order_jet(box, (std::uint64_t)i ^ 0x33);

        // route A: differentiate first (u = v_x), then the c-usual map
        Jet2 u;
        u.t = v.t;
        u.x = v.x;
        u.w = v.w_x;
        u.w_t = *v.w_tx;
        u.w_x = v.w_xx;
        u.w_xx = *v.w_xxx;
        Jet2 a = pushforward_jet(cu.map, u);

        // route B: usual-pot on the third-order v-jet, then differentiate;
        // the affine map has closed-form third-order components
        const double al = p.alpha, ka = p.kappa, m1 = p.mu1;
        Jet2 b;
        b.t = al * v.t + p.beta;
        b.x = ka * (v.x + m1 * v.t + p.mu0);
        b.w = (ka / al) * (v.w_x + 0.5 * m1);          // v~_x~
        b.w_x = v.w_xx / al;                           // v~_x~x~
        b.w_xx = *v.w_xxx / (al * ka);                 // v~_x~x~x~
        b.w_t = (ka / (al * al)) * (*v.w_tx - m1 * v.w_xx);  // v~_t~x~

        double worst = std::max({std::fabs(a.w - b.w), std::fabs(a.w_t - b.w_t),
                                 std::fabs(a.w_x - b.w_x), std::fabs(a.w_xx - b.w_xx),
                                 std::fabs(a.t - b.t), std::fabs(a.x - b.x)});
        record(rep, v, worst);
    }
    VerificationReport out = finish_report(rep, n, 1e-8);
    out.note = "triangle: c-usual after u = v_x vs differentiate after usual-pot";
    return out;
}

}  // namespace pburg
