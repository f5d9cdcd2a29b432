#include <doctest.h>

#include <cmath>

#include "pburg/errors.hpp"
#include "pburg/transforms.hpp"
#include "draws.hpp"
#include "test_util.hpp"

using namespace pburg;
using namespace pburg::test;

namespace {

/// Central-difference cross-check of every supplied derivative of the three
/// component maps at one domain point.
void fd_check_at(const PointTransformation& T, double t, double x, double w, double tol) {
    const double h1 = 1e-5, h2 = 1e-4;
    auto ck = [&](double analytic, double fd) {
        CHECK(std::fabs(analytic - fd) <= tol * (1.0 + std::fabs(analytic)));
    };
    auto J = T.jets_at(t, x, w);

    ck(J.T.g[D2::T], (T.t_value(t + h1) - T.t_value(t - h1)) / (2 * h1));
    ck(J.T.h[D2::TT],
       (T.t_value(t + h2) - 2 * T.t_value(t) + T.t_value(t - h2)) / (h2 * h2));

    auto X = [&](double a, double b) { return T.x_value(a, b); };
    ck(J.X.g[D2::T], (X(t + h1, x) - X(t - h1, x)) / (2 * h1));
    ck(J.X.g[D2::X], (X(t, x + h1) - X(t, x - h1)) / (2 * h1));
    ck(J.X.h[D2::TT], (X(t + h2, x) - 2 * X(t, x) + X(t - h2, x)) / (h2 * h2));
    ck(J.X.h[D2::XX], (X(t, x + h2) - 2 * X(t, x) + X(t, x - h2)) / (h2 * h2));
    ck(J.X.h[D2::TX],
       (X(t + h2, x + h2) - X(t + h2, x - h2) - X(t - h2, x + h2) + X(t - h2, x - h2)) /
           (4 * h2 * h2));

    auto W = [&](double a, double b, double c) { return T.w_value(a, b, c); };
    ck(J.W.g[D2::T], (W(t + h1, x, w) - W(t - h1, x, w)) / (2 * h1));
    ck(J.W.g[D2::X], (W(t, x + h1, w) - W(t, x - h1, w)) / (2 * h1));
    ck(J.W.g[D2::W], (W(t, x, w + h1) - W(t, x, w - h1)) / (2 * h1));
    ck(J.W.h[D2::XX], (W(t, x + h2, w) - 2 * W(t, x, w) + W(t, x - h2, w)) / (h2 * h2));
    ck(J.W.h[D2::WW], (W(t, x, w + h2) - 2 * W(t, x, w) + W(t, x, w - h2)) / (h2 * h2));
    ck(J.W.h[D2::XW],
       (W(t, x + h2, w + h2) - W(t, x + h2, w - h2) - W(t, x - h2, w + h2) +
        W(t, x - h2, w - h2)) /
           (4 * h2 * h2));
    ck(J.W.h[D2::TW],
       (W(t + h2, x, w + h2) - W(t + h2, x, w - h2) - W(t - h2, x, w + h2) +
        W(t - h2, x, w - h2)) /
           (4 * h2 * h2));
}

double max_component_diff(const PointTransformation& A, const PointTransformation& B,
                          const SampleBox& box, int n) {
    double worst = 0.0;
    int got = 0;
    for (std::uint64_t i = 0; got < n && i < 50ull * (std::uint64_t)n; ++i) {
        auto p = box.point(i);
        if (!A.in_domain(p[0], p[1], p[2]) || !B.in_domain(p[0], p[1], p[2])) continue;
        ++got;
        worst = std::max(worst, std::fabs(A.t_value(p[0]) - B.t_value(p[0])));
        worst = std::max(worst, std::fabs(A.x_value(p[0], p[1]) - B.x_value(p[0], p[1])));
        worst = std::max(worst,
                         std::fabs(A.w_value(p[0], p[1], p[2]) - B.w_value(p[0], p[1], p[2])));
    }
    REQUIRE(got == n);
    return worst;
}

}  // namespace

TEST_CASE("usual-pot: spot values from the group formulas") {
    // identity parameters give the identity transformation
    auto id = build_usual_pot({});
    CHECK(id.map.t_value(0.37) == 0.37);
    CHECK(id.map.x_value(0.37, 1.2) == 1.2);
    CHECK(id.map.w_value(0.37, 1.2, -0.4) == -0.4);
    CHECK(id.frule.scale == 1.0);

    // alpha=4, kappa=2: scales cancel in the f-rule
    UsualPotParams p;
    p.alpha = 4;
    p.kappa = 2;
    auto s = build_usual_pot(p);
    CHECK(s.map.t_value(1.0) == 4.0);
    CHECK(s.map.x_value(1.0, 1.0) == 2.0);
    CHECK(s.map.w_value(0, 0, 1.0) == 1.0);
    CHECK(s.frule.scale == 1.0);

    // Galilean boost mu1=2: v~ = v + x + t, x~ = x + 2t
    UsualPotParams g;
    g.mu1 = 2;
    auto b = build_usual_pot(g);
    CHECK(b.map.x_value(0.5, 1.0) == 2.0);
    CHECK(b.map.w_value(0.5, 1.0, 0.25) == doctest::Approx(0.25 + 1.0 + 0.5).epsilon(1e-15));

    UsualPotParams badp;
    badp.alpha = 0;
    CHECK_THROWS_AS(build_usual_pot(badp), ParamError);
}

TEST_CASE("p3: identity and Moebius spot checks") {
    P3Params id;  // gamma=0, delta=1, alpha=1, kappa=1, k=1, F2=0
    auto bt = build_p3(id, -1.0);
    CHECK(bt.map.w_value(0.3, 0.8, 0.45) == doctest::Approx(0.45).epsilon(1e-12));

    // alpha=0, beta=1, gamma=1, delta=0, f=-1: t~=1/t, x~=x/t, f~=1,
    // F1 = sqrt|t| exp(x^2/(4t))
    P3Params m;
    m.alpha = 0;
    m.beta = 1;
    m.gamma = 1;
    m.delta = 0;
    auto mb = build_p3(m, -1.0);
    double t = 0.5, x = 0.8, v = 0.3;
    CHECK(mb.map.t_value(t) == doctest::Approx(1.0 / t).epsilon(1e-14));
    CHECK(mb.map.x_value(t, x) == doctest::Approx(x / t).epsilon(1e-14));
    CHECK(mb.frule.scale == doctest::Approx(-1.0));  // f~ = kappa^2 f / Delta = 1
    // v~ = (k^2 f/Delta) ln|F1 e^{v/f}| with Delta=-1, f=-1
    double f1 = std::sqrt(t) * std::exp(x * x / (4 * t));
    double expect = 1.0 * std::log(std::fabs(f1 * std::exp(-v)));
    CHECK(mb.map.w_value(t, x, v) == doctest::Approx(expect).epsilon(1e-12));

    P3Params sing;
    sing.alpha = 1;
    sing.beta = 1;
    sing.gamma = 1;
    sing.delta = 1;
    CHECK_THROWS_AS(build_p3(sing, 1.0), ParamError);
    CHECK_THROWS_AS(build_p3(id, 0.0), ParamError);
}

TEST_CASE("heat solutions: catalog residuals and custom validation") {
    SampleBox box = standard_box();
    auto check_residual = [&](const HeatSolution& h) {
        Expr res = differentiate(h.expr, Var::t) +
                   Expr::real(h.f_const) * differentiate(differentiate(h.expr, Var::x), Var::x);
        CHECK(probably_zero(res, box));
    };
    check_residual(heat_solution({F2Spec::Kind::zero, 0, {}}, 1.0));
    check_residual(heat_solution({F2Spec::Kind::constant, 0.7, {}}, -2.0));
    check_residual(heat_solution({F2Spec::Kind::linear, 0, {}}, 1.5));
    check_residual(heat_solution({F2Spec::Kind::quadratic, 0, {}}, 1.0));
    check_residual(heat_solution({F2Spec::Kind::cubic, 0, {}}, -1.3));
    check_residual(heat_solution({F2Spec::Kind::exponential, 0.8, {}}, 1.1));

    // quadratic for f = 1 is x^2 - 2t
    HeatSolution q = heat_solution({F2Spec::Kind::quadratic, 0, {}}, 1.0);
    CHECK(evaluate(q.expr, Bindings{0.25, 2.0, std::nullopt}) == doctest::Approx(4.0 - 0.5));

    F2Spec good{F2Spec::Kind::custom, 0, parse("x^2 - 2*t + 3")};
    CHECK_NOTHROW(heat_solution(good, 1.0, &box));
    F2Spec bad{F2Spec::Kind::custom, 0, parse("x^2 + t")};
    CHECK_THROWS_AS(heat_solution(bad, 1.0, &box), ParamError);
}

TEST_CASE("p2: closed-form spot checks and the c1=0 reduction") {
    SampleBox box = standard_box();
    // f = x^2 + 1: lambda = e^{2t}
    auto dec = decompose_quadratic(parse("x^2 + 1"), box);
    ExpAntiderivative lam(dec.f2, 2.0, 0.0);
    CHECK(lam(0.0) == 1.0);
    CHECK(lam(1.0) == doctest::Approx(std::exp(2.0)).epsilon(1e-12));

    // c1=0, c2=1, c0=2: t~=t/2, x~=x, v~=2v, f~=2f; equals usual-pot with
    // alpha=1/2, kappa=1
    P2Params p;
    p.c0 = 2;
    p.c1 = 0;
    p.c2 = 1;
    auto bt = build_p2(p, dec);
    CHECK(bt.map.t_value(0.8) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(bt.map.x_value(0.8, 1.1) == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(bt.map.w_value(0.8, 1.1, 0.3) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(bt.frule.scale == 2.0);

    UsualPotParams up;
    up.alpha = 0.5;
    up.kappa = 1;
    auto ref = build_usual_pot(up);
    CHECK(max_component_diff(bt.map, ref.map, box, 20) < 1e-10);

    P2Params bad0;
    bad0.c0 = 0;
    CHECK_THROWS_AS(build_p2(bad0, dec), ParamError);
    P2Params bad12;
    bad12.c1 = 0;
    bad12.c2 = 0;
    CHECK_THROWS_AS(build_p2(bad12, dec), ParamError);
}

TEST_CASE("reduction: random p2 with c1=0 matches a usual-pot transformation") {
    SampleBox box = standard_box(23);
    ParamGen gen(501);
    for (const Expr& f : pool_p2_f()) {
        auto dec = decompose_quadratic(f, box);
        P2Params p = gen.p2();
        p.c1 = 0;
        auto bt = build_p2(p, dec);
        UsualPotParams up;
        up.alpha = 1.0 / (p.c0 * p.c2 * p.c2);
        up.beta = p.c5;
        up.kappa = 1.0 / p.c2;
        up.mu1 = 0;
        up.mu0 = p.c2 * p.c4;
        up.nu = p.c6 / p.c0;
        auto ref = build_usual_pot(up);
        CHECK(max_component_diff(bt.map, ref.map, box, 50) < 1e-8);
    }
}

TEST_CASE("reduction: random c2 with c1=0 matches a c-usual transformation") {
    SampleBox box = standard_box(29);
    ParamGen gen(502);
    for (const Expr& f : pool_p2_f()) {
        auto dec = decompose_quadratic(f, box);
        C2Params p = gen.c2();
        p.c1 = 0;
        auto bt = build_c2(p, dec);
        CUsualParams cu;
        cu.alpha = 1.0 / (p.c0 * p.c2 * p.c2);
        cu.beta = p.c5;
        cu.kappa = 1.0 / p.c2;
        cu.mu1 = p.c3 / p.c2;
        cu.mu0 = p.c2 * p.c4;
        auto ref = build_c_usual(cu);
        CHECK(max_component_diff(bt.map, ref.map, box, 50) < 1e-8);
    }
}

TEST_CASE("restriction: c2 over x-independent f conjugates to a gbe transformation") {
    // The two classes share equations only after w = 2u; conjugating the
    // (admissible) c2 map by S: (t,x,u) -> (t,x,2u) lands exactly on the gbe
    // group with the matched parameter record.
    SampleBox box = standard_box(31);
    Expr f = parse("t + 2");  // x-independent
    auto dec = decompose_quadratic(f, box);
    ParamGen gen(503);
    for (int round = 0; round < 4; ++round) {
        C2Params p = gen.c2();
        if (p.c1 == 0.0) p.c1 = 0.2;
        auto ct = build_c2(p, dec);

        PointTransformation S;
        S.T = [](const D2& t) { return t; };
        S.X = [](const D2&, const D2& x) { return x; };
        S.W = [](const D2&, const D2&, const D2& w) { return 2.0 * w; };
        PointTransformation Sinv = S;
        Sinv.W = [](const D2&, const D2&, const D2& w) { return 0.5 * w; };
        PointTransformation conj = compose(compose(Sinv, ct.map), S);

        // matched gbe record: lambda = 1, A1 = t for x-independent f
        double K = 1.0 / (p.c0 * p.c1 * p.c2) + p.c5;
        GbeParams g;
        g.alpha = K * p.c1;
        g.beta = K * p.c2 - 1.0 / (p.c0 * p.c1);
        g.gamma = p.c1;
        g.delta = p.c2;
        g.kappa = 1.0;
        double cprime = p.c4 - p.c3 * p.c0 * p.c5;
        g.mu1 = p.c3 * p.c0 * g.alpha + cprime * p.c1;
        g.mu0 = p.c3 * p.c0 * g.beta + cprime * p.c2;
        auto gt = build_gbe(g);
        CHECK(max_component_diff(conj, gt.map, box, 50) < 1e-8);
    }
}

TEST_CASE("every builder: analytic derivatives match finite differences") {
    SampleBox box = standard_box(37);
    ParamGen gen(777);
    auto draws = draw_all_builders(gen, box);
    for (auto& d : draws) {
        CAPTURE(d.group);
        int got = 0;
        for (std::uint64_t i = 0; got < 50 && i < 2000; ++i) {
            auto p = box.point(i);
            if (!d.built.map.in_domain(p[0], p[1], p[2])) continue;
            ++got;
            fd_check_at(d.built.map, p[0], p[1], p[2], 1e-6);
            // nondegeneracy at every sampled domain point
            auto J = d.built.map.jets_at(p[0], p[1], p[2]);
            CHECK(std::fabs(J.T.g[D2::T] * J.X.g[D2::X] * J.W.g[D2::W]) > 1e-8);
        }
        CHECK(got == 50);
    }
}

TEST_CASE("projective invariance for p3, p2-linear, gbe") {
    SampleBox box = standard_box(41);
    ParamGen gen(888);
    auto dec = decompose_quadratic(parse("t*x+2"), box);
    for (double s : {-3.0, 0.5, 7.0}) {
        CAPTURE(s);
        {
            double fc = -1.5;
            P3Params p = gen.p3(fc);
            auto a = build_p3(p, fc);
            auto b = build_p3(std::get<P3Params>(rescale_projective(AnyParams{p}, s)), fc);
            CHECK(max_component_diff(a.map, b.map, box, 20) < 1e-9);
            CHECK(a.frule.scale == doctest::Approx(b.frule.scale).epsilon(1e-12));
        }
        {
            P2LinearParams p = gen.p2_linear();
            auto a = build_p2_linear(p, dec);
            auto b = build_p2_linear(std::get<P2LinearParams>(rescale_projective(AnyParams{p}, s)),
                                     dec);
            CHECK(max_component_diff(a.map, b.map, box, 20) < 1e-9);
        }
        {
            GbeParams p = gen.gbe();
            auto a = build_gbe(p);
            auto b = build_gbe(std::get<GbeParams>(rescale_projective(AnyParams{p}, s)));
            CHECK(max_component_diff(a.map, b.map, box, 20) < 1e-9);
        }
    }
}

TEST_CASE("normalize_projective: canonical representative, same transformation") {
    GbeParams p;
    p.alpha = 2;
    p.beta = 0;
    p.gamma = 0;
    p.delta = 2;
    p.kappa = 2;
    p.mu1 = 0.4;
    p.mu0 = -0.6;
    AnyParams n = normalize_projective(AnyParams{p});
    const auto& q = std::get<GbeParams>(n);
    CHECK(q.alpha == 1.0);
    CHECK(q.delta == 1.0);
    CHECK(q.kappa == 1.0);
    // fixed point
    AnyParams n2 = normalize_projective(n);
    CHECK(std::get<GbeParams>(n2).alpha == 1.0);
    CHECK(std::get<GbeParams>(n2).mu1 == q.mu1);

    SampleBox box = standard_box(43);
    auto a = build_gbe(p);
    auto b = build_gbe(q);
    CHECK(max_component_diff(a.map, b.map, box, 20) < 1e-9);

    CHECK_THROWS_AS(normalize_projective(AnyParams{UsualPotParams{}}), ParamError);
}

TEST_CASE("gbe spot check: the paper's inversion example") {
    // gamma=1, delta=0, alpha=0, beta=1, kappa=1: t~=1/t, x~=x/t, u~=x-tu
    GbeParams p;
    p.alpha = 0;
    p.beta = 1;
    p.gamma = 1;
    p.delta = 0;
    auto bt = build_gbe(p);
    CHECK(bt.map.t_value(0.5) == 2.0);
    CHECK(bt.map.x_value(0.5, 0.8) == 1.6);
    CHECK(bt.map.w_value(0.5, 0.8, 0.3) == doctest::Approx(0.8 - 0.5 * 0.3).epsilon(1e-14));
    CHECK(bt.frule.scale == -1.0);  // f~ = -f
}

TEST_CASE("compose with invert is the identity on the box") {
    SampleBox box = standard_box(47);
    ParamGen gen(999);
    auto draws = draw_all_builders(gen, box);
    PointTransformation identity;
    identity.T = [](const D2& t) { return t; };
    identity.X = [](const D2&, const D2& x) { return x; };
    identity.W = [](const D2&, const D2&, const D2& w) { return w; };
    for (auto& d : draws) {
        CAPTURE(d.group);
        PointTransformation round_trip = compose(d.built.map, invert(d.built.map, box));
        CHECK(max_component_diff(round_trip, identity, box, 50) < 1e-8);
    }
}

TEST_CASE("closed-form group laws match pointwise composition") {
    SampleBox box = standard_box(53);
    ParamGen gen(1111);
    {
        UsualPotParams a = gen.usual_pot(), b = gen.usual_pot();
        auto composed = compose(build_usual_pot(a).map, build_usual_pot(b).map);
        REQUIRE(composed.params.has_value());
        auto law = build_usual_pot(std::get<UsualPotParams>(*composed.params));
        CHECK(max_component_diff(composed, law.map, box, 50) < 1e-9);
    }
    {
        // spot law: pure scalings compose multiplicatively
        UsualPotParams a;
        a.alpha = 2;
        a.beta = 0.5;
        a.kappa = 3;
        UsualPotParams b;
        b.alpha = 5;
        b.beta = -1;
        b.kappa = 0.5;
        auto cp = compose_params(AnyParams{a}, AnyParams{b});
        REQUIRE(cp.has_value());
        const auto& c = std::get<UsualPotParams>(*cp);
        CHECK(c.alpha == 10.0);
        CHECK(c.beta == doctest::Approx(5 * 0.5 - 1));
        CHECK(c.kappa == 1.5);
    }
    {
        CUsualParams a = gen.c_usual(), b = gen.c_usual();
        auto composed = compose(build_c_usual(a).map, build_c_usual(b).map);
        REQUIRE(composed.params.has_value());
        auto law = build_c_usual(std::get<CUsualParams>(*composed.params));
        CHECK(max_component_diff(composed, law.map, box, 50) < 1e-9);
    }
    {
        GbeParams a = gen.gbe(), b = gen.gbe();
        auto composed = compose(build_gbe(a).map, build_gbe(b).map);
        REQUIRE(composed.params.has_value());
        auto law = build_gbe(std::get<GbeParams>(*composed.params));
        CHECK(max_component_diff(composed, law.map, box, 50) < 1e-9);
    }
}

TEST_CASE("pushforward_f: generic rule agrees with the closed forms") {
    SampleBox box = standard_box(59);
    // identity: f~ = f
    auto id = build_usual_pot(UsualPotParams{});
    Coefficient f(parse("t*x+2"));
    Coefficient pushed = pushforward_f(id.map, f, box);
    CHECK(std::fabs(pushed(0.4, 1.0) - f(0.4, 1.0)) < 1e-9);

    // alpha=4, kappa=2: f~ = f o Phi^{-1}
    UsualPotParams p;
    p.alpha = 4;
    p.kappa = 2;
    auto bt = build_usual_pot(p);
    CHECK(compare_pushforward(bt, bt.map, f, box, 50) < 1e-8);

    // gbe Moebius example: f~ = -f at the image point
    GbeParams g;
    g.alpha = 0;
    g.beta = 1;
    g.gamma = 1;
    g.delta = 0;
    auto gb = build_gbe(g);
    Coefficient closed = gb.frule.pushforward(f);
    double t = 0.5, x = 0.8;
    CHECK(closed(gb.map.t_value(t), gb.map.x_value(t, x)) ==
          doctest::Approx(-f(t, x)).epsilon(1e-12));
    CHECK(compare_pushforward(gb, gb.map, f, box, 50) < 1e-8);

    // quadrature-backed builder: generic inversion against the field rule
    auto dec = decompose_quadratic(parse("x^2+1"), box);
    P2Params p2;
    p2.c0 = 1.3;
    p2.c1 = 0.25;
    p2.c2 = 1.2;
    p2.c3 = 0.4;
    auto b2 = build_p2(p2, dec);
    CHECK(compare_pushforward(b2, b2.map, Coefficient(parse("x^2+1")), box, 30) < 1e-7);
}

TEST_CASE("symbolic pushforward keeps expressions symbolic") {
    UsualPotParams p;
    p.alpha = 2;
    p.beta = 1;
    p.kappa = 3;
    p.mu1 = 0.5;
    auto bt = build_usual_pot(p);
    auto sym = bt.frule.pushforward_expr(parse("t*x+2"));
    REQUIRE(sym.has_value());
    // evaluate the symbolic f~ at an image point and compare with the rule
    Coefficient f(parse("t*x+2"));
    double t = 0.4, x = 1.1;
    double tt = bt.map.t_value(t), xx = bt.map.x_value(t, x);
    double expect = bt.frule.scale * f(t, x);
    CHECK(evaluate(*sym, Bindings{tt, xx, std::nullopt}) == doctest::Approx(expect).epsilon(1e-12));
}
