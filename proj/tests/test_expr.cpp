#include <doctest.h>

#include <cmath>

#include "pburg/errors.hpp"
#include "pburg/expr.hpp"
#include "test_util.hpp"

using namespace pburg;
using pburg::test::ExprGen;

namespace {

SampleBox unit_box(std::uint64_t seed = 1) {
    SampleBox b;
    b.t = {0.2, 1.1};
    b.x = {0.3, 1.4};
    b.w = {0.4, 1.2};
    b.n = 50;
    b.seed = seed;
    return b;
}

double eval3(const Expr& e, double t, double x, double w) {
    return evaluate(e, Bindings{t, x, w});
}

}  // namespace

TEST_CASE("parse: grammar basics") {
    Expr e = parse("t*x^2 + 1");
    REQUIRE(e.kind() == ExprKind::sum);
    REQUIRE(e.children().size() == 2);
    const Expr& prod = e.children()[0];
    CHECK(prod.kind() == ExprKind::product);
    CHECK(prod.children()[0].kind() == ExprKind::variable);
    CHECK(prod.children()[1].kind() == ExprKind::power);
    CHECK(e.children()[1].is_one());

    Expr m = parse("-1");
    REQUIRE(m.is_constant());
    CHECK(m.value().exact());
    CHECK(m.value().num() == -1);

    Expr ex = parse("exp(2*t)*x");
    REQUIRE(ex.kind() == ExprKind::product);
    CHECK(ex.children()[0].kind() == ExprKind::exp_fn);
    CHECK(ex.children()[1].kind() == ExprKind::variable);
}

TEST_CASE("parse: rational literals and precedence") {
    Expr half = parse("1/2");
    REQUIRE(half.is_constant());
    CHECK(half.value().num() == 1);
    CHECK(half.value().den() == 2);

    // unary minus binds tighter than '*', looser than '^'
    CHECK(eval3(parse("-2^2"), 0, 0, 0) == -4.0);
    CHECK(eval3(parse("-t*x"), 2, 3, 0) == -6.0);
    CHECK(eval3(parse("2^-1"), 0, 0, 0) == 0.5);
    CHECK(eval3(parse("x^(1/2)"), 0, 4, 0) == 2.0);
    CHECK(eval3(parse("2*x^2"), 0, 3, 0) == 18.0);
    CHECK(eval3(parse("6/3/2"), 0, 0, 0) == 1.0);
    CHECK(eval3(parse("u + v"), 0, 0, 1.5) == 3.0);  // both spellings map to w
}

TEST_CASE("parse: errors carry byte offsets") {
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("t + y"), ParseError);
    CHECK_THROWS_AS(parse("t + "), ParseError);
    CHECK_THROWS_AS(parse("x^t"), ParseError);  // exponent must be a constant
    CHECK_THROWS_AS(parse("sin(t)"), ParseError);
    try {
        parse("t + q");
    } catch (const ParseError& pe) {
        CHECK(pe.offset == 4);
    }
}

TEST_CASE("differentiate: polynomial and exponential rules") {
    Expr e = parse("t*x^2 + 1");
    Expr d = simplify(differentiate(e, Var::x));
    CHECK(d.same(simplify(parse("2*t*x"))));

    Expr d3 = parse("x^3");
    for (int i = 0; i < 3; ++i) d3 = differentiate(d3, Var::x);
    CHECK(simplify(d3).same(Expr::integer(6)));

    Expr de = simplify(differentiate(parse("exp(2*t)"), Var::t));
    CHECK(de.same(simplify(parse("2*exp(2*t)"))));

    // ln|y| differentiates to y'/y
    Expr dl = simplify(differentiate(Expr::ln(Expr::abs(parse("t*x"))), Var::x));
    SampleBox box = unit_box();
    CHECK(probably_zero(dl - parse("1/x"), box));
}

TEST_CASE("evaluate: values and domain errors") {
    CHECK(eval3(parse("t*x^2+1"), 2, 3, 0) == 19.0);
    CHECK(eval3(parse("ln(x)"), 0, 1, 0) == 0.0);
    CHECK_THROWS_AS(eval3(parse("1/x"), 0, 0, 0), EvalError);
    CHECK_THROWS_AS(eval3(parse("ln(x)"), 0, -1, 0), EvalError);
    CHECK_THROWS_AS(eval3(parse("sqrt(x)"), 0, -4, 0), EvalError);
    CHECK_THROWS_AS(evaluate(parse("t+x"), Bindings{1.0, std::nullopt, std::nullopt}), EvalError);
    // offending subexpression is reported
    try {
        eval3(parse("t + 1/x"), 1, 0, 0);
    } catch (const EvalError& err) {
        CHECK(err.subexpr == "1/x");
    }
}

TEST_CASE("simplify: identities from the contract") {
    CHECK(simplify(parse("x + 0*t")).same(Expr::x()));
    CHECK(simplify(parse("(t+1)*x - t*x")).same(Expr::x()));
    Expr kept = parse("exp(ln(x))");
    CHECK(simplify(kept).same(kept));  // no domain-changing rewrite
    CHECK(simplify(parse("x - x + 5")).same(Expr::integer(5)));
    CHECK(simplify(parse("3*x^2 + t*x + 5 - 3*x^2")).same(simplify(parse("t*x + 5"))));
}

TEST_CASE("probably_zero: structural and sampled paths") {
    SampleBox box = unit_box();
    Expr d3 = parse("x^3");
    for (int i = 0; i < 3; ++i) d3 = differentiate(d3, Var::x);
    CHECK(probably_zero(d3 - Expr::integer(6), box));

    Expr e3 = parse("exp(x)");
    for (int i = 0; i < 3; ++i) e3 = differentiate(e3, Var::x);
    CHECK_FALSE(probably_zero(e3, box));

    CHECK(probably_zero(parse("(t+1)*x - t*x - x"), box));
}

TEST_CASE("as_constant") {
    SampleBox box = unit_box();
    CHECK(*as_constant(parse("-1"), {Var::t, Var::x}, box) == -1.0);
    CHECK_FALSE(as_constant(parse("t*x"), {Var::t, Var::x}, box).has_value());
    CHECK(*as_constant(parse("x - x + 5"), {Var::t, Var::x}, box) == 5.0);
}

TEST_CASE("property: derivative matches central differences") {
    ExprGen gen(2024);
    SampleBox box = unit_box(77);
    const Var vars[3] = {Var::t, Var::x, Var::w};
    int checked = 0;
    for (int it = 0; it < 400 && checked < 200; ++it) {
        Expr e = gen.tree(6);
        Var v = vars[gen.rng().next() % 3];
        Expr de = differentiate(e, v);
        auto p = box.point(it);
        const double h = 1e-5;
        double lo[3] = {p[0], p[1], p[2]}, hi[3] = {p[0], p[1], p[2]};
        lo[(int)v] -= h;
        hi[(int)v] += h;
        double fm, fp, dv, f0;
        try {
            f0 = eval3(e, p[0], p[1], p[2]);
            fm = eval3(e, lo[0], lo[1], lo[2]);
            fp = eval3(e, hi[0], hi[1], hi[2]);
            dv = eval3(de, p[0], p[1], p[2]);
        } catch (const EvalError&) {
            continue;  // point outside the domain of a generated tree
        }
        if (!std::isfinite(dv) || std::fabs(dv) > 1e6 || std::fabs(f0) > 1e6) continue;
        double fd = (fp - fm) / (2 * h);
        ++checked;
        CHECK(std::fabs(dv - fd) <= 1e-5 * (1.0 + std::fabs(dv)));
    }
    CHECK(checked >= 200);
}

TEST_CASE("property: parse after print is the identity") {
    ExprGen gen(55);
    for (int it = 0; it < 300; ++it) {
        Expr e = gen.tree(6);
        Expr back = parse(e.str());
        CHECK(back.same(e));
    }
}

TEST_CASE("property: simplify preserves evaluation") {
    ExprGen gen(99);
    SampleBox box = unit_box(3);
    for (int it = 0; it < 200; ++it) {
        Expr e = gen.tree(5);
        Expr s = simplify(e);
        CHECK(s.node_count() <= e.node_count());
        int pts = 0;
        for (int k = 0; k < 50; ++k) {
            auto p = box.point((std::uint64_t)it * 64 + k);
            double a, b;
            try {
                a = eval3(e, p[0], p[1], p[2]);
                b = eval3(s, p[0], p[1], p[2]);
            } catch (const EvalError&) {
                continue;
            }
            ++pts;
            CHECK(std::fabs(a - b) <= 1e-12 * (1.0 + std::fabs(a)));
        }
        (void)pts;
    }
}

TEST_CASE("property: probably_zero soundness") {
    // never true when some sampled magnitude exceeds 1e-6
    ExprGen gen(7);
    SampleBox box = unit_box(11);
    for (int it = 0; it < 120; ++it) {
        Expr e = gen.tree(4);
        bool z;
        try {
            z = probably_zero(e, box);
        } catch (const IndeterminateError&) {
            continue;
        }
        if (!z) continue;
        for (int k = 0; k < box.n; ++k) {
            auto p = box.point(k);
            try {
                CHECK(std::fabs(eval3(e, p[0], p[1], p[2])) < 1e-6 * (1 + 1e4));
            } catch (const EvalError&) {
            }
        }
    }
}

TEST_CASE("evaluate on jets matches symbolic differentiation") {
    ExprGen gen(31);
    SampleBox box = unit_box(13);
    for (int it = 0; it < 100; ++it) {
        Expr e = gen.tree(5);
        auto p = box.point(it);
        D2 jt = D2::seed(p[0], D2::T), jx = D2::seed(p[1], D2::X), jw = D2::seed(p[2], D2::W);
        D2 r;
        double sx, sxx, stx;
        try {
            r = evaluate_jet(e, jt, jx, jw);
            sx = evaluate(differentiate(e, Var::x), Bindings{p[0], p[1], p[2]});
            sxx = evaluate(differentiate(differentiate(e, Var::x), Var::x),
                           Bindings{p[0], p[1], p[2]});
            stx = evaluate(differentiate(differentiate(e, Var::x), Var::t),
                           Bindings{p[0], p[1], p[2]});
        } catch (const EvalError&) {
            continue;
        }
        double scale = 1.0 + std::fabs(sx) + std::fabs(sxx) + std::fabs(stx);
        if (scale > 1e8) continue;
        CHECK(std::fabs(r.g[D2::X] - sx) <= 1e-9 * scale);
        CHECK(std::fabs(r.h[D2::XX] - sxx) <= 1e-9 * scale);
        CHECK(std::fabs(r.h[D2::TX] - stx) <= 1e-9 * scale);
    }
}
