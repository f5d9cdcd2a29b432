#include <doctest.h>

#include <cmath>

#include "pburg/antiderivative.hpp"
#include "pburg/errors.hpp"
#include "test_util.hpp"

using namespace pburg;

namespace {

/// Independent oracle: composite Simpson on a fixed grid, refined until the
/// change drops below 1e-10. Deliberately unrelated to the Gauss-Kronrod path.
double simpson_oracle(const std::function<double(double)>& f, double a, double b) {
    auto pass = [&](int n) {
        double h = (b - a) / n;
        double s = f(a) + f(b);
        for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
        return s * h / 3.0;
    };
    double prev = pass(64);
    for (int n = 128; n <= 1 << 22; n *= 2) {
        double cur = pass(n);
        if (std::fabs(cur - prev) < 1e-10) return cur;
        prev = cur;
    }
    return prev;
}

}  // namespace

TEST_CASE("symbolic backend: polynomials and exp-affine") {
    auto a = Antiderivative::from_expr(parse("2*t"), 0.0);
    CHECK(a.symbolic());
    CHECK(a.value(0.0) == 0.0);
    CHECK(a.value(3.0) == doctest::Approx(9.0).epsilon(1e-14));

    auto b = Antiderivative::from_expr(parse("1"), 3.0);
    CHECK(b.symbolic());
    CHECK(b.value(3.0) == 0.0);
    CHECK(b.value(7.5) == doctest::Approx(4.5).epsilon(1e-14));

    // t * exp(2t): exact by parts
    auto c = Antiderivative::from_expr(parse("t*exp(2*t)"), 0.0);
    CHECK(c.symbolic());
    double expect = std::exp(2.0) * (0.5 - 0.25) + 0.25;  // [e^{2t}(t/2 - 1/4)] from 0 to 1
    CHECK(c.value(1.0) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("numeric backend: erf-type integral against the Simpson oracle") {
    Expr g = parse("exp(-t^2)");
    auto a = Antiderivative::from_expr(g, 0.0, 1e-10);
    CHECK_FALSE(a.symbolic());
    auto f = [&](double t) { return evaluate(g, Bindings{t, std::nullopt, std::nullopt}); };
    double oracle = simpson_oracle(f, 0.0, 1.0);
    CHECK(std::fabs(oracle - 0.7468241) < 1e-6);  // frozen from the oracle
    CHECK(a.value(1.0) == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(a.value(0.0) == 0.0);
}

TEST_CASE("fundamental theorem holds on random points") {
    std::vector<Antiderivative> pool = {
        Antiderivative::from_expr(parse("2*t"), 0.0),
        Antiderivative::from_expr(parse("exp(-t^2)"), 0.0),
        Antiderivative::from_expr(parse("1/(t+2)"), 0.0),
        Antiderivative::from_expr(parse("t^3 - t + 1/2"), 0.5),
        Antiderivative::from_expr(parse("exp(t/2)*t^2"), 0.0),
        Antiderivative::from_expr(parse("sqrt(t+2)"), 0.0),
    };
    SplitMix64 rng(404);
    const double h = 1e-4;
    for (const auto& a : pool) {
        for (int i = 0; i < 20; ++i) {
            double t = rng.uniform(-0.8, 0.9);
            double fd = (a.value(t + h) - a.value(t - h)) / (2 * h);
            double g = a.jet(t).d1;
            CHECK(std::fabs(fd - g) <= 1e-6 * (1.0 + std::fabs(g)));
        }
    }
}

TEST_CASE("base point shift is an exact constant") {
    Expr g = parse("exp(-t^2)");
    auto a0 = Antiderivative::from_expr(g, 0.0);
    auto a1 = Antiderivative::from_expr(g, 0.5);
    double shift = a0.value(0.5);
    SplitMix64 rng(9);
    for (int i = 0; i < 10; ++i) {
        double t = rng.uniform(-1.0, 1.0);
        CHECK(a0.value(t) - a1.value(t) == doctest::Approx(shift).epsilon(1e-9));
    }
}

TEST_CASE("exp-antiderivative: closed forms, positivity, multiplicativity") {
    // g = 1, c = 2 -> lambda(t) = e^{2t}
    ExpAntiderivative l1(parse("1"), 2.0, 0.0);
    CHECK(l1(0.0) == 1.0);
    CHECK(l1(1.0) == doctest::Approx(std::exp(2.0)).epsilon(1e-12));

    // g = 0 -> lambda == 1
    ExpAntiderivative l0(parse("0"), 2.0, 0.0);
    CHECK(l0(0.7) == 1.0);

    // g = t, c = 2 -> lambda = e^{t^2}, d(log lambda)/dt at 1 equals 2
    ExpAntiderivative lt(parse("t"), 2.0, 0.0);
    CHECK(lt(1.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    const double h = 1e-5;
    double dlog = (std::log(lt(1.0 + h)) - std::log(lt(1.0 - h))) / (2 * h);
    CHECK(dlog == doctest::Approx(2.0).epsilon(1e-8));

    // lambda(g1+g2) = lambda(g1) * lambda(g2) pointwise
    Expr g1 = parse("exp(-t^2)"), g2 = parse("t^2");
    ExpAntiderivative la(g1 + g2, 1.0, 0.0);
    ExpAntiderivative lb(g1, 1.0, 0.0);
    ExpAntiderivative lc(g2, 1.0, 0.0);
    SplitMix64 rng(11);
    for (int i = 0; i < 12; ++i) {
        double t = rng.uniform(-1.0, 1.0);
        double lhs = la(t), rhs = lb(t) * lc(t);
        CHECK(std::fabs(lhs - rhs) <= 1e-8 * std::fabs(lhs));
        CHECK(la(t) > 0.0);
    }
}

TEST_CASE("jet carries integrand and its derivative") {
    auto a = Antiderivative::from_expr(parse("t^2 + 1"), 0.0);
    Jet1 j = a.jet(2.0);
    CHECK(j.v == doctest::Approx(8.0 / 3.0 + 2.0).epsilon(1e-14));
    CHECK(j.d1 == 5.0);
    CHECK(j.d2 == 4.0);
}

TEST_CASE("singular integrand is reported with the point") {
    auto bad = Antiderivative::from_expr(parse("1/t"), 0.5);
    CHECK_THROWS_AS(bad.value(-0.5), Error);  // crosses the pole at t = 0
}

TEST_CASE("from_function supports nested antiderivatives") {
    // inner A(t) = int_0^t e^{-s^2} ds, outer int_0^t A(s)^2 ds
    auto inner = Antiderivative::from_expr(parse("exp(-t^2)"), 0.0);
    auto outer = Antiderivative::from_function(
        [inner](double t) {
            Jet1 a = inner.jet(t);  // (A, g, g')
            return Jet1{a.v * a.v, 2.0 * a.v * a.d1, 0.0};
        },
        0.0);
    auto f = [&](double s) {
        double v = inner.value(s);
        return v * v;
    };
    double oracle = simpson_oracle(f, 0.0, 1.0);
    CHECK(outer.value(1.0) == doctest::Approx(oracle).epsilon(1e-8));
    // jet derivative is the integrand, exactly
    CHECK(outer.jet(0.75).d1 == doctest::Approx(f(0.75)).epsilon(1e-12));
}
