#include "pburg/antiderivative.hpp"

#include <algorithm>
#include <cmath>

#include "pburg/errors.hpp"

namespace pburg {

// ---------------------------------------------------------------------------
// Gauss–Kronrod 7–15 panel (QUADPACK qk15 abscissae/weights)
// ---------------------------------------------------------------------------

namespace {

constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double integral;
    double error;
};

Panel gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    auto safe_eval = [&](double x) {
        double v = f(x);
        if (!std::isfinite(v))
            throw QuadratureError("integrand is singular near t = " + std::to_string(x));
        return v;
    };
    double fc = safe_eval(c);
    double resg = kWg[3] * fc;
    double resk = kWgk[7] * fc;
    for (int j = 0; j < 7; ++j) {
        double dx = h * kXgk[j];
        double fsum = safe_eval(c - dx) + safe_eval(c + dx);
        resk += kWgk[j] * fsum;
        if (j % 2 == 1) resg += kWg[j / 2] * fsum;
    }
    return {resk * h, std::fabs((resk - resg) * h)};
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol, int depth) {
    Panel p = gk15(f, a, b);
    if (p.error <= tol || std::fabs(b - a) < 1e-14) return p.integral;
    if (depth > 52)
        throw QuadratureError("quadrature failed to converge near t = " +
                              std::to_string(0.5 * (a + b)));
    double m = 0.5 * (a + b);
    return integrate_adaptive(f, a, m, 0.5 * tol, depth + 1) +
           integrate_adaptive(f, m, b, 0.5 * tol, depth + 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol) {
    if (a == b) return 0.0;
    return integrate_adaptive(f, a, b, std::max(abs_tol, 1e-15), 0);
}

// ---------------------------------------------------------------------------
// Symbolic antiderivatives for the polynomial / exp(affine)*polynomial class
// ---------------------------------------------------------------------------

namespace {

struct TermClass {
    // c * t^k * exp(a t + b); has_exp false means the plain monomial c * t^k
    Number c = Number::integer(1);
    int k = 0;
    bool has_exp = false;
    Number a = Number::integer(0), b = Number::integer(0);
};

/// Matches c * t^k or c * t^k * exp(a t + b); the integrand class the paper's
/// closed forms actually need. Anything else falls back to quadrature.
std::optional<TermClass> classify_term(const Expr& term) {
    TermClass out;
    std::vector<Expr> factors;
    std::function<bool(const Expr&)> flatten = [&](const Expr& e) -> bool {
        if (e.kind() == ExprKind::product) {
            for (const Expr& k : e.children())
                if (!flatten(k)) return false;
            return true;
        }
        if (e.kind() == ExprKind::negate) {
            out.c = -out.c;
            return flatten(e.children()[0]);
        }
        factors.push_back(e);
        return true;
    };
    if (!flatten(term)) return std::nullopt;

    for (const Expr& f : factors) {
        if (f.is_constant()) {
            out.c = out.c * f.value();
            continue;
        }
        if (f.kind() == ExprKind::variable && f.var() == Var::t) {
            out.k += 1;
            continue;
        }
        if (f.kind() == ExprKind::power && f.children()[0].kind() == ExprKind::variable &&
            f.children()[0].var() == Var::t) {
            const Number& r = f.exponent();
            if (r.exact() && r.den() == 1 && r.num() >= 0 && r.num() <= 40) {
                out.k += (int)r.num();
                continue;
            }
            return std::nullopt;
        }
        if (f.kind() == ExprKind::exp_fn && !out.has_exp) {
            auto p = try_polynomial(f.children()[0]);
            if (!p) return std::nullopt;
            Number a0 = Number::integer(0), a1 = Number::integer(0);
            for (const auto& [m, c] : *p) {
                if (m == std::array<int, 3>{0, 0, 0})
                    a0 = c;
                else if (m == std::array<int, 3>{1, 0, 0})
                    a1 = c;
                else
                    return std::nullopt;
            }
            if (a1.is_zero()) return std::nullopt;
            out.has_exp = true;
            out.a = a1;
            out.b = a0;
            continue;
        }
        return std::nullopt;
    }
    return out;
}

Expr monomial_t(const Number& c, int k) {
    std::vector<Expr> fs;
    if (!c.is_one() || k == 0) fs.push_back(Expr::constant(c));
    if (k == 1) fs.push_back(Expr::t());
    if (k > 1) fs.push_back(Expr::pow(Expr::t(), Number::integer(k)));
    return Expr::product(std::move(fs));
}

/// Exact antiderivative of c * t^k * exp(a t + b):
/// e^{at+b} * sum_j q_j t^j with q_j = c (-1)^{k-j} (k!/j!) / a^{k-j+1}.
Expr integrate_exp_term(const TermClass& tc) {
    std::vector<Expr> terms;
    Number fact = Number::integer(1);  // k!/j!, built down from j = k
    for (int j = tc.k; j >= 0; --j) {
        Number q = tc.c * fact / tc.a.pow_int(tc.k - j + 1);
        if ((tc.k - j) % 2 == 1) q = -q;
        if (!q.is_zero()) terms.push_back(monomial_t(q, j));
        fact = fact * Number::integer(j);
    }
    Expr poly = Expr::sum(std::move(terms));
    Expr arg = simplify(
        Expr::sum({Expr::product({Expr::constant(tc.a), Expr::t()}), Expr::constant(tc.b)}));
    return Expr::product({Expr::exp(arg), poly});
}

std::optional<Expr> symbolic_antiderivative(const Expr& g) {
    Expr s = simplify(g);
    std::vector<Expr> terms;
    if (s.kind() == ExprKind::sum)
        terms = s.children();
    else
        terms.push_back(s);

    std::vector<Expr> out;
    for (const Expr& term : terms) {
        auto tc = classify_term(term);
        if (!tc) return std::nullopt;
        if (tc->c.is_zero()) continue;
        if (!tc->has_exp)
            out.push_back(monomial_t(tc->c / Number::integer(tc->k + 1), tc->k + 1));
        else
            out.push_back(integrate_exp_term(*tc));
    }
    return simplify(Expr::sum(std::move(out)));
}

}  // namespace

// ---------------------------------------------------------------------------
// Antiderivative
// ---------------------------------------------------------------------------

struct Antiderivative::Impl {
    double t0 = 0.0;
    double tol = 1e-10;

    // symbolic backend
    std::optional<Expr> primitive;  // F with A = F - F(t0)
    double primitive_at_t0 = 0.0;
    std::optional<Expr> g_expr, dg_expr;

    // numeric backend
    CurveFn g_fn;  // integrand jet (g, g', .)

    // monotone grid of evaluated nodes, shared across copies
    mutable std::map<double, double> cache;
    mutable std::mutex mutex;

    /// Integrand value and derivative at t: (g, g', .)
    Jet1 integrand_jet(double t) const {
        if (g_expr) {
            Bindings b{t, std::nullopt, std::nullopt};
            return {evaluate(*g_expr, b), evaluate(*dg_expr, b), 0.0};
        }
        return g_fn(t);
    }

    double value(double t) const {
        if (primitive) {
            Bindings b{t, std::nullopt, std::nullopt};
            return evaluate(*primitive, b) - primitive_at_t0;
        }
        std::lock_guard<std::mutex> lock(mutex);
        if (cache.empty()) cache.emplace(t0, 0.0);
        auto it = cache.find(t);
        if (it != cache.end()) return it->second;
        // integrate from the nearest cached node; finer internal tolerance so
        // chained segments stay within the advertised one
        auto ge = cache.lower_bound(t);
        auto nearest = ge;
        if (ge == cache.end())
            nearest = std::prev(ge);
        else if (ge != cache.begin() &&
                 std::fabs(std::prev(ge)->first - t) < std::fabs(ge->first - t))
            nearest = std::prev(ge);
        auto f = [this](double s) { return integrand_jet(s).v; };
        double v = nearest->second + integrate(f, nearest->first, t, tol * 1e-2);
        cache.emplace(t, v);
        return v;
    }
};

Antiderivative Antiderivative::from_expr(const Expr& integrand, double t0, double tol) {
    if (integrand.depends_on(Var::x) || integrand.depends_on(Var::w))
        throw ParamError("antiderivative integrand must be a function of t only");
    auto impl = std::make_shared<Impl>();
    impl->t0 = t0;
    impl->tol = tol;
    impl->g_expr = simplify(integrand);
    impl->dg_expr = simplify(differentiate(*impl->g_expr, Var::t));
    if (auto prim = symbolic_antiderivative(*impl->g_expr)) {
        impl->primitive = prim;
        impl->primitive_at_t0 = evaluate(*prim, Bindings{t0, std::nullopt, std::nullopt});
    } else {
        impl->integrand_jet(t0);  // singular integrands fail fast at the base point
    }
    return Antiderivative(std::move(impl));
}

Antiderivative Antiderivative::from_function(CurveFn integrand, double t0, double tol) {
    auto impl = std::make_shared<Impl>();
    impl->t0 = t0;
    impl->tol = tol;
    impl->g_fn = std::move(integrand);
    return Antiderivative(std::move(impl));
}

double Antiderivative::value(double t) const { return impl_->value(t); }

Jet1 Antiderivative::jet(double t) const {
    Jet1 g = impl_->integrand_jet(t);
    return {impl_->value(t), g.v, g.d1};
}

double Antiderivative::base_point() const { return impl_->t0; }
double Antiderivative::tolerance() const { return impl_->tol; }
bool Antiderivative::symbolic() const { return impl_->primitive.has_value(); }
const std::optional<Expr>& Antiderivative::symbolic_form() const { return impl_->primitive; }
const std::optional<Expr>& Antiderivative::integrand() const { return impl_->g_expr; }

}  // namespace pburg
