#pragma once

#include <functional>
#include <optional>
#include <string>

#include "pburg/antiderivative.hpp"
#include "pburg/expr.hpp"
#include "pburg/sampling.hpp"

namespace pburg {

/// The three equation families:
///   P:  v_t + v_x^2 + f v_xx = 0            (generalized potential Burgers)
///   C:  u_t + 2 u u_x + (f u_x)_x = 0       (conserved form)
///   L:  u_t + u u_x + f u_xx = 0            (generalized Burgers)
enum class Family { P, C, L };

enum class Subclass { P1, P2, P3, C1, C2, L };

std::string to_string(Family f);
std::string to_string(Subclass s);

/// Numeric coefficient backend: f(t, x) together with the partial derivatives
/// classification and the C-family residual need.
struct Field {
    std::function<double(double, double)> value, dt, dx, dxx, dxxx;
};

/// An arbitrary element f(t, x), either symbolic (an Expr, with partials
/// derived exactly) or a numeric Field (used for pushforwards of f whose
/// inverse point maps involve quadratures).
class Coefficient {
  public:
    Coefficient(Expr f);  // NOLINT: implicit by design
    explicit Coefficient(Field fn);

    double operator()(double t, double x) const { return fn_.value(t, x); }
    double dt(double t, double x) const { return fn_.dt(t, x); }
    double dx(double t, double x) const { return fn_.dx(t, x); }
    double dxx(double t, double x) const { return fn_.dxx(t, x); }
    double dxxx(double t, double x) const { return fn_.dxxx(t, x); }

    const std::optional<Expr>& expr() const { return expr_; }

  private:
    std::optional<Expr> expr_;
    Field fn_;
};

/// A point of the second-order jet space, with optional third-order slots for
/// the potentialization identities.
struct Jet2 {
    double t = 0, x = 0, w = 0;
    double w_t = 0, w_x = 0, w_xx = 0;
    std::optional<double> w_tx, w_xxx;
};

/// An equation family member with a fixed arbitrary element, bound to a box on
/// which f has been checked nonvanishing (min |f| > 1e-6 over samples).
struct Equation {
    Family family;
    Coefficient f;
    SampleBox box;
};

/// Throws ParamError when f vanishes somewhere on the box.
Equation make_equation(Family family, Coefficient f, SampleBox box);

double residual(Family family, const Coefficient& f, const Jet2& jet);
inline double residual(const Equation& eq, const Jet2& jet) {
    return residual(eq.family, eq.f, jet);
}

/// The w_t making the family residual vanish at the rest of the jet.
double solve_wt(Family family, const Coefficient& f, const Jet2& jet);

/// Subclass of f within its family: P1/C1 iff f_xxx != 0, P3 iff f constant,
/// P2/C2 otherwise; family L is undivided. Throws IndeterminateError instead
/// of guessing when the zero tests cannot decide.
Subclass classify(Family family, const Coefficient& f, const SampleBox& box);

/// f = f2(t) x^2 + f1(t) x + f0(t) for arbitrary elements with f_xxx = 0,
/// recovered as f2 = f_xx/2, f1 = f_x - x f_xx, f0 = f + x^2 f_xx/2 - x f_x.
struct QuadraticDecomposition {
    Expr f2, f1, f0;
};

QuadraticDecomposition decompose_quadratic(const Expr& f, const SampleBox& box);

/// Sampled-jet residual statistics with a verdict.
struct VerificationReport {
    int samples = 0;
    double max_abs = 0.0;
    double mean_abs = 0.0;
    double tolerance = 0.0;
    Jet2 worst_jet;
    double worst_value = 0.0;
    bool pass = false;
    std::string note;
};

/// Divergence identity of the canonical conserved current, checked off-shell
/// (w_t free):
///   C: D_t(u) + D_x(u^2 + f u_x)                        = residual_C
///   L: D_t(lu) + D_x(l (u^2/2 + f u_x - f_x u))          = l residual_L,
/// with l = e^{int f_xx dt} (t-only when f_xxx = 0). Family P has no nonzero
/// conservation law for nonconstant f and is rejected.
VerificationReport conserved_current_check(Family family, const Expr& f, const SampleBox& box,
                                           int n, double t0 = 0.0);

/// L-family current check with an injected multiplier curve (negative
/// controls use a deliberately wrong lambda).
VerificationReport conserved_current_check_l(const Expr& f, const CurveFn& lambda,
                                             const SampleBox& box, int n);

}  // namespace pburg
