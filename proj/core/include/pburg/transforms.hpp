#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "pburg/antiderivative.hpp"
#include "pburg/equations.hpp"
#include "pburg/expr.hpp"
#include "pburg/jets.hpp"

namespace pburg {

// ---------------------------------------------------------------------------
// Parameter records, one per equivalence-group builder. Projective tuples are
// stored unnormalized; normalize_projective picks the canonical
// representative.
// ---------------------------------------------------------------------------

/// Catalog entry (or user expression) solving F2_t + f F2_xx = 0.
struct F2Spec {
    enum class Kind { zero, constant, linear, quadratic, cubic, exponential, custom };
    Kind kind = Kind::zero;
    double value = 0.0;  // the constant, or the exponential rate a
    std::optional<Expr> expr;
};

struct HeatSolution {
    Expr expr;
    double f_const;
};

/// Builds the named heat solution for constant f; custom expressions are
/// validated against the defining equation on the box.
HeatSolution heat_solution(const F2Spec& spec, double f_const,
                           const SampleBox* validate_box = nullptr);

struct UsualPotParams {
    double alpha = 1, beta = 0, kappa = 1, mu1 = 0, mu0 = 0, nu = 0;
};

struct P3Params {
    double alpha = 1, beta = 0, gamma = 0, delta = 1;
    double kappa = 1, mu1 = 0, mu0 = 0, k = 1;
    F2Spec f2;
};

struct P2Params {
    double c0 = 1, c1 = 0, c2 = 1, c3 = 0, c4 = 0, c5 = 0, c6 = 0;
    double t0 = 0;
};

struct P2LinearParams {
    double alpha = 1, beta = 0, gamma = 0, delta = 1, kappa = 1;
    double nu = 0, c4 = 0, c5 = 0;
    double t0 = 0;
};

struct CUsualParams {
    double alpha = 1, beta = 0, kappa = 1, mu1 = 0, mu0 = 0;
};

struct C2Params {
    double c0 = 1, c1 = 0, c2 = 1, c3 = 0, c4 = 0, c5 = 0;
    double t0 = 0;
};

struct GbeParams {
    double alpha = 1, beta = 0, gamma = 0, delta = 1, kappa = 1, mu1 = 0, mu0 = 0;
};

using AnyParams = std::variant<UsualPotParams, P3Params, P2Params, P2LinearParams, CUsualParams,
                               C2Params, GbeParams>;

/// Canonical group name ("usual-pot", "p3", "p2", "p2-linear", "c-usual",
/// "c2", "gbe").
std::string group_name(const AnyParams& p);

/// Bracketed scalar solve on a monotone component: grid scan for a straddling
/// pair (skipping points where fn throws), bisection, residual validation.
/// Used for the numeric inverses of quadrature-backed component maps.
double solve_monotone(const std::function<double(double)>& fn, double target, double lo,
                      double hi);

// ---------------------------------------------------------------------------
// Point transformations
// ---------------------------------------------------------------------------

/// A point transformation t~ = T(t), x~ = X(t, x), w~ = W(t, x, w). The
/// component maps are evaluated on second-order jets, so every partial
/// derivative up to order two comes out of one evaluation, exactly; no
/// numeric differentiation of quadratures ever happens (antiderivatives enter
/// through their integrands). The domain predicate excludes the finitely many
/// poles of Moebius components and X^1.
struct PointTransformation {
    std::function<D2(const D2&)> T;
    std::function<D2(const D2&, const D2&)> X;
    std::function<D2(const D2&, const D2&, const D2&)> W;
    std::function<bool(double, double, double)> domain;  // empty -> everywhere
    std::string group = "custom";
    std::optional<AnyParams> params;

    double t_value(double t) const { return T(D2::seed(t, D2::T)).v; }
    double x_value(double t, double x) const {
        return X(D2::seed(t, D2::T), D2::seed(x, D2::X)).v;
    }
    double w_value(double t, double x, double w) const {
        return W(D2::seed(t, D2::T), D2::seed(x, D2::X), D2::seed(w, D2::W)).v;
    }
    bool in_domain(double t, double x, double w) const {
        return !domain || domain(t, x, w);
    }

    struct ComponentJets {
        D2 T, X, W;
    };
    ComponentJets jets_at(double t, double x, double w) const {
        D2 jt = D2::seed(t, D2::T), jx = D2::seed(x, D2::X), jw = D2::seed(w, D2::W);
        return {T(jt), X(jt, jx), W(jt, jx, jw)};
    }
};

/// The arbitrary-element rule f~ = scale * f o Phi^{-1}, where scale is the
/// constant X_x^2 / T_t of the builder and Phi^{-1} inverts the (t, x) part
/// (X is affine in x for every group: X = x_slope(t) x + x_shift(t)).
struct FRule {
    double scale = 1.0;
    std::function<double(double)> t_inverse;  // T^{-1}, exact or Newton-backed
    CurveFn t_slope;                          // jet of T' is derived from this
    CurveFn x_slope, x_shift;
    std::optional<Expr> t_inverse_expr;  // symbolic inverse maps in target vars
    std::optional<Expr> x_inverse_expr;

    /// Pushforward of the arbitrary element as a function of the target
    /// variables; symbolic when both f and the inverse maps are.
    Coefficient pushforward(const Coefficient& f) const;
    std::optional<Expr> pushforward_expr(const Expr& f) const;
};

struct BuiltTransformation {
    PointTransformation map;
    FRule frule;
};

// ---------------------------------------------------------------------------
// Builders (throw ParamError on violated parameter invariants)
// ---------------------------------------------------------------------------

BuiltTransformation build_usual_pot(const UsualPotParams& p);
BuiltTransformation build_p3(const P3Params& p, double f_const);
BuiltTransformation build_p2(const P2Params& p, const QuadraticDecomposition& dec,
                             double quad_tol = 1e-10);
BuiltTransformation build_p2_linear(const P2LinearParams& p, const QuadraticDecomposition& dec,
                                    double quad_tol = 1e-10);
BuiltTransformation build_c_usual(const CUsualParams& p);
BuiltTransformation build_c2(const C2Params& p, const QuadraticDecomposition& dec,
                             double quad_tol = 1e-10);
BuiltTransformation build_gbe(const GbeParams& p);

/// Dispatch on a parameter record; p3/p2/p2-linear/c2 need the arbitrary
/// element to resolve f_const or the quadratic decomposition.
BuiltTransformation build(const AnyParams& p, const std::optional<Expr>& f,
                          const SampleBox& box);

// ---------------------------------------------------------------------------
// Groupoid operations on the maps themselves
// ---------------------------------------------------------------------------

/// Apply `first`, then `second`. When both carry parameter records of the
/// same usual-group family the composed record is attached (closed-form group
/// law).
PointTransformation compose(const PointTransformation& first, const PointTransformation& second);

/// Closed-form group law for usual-pot, c-usual and gbe records.
std::optional<AnyParams> compose_params(const AnyParams& first, const AnyParams& second);

/// Numeric inverse over (an expansion of) the given source box: bracketed
/// scalar solves for the values, implicit-function-theorem algebra for the
/// derivatives. Throws InversionError when a component cannot be bracketed.
PointTransformation invert(const PointTransformation& T, const SampleBox& source_box);

/// Generic pushforward of f under any transformation: numeric inversion of
/// (T, X) plus the rule f~ = (X_x^2 / T_t) f at the preimage. Derivatives of
/// the result are finite-difference based; builder FRules carry exact ones.
Coefficient pushforward_f(const PointTransformation& T, const Coefficient& f,
                          const SampleBox& box);

/// Max |generic pushforward - closed form| over n image points.
double compare_pushforward(const BuiltTransformation& bt, const PointTransformation& map,
                           const Coefficient& f, const SampleBox& box, int n);

// ---------------------------------------------------------------------------
// Projective parameter handling
// ---------------------------------------------------------------------------

/// Rescales the projective tuple of a p3 / p2-linear / gbe record by s != 0;
/// the transformation is unchanged pointwise (for p3 with gamma != 0 the
/// normalization constant k absorbs the sqrt factor).
AnyParams rescale_projective(const AnyParams& p, double s);

/// Canonical representative: first nonzero entry of (alpha, beta, gamma,
/// delta) scaled to 1.
AnyParams normalize_projective(const AnyParams& p);

}  // namespace pburg
