#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "pburg/expr.hpp"
#include "pburg/jets.hpp"

namespace pburg {

/// Adaptive Gauss–Kronrod (7–15) quadrature with absolute tolerance.
/// Throws QuadratureError on non-finite integrand values (naming the point)
/// or failure to converge.
double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol);

/// A fixed antiderivative A of a function g of t with A(t0) = 0 exactly.
/// The backend is symbolic when g is polynomial in t or a sum of
/// polynomial-times-exp(affine) terms, and cached adaptive quadrature
/// otherwise. The derivative is the integrand itself (fundamental theorem),
/// never a numerical differentiation of the quadrature.
///
/// Copies share the evaluation cache; concurrent evaluation is linearizable.
class Antiderivative {
  public:
    static Antiderivative from_expr(const Expr& integrand, double t0 = 0.0, double tol = 1e-10);

    /// Numeric-only backend for integrands that are not expressions (for
    /// example functions built from other antiderivatives). The Jet1 must
    /// carry the integrand's value and first derivative.
    static Antiderivative from_function(CurveFn integrand, double t0 = 0.0, double tol = 1e-10);

    double operator()(double t) const { return value(t); }
    double value(double t) const;

    /// (A(t), g(t), g'(t))
    Jet1 jet(double t) const;

    CurveFn as_curve() const {
        Antiderivative self = *this;
        return [self](double t) { return self.jet(t); };
    }

    double base_point() const;
    double tolerance() const;
    bool symbolic() const;
    const std::optional<Expr>& symbolic_form() const;
    const std::optional<Expr>& integrand() const;

  private:
    struct Impl;
    explicit Antiderivative(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<Impl> impl_;
};

/// t -> exp(c * A(t)) for a fixed antiderivative A; strictly positive, equal
/// to 1 at the base point, with the exact derivative rule (e^{cA})' = c g e^{cA}.
class ExpAntiderivative {
  public:
    ExpAntiderivative(const Expr& integrand, double c, double t0 = 0.0, double tol = 1e-10)
        : inner_(Antiderivative::from_expr(integrand, t0, tol)), c_(c) {}
    ExpAntiderivative(Antiderivative inner, double c) : inner_(std::move(inner)), c_(c) {}

    double operator()(double t) const { return std::exp(c_ * inner_.value(t)); }

    Jet1 jet(double t) const {
        Jet1 a = inner_.jet(t);  // (A, g, g')
        double v = std::exp(c_ * a.v);
        double d1 = c_ * a.d1 * v;
        double d2 = c_ * a.d2 * v + c_ * a.d1 * d1;
        return {v, d1, d2};
    }

    CurveFn as_curve() const {
        ExpAntiderivative self = *this;
        return [self](double t) { return self.jet(t); };
    }

    const Antiderivative& inner() const { return inner_; }
    double factor() const { return c_; }

  private:
    Antiderivative inner_;
    double c_;
};

}  // namespace pburg
