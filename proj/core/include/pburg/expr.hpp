#pragma once

#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pburg/jets.hpp"
#include "pburg/numbers.hpp"
#include "pburg/sampling.hpp"

namespace pburg {

/// The three admitted symbols. `w` is the dependent variable; it is written
/// `v` or `u` in input depending on the equation family, both parse to `w`.
enum class Var : int { t = 0, x = 1, w = 2 };

enum class ExprKind {
    constant,
    variable,
    sum,       // n-ary
    product,   // n-ary
    quotient,  // binary
    power,     // base, constant exponent
    negate,
    exp_fn,
    ln_fn,
    sqrt_fn,
    abs_fn,
};

/// Immutable symbolic expression tree over {t, x, w} with exact partial
/// differentiation, light simplification and pointwise evaluation. Nodes are
/// shared and never mutated; every operation on Expr is a pure function.
class Expr {
  public:
    Expr();  // the constant 0

    static Expr constant(Number n);
    static Expr integer(std::int64_t n) { return constant(Number::integer(n)); }
    static Expr rational(std::int64_t p, std::int64_t q) { return constant(Number::rational(p, q)); }
    static Expr real(double v) { return constant(Number::real(v)); }
    static Expr variable(Var v);
    static Expr t() { return variable(Var::t); }
    static Expr x() { return variable(Var::x); }
    static Expr w() { return variable(Var::w); }

    static Expr sum(std::vector<Expr> terms);
    static Expr product(std::vector<Expr> factors);
    /// Folds constant/constant (nonzero denominator) into a single constant,
    /// which is how `p/q` literals become exact rationals.
    static Expr quotient(Expr num, Expr den);
    static Expr pow(Expr base, Number exponent);
    /// Folds negation of a constant into the constant.
    static Expr neg(Expr e);
    static Expr exp(Expr e);
    static Expr ln(Expr e);
    static Expr sqrt(Expr e);
    static Expr abs(Expr e);

    ExprKind kind() const;
    const Number& value() const;        // constant nodes
    Var var() const;                    // variable nodes
    const Number& exponent() const;     // power nodes
    const std::vector<Expr>& children() const;

    bool is_constant() const { return kind() == ExprKind::constant; }
    bool is_zero() const { return is_constant() && value().is_zero(); }
    bool is_one() const { return is_constant() && value().is_one(); }

    bool depends_on(Var v) const;
    std::size_t node_count() const;
    bool same(const Expr& other) const;  // structural equality
    std::size_t hash() const;

    std::string str() const;

    friend Expr operator+(const Expr& a, const Expr& b) { return sum({a, b}); }
    friend Expr operator-(const Expr& a, const Expr& b) { return sum({a, neg(b)}); }
    friend Expr operator*(const Expr& a, const Expr& b) { return product({a, b}); }
    friend Expr operator/(const Expr& a, const Expr& b) { return quotient(a, b); }
    Expr operator-() const { return neg(*this); }

    struct Node;

  private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

/// Values bound to variables for evaluation; unbound variables that occur in
/// the expression raise EvalError.
struct Bindings {
    std::optional<double> t, x, w;

    static Bindings at(double t_, double x_) { return {t_, x_, std::nullopt}; }
    static Bindings at(double t_, double x_, double w_) { return {t_, x_, w_}; }
    const std::optional<double>& operator[](Var v) const {
        switch (v) {
            case Var::t: return t;
            case Var::x: return x;
            default: return w;
        }
    }
};

/// Parses the expression grammar (precedence low to high: +/-; */ ;
/// unary -; ^ right-associative with a rational constant exponent; function
/// call; parentheses). Identifiers: t, x, and v or u for the dependent
/// variable. Literals: integer, decimal, p/q.
Expr parse(std::string_view text);

/// Exact symbolic partial derivative. ln|y| differentiates to 1/y (valid off
/// y = 0); abs elsewhere differentiates as y/|y|.
Expr differentiate(const Expr& e, Var v);

double evaluate(const Expr& e, const Bindings& b);

/// Evaluation on second-order (t, x, w)-jets; exact forward-mode derivatives.
D2 evaluate_jet(const Expr& e, const D2& t, const D2& x, const D2& w);

/// Structurally smaller-or-equal tree, semantically equal on the common
/// domain. Guarantees constant folding, 0/1 identities, and collection of
/// like monomials in x with coefficients in t. No domain-changing rewrites
/// (exp(ln(x)) is left alone).
Expr simplify(const Expr& e);

/// Simultaneous substitution of expressions for variables.
Expr substitute(const Expr& e, const std::map<Var, Expr>& subs);

/// Monomial exponents (t, x, w) -> coefficient, for expressions that are
/// polynomial with constant coefficients. Degree/term bounded; nullopt when
/// the expression is not (recognizably) polynomial.
using PolyMap = std::map<std::array<int, 3>, Number>;
std::optional<PolyMap> try_polynomial(const Expr& e);

/// True iff the expression simplifies to the zero constant or vanishes within
/// tol * (1 + local scale) at all sampled points of the box. Probabilistically
/// sound, not a proof. Throws IndeterminateError when more than half of the
/// samples hit evaluation domain errors.
bool probably_zero(const Expr& e, const SampleBox& box, double tol = 1e-10);

/// Some(c) iff every partial derivative with respect to `vars` passes
/// probably_zero, with c the value at the first sample.
std::optional<double> as_constant(const Expr& e, std::initializer_list<Var> vars,
                                  const SampleBox& box, double tol = 1e-10);

}  // namespace pburg
