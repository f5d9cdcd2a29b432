#pragma once

#include <optional>

#include "pburg/equations.hpp"
#include "pburg/groupoid.hpp"
#include "pburg/transforms.hpp"

namespace pburg {

/// A potentialization record: the source equation, the multiplier and hat
/// transformation (for family L), and the sampled-jet verification of the
/// defining identity.
struct PotentialLink {
    Family source_family;
    Expr f;
    std::optional<ExpAntiderivative> lambda;  // family L: e^{int f_xx dt}
    std::optional<PointTransformation> hat;   // family L: (t^, x^, v^)
    std::optional<Coefficient> f_hat;         // family L: f^ = 2 lambda f as a function of (t^, x^)
    VerificationReport report;
};

/// C_f -> P_f via u = v_x: checks D_x(residual_P) = residual_C under the jet
/// identification (u, u_t, u_x, u_xx) = (v_x, v_tx, v_xx, v_xxx), off-shell at
/// third-order jets.
PotentialLink potentialize_C(const Expr& f, const SampleBox& box, int n);

/// L_f (f_xxx = 0) -> P_{f^}: builds lambda = e^{int f_xx dt}, the hat map
/// t^ = (1/2) int lambda dt, x^ = lambda x + int f1 lambda dt, v^ = v, and
/// verifies the off-shell conformal identity
///   residual_P(f^, hat-pushforward) = (2/lambda) residual_intermediate,
/// the rule f^ = 2 lambda f at transformed coordinates, and the lambda
/// conserved-current identity.
PotentialLink potentialize_L(const Expr& f, const SampleBox& box, double t0, int n);

/// Residual of the intermediate potential equation of L_f:
///   v_t + v_x^2/(2 lambda) + f v_xx - f_x v_x.
double residual_intermediate(const Coefficient& f, const Jet1& lambda_jet, const Jet2& jet);

/// Backward heat residual w_t + f w_xx.
double residual_heat(double f_const, const Jet2& jet);

struct Linearization {
    PointTransformation map;  // (t, x, v) -> (t, x, e^{v/f})
    double f_const;
    VerificationReport report;
};

/// Constant-f P_f to the backward heat equation via v~ = e^{v/f}; verifies
/// the off-shell identity residual_heat(v~) = (v~/f) residual_P(v) at n jets.
Linearization linearize_p3(double f_const, const SampleBox& box, int n);

/// Commutation of the potentialization triangle: pushing a third-order P-jet
/// to a C-jet (u = v_x) and applying the c-usual map with the same
/// (alpha, beta, kappa, mu1, mu0) agrees with applying the usual-pot map and
/// then differentiating.
VerificationReport potentialization_triangle(const Expr& f, const UsualPotParams& p,
                                             const SampleBox& box, int n);

}  // namespace pburg
