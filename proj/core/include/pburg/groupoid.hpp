#pragma once

#include <optional>
#include <string>

#include "pburg/equations.hpp"
#include "pburg/transforms.hpp"

namespace pburg {

/// Deterministic sampler of partial second-order jets (w_t is left free and
/// closed on-shell by the verifier). Points keep a margin from the box
/// boundary and respect the exclusion predicate.
struct JetSampler {
    SampleBox box;
    Interval first_order{-2.0, 2.0};   // range of w_x
    Interval second_order{-2.0, 2.0};  // range of w_xx
    int n = 200;
    std::uint64_t seed = 7;

    Jet2 partial_jet(std::uint64_t i) const;
};

/// Transforms a second-order jet by the exact chain-rule formulas
///   w~_x~  = (W_x + W_w w_x) / X_x
///   w~_x~x~ = (W_xx + 2 W_xw w_x + W_ww w_x^2 + W_w w_xx)/X_x^2
///             - X_xx (W_x + W_w w_x)/X_x^3
///   w~_t~  = (W_t + W_w w_t - w~_x~ X_t) / T_t.
/// Throws EvalError at points where T_t X_x W_w degenerates.
Jet2 pushforward_jet(const PointTransformation& T, const Jet2& jet);

/// Central oracle: closes each sampled partial jet on the source equation,
/// pushes it forward, and evaluates the target-family residual with f_tgt at
/// the transformed jet. Pass threshold: tol_base * (1 + max |jet entry|) +
/// 10 * quad_tol. Throws SamplingError when fewer than n/2 jets are
/// admissible.
VerificationReport verify_admissible(const PointTransformation& T, const Coefficient& f_src,
                                     const Coefficient& f_tgt, Family family,
                                     const JetSampler& sampler, double tol_base = 1e-6,
                                     double quad_tol = 1e-10);

/// The determining system for family P evaluated at sampled (t, x, w),
/// together with the rule f~ = X_x^2 f / T_t; pass/fail agrees with
/// verify_admissible on P-family candidates.
VerificationReport check_classifying_equations(const PointTransformation& T,
                                               const Coefficient& f_src, const Coefficient& f_tgt,
                                               const JetSampler& sampler, double tol_base = 1e-6,
                                               double quad_tol = 1e-10);

/// Axis-aligned hull of the image of the box under (T, X, W), shrunk by a
/// small margin; used to classify pushed-forward arbitrary elements.
SampleBox image_box(const PointTransformation& T, const SampleBox& box);

/// Classifies both sides and compares. A mismatch on a verified
/// transformation contradicts the subclass-preservation propositions and is
/// reported as a hard error.
bool check_subclass_preserved(const PointTransformation& T, const Coefficient& f_src,
                              const Coefficient& f_tgt, Family family, const SampleBox& box,
                              bool verified_pass = false);

/// A source-target-transformation triple that passed verification; only the
/// admit() factory constructs these.
class AdmissibleTransformation {
  public:
    const Equation& source() const { return source_; }
    const Equation& target() const { return target_; }
    const PointTransformation& map() const { return map_; }
    const VerificationReport& report() const { return report_; }

    friend std::optional<AdmissibleTransformation> admit(Equation source, Coefficient f_tgt,
                                                         PointTransformation T,
                                                         const JetSampler& sampler,
                                                         double tol_base, double quad_tol);

  private:
    AdmissibleTransformation(Equation source, Equation target, PointTransformation map,
                             VerificationReport report)
        : source_(std::move(source)), target_(std::move(target)), map_(std::move(map)),
          report_(std::move(report)) {}
    Equation source_, target_;
    PointTransformation map_;
    VerificationReport report_;
};

std::optional<AdmissibleTransformation> admit(Equation source, Coefficient f_tgt,
                                              PointTransformation T, const JetSampler& sampler,
                                              double tol_base = 1e-6, double quad_tol = 1e-10);

// ---------------------------------------------------------------------------
// Restricted equivalence decision
// ---------------------------------------------------------------------------

struct EquivalenceBudget {
    int restarts = 16;
    int iterations = 400;
    int sample_points = 40;
};

struct EquivalenceResult {
    enum class Verdict { equivalent, inequivalent, undecided };
    Verdict verdict = Verdict::undecided;
    std::string reason;
    std::optional<AnyParams> witness_params;
    std::optional<VerificationReport> witness_report;
};

/// Soundness contract: "equivalent" always carries a witness whose
/// verification passed; "inequivalent" only via the subclass obstruction.
/// Routes: (a) subclass mismatch, (b) two constants (always equivalent,
/// explicit witness), (c) two polynomial P1 elements via bounded template
/// search over the usual group, (d) caller-supplied candidate, verified.
EquivalenceResult decide_equivalence(const Expr& f1, const Expr& f2, Family family,
                                     const SampleBox& box, const EquivalenceBudget& budget = {},
                                     const std::optional<AnyParams>& candidate = std::nullopt);

}  // namespace pburg
