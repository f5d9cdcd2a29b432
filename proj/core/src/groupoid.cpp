#include "pburg/groupoid.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pburg/errors.hpp"

namespace pburg {

Jet2 JetSampler::partial_jet(std::uint64_t i) const {
    auto p = box.point(i);
    SplitMix64 rng = SplitMix64::substream(seed, i);
    Jet2 j;
    j.t = p[0];
    j.x = p[1];
    j.w = p[2];
    j.w_x = rng.uniform(first_order.lo, first_order.hi);
    j.w_xx = rng.uniform(second_order.lo, second_order.hi);
    j.w_t = 0.0;
    return j;
}

Jet2 pushforward_jet(const PointTransformation& T, const Jet2& jet) {
    auto J = T.jets_at(jet.t, jet.x, jet.w);
    const double Tt = J.T.g[D2::T];
    const double Xt = J.X.g[D2::T], Xx = J.X.g[D2::X], Xxx = J.X.h[D2::XX];
    const double Wt = J.W.g[D2::T], Wx = J.W.g[D2::X], Ww = J.W.g[D2::W];
    const double Wxx = J.W.h[D2::XX], Wxw = J.W.h[D2::XW], Www = J.W.h[D2::WW];
    if (std::fabs(Tt * Xx * Ww) < 1e-12)
        throw EvalError("degenerate jet pushforward (T_t X_x W_w ~ 0)", T.group);

    const double vx = jet.w_x, vxx = jet.w_xx, vt = jet.w_t;
    Jet2 out;
    out.t = J.T.v;
    out.x = J.X.v;
    out.w = J.W.v;
    out.w_x = (Wx + Ww * vx) / Xx;
    out.w_xx = (Wxx + 2.0 * Wxw * vx + Www * vx * vx + Ww * vxx) / (Xx * Xx) -
               (Xxx * Wx + Xxx * Ww * vx) / (Xx * Xx * Xx);
    out.w_t = (Wt + Ww * vt - out.w_x * Xt) / Tt;
    return out;
}

namespace {

double jet_magnitude(const Jet2& j) {
    double m = 0.0;
    for (double v : {j.t, j.x, j.w, j.w_t, j.w_x, j.w_xx}) m = std::max(m, std::fabs(v));
    return m;
}

struct SampleLoop {
    int accepted = 0;
    VerificationReport rep;
    double magnitude = 0.0;
    double sum = 0.0;

    void record(const Jet2& jet, double value) {
        ++accepted;
        sum += std::fabs(value);
        if (std::fabs(value) >= rep.max_abs) {
            rep.max_abs = std::fabs(value);
            rep.worst_jet = jet;
            rep.worst_value = value;
        }
    }

    VerificationReport finish(int n, double tol_base, double quad_tol) {
        rep.samples = accepted;
        rep.mean_abs = accepted ? sum / accepted : 0.0;
        rep.tolerance = tol_base * (1.0 + magnitude) + 10.0 * quad_tol;
        rep.pass = accepted >= n && rep.max_abs <= rep.tolerance;
        return rep;
    }
};

}  // namespace

VerificationReport verify_admissible(const PointTransformation& T, const Coefficient& f_src,
                                     const Coefficient& f_tgt, Family family,
                                     const JetSampler& sampler, double tol_base,
                                     double quad_tol) {
    sampler.box.check();
    SampleLoop loop;
    const std::uint64_t max_attempts = 60ull * (std::uint64_t)sampler.n + 400;
    std::uint64_t idx = 0;
    for (; loop.accepted < sampler.n && idx < max_attempts; ++idx) {
        Jet2 jet = sampler.partial_jet(idx);
        if (!sampler.box.admitted({jet.t, jet.x, jet.w})) continue;
        if (!T.in_domain(jet.t, jet.x, jet.w)) continue;
        try {
            auto J = T.jets_at(jet.t, jet.x, jet.w);
            if (std::fabs(J.T.g[D2::T] * J.X.g[D2::X] * J.W.g[D2::W]) < 1e-8) continue;
            jet.w_t = solve_wt(family, f_src, jet);
            Jet2 pushed = pushforward_jet(T, jet);
            double r = residual(family, f_tgt, pushed);
            loop.magnitude = std::max(loop.magnitude, jet_magnitude(pushed));
            loop.record(jet, r);
        } catch (const Error&) {
            continue;
        }
    }
    if (loop.accepted < std::max(1, sampler.n / 2))
        throw SamplingError("verify_admissible: only " + std::to_string(loop.accepted) + " of " +
                            std::to_string(sampler.n) + " sampled jets were admissible");
    return loop.finish(sampler.n, tol_base, quad_tol);
}

VerificationReport check_classifying_equations(const PointTransformation& T,
                                               const Coefficient& f_src, const Coefficient& f_tgt,
                                               const JetSampler& sampler, double tol_base,
                                               double quad_tol) {
    sampler.box.check();
    SampleLoop loop;
    const std::uint64_t max_attempts = 60ull * (std::uint64_t)sampler.n + 400;
    for (std::uint64_t idx = 0; loop.accepted < sampler.n && idx < max_attempts; ++idx) {
        Jet2 jet = sampler.partial_jet(idx);
        if (!sampler.box.admitted({jet.t, jet.x, jet.w})) continue;
        if (!T.in_domain(jet.t, jet.x, jet.w)) continue;
        try {
            auto J = T.jets_at(jet.t, jet.x, jet.w);
            const double Tt = J.T.g[D2::T];
            const double Xt = J.X.g[D2::T], Xx = J.X.g[D2::X], Xxx = J.X.h[D2::XX];
            const double Vt = J.W.g[D2::T], Vx = J.W.g[D2::X], Vv = J.W.g[D2::W];
            const double Vxx = J.W.h[D2::XX], Vxv = J.W.h[D2::XW], Vvv = J.W.h[D2::WW];
            if (std::fabs(Tt * Xx * Vv) < 1e-8) continue;
            const double f = f_src(jet.t, jet.x);
            const double R = Xx * Xx / Tt;
            const double S = Xt * Xx / Tt;
            const double Q = f * Xx * Xxx / Tt;

            double e2 = Vv * Vv - R * Vv + f * R * Vvv;
            double e1 = 2.0 * Vx * Vv - S * Vv + 2.0 * f * R * Vxv - Q * Vv;
            double e0 = Vt * R - S * Vx + Vx * Vx + f * R * Vxx - Q * Vx;
            double e3 = f_tgt(J.T.v, J.X.v) - R * f;

            double scale = std::max({std::fabs(Vv * Vv), std::fabs(R * Vv), std::fabs(Vt * R),
                                     std::fabs(Vx * Vx), std::fabs(f * R * Vxx), std::fabs(R * f),
                                     std::fabs(S * Vv)});
            loop.magnitude = std::max(loop.magnitude, scale);
            double worst = std::max({std::fabs(e2), std::fabs(e1), std::fabs(e0), std::fabs(e3)});
            Jet2 probe = jet;
            loop.record(probe, worst);
        } catch (const Error&) {
            continue;
        }
    }
    if (loop.accepted < std::max(1, sampler.n / 2))
        throw SamplingError("check_classifying_equations: domain starvation");
    return loop.finish(sampler.n, tol_base, quad_tol);
}

SampleBox image_box(const PointTransformation& T, const SampleBox& box) {
    double tlo = 0, thi = 0, xlo = 0, xhi = 0, wlo = 0, whi = 0;
    bool first = true;
    int got = 0;
    for (std::uint64_t i = 0; got < 120 && i < 4000; ++i) {
        auto p = box.point(i);
        if (!box.admitted(p) || !T.in_domain(p[0], p[1], p[2])) continue;
        double tt, xx, ww;
        try {
            tt = T.t_value(p[0]);
            xx = T.x_value(p[0], p[1]);
            ww = T.w_value(p[0], p[1], p[2]);
        } catch (const Error&) {
            continue;
        }
        ++got;
        if (first) {
            tlo = thi = tt;
            xlo = xhi = xx;
            wlo = whi = ww;
            first = false;
        } else {
            tlo = std::min(tlo, tt);
            thi = std::max(thi, tt);
            xlo = std::min(xlo, xx);
            xhi = std::max(xhi, xx);
            wlo = std::min(wlo, ww);
            whi = std::max(whi, ww);
        }
    }
    if (got < 20) throw SamplingError("image_box: transformation domain too thin over the box");
    auto shrink = [](double lo, double hi) {
        double m = 0.05 * (hi - lo) + 1e-9;
        return Interval{lo + m, hi - m};
    };
    SampleBox out = box;
    out.t = shrink(tlo, thi);
    out.x = shrink(xlo, xhi);
    out.w = shrink(wlo, whi);
    out.excluded = nullptr;
    return out;
}

bool check_subclass_preserved(const PointTransformation& T, const Coefficient& f_src,
                              const Coefficient& f_tgt, Family family, const SampleBox& box,
                              bool verified_pass) {
    Subclass src = classify(family, f_src, box);
    Subclass tgt = classify(family, f_tgt, image_box(T, box));
    if (src == tgt) return true;
    if (verified_pass)
        throw Error("internal contradiction: a verified transformation changed the subclass " +
                    to_string(src) + " -> " + to_string(tgt));
    return false;
}

std::optional<AdmissibleTransformation> admit(Equation source, Coefficient f_tgt,
                                              PointTransformation T, const JetSampler& sampler,
                                              double tol_base, double quad_tol) {
    VerificationReport rep =
        verify_admissible(T, source.f, f_tgt, source.family, sampler, tol_base, quad_tol);
    if (!rep.pass) return std::nullopt;
    Equation target = make_equation(source.family, f_tgt, image_box(T, source.box));
    return AdmissibleTransformation(std::move(source), std::move(target), std::move(T),
                                    std::move(rep));
}

// ---------------------------------------------------------------------------
// Equivalence decision
// ---------------------------------------------------------------------------

namespace {

/// Nelder-Mead on R^n; small, deterministic, no external state.
double nelder_mead(std::vector<double>& x, const std::function<double(const std::vector<double>&)>& f,
                   int max_iter) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> simplex(n + 1, x);
    std::vector<double> val(n + 1);
    for (std::size_t i = 0; i < n; ++i)
        simplex[i + 1][i] += (simplex[i + 1][i] != 0.0 ? 0.15 * simplex[i + 1][i] : 0.2);
    for (std::size_t i = 0; i <= n; ++i) val[i] = f(simplex[i]);

    for (int it = 0; it < max_iter; ++it) {
        std::size_t best = 0, worst = 0;
        for (std::size_t i = 1; i <= n; ++i) {
            if (val[i] < val[best]) best = i;
            if (val[i] > val[worst]) worst = i;
        }
        std::size_t second = best;
        for (std::size_t i = 0; i <= n; ++i)
            if (i != worst && val[i] > val[second]) second = i;
        if (val[best] < 1e-22 || std::fabs(val[worst] - val[best]) < 1e-24) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i)
            if (i != worst)
                for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / n;

        auto blend = [&](double c) {
            std::vector<double> p(n);
            for (std::size_t k = 0; k < n; ++k)
                p[k] = centroid[k] + c * (simplex[worst][k] - centroid[k]);
            return p;
        };
        std::vector<double> refl = blend(-1.0);
        double fr = f(refl);
        if (fr < val[best]) {
            std::vector<double> exp_ = blend(-2.0);
            double fe = f(exp_);
            simplex[worst] = fe < fr ? exp_ : refl;
            val[worst] = std::min(fe, fr);
        } else if (fr < val[second]) {
            simplex[worst] = refl;
            val[worst] = fr;
        } else {
            std::vector<double> con = blend(0.5);
            double fc = f(con);
            if (fc < val[worst]) {
                simplex[worst] = con;
                val[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k)
                        simplex[i][k] = 0.5 * (simplex[i][k] + simplex[best][k]);
                    val[i] = f(simplex[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (val[i] < val[best]) best = i;
    x = simplex[best];
    return val[best];
}

EquivalenceResult verified_witness(const Expr& f1, const Expr& f2, Family family,
                                   const SampleBox& box, const AnyParams& params,
                                   const std::string& route) {
    EquivalenceResult out;
    try {
        BuiltTransformation bt = build(params, f1, box);
        JetSampler sampler;
        sampler.box = box;
        sampler.n = 200;
        sampler.seed = box.seed ^ 0x5EED;
        VerificationReport rep =
            verify_admissible(bt.map, Coefficient(f1), Coefficient(f2), family, sampler);
        if (rep.pass) {
            out.verdict = EquivalenceResult::Verdict::equivalent;
            out.reason = route;
            out.witness_params = params;
            out.witness_report = rep;
        } else {
            out.verdict = EquivalenceResult::Verdict::undecided;
            out.reason = route + ": witness failed verification (max residual " +
                         std::to_string(rep.max_abs) + ")";
            out.witness_report = rep;
        }
    } catch (const Error& e) {
        out.verdict = EquivalenceResult::Verdict::undecided;
        out.reason = route + ": " + e.what();
    }
    return out;
}

}  // namespace

EquivalenceResult decide_equivalence(const Expr& f1, const Expr& f2, Family family,
                                     const SampleBox& box, const EquivalenceBudget& budget,
                                     const std::optional<AnyParams>& candidate) {
    if (family == Family::L)
        return {EquivalenceResult::Verdict::undecided,
                "family L carries no subclass obstruction here; supply a candidate", {}, {}};

    Coefficient c1(f1), c2(f2);
    Subclass s1 = classify(family, c1, box);
    Subclass s2 = classify(family, c2, box);
    if (s1 != s2)
        return {EquivalenceResult::Verdict::inequivalent,
                "subclass obstruction: " + to_string(s1) + " vs " + to_string(s2) +
                    " (no point transformations between different subclasses)",
                {},
                {}};

    if (candidate) return verified_witness(f1, f2, family, box, *candidate, "supplied candidate");

    if (family == Family::P && s1 == Subclass::P3) {
        double a = *as_constant(f1, {Var::t, Var::x}, box);
        double b = *as_constant(f2, {Var::t, Var::x}, box);
        P3Params p;
        p.alpha = a / b;
        p.beta = 0;
        p.gamma = 0;
        p.delta = 1;
        p.kappa = 1;
        p.k = 1;
        p.f2.kind = F2Spec::Kind::zero;
        // f~ = kappa^2 f / (alpha delta - beta gamma) = a / (a/b) = b
        return verified_witness(f1, f2, family, box, AnyParams{p}, "constant-f orbit");
    }

    if (family == Family::P && s1 == Subclass::P1) {
        auto p1 = try_polynomial(f1);
        auto p2 = try_polynomial(f2);
        if (p1 && p2) {
            // template: f2(alpha t + beta, kappa(x + mu1 t + mu0)) = (kappa^2/alpha) f1(t, x)
            std::vector<std::array<double, 2>> pts;
            for (std::uint64_t i = 0; (int)pts.size() < budget.sample_points; ++i) {
                auto p = box.point(i);
                if (box.admitted(p)) pts.push_back({p[0], p[1]});
            }
            auto objective = [&](const std::vector<double>& q) {
                double al = q[0], be = q[1], ka = q[2], m1 = q[3], m0 = q[4];
                if (std::fabs(al) < 1e-3 || std::fabs(ka) < 1e-3) return 1e9;
                double scale = ka * ka / al;  // normalizing by the f-rule scale
                double sse = 0.0;             // keeps kappa -> 0 collapse unrewarded
                for (auto& pt : pts) {
                    double tt = al * pt[0] + be;
                    double xx = ka * (pt[1] + m1 * pt[0] + m0);
                    double lhs, rhs;
                    try {
                        lhs = evaluate(f2, Bindings{tt, xx, std::nullopt});
                        rhs = scale * evaluate(f1, Bindings{pt[0], pt[1], std::nullopt});
                    } catch (const Error&) {
                        return 1e9;
                    }
                    double d = (lhs - rhs) / scale;
                    sse += d * d;
                }
                return sse;
            };
            SplitMix64 rng(box.seed ^ 0x7E117A7E);
            double best = 1e30;
            std::vector<double> best_q;
            for (int r = 0; r < budget.restarts; ++r) {
                std::vector<double> q = {
                    (rng.uniform01() < 0.5 ? 1 : -1) * std::exp(rng.uniform(-1.2, 1.2)),
                    rng.uniform(-1.5, 1.5),
                    (rng.uniform01() < 0.5 ? 1 : -1) * std::exp(rng.uniform(-1.2, 1.2)),
                    rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
                if (r == 0) q = {1, 0, 1, 0, 0};  // identity-neighborhood start
                double v = nelder_mead(q, objective, budget.iterations);
                if (v < best) {
                    best = v;
                    best_q = q;
                }
                if (best < 1e-20) break;
            }
            if (best < 1e-14) {
                UsualPotParams p;
                p.alpha = best_q[0];
                p.beta = best_q[1];
                p.kappa = best_q[2];
                p.mu1 = best_q[3];
                p.mu0 = best_q[4];
                p.nu = 0;
                return verified_witness(f1, f2, family, box, AnyParams{p}, "template search");
            }
        }
        return {EquivalenceResult::Verdict::undecided,
                "template search exhausted its budget without a verified witness",
                {},
                {}};
    }

    return {EquivalenceResult::Verdict::undecided,
            "no decision procedure for subclass " + to_string(s1) +
                " without a candidate transformation",
            {},
            {}};
}

}  // namespace pburg
