#include "pburg/serialization.hpp"

#include <algorithm>
#include <set>

#include "pburg/errors.hpp"

namespace pburg {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string f2_kind_name(F2Spec::Kind k) {
    switch (k) {
        case F2Spec::Kind::zero: return "zero";
        case F2Spec::Kind::constant: return "constant";
        case F2Spec::Kind::linear: return "linear";
        case F2Spec::Kind::quadratic: return "quadratic";
        case F2Spec::Kind::cubic: return "cubic";
        case F2Spec::Kind::exponential: return "exponential";
        default: return "custom";
    }
}

json f2_to_json(const F2Spec& f) {
    json j;
    j["kind"] = f2_kind_name(f.kind);
    if (f.kind == F2Spec::Kind::constant) j["value"] = f.value;
    if (f.kind == F2Spec::Kind::exponential) j["a"] = f.value;
    if (f.kind == F2Spec::Kind::custom && f.expr) j["expr"] = f.expr->str();
    return j;
}

F2Spec f2_from_json(const json& j) {
    F2Spec out;
    if (!j.contains("kind")) throw ParamError("F2 document is missing the field: kind");
    std::string kind = lower(j.at("kind").get<std::string>());
    if (kind == "zero")
        out.kind = F2Spec::Kind::zero;
    else if (kind == "constant")
        out.kind = F2Spec::Kind::constant;
    else if (kind == "linear")
        out.kind = F2Spec::Kind::linear;
    else if (kind == "quadratic")
        out.kind = F2Spec::Kind::quadratic;
    else if (kind == "cubic")
        out.kind = F2Spec::Kind::cubic;
    else if (kind == "exponential")
        out.kind = F2Spec::Kind::exponential;
    else if (kind == "custom")
        out.kind = F2Spec::Kind::custom;
    else
        throw ParamError("unknown F2 kind: " + kind);
    if (out.kind == F2Spec::Kind::constant) out.value = j.value("value", 0.0);
    if (out.kind == F2Spec::Kind::exponential) {
        if (!j.contains("a")) throw ParamError("exponential F2 is missing the field: a");
        out.value = j.at("a").get<double>();
    }
    if (out.kind == F2Spec::Kind::custom) {
        if (!j.contains("expr")) throw ParamError("custom F2 is missing the field: expr");
        out.expr = parse(j.at("expr").get<std::string>());
    }
    return out;
}

/// Reads the numeric fields of a record, rejecting unknown keys so typos
/// ("gamm": 1) cannot silently fall back to defaults.
struct FieldReader {
    const json& j;
    std::set<std::string> known{"group"};

    double get(const char* name, double fallback) {
        known.insert(name);
        if (!j.contains(name)) return fallback;
        return j.at(name).get<double>();
    }
    void allow(const char* name) { known.insert(name); }

    void finish(const std::string& group) const {
        std::string unknown;
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!known.count(it.key())) unknown += (unknown.empty() ? "" : ", ") + it.key();
        if (!unknown.empty())
            throw ParamError("unknown fields in " + group + " record: " + unknown);
    }
};

}  // namespace

nlohmann::json to_json(const AnyParams& p) {
    json j;
    j["group"] = group_name(p);
    if (std::holds_alternative<UsualPotParams>(p)) {
        const auto& q = std::get<UsualPotParams>(p);
        j["alpha"] = q.alpha;
        j["beta"] = q.beta;
        j["kappa"] = q.kappa;
        j["mu1"] = q.mu1;
        j["mu0"] = q.mu0;
        j["nu"] = q.nu;
    } else if (std::holds_alternative<P3Params>(p)) {
        const auto& q = std::get<P3Params>(p);
        j["alpha"] = q.alpha;
        j["beta"] = q.beta;
        j["gamma"] = q.gamma;
        j["delta"] = q.delta;
        j["kappa"] = q.kappa;
        j["mu1"] = q.mu1;
        j["mu0"] = q.mu0;
        j["k"] = q.k;
        j["F2"] = f2_to_json(q.f2);
    } else if (std::holds_alternative<P2Params>(p)) {
        const auto& q = std::get<P2Params>(p);
        j["c0"] = q.c0;
        j["c1"] = q.c1;
        j["c2"] = q.c2;
        j["c3"] = q.c3;
        j["c4"] = q.c4;
        j["c5"] = q.c5;
        j["c6"] = q.c6;
        j["t0"] = q.t0;
    } else if (std::holds_alternative<P2LinearParams>(p)) {
        const auto& q = std::get<P2LinearParams>(p);
        j["alpha"] = q.alpha;
        j["beta"] = q.beta;
        j["gamma"] = q.gamma;
        j["delta"] = q.delta;
        j["kappa"] = q.kappa;
        j["nu"] = q.nu;
        j["c4"] = q.c4;
        j["c5"] = q.c5;
        j["t0"] = q.t0;
    } else if (std::holds_alternative<CUsualParams>(p)) {
        const auto& q = std::get<CUsualParams>(p);
        j["alpha"] = q.alpha;
        j["beta"] = q.beta;
        j["kappa"] = q.kappa;
        j["mu1"] = q.mu1;
        j["mu0"] = q.mu0;
    } else if (std::holds_alternative<C2Params>(p)) {
        const auto& q = std::get<C2Params>(p);
        j["c0"] = q.c0;
        j["c1"] = q.c1;
        j["c2"] = q.c2;
        j["c3"] = q.c3;
        j["c4"] = q.c4;
        j["c5"] = q.c5;
        j["t0"] = q.t0;
    } else {
        const auto& q = std::get<GbeParams>(p);
        j["alpha"] = q.alpha;
        j["beta"] = q.beta;
        j["gamma"] = q.gamma;
        j["delta"] = q.delta;
        j["kappa"] = q.kappa;
        j["mu1"] = q.mu1;
        j["mu0"] = q.mu0;
    }
    return j;
}

AnyParams params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParamError("parameter document must be a JSON object");
    if (!j.contains("group")) throw ParamError("parameter document is missing the field: group");
    std::string g = lower(j.at("group").get<std::string>());
    FieldReader r{j};
    if (g == "usual-pot") {
        UsualPotParams p;
        p.alpha = r.get("alpha", 1);
        p.beta = r.get("beta", 0);
        p.kappa = r.get("kappa", 1);
        p.mu1 = r.get("mu1", 0);
        p.mu0 = r.get("mu0", 0);
        p.nu = r.get("nu", 0);
        r.finish(g);
        return p;
    }
    if (g == "p3") {
        P3Params p;
        p.alpha = r.get("alpha", 1);
        p.beta = r.get("beta", 0);
        p.gamma = r.get("gamma", 0);
        p.delta = r.get("delta", 1);
        p.kappa = r.get("kappa", 1);
        p.mu1 = r.get("mu1", 0);
        p.mu0 = r.get("mu0", 0);
        p.k = r.get("k", 1);
        r.allow("F2");
        if (j.contains("F2")) p.f2 = f2_from_json(j.at("F2"));
        r.finish(g);
        return p;
    }
    if (g == "p2") {
        P2Params p;
        p.c0 = r.get("c0", 1);
        p.c1 = r.get("c1", 0);
        p.c2 = r.get("c2", 1);
        p.c3 = r.get("c3", 0);
        p.c4 = r.get("c4", 0);
        p.c5 = r.get("c5", 0);
        p.c6 = r.get("c6", 0);
        p.t0 = r.get("t0", 0);
        r.finish(g);
        return p;
    }
    if (g == "p2-linear") {
        P2LinearParams p;
        p.alpha = r.get("alpha", 1);
        p.beta = r.get("beta", 0);
        p.gamma = r.get("gamma", 0);
        p.delta = r.get("delta", 1);
        p.kappa = r.get("kappa", 1);
        p.nu = r.get("nu", 0);
        p.c4 = r.get("c4", 0);
        p.c5 = r.get("c5", 0);
        p.t0 = r.get("t0", 0);
        r.finish(g);
        return p;
    }
    if (g == "c-usual") {
        CUsualParams p;
        p.alpha = r.get("alpha", 1);
        p.beta = r.get("beta", 0);
        p.kappa = r.get("kappa", 1);
        p.mu1 = r.get("mu1", 0);
        p.mu0 = r.get("mu0", 0);
        r.finish(g);
        return p;
    }
    if (g == "c2") {
        C2Params p;
        p.c0 = r.get("c0", 1);
        p.c1 = r.get("c1", 0);
        p.c2 = r.get("c2", 1);
        p.c3 = r.get("c3", 0);
        p.c4 = r.get("c4", 0);
        p.c5 = r.get("c5", 0);
        p.t0 = r.get("t0", 0);
        r.finish(g);
        return p;
    }
    if (g == "gbe") {
        GbeParams p;
        p.alpha = r.get("alpha", 1);
        p.beta = r.get("beta", 0);
        p.gamma = r.get("gamma", 0);
        p.delta = r.get("delta", 1);
        p.kappa = r.get("kappa", 1);
        p.mu1 = r.get("mu1", 0);
        p.mu0 = r.get("mu0", 0);
        r.finish(g);
        return p;
    }
    throw ParamError("unknown group: " + g);
}

nlohmann::json to_json(const Jet2& jet) {
    json j;
    j["t"] = jet.t;
    j["x"] = jet.x;
    j["w"] = jet.w;
    j["w_t"] = jet.w_t;
    j["w_x"] = jet.w_x;
    j["w_xx"] = jet.w_xx;
    if (jet.w_tx) j["w_tx"] = *jet.w_tx;
    if (jet.w_xxx) j["w_xxx"] = *jet.w_xxx;
    return j;
}

nlohmann::json to_json(const VerificationReport& rep) {
    json j;
    j["n"] = rep.samples;
    j["max_residual"] = rep.max_abs;
    j["mean_residual"] = rep.mean_abs;
    j["tolerance"] = rep.tolerance;
    j["verdict"] = rep.pass ? "pass" : "fail";
    j["worst"] = {{"jet", to_json(rep.worst_jet)}, {"value", rep.worst_value}};
    if (!rep.note.empty()) j["note"] = rep.note;
    return j;
}

nlohmann::json to_json(const EquivalenceResult& res) {
    json j;
    switch (res.verdict) {
        case EquivalenceResult::Verdict::equivalent: j["verdict"] = "equivalent"; break;
        case EquivalenceResult::Verdict::inequivalent: j["verdict"] = "inequivalent"; break;
        default: j["verdict"] = "undecided"; break;
    }
    j["reason"] = res.reason;
    if (res.witness_params) j["witness"] = to_json(*res.witness_params);
    if (res.witness_report) j["witness_report"] = to_json(*res.witness_report);
    return j;
}

Family family_from_string(const std::string& s) {
    std::string l = lower(s);
    if (l == "p") return Family::P;
    if (l == "c") return Family::C;
    if (l == "l") return Family::L;
    throw ParamError("unknown family: " + s + " (expected P, C or L)");
}

}  // namespace pburg
