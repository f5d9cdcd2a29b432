// pburg: equivalence transformations of generalized (potential) Burgers
// equations -- classification, group builders, admissibility verification,
// equivalence decision, potentialization and linearization, with JSON reports.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pburg/errors.hpp"
#include "pburg/maps.hpp"
#include "pburg/serialization.hpp"

using nlohmann::json;
using namespace pburg;

namespace {

struct CommonOpts {
    std::pair<double, double> box_t{0.1, 0.9};
    std::pair<double, double> box_x{0.5, 1.5};
    std::pair<double, double> box_w{-1.0, 1.0};
    int samples = 200;
    std::uint64_t seed = 12345;
    double tol = 1e-6;
    double quad_tol = 1e-10;
    std::string out;

    SampleBox box() const {
        SampleBox b;
        b.t = {box_t.first, box_t.second};
        b.x = {box_x.first, box_x.second};
        b.w = {box_w.first, box_w.second};
        b.n = 50;
        b.seed = seed;
        return b;
    }

    JetSampler sampler() const {
        JetSampler s;
        s.box = box();
        s.n = samples;
        s.seed = seed ^ 0xA5A5;
        return s;
    }
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--box-t", o.box_t, "t interval of the working box")->expected(1);
    cmd->add_option("--box-x", o.box_x, "x interval of the working box")->expected(1);
    cmd->add_option("--box-w", o.box_w, "w interval of the working box")->expected(1);
    cmd->add_option("--samples", o.samples, "number of sampled jets");
    cmd->add_option("--seed", o.seed, "sampling seed");
    cmd->add_option("--tol", o.tol, "base verification tolerance");
    cmd->add_option("--quad-tol", o.quad_tol, "quadrature absolute tolerance");
    cmd->add_option("--out", o.out, "also write the JSON report to this file");
}

std::string timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

int emit(json doc, const CommonOpts& o, int code) {
    doc["schema"] = "pburg/1";
    doc["seed"] = o.seed;
    doc["timestamp"] = timestamp_now();
    std::string text = doc.dump(2);
    std::cout << text << "\n";
    if (!o.out.empty()) {
        std::ofstream f(o.out);
        f << text << "\n";
    }
    return code;
}

/// --transform and --params take inline JSON or @file.
json load_json_arg(const std::string& arg) {
    if (!arg.empty() && arg[0] == '@') {
        std::ifstream f(arg.substr(1));
        if (!f) throw ParamError("cannot open parameter file: " + arg.substr(1));
        return json::parse(f);
    }
    return json::parse(arg);
}

AnyParams resolve_params(const std::string& group_flag, const std::string& params_arg) {
    json j = params_arg.empty() ? json::object() : load_json_arg(params_arg);
    if (!j.contains("group")) {
        if (group_flag.empty())
            throw ParamError("no group given: pass --group or a \"group\" field in --params");
        j["group"] = group_flag;
    } else if (!group_flag.empty() && j.at("group").get<std::string>() != group_flag) {
        throw ParamError("--group disagrees with the \"group\" field of --params");
    }
    return params_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"equivalence transformations of generalized potential Burgers equations"};
    app.require_subcommand(1);

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "subclass of an arbitrary element");
    CommonOpts classify_o;
    std::string classify_family = "P", classify_f;
    classify_cmd->add_option("--family", classify_family, "equation family (P, C, L)");
    classify_cmd->add_option("--f", classify_f, "arbitrary element f(t, x)")->required();
    add_common(classify_cmd, classify_o);

    // build
    auto* build_cmd = app.add_subcommand("build", "construct an equivalence transformation");
    CommonOpts build_o;
    std::string build_group, build_params, build_f;
    build_cmd->add_option("--group", build_group,
                          "usual-pot | p3 | p2 | p2-linear | c-usual | c2 | gbe");
    build_cmd->add_option("--params", build_params, "parameter record (inline JSON or @file)");
    build_cmd->add_option("--f", build_f, "arbitrary element (required for p3/p2/p2-linear/c2)");
    add_common(build_cmd, build_o);

    // apply
    auto* apply_cmd = app.add_subcommand("apply", "push the arbitrary element forward");
    CommonOpts apply_o;
    std::string apply_transform, apply_f;
    apply_cmd->add_option("--transform", apply_transform, "parameter record (JSON or @file)")
        ->required();
    apply_cmd->add_option("--f", apply_f, "arbitrary element f(t, x)")->required();
    add_common(apply_cmd, apply_o);

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "admissibility of a transformation");
    CommonOpts verify_o;
    std::string verify_transform, verify_f, verify_f_target, verify_family = "P";
    verify_cmd->add_option("--transform", verify_transform, "parameter record (JSON or @file)")
        ->required();
    verify_cmd->add_option("--f", verify_f, "source arbitrary element")->required();
    verify_cmd->add_option("--f-target", verify_f_target,
                           "target arbitrary element (default: the builder's f-rule)");
    verify_cmd->add_option("--family", verify_family, "equation family (P, C, L)");
    add_common(verify_cmd, verify_o);

    // equivalent
    auto* equiv_cmd = app.add_subcommand("equivalent", "decide equivalence of two elements");
    CommonOpts equiv_o;
    std::string equiv_family = "P", equiv_f1, equiv_f2, equiv_candidate;
    equiv_cmd->add_option("--family", equiv_family, "equation family (P or C)");
    equiv_cmd->add_option("--f1", equiv_f1, "first arbitrary element")->required();
    equiv_cmd->add_option("--f2", equiv_f2, "second arbitrary element")->required();
    equiv_cmd->add_option("--candidate", equiv_candidate,
                          "candidate transformation to verify (JSON or @file)");
    add_common(equiv_cmd, equiv_o);

    // potentialize
    auto* pot_cmd = app.add_subcommand("potentialize", "inter-class potentialization");
    CommonOpts pot_o;
    std::string pot_family, pot_f;
    double pot_t0 = 0.0;
    pot_cmd->add_option("--family", pot_family, "C or L")->required();
    pot_cmd->add_option("--f", pot_f, "arbitrary element")->required();
    pot_cmd->add_option("--t0", pot_t0, "base point of the fixed antiderivatives");
    add_common(pot_cmd, pot_o);

    // linearize
    auto* lin_cmd = app.add_subcommand("linearize", "constant-f linearization to backward heat");
    CommonOpts lin_o;
    std::string lin_f;
    lin_cmd->add_option("--f", lin_f, "constant arbitrary element")->required();
    add_common(lin_cmd, lin_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (classify_cmd->parsed()) {
            json doc;
            doc["subcommand"] = "classify";
            doc["inputs"] = {{"family", classify_family}, {"f", classify_f}};
            Family fam = family_from_string(classify_family);
            Subclass s = classify(fam, Coefficient(parse(classify_f)), classify_o.box());
            doc["result"] = {{"subclass", to_string(s)}};
            return emit(doc, classify_o, 0);
        }

        if (build_cmd->parsed()) {
            json doc;
            doc["subcommand"] = "build";
            AnyParams params = resolve_params(build_group, build_params);
            std::optional<Expr> f;
            if (!build_f.empty()) f = parse(build_f);
            doc["inputs"] = {{"group", group_name(params)}, {"f", build_f}};
            BuiltTransformation bt = build(params, f, build_o.box());
            json result;
            result["transform"] = to_json(params);
            result["f_scale"] = bt.frule.scale;
            if (f) {
                if (auto sym = bt.frule.pushforward_expr(*f)) result["f_target"] = sym->str();
            }
            // sampled nondegeneracy over the box
            SampleBox box = build_o.box();
            bool nondeg = true;
            int got = 0;
            for (std::uint64_t i = 0; got < 50 && i < 2000; ++i) {
                auto p = box.point(i);
                if (!bt.map.in_domain(p[0], p[1], p[2])) continue;
                ++got;
                auto J = bt.map.jets_at(p[0], p[1], p[2]);
                nondeg = nondeg && std::fabs(J.T.g[D2::T] * J.X.g[D2::X] * J.W.g[D2::W]) > 1e-8;
            }
            result["nondegenerate"] = nondeg && got == 50;
            doc["result"] = result;
            return emit(doc, build_o, 0);
        }

        if (apply_cmd->parsed()) {
            json doc;
            doc["subcommand"] = "apply";
            AnyParams params = resolve_params("", apply_transform);
            Expr f = parse(apply_f);
            doc["inputs"] = {{"transform", to_json(params)}, {"f", apply_f}};
            SampleBox box = apply_o.box();
            BuiltTransformation bt = build(params, f, box);
            Coefficient src(f);
            double diff = compare_pushforward(bt, bt.map, src, box, 50);
            json result;
            result["f_scale"] = bt.frule.scale;
            if (auto sym = bt.frule.pushforward_expr(f)) result["f_target"] = sym->str();
            result["generic_vs_closed_max_abs_diff"] = diff;
            result["agreement"] = diff < 1e-8;
            doc["result"] = result;
            return emit(doc, apply_o, diff < 1e-8 ? 0 : 2);
        }

        if (verify_cmd->parsed()) {
            json doc;
            doc["subcommand"] = "verify";
            AnyParams params = resolve_params("", verify_transform);
            Family fam = family_from_string(verify_family);
            Expr f = parse(verify_f);
            doc["inputs"] = {{"transform", to_json(params)},
                             {"f", verify_f},
                             {"f_target", verify_f_target},
                             {"family", verify_family}};
            SampleBox box = verify_o.box();
            BuiltTransformation bt = build(params, f, box);
            Coefficient src(f);
            Coefficient tgt = verify_f_target.empty() ? bt.frule.pushforward(src)
                                                      : Coefficient(parse(verify_f_target));
            VerificationReport rep = verify_admissible(bt.map, src, tgt, fam, verify_o.sampler(),
                                                       verify_o.tol, verify_o.quad_tol);
            doc["report"] = to_json(rep);
            doc["result"] = {{"verdict", rep.pass ? "pass" : "fail"}};
            return emit(doc, verify_o, rep.pass ? 0 : 2);
        }

        if (equiv_cmd->parsed()) {
            json doc;
            doc["subcommand"] = "equivalent";
            Family fam = family_from_string(equiv_family);
            doc["inputs"] = {{"family", equiv_family}, {"f1", equiv_f1}, {"f2", equiv_f2}};
            std::optional<AnyParams> candidate;
            if (!equiv_candidate.empty()) candidate = params_from_json(load_json_arg(equiv_candidate));
            EquivalenceResult res = decide_equivalence(parse(equiv_f1), parse(equiv_f2), fam,
                                                       equiv_o.box(), {}, candidate);
            doc["result"] = to_json(res);
            if (res.witness_report) doc["report"] = to_json(*res.witness_report);
            int code = res.verdict == EquivalenceResult::Verdict::undecided ? 3 : 0;
            return emit(doc, equiv_o, code);
        }

        if (pot_cmd->parsed()) {
            json doc;
            doc["subcommand"] = "potentialize";
            Family fam = family_from_string(pot_family);
            doc["inputs"] = {{"family", pot_family}, {"f", pot_f}, {"t0", pot_t0}};
            Expr f = parse(pot_f);
            PotentialLink link = fam == Family::C
                                     ? potentialize_C(f, pot_o.box(), pot_o.samples)
                                     : potentialize_L(f, pot_o.box(), pot_t0, pot_o.samples);
            if (fam == Family::P) throw ParamError("potentialize takes family C or L");
            doc["report"] = to_json(link.report);
            json result;
            result["verdict"] = link.report.pass ? "pass" : "fail";
            if (link.lambda) result["lambda_at_1"] = (*link.lambda)(1.0);
            if (link.hat) {
                double t_probe = pot_o.box().t.mid(), x_probe = pot_o.box().x.mid();
                result["hat_probe"] = {{"t", t_probe},
                                       {"x", x_probe},
                                       {"t_hat", link.hat->t_value(t_probe)},
                                       {"x_hat", link.hat->x_value(t_probe, x_probe)}};
            }
            doc["result"] = result;
            return emit(doc, pot_o, link.report.pass ? 0 : 2);
        }

        if (lin_cmd->parsed()) {
            json doc;
            doc["subcommand"] = "linearize";
            doc["inputs"] = {{"f", lin_f}};
            SampleBox box = lin_o.box();
            auto c = as_constant(parse(lin_f), {Var::t, Var::x}, box);
            if (!c) throw ParamError("linearize requires a constant arbitrary element");
            Linearization lin = linearize_p3(*c, box, lin_o.samples);
            doc["report"] = to_json(lin.report);
            doc["result"] = {{"verdict", lin.report.pass ? "pass" : "fail"},
                             {"f", lin.f_const}};
            return emit(doc, lin_o, lin.report.pass ? 0 : 2);
        }
    } catch (const Error& e) {
        json doc;
        doc["schema"] = "pburg/1";
        doc["error"] = e.what();
        std::cout << doc.dump(2) << "\n";
        return 1;
    } catch (const json::exception& e) {
        json doc;
        doc["schema"] = "pburg/1";
        doc["error"] = std::string("JSON error: ") + e.what();
        std::cout << doc.dump(2) << "\n";
        return 1;
    }
    return 1;
}
