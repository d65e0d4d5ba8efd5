#pragma once

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "model.hpp"
#include "stochastic.hpp"

namespace diffsym {

namespace cli_detail {

// flag errors carry their own exit code so the dispatcher stays flat
struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(what) {}
};

struct Invocation {
    std::string command;
    std::map<std::string, std::string> flags;
    bool no_meta = false;
};

inline Invocation parse_args(const std::vector<std::string>& args) {
    if (args.empty())
        throw UsageError("usage: diffsym <validate|check|find|verify|compare> --model PATH [flags]");
    Invocation inv;
    inv.command = args[0];
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + a + "'");
        std::string name = a.substr(2);
        if (name == "no-meta") {
            inv.no_meta = true;
            continue;
        }
        if (i + 1 >= args.size()) throw UsageError("flag '--" + name + "' needs a value");
        inv.flags[name] = args[++i];
    }
    return inv;
}

inline std::string flag(const Invocation& inv, const std::string& name) {
    auto it = inv.flags.find(name);
    if (it == inv.flags.end())
        throw UsageError(inv.command + " needs --" + name);
    return it->second;
}

inline double flag_double(const Invocation& inv, const std::string& name, double fallback) {
    auto it = inv.flags.find(name);
    if (it == inv.flags.end()) return fallback;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(name);
        return v;
    } catch (const std::exception&) {
        throw UsageError("flag '--" + name + "' expects a number, got '" + it->second + "'");
    }
}

inline std::uint64_t flag_u64(const Invocation& inv, const std::string& name,
                              std::uint64_t fallback) {
    auto it = inv.flags.find(name);
    if (it == inv.flags.end()) return fallback;
    try {
        std::size_t used = 0;
        std::uint64_t v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(name);
        return v;
    } catch (const std::exception&) {
        throw UsageError("flag '--" + name + "' expects a non-negative integer, got '" +
                         it->second + "'");
    }
}

inline Model load_from(const Invocation& inv) {
    std::string path = flag(inv, "model");
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ModelError("invalid JSON in " + path + ": " + e.what());
    }
    return load_model(j);
}

inline Json report_head(const Invocation& inv) {
    Json j;
    j["schema_version"] = 1;
    j["command"] = inv.command;
    if (!inv.no_meta) {
        std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        j["meta"] = Json{{"tool", "diffsym"}, {"generated_at", buf}};
    }
    return j;
}

inline void emit(const Json& j, const Invocation& inv, std::ostream& out, std::ostream& err) {
    std::string text = j.dump(2) + "\n";
    auto it = inv.flags.find("json-out");
    if (it != inv.flags.end()) {
        std::ofstream f(it->second);
        if (!f) {
            err << "cannot write " << it->second << "\n";
            out << text;
            return;
        }
        f << text;
        return;
    }
    out << text;
}

inline Json field_json(const ProjectableVectorField& x) {
    Json phi = Json::array();
    for (const auto& p : x.phi()) phi.push_back(to_string(p));
    return Json{{"phi", phi}, {"tau", to_string(x.tau())}};
}

inline Json martingale_report_json(const MartingaleTestReport& r) {
    Json entries = Json::array();
    for (const auto& e : r.entries)
        entries.push_back(Json{{"from", e.from}, {"to", e.to}, {"weight", e.weight}, {"z", e.z}});
    return Json{{"description", r.description}, {"n_paths", r.n_paths},
                {"z_crit", r.z_crit},           {"max_abs_z", r.max_abs_z},
                {"pass", r.pass},               {"entries", entries}};
}

inline int cmd_validate(const Invocation& inv, std::ostream& out, std::ostream& err) {
    Json rep = report_head(inv);
    Json diags = Json::array();
    std::optional<Model> model;
    try {
        model = load_from(inv);
    } catch (const Error& e) {
        diags.push_back(e.what());
    }
    if (model) {
        rep["model"] = model->name;
        try {
            if (!good_candidate(model->l))
                diags.push_back("diffusion block not PSD at probe points");
        } catch (const EvaluationDomainError& e) {
            diags.push_back(std::string("diffusion block could not be probed: ") + e.what());
        }
        if (model->sde) {
            Diffusor derived = sde_to_diffusor(*model->sde);
            bool same = true;
            for (std::size_t i = 0; i <= model->cs.dim() && same; ++i) {
                if (!is_zero(derived.b(i) - model->l.b(i))) same = false;
                for (std::size_t j = i; j <= model->cs.dim() && same; ++j)
                    if (!is_zero(derived.a(i, j) - model->l.a(i, j))) same = false;
            }
            if (!same)
                diags.push_back("sde block disagrees with the operator coefficients");
        }
    }
    rep["valid"] = diags.empty();
    rep["diagnostics"] = diags;
    emit(rep, inv, out, err);
    return diags.empty() ? 0 : 2;
}

inline int cmd_check(const Invocation& inv, std::ostream& out, std::ostream& err) {
    Model model = load_from(inv);
    std::string name = flag(inv, "field");
    auto it = model.fields.find(name);
    if (it == model.fields.end()) throw ModelError("unknown field '" + name + "'");
    SymmetryVerdict v = check_symmetry(it->second, model.l);
    Json rep = report_head(inv);
    rep["model"] = model.name;
    rep["field"] = name;
    rep["is_symmetry"] = v.is_symmetry;
    rep["mu"] = to_string(v.mu);
    Json res = Json::array();
    for (const auto& r : v.residuals) res.push_back(to_string(r));
    rep["residuals"] = res;
    rep["probabilistic"] = v.probabilistic;
    emit(rep, inv, out, err);
    return v.is_symmetry ? 0 : 1;
}

inline int cmd_find(const Invocation& inv, std::ostream& out, std::ostream& err) {
    Model model = load_from(inv);
    std::string name = flag(inv, "basis");
    auto it = model.bases.find(name);
    if (it == model.bases.end()) throw ModelError("unknown basis '" + name + "'");
    AnsatzBasis basis(model.cs, it->second.spatial, it->second.temporal);
    std::vector<ProjectableVectorField> gens = find_symmetries(model.l, basis);
    Json rep = report_head(inv);
    rep["model"] = model.name;
    rep["basis"] = name;
    rep["dimension"] = gens.size();
    Json list = Json::array();
    for (const auto& g : gens) list.push_back(field_json(g));
    rep["generators"] = list;
    emit(rep, inv, out, err);
    return 0;
}

inline int cmd_verify(const Invocation& inv, std::ostream& out, std::ostream& err) {
    Model model = load_from(inv);
    std::string name = flag(inv, "field");
    auto it = model.fields.find(name);
    if (it == model.fields.end()) throw ModelError("unknown field '" + name + "'");

    double dt = flag_double(inv, "dt", 0.01);
    double horizon = flag_double(inv, "horizon", 1.0);
    if (dt <= 0) throw UsageError("dt must be positive");
    if (horizon <= 0) throw UsageError("horizon must be positive");
    auto steps = static_cast<long long>(std::llround(horizon / dt));
    if (steps < 2) throw UsageError("horizon must cover at least two time steps");

    StochasticVerifyConfig cfg;
    cfg.n_paths = flag_u64(inv, "n", 4000);
    cfg.grid_intervals = static_cast<std::size_t>(steps);
    cfg.t1 = horizon;
    cfg.seed = flag_u64(inv, "seed", 0x5EED);
    SymmetryEvidence ev = verify_symmetry_stochastically(it->second, model.l, cfg);

    Json rep = report_head(inv);
    rep["model"] = model.name;
    rep["field"] = name;
    rep["n_paths"] = cfg.n_paths;
    rep["dt"] = dt;
    rep["horizon"] = horizon;
    rep["seed"] = cfg.seed;
    rep["pass"] = ev.pass;
    double worst = 0;
    Json reports = Json::array();
    for (const auto& r : ev.reports) {
        worst = std::max(worst, r.max_abs_z);
        reports.push_back(martingale_report_json(r));
    }
    rep["max_abs_z"] = worst;
    rep["reports"] = reports;
    emit(rep, inv, out, err);
    return ev.pass ? 0 : 1;
}

inline int cmd_compare(const Invocation& inv, std::ostream& out, std::ostream& err) {
    Model model = load_from(inv);
    std::string name = flag(inv, "transformation");
    auto it = model.candidates.find(name);
    if (it == model.candidates.end()) throw ModelError("unknown candidate '" + name + "'");
    if (!model.sde) throw ModelError("model has no sde block; the sde-level comparison needs one");
    const CandidateSpec& cand = it->second;
    const CoordinateSystem& cs = model.cs;

    SymmetryVerdict mart = check_symmetry(ProjectableVectorField(cs, cand.phi, cand.tau), model.l);

    Json rep = report_head(inv);
    rep["model"] = model.name;
    rep["candidate"] = name;
    rep["martingale"] = mart.is_symmetry;

    // SDE level needs autonomous spatial components and tau = a*t
    bool sde_known = false, sde_pass = false;
    std::string sde_reason;
    Rational a(0);
    if (cand.a) {
        a = *cand.a;
    } else {
        Expr rate = normalize(diff(cand.tau, cs.time()));
        if (rate.is_constant()) a = rate.value();
    }
    if (!is_zero(cand.tau - constant(a) * variable(cs.time()))) {
        sde_reason = "tau is not a constant multiple of t";
    } else {
        std::size_t n = model.sde->n;
        std::vector<Expr> cflat(n * n, constant(0));
        if (cand.c)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) cflat[i * n + j] = (*cand.c)[i][j];
        try {
            StochasticTransformation st(cs, cand.phi, cflat, n, a);
            std::vector<Expr> res = sde_determining_residuals(st, *model.sde);
            sde_known = true;
            sde_pass = true;
            for (const auto& r : res) sde_pass = sde_pass && is_zero(r);
        } catch (const NonAutonomous& e) {
            sde_reason = e.what();
        }
    }
    if (sde_known)
        rep["sde"] = sde_pass;
    else {
        rep["sde"] = nullptr;
        rep["sde_reason"] = sde_reason;
    }

    Expr h = cand.h ? *cand.h : constant(0);
    KolmogorovVerdict kv = kolmogorov_check(KolmogorovSymmetryCandidate(cs, cand.tau, cand.phi, h),
                                            model.l);
    rep["kolmogorov"] = Json{{"h", to_string(normalize(h))},
                             {"pde", kv.pde_symmetry},
                             {"martingale", kv.martingale_symmetry}};
    bool consistent = !(sde_known && sde_pass && !mart.is_symmetry);
    rep["bridge_consistent"] = consistent;
    emit(rep, inv, out, err);

    bool affirmative = mart.is_symmetry && kv.pde_symmetry && (!sde_known || sde_pass);
    return affirmative ? 0 : 1;
}

}  // namespace cli_detail

// Front-end entry point; returns the process exit code and never throws.
// 0 affirmative verdict, 1 negative verdict, 2 usage or model error.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace cli_detail;
    Invocation inv;
    try {
        inv = parse_args(args);
        if (inv.command == "validate") return cmd_validate(inv, out, err);
        if (inv.command == "check") return cmd_check(inv, out, err);
        if (inv.command == "find") return cmd_find(inv, out, err);
        if (inv.command == "verify") return cmd_verify(inv, out, err);
        if (inv.command == "compare") return cmd_compare(inv, out, err);
        throw UsageError("unknown command '" + inv.command +
                         "' (expected validate, check, find, verify or compare)");
    } catch (const std::exception& e) {
        Json rep;
        rep["schema_version"] = 1;
        rep["command"] = inv.command;
        rep["error"] = e.what();
        emit(rep, inv, out, err);
        return 2;
    }
}

}  // namespace diffsym
