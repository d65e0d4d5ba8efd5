#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geometry.hpp"
#include "parser.hpp"
#include "symmetry.hpp"

namespace diffsym {

using Json = nlohmann::ordered_json;

// Candidate comparison entry: an infinitesimal transformation with optional
// noise-rotation matrix, time rate and Kolmogorov prefactor.
struct CandidateSpec {
    std::vector<Expr> phi;
    Expr tau;
    std::optional<std::vector<std::vector<Expr>>> c;
    std::optional<Rational> a;
    std::optional<Expr> h;
};

struct BasisSpec {
    std::vector<Expr> spatial;
    std::vector<Expr> temporal;
};

struct Model {
    std::string name;
    CoordinateSystem cs;
    Diffusor l;
    std::optional<SdeCoefficients> sde;
    std::map<std::string, ProjectableVectorField> fields;
    std::map<std::string, BasisSpec> bases;
    std::map<std::string, Diffeomorphism> transformations;
    std::map<std::string, CandidateSpec> candidates;
};

namespace model_detail {

inline const Json& need(const Json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ModelError(where + ": missing required key '" + key + "'");
    return *it;
}

inline std::string need_string(const Json& j, const char* key, const std::string& where) {
    const Json& v = need(j, key, where);
    if (!v.is_string()) throw ModelError(where + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

inline Expr parse_in(const std::string& src, const CoordinateSystem& cs,
                     const std::string& where) {
    try {
        return parse_expr(src, cs);
    } catch (const Error& e) {
        throw ModelError(where + ": cannot parse \"" + src + "\": " + e.what());
    }
}

inline std::vector<Expr> parse_list(const Json& j, const CoordinateSystem& cs,
                                    const std::string& where, std::size_t want) {
    if (!j.is_array() || (want != 0 && j.size() != want))
        throw ModelError(where + ": expected a list of " + std::to_string(want) +
                         " expression strings");
    std::vector<Expr> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_string()) throw ModelError(where + ": entries must be strings");
        out.push_back(parse_in(j[i].get<std::string>(), cs, where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

// square matrix of expression strings, symmetry optionally enforced exactly
inline std::vector<std::vector<Expr>> parse_matrix(const Json& j, const CoordinateSystem& cs,
                                                   const std::string& where, std::size_t rows,
                                                   std::size_t cols, bool symmetric) {
    if (!j.is_array() || j.size() != rows)
        throw ModelError(where + ": expected " + std::to_string(rows) + " rows");
    std::vector<std::vector<Expr>> out;
    for (std::size_t i = 0; i < rows; ++i)
        out.push_back(parse_list(j[i], cs, where + "[" + std::to_string(i) + "]", cols));
    if (symmetric)
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t k = i + 1; k < cols; ++k)
                if (!is_zero(out[i][k] - out[k][i]))
                    throw ModelError(where + ": matrix is not symmetric at (" + std::to_string(i) +
                                     "," + std::to_string(k) + ")");
    return out;
}

inline Rational parse_rational(const Json& j, const CoordinateSystem& cs,
                               const std::string& where) {
    if (!j.is_string()) throw ModelError(where + ": expected a rational constant string");
    Expr e = normalize(parse_in(j.get<std::string>(), cs, where));
    if (!e.is_constant()) throw ModelError(where + ": expected a rational constant");
    return e.value();
}

}  // namespace model_detail

inline Model load_model(const Json& j) {
    using namespace model_detail;
    if (!j.is_object()) throw ModelError("model: top level must be an object");
    if (j.contains("schema_version") && j["schema_version"] != 1)
        throw ModelError("model: unsupported schema_version");

    const Json& coords = need(j, "coordinates", "model");
    std::string time = coords.contains("time") ? coords["time"].get<std::string>() : "t";
    const Json& sp = need(coords, "spatial", "coordinates");
    if (!sp.is_array() || sp.empty())
        throw ModelError("coordinates: 'spatial' must be a non-empty list of names");
    std::vector<std::string> spatial;
    for (const auto& s : sp) spatial.push_back(s.get<std::string>());
    CoordinateSystem cs(spatial, time);
    std::size_t m = cs.dim();

    const Json& dj = need(j, "diffusor", "model");
    auto arows = parse_matrix(need(dj, "a", "diffusor"), cs, "diffusor.a", m, m, true);
    SymExprMatrix a(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = i; k < m; ++k) a.set(i, k, arows[i][k]);
    std::vector<Expr> b = parse_list(need(dj, "b", "diffusor"), cs, "diffusor.b", m);
    Diffusor l = Diffusor::standard(cs, a, b);

    Model model{j.value("name", std::string("unnamed")), cs, l, {}, {}, {}, {}, {}};

    if (j.contains("sde")) {
        const Json& sj = j["sde"];
        std::vector<Expr> mu = parse_list(need(sj, "mu", "sde"), cs, "sde.mu", m);
        const Json& sig = need(sj, "sigma", "sde");
        if (!sig.is_array() || sig.empty()) throw ModelError("sde.sigma: expected a matrix");
        std::size_t n = sig[0].is_array() ? sig[0].size() : 0;
        if (n == 0) throw ModelError("sde.sigma: expected a matrix of strings");
        auto srows = parse_matrix(sig, cs, "sde.sigma", m, n, false);
        std::vector<Expr> flat;
        for (const auto& row : srows)
            for (const auto& e : row) flat.push_back(e);
        model.sde = SdeCoefficients(cs, std::move(mu), std::move(flat), n);
    }

    if (j.contains("fields")) {
        for (const auto& [name, fj] : j["fields"].items()) {
            std::string where = "field '" + name + "'";
            std::vector<Expr> phi = parse_list(need(fj, "phi", where), cs, where + ".phi", m);
            Expr tau = parse_in(need_string(fj, "tau", where), cs, where + ".tau");
            try {
                model.fields.emplace(name, ProjectableVectorField(cs, phi, tau));
            } catch (const DimensionMismatch& e) {
                throw ModelError(where + ": tau depends on spatial variable (" +
                                 std::string(e.what()) + ")");
            }
        }
    }

    if (j.contains("bases")) {
        for (const auto& [name, bj] : j["bases"].items()) {
            std::string where = "basis '" + name + "'";
            BasisSpec spec;
            spec.spatial = parse_list(need(bj, "spatial", where), cs, where + ".spatial", 0);
            spec.temporal = parse_list(need(bj, "temporal", where), cs, where + ".temporal", 0);
            if (spec.spatial.empty() || spec.temporal.empty())
                throw ModelError(where + ": basis lists must be non-empty");
            model.bases.emplace(name, std::move(spec));
        }
    }

    if (j.contains("transformations")) {
        for (const auto& [name, tj] : j["transformations"].items()) {
            std::string where = "transformation '" + name + "'";
            Expr f = parse_in(need_string(tj, "f", where), cs, where + ".f");
            std::vector<Expr> phi = parse_list(need(tj, "phi", where), cs, where + ".phi", m);
            try {
                if (tj.contains("f_inverse") || tj.contains("phi_inverse")) {
                    Expr finv = parse_in(need_string(tj, "f_inverse", where), cs, where + ".f_inverse");
                    std::vector<Expr> phinv =
                        parse_list(need(tj, "phi_inverse", where), cs, where + ".phi_inverse", m);
                    model.transformations.emplace(name,
                                                  Diffeomorphism(cs, cs, f, phi, finv, phinv));
                } else {
                    model.transformations.emplace(name, Diffeomorphism(cs, cs, f, phi));
                }
            } catch (const DimensionMismatch& e) {
                throw ModelError(where + ": " + e.what());
            }
        }
    }

    if (j.contains("candidates")) {
        for (const auto& [name, cj] : j["candidates"].items()) {
            std::string where = "candidate '" + name + "'";
            CandidateSpec spec{parse_list(need(cj, "phi", where), cs, where + ".phi", m),
                               parse_in(need_string(cj, "tau", where), cs, where + ".tau"),
                               {}, {}, {}};
            for (const auto& v : variables(spec.tau))
                if (v != cs.time())
                    throw ModelError(where + ": tau depends on spatial variable '" + v + "'");
            if (cj.contains("c")) {
                std::size_t n = model.sde ? model.sde->n : m;
                spec.c = parse_matrix(cj["c"], cs, where + ".c", n, n, false);
            }
            if (cj.contains("a")) spec.a = parse_rational(cj["a"], cs, where + ".a");
            if (cj.contains("h")) spec.h = parse_in(need_string(cj, "h", where), cs, where + ".h");
            model.candidates.emplace(name, std::move(spec));
        }
    }

    return model;
}

}  // namespace diffsym
