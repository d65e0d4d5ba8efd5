#pragma once

#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "compiled.hpp"
#include "geometry.hpp"

namespace diffsym {

// Verdict of the determining equations; mu is the proportionality factor in
// the derived-operator identity, fixed to -d_t(tau) by the time component.
struct SymmetryVerdict {
    bool is_symmetry;
    Expr mu;
    std::vector<Expr> residuals;
    bool probabilistic;
};

namespace detail {

// Determining residuals over raw component arrays: the A-block in row-major
// upper-triangular order, then the b-block. Callers pass either a concrete
// field or an ansatz carrying unknown coefficient variables.
inline std::vector<Expr> determining_residuals_raw(const CoordinateSystem& cs, const Expr& tau,
                                                   const std::vector<Expr>& phi,
                                                   const Diffusor& l) {
    std::size_t m = cs.dim();
    const std::string& t = cs.time();
    std::vector<Expr> res;
    res.reserve(m * (m + 1) / 2 + m);
    for (std::size_t i = 1; i <= m; ++i)
        for (std::size_t j = i; j <= m; ++j) {
            Expr e = tau * diff_raw(l.a(i, j), t) + l.a(i, j) * diff_raw(tau, t);
            for (std::size_t k = 1; k <= m; ++k) {
                e += phi[k - 1] * diff_raw(l.a(i, j), cs.name(k));
                e -= l.a(i, k) * diff_raw(phi[j - 1], cs.name(k));
                e -= l.a(k, j) * diff_raw(phi[i - 1], cs.name(k));
            }
            res.push_back(normalize(e));
        }
    for (std::size_t i = 1; i <= m; ++i) {
        Expr e = tau * diff_raw(l.b(i), t) + l.b(i) * diff_raw(tau, t) - diff_raw(phi[i - 1], t);
        for (std::size_t k = 1; k <= m; ++k) {
            e += phi[k - 1] * diff_raw(l.b(i), cs.name(k));
            e -= l.b(k) * diff_raw(phi[i - 1], cs.name(k));
            for (std::size_t j = 1; j <= m; ++j)
                e -= l.a(j, k) * diff_raw(diff_raw(phi[i - 1], cs.name(j)), cs.name(k));
        }
        res.push_back(normalize(e));
    }
    return res;
}

}  // namespace detail

inline std::vector<Expr> determining_residuals(const ProjectableVectorField& x,
                                               const Diffusor& l) {
    detail::require_same(x.coords(), l.coords());
    if (!l.is_standard()) throw NotStandard("determining equations need a standard diffusor");
    return detail::determining_residuals_raw(l.coords(), x.tau(), x.phi(), l);
}

// Two independent routes must agree: the specialized residuals and the full
// derived-operator identity. Disagreement is an internal error, not a verdict.
inline SymmetryVerdict check_symmetry(const ProjectableVectorField& x, const Diffusor& l) {
    std::vector<Expr> res = determining_residuals(x, l);
    bool probabilistic = false;
    bool residuals_zero = true;
    for (const auto& r : res) {
        ZeroResult z = is_zero_detail(r);
        probabilistic = probabilistic || z.probabilistic;
        residuals_zero = residuals_zero && z.zero;
    }
    Expr mu = normalize(constant(-1) * diff_raw(x.tau(), l.coords().time()));
    Diffusor delta = lie_derivative_diffusor(x, l) - mu * l;
    bool derived_zero = true;
    std::size_t n = l.coords().size();
    for (std::size_t i = 0; i < n; ++i) {
        ZeroResult z = is_zero_detail(delta.b(i));
        probabilistic = probabilistic || z.probabilistic;
        derived_zero = derived_zero && z.zero;
        for (std::size_t j = i; j < n; ++j) {
            z = is_zero_detail(delta.a(i, j));
            probabilistic = probabilistic || z.probabilistic;
            derived_zero = derived_zero && z.zero;
        }
    }
    if (derived_zero != residuals_zero)
        throw std::logic_error("determining residuals disagree with the derived-operator route");
    return {residuals_zero, mu, std::move(res), probabilistic};
}

// Candidate functions spanning the search space: one shared list for the
// spatial components, one list in time alone for the time component.
struct AnsatzBasis {
    CoordinateSystem cs;
    std::vector<Expr> spatial;
    std::vector<Expr> temporal;

    AnsatzBasis(CoordinateSystem cs_, std::vector<Expr> spatial_, std::vector<Expr> temporal_)
        : cs(std::move(cs_)), spatial(std::move(spatial_)), temporal(std::move(temporal_)) {
        if (spatial.empty() || temporal.empty())
            throw DimensionMismatch("ansatz basis lists must be nonempty");
        for (auto& e : spatial) {
            detail::require_declared(e, cs, "spatial basis function");
            e = normalize(e);
        }
        for (auto& e : temporal) {
            detail::require_declared(e, cs, "temporal basis function");
            for (const auto& v : variables(e))
                if (v != cs.time())
                    throw DimensionMismatch("temporal basis function depends on spatial variable '" +
                                            v + "'");
            e = normalize(e);
        }
    }
};

namespace detail {

// Splits one linear residual into rows of an exact system: each numerator
// monomial factors as (collector in chart variables) x (one unknown), and
// matching collectors accumulate into the same row. Collectors are valid
// only when built from variable powers and exponential factors, which stay
// linearly independent as functions; anything else ends the search.
inline void expand_linear(const Expr& residual,
                          const std::map<std::string, std::size_t>& unknown_index,
                          std::size_t n_unknowns,
                          std::map<canon::Mono, RatVec, canon::MonoLess>& rows) {
    canon::Ratio r = canon::canonical(residual);
    for (const auto& term : r.num.t) {
        canon::Mono chart;
        long unk = -1;
        for (const auto& factor : term.first.f) {
            const canon::Atom& atom = factor.first;
            if (atom.kind == canon::AtomKind::Var) {
                auto it = unknown_index.find(atom.var);
                if (it != unknown_index.end()) {
                    if (unk >= 0 || factor.second != Rational(1))
                        throw std::logic_error("determining system is not linear in the ansatz");
                    unk = static_cast<long>(it->second);
                    continue;
                }
            }
            chart.f.push_back(factor);
        }
        for (const auto& factor : chart.f) {
            const canon::Atom& atom = factor.first;
            bool ok = atom.kind == canon::AtomKind::Var ||
                      (atom.kind == canon::AtomKind::Fn && atom.fn == canon::FnKind::Exp);
            if (!ok) throw BasisNotClosed(to_string(canon::term_to_expr(chart, Rational(1))));
        }
        if (unk < 0) throw std::logic_error("constant term in a homogeneous determining system");
        auto [it, inserted] = rows.try_emplace(chart, RatVec(n_unknowns, Rational(0)));
        (void)inserted;
        it->second[static_cast<std::size_t>(unk)] += term.second;
    }
}

// Keeps a maximal independent subset by expanding every component over
// (component, monomial, denominator) coordinates and row-reducing. Fields
// whose denominators differ are treated as independent directions.
inline std::vector<ProjectableVectorField> independent_fields(
    std::vector<ProjectableVectorField> fields) {
    if (fields.size() <= 1) return fields;
    struct KeyLess {
        bool operator()(const std::tuple<std::size_t, canon::Mono, canon::Poly>& a,
                        const std::tuple<std::size_t, canon::Mono, canon::Poly>& b) const {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
            if (int c = canon::cmp(std::get<1>(a), std::get<1>(b))) return c < 0;
            return canon::cmp(std::get<2>(a), std::get<2>(b)) < 0;
        }
    };
    std::map<std::tuple<std::size_t, canon::Mono, canon::Poly>, std::size_t, KeyLess> columns;
    std::vector<std::map<std::size_t, Rational>> sparse(fields.size());
    for (std::size_t fi = 0; fi < fields.size(); ++fi) {
        std::vector<Expr> comp = fields[fi].full();
        for (std::size_t ci = 0; ci < comp.size(); ++ci) {
            canon::Ratio r = canon::canonical(comp[ci]);
            for (const auto& term : r.num.t) {
                auto key = std::make_tuple(ci, term.first, r.den);
                auto [it, inserted] = columns.try_emplace(key, columns.size());
                (void)inserted;
                sparse[fi][it->second] += term.second;
            }
        }
    }
    RatMat transposed(columns.size(), RatVec(fields.size(), Rational(0)));
    for (std::size_t fi = 0; fi < fields.size(); ++fi)
        for (const auto& [col, q] : sparse[fi]) transposed[col][fi] = q;
    std::vector<std::size_t> keep = detail::rref(transposed);
    std::vector<ProjectableVectorField> out;
    for (std::size_t fi : keep) out.push_back(std::move(fields[fi]));
    return out;
}

}  // namespace detail

// Exact linear solve of the determining equations over the ansatz span.
inline std::vector<ProjectableVectorField> find_symmetries(const Diffusor& l,
                                                           const AnsatzBasis& basis) {
    detail::require_same(l.coords(), basis.cs);
    if (!l.is_standard()) throw NotStandard("symmetry search needs a standard diffusor");
    const CoordinateSystem& cs = l.coords();
    std::size_t m = cs.dim();
    std::size_t ns = basis.spatial.size();
    std::size_t nt = basis.temporal.size();
    std::size_t n_unknowns = m * ns + nt;

    auto uname = [](std::size_t k) { return "c$" + std::to_string(k); };
    std::map<std::string, std::size_t> unknown_index;
    for (std::size_t k = 0; k < n_unknowns; ++k) unknown_index[uname(k)] = k;

    std::vector<Expr> phi(m, constant(0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < ns; ++j)
            phi[i] = phi[i] + variable(uname(i * ns + j)) * basis.spatial[j];
    Expr tau = constant(0);
    for (std::size_t k = 0; k < nt; ++k)
        tau = tau + variable(uname(m * ns + k)) * basis.temporal[k];

    RatMat mat;
    for (const auto& r : detail::determining_residuals_raw(cs, tau, phi, l)) {
        // one row group per equation; collectors never merge across residuals
        std::map<canon::Mono, RatVec, canon::MonoLess> rows;
        detail::expand_linear(r, unknown_index, n_unknowns, rows);
        for (auto& [mono, row] : rows) mat.push_back(std::move(row));
    }

    std::vector<ProjectableVectorField> out;
    for (const RatVec& v : nullspace(mat, n_unknowns)) {
        std::vector<Expr> p(m, constant(0));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < ns; ++j)
                if (v[i * ns + j] != 0)
                    p[i] = p[i] + constant(v[i * ns + j]) * basis.spatial[j];
        Expr tt = constant(0);
        for (std::size_t k = 0; k < nt; ++k)
            if (v[m * ns + k] != 0) tt = tt + constant(v[m * ns + k]) * basis.temporal[k];
        ProjectableVectorField field(cs, std::move(p), std::move(tt));
        bool zero = is_zero(field.tau());
        for (std::size_t i = 0; zero && i < m; ++i) zero = is_zero(field.phi(i));
        if (!zero) out.push_back(std::move(field));
    }
    return detail::independent_fields(std::move(out));
}

// Coefficients of dX = mu dt + sigma dW with an n-dimensional driver; sigma
// is m x n row-major. Time dependence is allowed here and rejected by the
// SDE-level comparisons.
struct SdeCoefficients {
    CoordinateSystem cs;
    std::vector<Expr> mu;
    std::vector<Expr> sigma;
    std::size_t n;

    SdeCoefficients(CoordinateSystem cs_, std::vector<Expr> mu_, std::vector<Expr> sigma_,
                    std::size_t n_)
        : cs(std::move(cs_)), mu(std::move(mu_)), sigma(std::move(sigma_)), n(n_) {
        if (mu.size() != cs.dim() || sigma.size() != cs.dim() * n)
            throw DimensionMismatch("SDE coefficient shapes do not match coordinates");
        for (auto& e : mu) {
            detail::require_declared(e, cs, "drift coefficient");
            e = normalize(e);
        }
        for (auto& e : sigma) {
            detail::require_declared(e, cs, "noise coefficient");
            e = normalize(e);
        }
    }

    const Expr& sig(std::size_t i, std::size_t alpha) const { return sigma.at(i * n + alpha); }

    bool autonomous() const {
        for (const auto& e : mu)
            for (const auto& v : variables(e))
                if (v == cs.time()) return false;
        for (const auto& e : sigma)
            for (const auto& v : variables(e))
                if (v == cs.time()) return false;
        return true;
    }
};

inline Diffusor sde_to_diffusor(const SdeCoefficients& s) {
    std::size_t m = s.cs.dim();
    SymExprMatrix a(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            Expr acc = constant(0);
            for (std::size_t al = 0; al < s.n; ++al) acc += s.sig(i, al) * s.sig(j, al);
            a.set(i, j, constant(Rational(1, 2)) * acc);
        }
    return Diffusor::standard(s.cs, a, s.mu);
}

// Spatial change, Brownian rotation, and time-rescaling rate; the rotation
// matrix must be antisymmetric and everything autonomous.
struct StochasticTransformation {
    CoordinateSystem cs;
    std::vector<Expr> y;
    std::vector<Expr> c;
    std::size_t n;
    Rational a;

    StochasticTransformation(CoordinateSystem cs_, std::vector<Expr> y_, std::vector<Expr> c_,
                             std::size_t n_, Rational a_)
        : cs(std::move(cs_)), y(std::move(y_)), c(std::move(c_)), n(n_), a(std::move(a_)) {
        if (y.size() != cs.dim() || c.size() != n * n)
            throw DimensionMismatch("transformation shapes do not match coordinates");
        for (auto& e : y) {
            detail::require_declared(e, cs, "spatial component");
            e = normalize(e);
            for (const auto& v : variables(e))
                if (v == cs.time()) throw NonAutonomous("spatial change depends on time");
        }
        for (auto& e : c) {
            detail::require_declared(e, cs, "rotation entry");
            e = normalize(e);
            for (const auto& v : variables(e))
                if (v == cs.time()) throw NonAutonomous("rotation depends on time");
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j)
                if (!is_zero(cmat(i, j) + cmat(j, i)))
                    throw ModelError("rotation matrix must be antisymmetric");
    }

    const Expr& cmat(std::size_t al, std::size_t be) const { return c.at(al * n + be); }
};

// SDE-level determining residuals: m drift rows then m*n diffusion rows in
// row-major order. The rotation enters as (sigma C)^i_alpha.
inline std::vector<Expr> sde_determining_residuals(const StochasticTransformation& t,
                                                   const SdeCoefficients& s) {
    detail::require_same(t.cs, s.cs);
    if (t.n != s.n) throw DimensionMismatch("driver dimensions differ");
    if (!s.autonomous()) throw NonAutonomous("SDE comparison needs autonomous coefficients");
    const CoordinateSystem& cs = s.cs;
    std::size_t m = cs.dim();
    std::vector<Expr> res;
    res.reserve(m + m * s.n);
    for (std::size_t i = 0; i < m; ++i) {
        Expr e = constant(t.a) * s.mu[i];
        for (std::size_t k = 0; k < m; ++k) {
            e += t.y[k] * diff_raw(s.mu[i], cs.name(k + 1));
            e -= s.mu[k] * diff_raw(t.y[i], cs.name(k + 1));
            for (std::size_t j = 0; j < m; ++j) {
                Expr qv = constant(0);
                for (std::size_t al = 0; al < s.n; ++al) qv += s.sig(j, al) * s.sig(k, al);
                e -= constant(Rational(1, 2)) * qv *
                     diff_raw(diff_raw(t.y[i], cs.name(j + 1)), cs.name(k + 1));
            }
        }
        res.push_back(normalize(e));
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t al = 0; al < s.n; ++al) {
            Expr e = constant(t.a * Rational(1, 2)) * s.sig(i, al);
            for (std::size_t be = 0; be < s.n; ++be) e += s.sig(i, be) * t.cmat(be, al);
            for (std::size_t k = 0; k < m; ++k) {
                e += t.y[k] * diff_raw(s.sig(i, al), cs.name(k + 1));
                e -= s.sig(k, al) * diff_raw(t.y[i], cs.name(k + 1));
            }
            res.push_back(normalize(e));
        }
    return res;
}

// An SDE-level solution must induce a martingale-level symmetry through
// Y = Ytilde + a t d_t; the converse can fail when the rotation is frozen.
inline SymmetryVerdict bridge_check(const StochasticTransformation& t,
                                    const SdeCoefficients& s) {
    std::vector<Expr> sde_res = sde_determining_residuals(t, s);
    bool sde_ok = true;
    for (const auto& r : sde_res) sde_ok = sde_ok && is_zero(r);
    ProjectableVectorField y(s.cs, t.y, constant(t.a) * variable(s.cs.time()));
    SymmetryVerdict v = check_symmetry(y, sde_to_diffusor(s));
    if (sde_ok && !v.is_symmetry)
        throw std::logic_error("SDE-level solution failed the martingale-level equations");
    return v;
}

// Point symmetry ansatz for the backward equation, restricted to the
// fiber-linear form psi = h u with projectable (tau, phi).
struct KolmogorovSymmetryCandidate {
    CoordinateSystem cs;
    Expr tau;
    std::vector<Expr> phi;
    Expr h;

    KolmogorovSymmetryCandidate(CoordinateSystem cs_, Expr tau_, std::vector<Expr> phi_, Expr h_)
        : cs(std::move(cs_)), tau(std::move(tau_)), phi(std::move(phi_)), h(std::move(h_)) {
        if (phi.size() != cs.dim())
            throw DimensionMismatch("candidate needs one spatial component per coordinate");
        detail::require_declared(tau, cs, "time component");
        for (const auto& v : variables(tau))
            if (v != cs.time())
                throw DimensionMismatch("time component depends on spatial variable '" + v + "'");
        tau = normalize(tau);
        for (auto& p : phi) {
            detail::require_declared(p, cs, "spatial component");
            p = normalize(p);
        }
        detail::require_declared(h, cs, "multiplier");
        h = normalize(h);
    }
};

struct KolmogorovVerdict {
    bool pde_symmetry;
    bool martingale_symmetry;
};

// PDE-side conditions: h solves the equation itself, the A-block matches the
// determining equations, and the b-block picks up the gradient of h. The
// martingale side ignores h entirely; the two agree exactly when h is constant.
inline KolmogorovVerdict kolmogorov_check(const KolmogorovSymmetryCandidate& z,
                                          const Diffusor& l) {
    detail::require_same(z.cs, l.coords());
    if (!l.is_standard()) throw NotStandard("Kolmogorov comparison needs a standard diffusor");
    const CoordinateSystem& cs = l.coords();
    std::size_t m = cs.dim();
    std::vector<Expr> res = detail::determining_residuals_raw(cs, z.tau, z.phi, l);
    for (std::size_t i = 0; i < m; ++i) {
        Expr grad_term = constant(0);
        for (std::size_t k = 0; k < m; ++k)
            grad_term += constant(2) * l.a(i + 1, k + 1) * diff_raw(z.h, cs.name(k + 1));
        res[m * (m + 1) / 2 + i] = normalize(res[m * (m + 1) / 2 + i] + grad_term);
    }
    res.push_back(apply_diffusor(l, z.h));
    bool pde = true;
    for (const auto& r : res) pde = pde && is_zero(r);
    bool mart = check_symmetry(ProjectableVectorField(cs, z.phi, z.tau), l).is_symmetry;
    return {pde, mart};
}

// Classical one-step fourth-order integration of the field's flow; the time
// component reads only the time slot, so projectability survives exactly.
class FlowMap {
public:
    FlowMap(const ProjectableVectorField& x, double a, int steps) : a_(a), steps_(steps) {
        if (steps <= 0) throw ConfigError("flow needs a positive substep count");
        const auto& names = x.coords().names();
        comp_.emplace_back(x.tau(), names);
        for (const auto& p : x.phi()) comp_.emplace_back(p, names);
    }

    std::vector<double> operator()(std::vector<double> state) {
        if (state.size() != comp_.size())
            throw DimensionMismatch("flow state size does not match coordinates");
        double h = a_ / steps_;
        std::size_t n = state.size();
        std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
        for (int s = 0; s < steps_; ++s) {
            rhs(state, k1);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
            rhs(tmp, k2);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
            rhs(tmp, k3);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + h * k3[i];
            rhs(tmp, k4);
            for (std::size_t i = 0; i < n; ++i)
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            for (double v : state)
                if (!std::isfinite(v) || std::abs(v) > 1e12)
                    throw NumericBlowup("flow state left the trusted range");
        }
        return state;
    }

private:
    void rhs(const std::vector<double>& at, std::vector<double>& out) {
        for (std::size_t i = 0; i < comp_.size(); ++i) out[i] = comp_[i](at.data());
    }

    double a_;
    int steps_;
    std::vector<CompiledExpr> comp_;
};

inline FlowMap flow(const ProjectableVectorField& x, double a, int steps) {
    return FlowMap(x, a, steps);
}

}  // namespace diffsym
