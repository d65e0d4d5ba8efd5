#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <random>
#include <vector>

#include "coords.hpp"
#include "expr.hpp"

namespace diffsym {
namespace canon {

// Canonical form is a quotient of generalized polynomials: monomials are
// products of atoms raised to rational exponents, atoms are variables,
// elementary functions of canonical arguments, or irreducible power bases.
// Invariants: terms and factors are sorted, coefficients and exponents are
// nonzero, exp atoms carry exponent 1 (powers fold into the argument), pow
// atoms carry exponents strictly between 0 and 1, the denominator's leading
// coefficient is 1, and a zero numerator forces denominator 1. Quotients are
// not reduced by gcd; zero detection only needs the numerator.

struct Poly;
struct Ratio;
using PolyPtr  = std::shared_ptr<const Poly>;
using RatioPtr = std::shared_ptr<const Ratio>;

enum class FnKind { Exp, Log, Sin, Cos };
enum class AtomKind { Var, Fn, Pow };

struct Atom {
    AtomKind kind;
    std::string var;  // Var
    FnKind fn{};      // Fn
    RatioPtr arg;     // Fn
    PolyPtr base;     // Pow
};

struct Mono {
    std::vector<std::pair<Atom, Rational>> f;
};

struct Poly {
    std::vector<std::pair<Mono, Rational>> t;
};

struct Ratio {
    Poly num, den;
};

inline int cmp(const Rational& a, const Rational& b) {
    return a < b ? -1 : (b < a ? 1 : 0);
}

int cmp(const Atom& a, const Atom& b);
int cmp(const Poly& a, const Poly& b);

inline int cmp(const Mono& a, const Mono& b) {
    std::size_t n = std::min(a.f.size(), b.f.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (int c = cmp(a.f[i].first, b.f[i].first)) return c;
        if (int c = cmp(a.f[i].second, b.f[i].second)) return c;
    }
    return a.f.size() < b.f.size() ? -1 : (a.f.size() > b.f.size() ? 1 : 0);
}

inline int cmp(const Ratio& a, const Ratio& b) {
    if (int c = cmp(a.num, b.num)) return c;
    return cmp(a.den, b.den);
}

inline int cmp(const Poly& a, const Poly& b) {
    std::size_t n = std::min(a.t.size(), b.t.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (int c = cmp(a.t[i].first, b.t[i].first)) return c;
        if (int c = cmp(a.t[i].second, b.t[i].second)) return c;
    }
    return a.t.size() < b.t.size() ? -1 : (a.t.size() > b.t.size() ? 1 : 0);
}

inline int cmp(const Atom& a, const Atom& b) {
    if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
    switch (a.kind) {
        case AtomKind::Var: return a.var.compare(b.var);
        case AtomKind::Fn:
            if (a.fn != b.fn) return a.fn < b.fn ? -1 : 1;
            return cmp(*a.arg, *b.arg);
        case AtomKind::Pow: return cmp(*a.base, *b.base);
    }
    return 0;
}

struct MonoLess {
    bool operator()(const Mono& a, const Mono& b) const { return cmp(a, b) < 0; }
};

inline Poly p_zero() { return {}; }

inline Poly p_const(const Rational& c) {
    if (c == 0) return {};
    return Poly{{{Mono{}, c}}};
}

inline Poly p_one() { return p_const(1); }

inline bool is_one(const Poly& p) {
    return p.t.size() == 1 && p.t[0].first.f.empty() && p.t[0].second == 1;
}

inline Poly p_atom(Atom a, const Rational& e) {
    return Poly{{{Mono{{{std::move(a), e}}}, Rational(1)}}};
}

inline Poly p_scale(const Poly& p, const Rational& c) {
    if (c == 0) return {};
    Poly out;
    out.t.reserve(p.t.size());
    for (const auto& [m, k] : p.t) out.t.push_back({m, k * c});
    return out;
}

inline Poly p_add(const Poly& a, const Poly& b) {
    Poly out;
    out.t.reserve(a.t.size() + b.t.size());
    std::size_t i = 0, j = 0;
    while (i < a.t.size() && j < b.t.size()) {
        int c = cmp(a.t[i].first, b.t[j].first);
        if (c < 0) out.t.push_back(a.t[i++]);
        else if (c > 0) out.t.push_back(b.t[j++]);
        else {
            Rational s = a.t[i].second + b.t[j].second;
            if (s != 0) out.t.push_back({a.t[i].first, s});
            ++i; ++j;
        }
    }
    while (i < a.t.size()) out.t.push_back(a.t[i++]);
    while (j < b.t.size()) out.t.push_back(b.t[j++]);
    return out;
}

inline Poly p_neg(const Poly& a) { return p_scale(a, -1); }

struct MonoMul {
    Mono m;
    std::vector<PolyPtr> expand;  // whole powers shed by pow-atom exponent overflow
};

// Merge two sorted factor lists. Exp atoms merge through their arguments;
// pow-atom exponents stay in (0,1), shedding the integer part for expansion.
MonoMul mono_mul(const Mono& a, const Mono& b);

Poly p_mul(const Poly& a, const Poly& b);

inline Poly p_powu(const Poly& a, unsigned long n) {
    Poly r = p_one(), base = a;
    while (n) {
        if (n & 1) r = p_mul(r, base);
        if (n >>= 1) base = p_mul(base, base);
    }
    return r;
}

Ratio r_add(const Ratio& a, const Ratio& b);
Ratio r_mul(const Ratio& a, const Ratio& b);
Ratio r_pow(const Ratio& u, const Rational& q);
Ratio r_fn(FnKind f, const Ratio& u);
Ratio r_scale(const Ratio& a, const Rational& c);

// Single-monomial denominators without pow atoms fold into the numerator as
// negative exponents (exp atoms invert through their argument), so x/x is 1
// exactly and denominators are either 1 or genuinely multi-term.
inline bool mono_den_foldable(const Poly& d) {
    if (d.t.size() != 1 || d.t[0].first.f.empty()) return false;
    for (const auto& [at, e] : d.t[0].first.f)
        if (at.kind == AtomKind::Pow) return false;
    return true;
}

inline Ratio r_norm(Poly n, Poly d) {
    if (d.t.empty()) throw EvaluationDomainError("division by zero");
    if (n.t.empty()) return Ratio{{}, p_one()};
    if (mono_den_foldable(d)) {
        Mono inv;
        for (const auto& [at, e] : d.t[0].first.f) {
            if (at.kind == AtomKind::Fn && at.fn == FnKind::Exp)
                inv.f.push_back({Atom{AtomKind::Fn, {}, FnKind::Exp,
                                      std::make_shared<const Ratio>(r_scale(*at.arg, -1)),
                                      nullptr},
                                 Rational(1)});
            else
                inv.f.push_back({at, -e});
        }
        std::sort(inv.f.begin(), inv.f.end(),
                  [](const auto& x, const auto& y) { return cmp(x.first, y.first) < 0; });
        Poly invp{{{std::move(inv), Rational(1) / d.t[0].second}}};
        return Ratio{p_mul(n, invp), p_one()};
    }
    const Rational& lead = d.t[0].second;
    if (lead != 1) {
        Rational inv = Rational(1) / lead;
        n = p_scale(n, inv);
        d = p_scale(d, inv);
    }
    return Ratio{std::move(n), std::move(d)};
}

inline Ratio r_const(const Rational& c) { return Ratio{p_const(c), p_one()}; }
inline Ratio r_one() { return r_const(1); }
inline Ratio r_zero() { return Ratio{{}, p_one()}; }

inline Ratio r_var(const std::string& name) {
    return Ratio{p_atom(Atom{AtomKind::Var, name, {}, nullptr, nullptr}, 1), p_one()};
}

inline bool is_zero(const Ratio& r) { return r.num.t.empty(); }
inline bool is_one(const Ratio& r) { return is_one(r.num) && is_one(r.den); }

inline Ratio r_add(const Ratio& a, const Ratio& b) {
    if (cmp(a.den, b.den) == 0)
        return r_norm(p_add(a.num, b.num), a.den);
    return r_norm(p_add(p_mul(a.num, b.den), p_mul(b.num, a.den)),
                  p_mul(a.den, b.den));
}

inline Ratio r_neg(const Ratio& a) { return Ratio{p_neg(a.num), a.den}; }
inline Ratio r_sub(const Ratio& a, const Ratio& b) { return r_add(a, r_neg(b)); }

inline Ratio r_mul(const Ratio& a, const Ratio& b) {
    return r_norm(p_mul(a.num, b.num), p_mul(a.den, b.den));
}

inline Ratio r_scale(const Ratio& a, const Rational& c) {
    return c == 0 ? r_zero() : Ratio{p_scale(a.num, c), a.den};
}

inline MonoMul mono_mul(const Mono& a, const Mono& b) {
    MonoMul out;
    Ratio exp_arg = r_zero();
    bool has_exp = false;

    auto feed = [&](const Atom& at, const Rational& e) {
        if (at.kind == AtomKind::Fn && at.fn == FnKind::Exp) {
            Ratio scaled = e == 1 ? *at.arg : r_scale(*at.arg, e);
            exp_arg = has_exp ? r_add(exp_arg, scaled) : scaled;
            has_exp = true;
            return;
        }
        out.m.f.push_back({at, e});
    };

    std::size_t i = 0, j = 0;
    while (i < a.f.size() && j < b.f.size()) {
        int c = cmp(a.f[i].first, b.f[j].first);
        if (c < 0) feed(a.f[i].first, a.f[i].second), ++i;
        else if (c > 0) feed(b.f[j].first, b.f[j].second), ++j;
        else {
            Rational e = a.f[i].second + b.f[j].second;
            const Atom& at = a.f[i].first;
            if (at.kind == AtomKind::Pow && e >= 1) {
                out.expand.push_back(std::make_shared<const Poly>(*at.base));
                e -= 1;
            }
            if (e != 0) feed(at, e);
            ++i; ++j;
        }
    }
    while (i < a.f.size()) feed(a.f[i].first, a.f[i].second), ++i;
    while (j < b.f.size()) feed(b.f[j].first, b.f[j].second), ++j;

    if (has_exp && !is_zero(exp_arg)) {
        out.m.f.push_back({Atom{AtomKind::Fn, {}, FnKind::Exp,
                                std::make_shared<const Ratio>(exp_arg), nullptr},
                           Rational(1)});
        std::sort(out.m.f.begin(), out.m.f.end(),
                  [](const auto& x, const auto& y) { return cmp(x.first, y.first) < 0; });
    }
    return out;
}

inline Poly p_mul(const Poly& a, const Poly& b) {
    std::map<Mono, Rational, MonoLess> acc;
    Poly hard;
    for (const auto& [ma, ca] : a.t) {
        for (const auto& [mb, cb] : b.t) {
            MonoMul r = mono_mul(ma, mb);
            Rational c = ca * cb;
            if (r.expand.empty()) {
                auto [it, fresh] = acc.try_emplace(std::move(r.m), c);
                if (!fresh && (it->second += c) == 0) acc.erase(it);
            } else {
                Poly piece{{{std::move(r.m), c}}};
                for (const auto& base : r.expand) piece = p_mul(piece, *base);
                hard = p_add(hard, piece);
            }
        }
    }
    Poly out;
    out.t.assign(acc.begin(), acc.end());
    if (!hard.t.empty()) out = p_add(out, hard);
    return out;
}

// Rational content with the sign of the leading coefficient; the primitive
// part has integer coefficients, positive lead, and content 1.
inline Rational content(const Poly& p) {
    Integer g = 0, l = 1;
    for (const auto& [m, c] : p.t) {
        g = gcd(g, num(c) < 0 ? Integer(-num(c)) : num(c));
        l = lcm(l, den(c));
    }
    Rational r(g, l);
    return p.t[0].second < 0 ? Rational(-r) : r;
}

Ratio r_pow_poly(const Poly& p, const Rational& q);

inline Ratio const_pow(const Rational& c, const Rational& q) {
    if (c == 1 || q == 0) return r_one();
    if (c == 0) {
        if (q > 0) return r_zero();
        throw EvaluationDomainError("zero raised to a nonpositive power");
    }
    if (is_integer(q)) return r_const(rpow(c, to_long(num(q))));
    if (auto root = exact_root(c, static_cast<unsigned long>(to_long(den(q)))))
        return r_const(rpow(*root, to_long(num(q))));
    Integer fl = rfloor(q);
    Rational frac = q - Rational(fl);
    Ratio out = r_const(rpow(c, to_long(fl)));
    Atom a{AtomKind::Pow, {}, {}, nullptr, std::make_shared<const Poly>(p_const(c))};
    return r_mul(out, Ratio{p_atom(std::move(a), frac), p_one()});
}

inline Ratio whole_power(const Poly& base, long n) {
    if (n == 0) return r_one();
    if (n > 0) return r_norm(p_powu(base, static_cast<unsigned long>(n)), p_one());
    return r_norm(p_one(), p_powu(base, static_cast<unsigned long>(-n)));
}

inline Ratio r_pow_poly(const Poly& p, const Rational& q) {
    if (p.t.empty()) {
        if (q > 0) return r_zero();
        throw EvaluationDomainError("zero raised to a nonpositive power");
    }
    if (p.t.size() == 1) {
        const auto& [m, c] = p.t[0];
        Ratio out = const_pow(c, q);
        for (const auto& [at, e] : m.f) {
            Rational combined = e * q;
            if (combined == 0) continue;
            switch (at.kind) {
                case AtomKind::Var:
                    out = r_mul(out, Ratio{p_atom(at, combined), p_one()});
                    break;
                case AtomKind::Fn:
                    if (at.fn == FnKind::Exp) {
                        out = r_mul(out, r_fn(FnKind::Exp, r_scale(*at.arg, combined)));
                    } else {
                        out = r_mul(out, Ratio{p_atom(at, combined), p_one()});
                    }
                    break;
                case AtomKind::Pow: {
                    Integer fl = rfloor(combined);
                    Rational frac = combined - Rational(fl);
                    if (fl != 0) out = r_mul(out, whole_power(*at.base, to_long(fl)));
                    if (frac != 0) out = r_mul(out, Ratio{p_atom(at, frac), p_one()});
                    break;
                }
            }
        }
        return out;
    }
    Rational rho = content(p);
    Poly prim = p_scale(p, Rational(1) / rho);
    Ratio out = const_pow(rho, q);
    Integer fl = rfloor(q);
    Rational frac = q - Rational(fl);
    if (fl != 0) out = r_mul(out, whole_power(prim, to_long(fl)));
    if (frac != 0) {
        Atom a{AtomKind::Pow, {}, {}, nullptr, std::make_shared<const Poly>(std::move(prim))};
        out = r_mul(out, Ratio{p_atom(std::move(a), frac), p_one()});
    }
    return out;
}

inline Ratio r_pow(const Ratio& u, const Rational& q) {
    if (q == 0) return r_one();
    if (q == 1) return u;
    if (u.num.t.empty()) {
        if (q > 0) return r_zero();
        throw EvaluationDomainError("division by zero");
    }
    if (is_integer(q) && q > 0) {
        long n = to_long(num(q));
        return r_norm(p_powu(u.num, n), p_powu(u.den, n));
    }
    return r_mul(r_pow_poly(u.num, q), r_pow_poly(u.den, Rational(-q)));
}

inline Ratio r_div(const Ratio& a, const Ratio& b) {
    return r_mul(a, r_pow(b, -1));
}

inline Ratio r_fn(FnKind f, const Ratio& u) {
    switch (f) {
        case FnKind::Exp:
            if (is_zero(u)) return r_one();
            break;
        case FnKind::Log:
            if (is_one(u)) return r_zero();
            break;
        case FnKind::Sin:
            if (is_zero(u)) return r_zero();
            break;
        case FnKind::Cos:
            if (is_zero(u)) return r_one();
            break;
    }
    Atom a{AtomKind::Fn, {}, f, std::make_shared<const Ratio>(u), nullptr};
    return Ratio{p_atom(std::move(a), 1), p_one()};
}

inline Ratio canonical(const Expr& e) {
    switch (e.op()) {
        case Op::Constant: return r_const(e.value());
        case Op::Variable: return r_var(e.name());
        case Op::Sum: {
            Ratio r = r_zero();
            for (const auto& k : e.children()) r = r_add(r, canonical(k));
            return r;
        }
        case Op::Product: {
            Ratio r = r_one();
            for (const auto& k : e.children()) r = r_mul(r, canonical(k));
            return r;
        }
        case Op::Power: return r_pow(canonical(e.child()), e.value());
        case Op::Exp: return r_fn(FnKind::Exp, canonical(e.child()));
        case Op::Log: return r_fn(FnKind::Log, canonical(e.child()));
        case Op::Sin: return r_fn(FnKind::Sin, canonical(e.child()));
        case Op::Cos: return r_fn(FnKind::Cos, canonical(e.child()));
    }
    throw Error("unreachable");
}

Expr poly_to_expr(const Poly& p);
Expr to_expr(const Ratio& r);

inline Expr atom_to_expr(const Atom& a) {
    switch (a.kind) {
        case AtomKind::Var: return variable(a.var);
        case AtomKind::Fn: {
            Expr arg = to_expr(*a.arg);
            switch (a.fn) {
                case FnKind::Exp: return diffsym::exp(std::move(arg));
                case FnKind::Log: return diffsym::log(std::move(arg));
                case FnKind::Sin: return diffsym::sin(std::move(arg));
                case FnKind::Cos: return diffsym::cos(std::move(arg));
            }
            break;
        }
        case AtomKind::Pow: return poly_to_expr(*a.base);
    }
    throw Error("unreachable");
}

inline Expr term_to_expr(const Mono& m, const Rational& c) {
    std::vector<Expr> factors;
    if (c != 1 || m.f.empty()) factors.push_back(constant(c));
    for (const auto& [at, e] : m.f) {
        Expr base = atom_to_expr(at);
        factors.push_back(e == 1 ? std::move(base) : pow(std::move(base), e));
    }
    return product(std::move(factors));
}

inline Expr poly_to_expr(const Poly& p) {
    if (p.t.empty()) return constant(0);
    std::vector<Expr> terms;
    terms.reserve(p.t.size());
    for (const auto& [m, c] : p.t) terms.push_back(term_to_expr(m, c));
    return sum(std::move(terms));
}

inline Expr to_expr(const Ratio& r) {
    Expr n = poly_to_expr(r.num);
    if (is_one(r.den)) return n;
    return product({std::move(n), pow(poly_to_expr(r.den), -1)});
}

}  // namespace canon

inline canon::Ratio canonical(const Expr& e) { return canon::canonical(e); }

// Canonical rewrite of an expression: sums of sorted monomials over a monic
// denominator, exact rational arithmetic throughout.
inline Expr normalize(const Expr& e) { return canon::to_expr(canon::canonical(e)); }

// Exact partial derivative, returned in canonical form.
inline Expr diff(const Expr& e, const std::string& v) {
    return normalize(diff_raw(e, v));
}

inline Expr diff(const Expr& e, const std::string& v, const CoordinateSystem& cs) {
    if (!cs.contains(v)) throw UnknownVariable(v);
    return diff(e, v);
}

struct ZeroResult {
    bool zero;
    bool probabilistic;  // true when the verdict rests on numeric probing
};

namespace detail {

inline bool vars_only(const canon::Poly& p) {
    for (const auto& [m, c] : p.t)
        for (const auto& [at, e] : m.f)
            if (at.kind != canon::AtomKind::Var) return false;
    return true;
}

}  // namespace detail

// Zero test on the canonical numerator. Pure power products of variables are
// decided exactly (distinct exponent vectors are linearly independent); other
// atoms fall back to 20 random probes with tolerance 1e-9.
inline ZeroResult is_zero_detail(const Expr& e) {
    canon::Ratio r = canonical(e);
    if (r.num.t.empty()) return {true, false};
    if (detail::vars_only(r.num)) return {false, false};

    Expr probe = canon::poly_to_expr(r.num);
    std::set<std::string> vars = variables(probe);
    std::mt19937 rng(0x5EED);
    std::uniform_real_distribution<double> mag(0.1, 2.0);
    int valid = 0;
    for (int attempt = 0; attempt < 400 && valid < 20; ++attempt) {
        Valuation at;
        for (const auto& v : vars) {
            double u = mag(rng);
            if (rng() & 1) u = -u;
            at[v] = u;
        }
        double val;
        try {
            val = eval(probe, at);
        } catch (const EvaluationDomainError&) {
            continue;
        }
        if (!std::isfinite(val)) continue;
        if (std::abs(val) > 1e-9) return {false, true};
        ++valid;
    }
    if (valid == 0)
        throw EvaluationDomainError("zero test could not find evaluable probe points");
    return {true, true};
}

inline bool is_zero(const Expr& e) { return is_zero_detail(e).zero; }

inline bool is_zero(const Expr& e, bool& probabilistic) {
    ZeroResult r = is_zero_detail(e);
    probabilistic |= r.probabilistic;
    return r.zero;
}

}  // namespace diffsym
