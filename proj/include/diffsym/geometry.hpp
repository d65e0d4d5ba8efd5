#pragma once

#include <optional>
#include <vector>

#include "canonical.hpp"
#include "linalg.hpp"

namespace diffsym {

namespace detail {
inline void require_same(const CoordinateSystem& a, const CoordinateSystem& b) {
    if (!(a == b)) throw DimensionMismatch("operands live on different coordinate systems");
}

inline void require_declared(const Expr& e, const CoordinateSystem& cs, const char* what) {
    for (const auto& v : variables(e))
        if (!cs.contains(v))
            throw UnknownVariable(v + std::string(" in ") + what);
}
}  // namespace detail

// Symmetric matrix of expressions, upper triangle stored row-major.
class SymExprMatrix {
public:
    SymExprMatrix() = default;
    explicit SymExprMatrix(std::size_t n) : n_(n), e_(n * (n + 1) / 2, constant(0)) {}

    std::size_t size() const { return n_; }

    const Expr& at(std::size_t i, std::size_t j) const { return e_[idx(i, j)]; }
    void set(std::size_t i, std::size_t j, Expr v) { e_[idx(i, j)] = std::move(v); }

private:
    std::size_t idx(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        return i * n_ - i * (i - 1) / 2 + (j - i);
    }

    std::size_t n_ = 0;
    std::vector<Expr> e_;
};

// First-order vector field on extended space, component 0 along time.
struct VectorField {
    CoordinateSystem cs;
    std::vector<Expr> comp;

    VectorField(CoordinateSystem cs_, std::vector<Expr> comp_)
        : cs(std::move(cs_)), comp(std::move(comp_)) {
        if (comp.size() != cs.size())
            throw DimensionMismatch("vector field needs one component per coordinate");
        for (auto& c : comp) {
            detail::require_declared(c, cs, "vector field component");
            c = normalize(c);
        }
    }
};

// Projectable field: spatial components free, the time component depends on
// time alone so it pushes down to a field on the time axis.
class ProjectableVectorField {
public:
    ProjectableVectorField(CoordinateSystem cs, std::vector<Expr> phi, Expr tau)
        : cs_(std::move(cs)), phi_(std::move(phi)), tau_(std::move(tau)) {
        if (phi_.size() != cs_.dim())
            throw DimensionMismatch("projectable field needs one spatial component per coordinate");
        for (auto& p : phi_) {
            detail::require_declared(p, cs_, "spatial component");
            p = normalize(p);
        }
        detail::require_declared(tau_, cs_, "time component");
        for (const auto& v : variables(tau_))
            if (v != cs_.time())
                throw DimensionMismatch("time component depends on spatial variable '" + v + "'");
        tau_ = normalize(tau_);
    }

    const CoordinateSystem& coords() const { return cs_; }
    const Expr& tau() const { return tau_; }
    const Expr& phi(std::size_t i) const { return phi_.at(i); }  // 0-based spatial
    const std::vector<Expr>& phi() const { return phi_; }

    // components on extended space, [tau, phi^1..phi^m]
    std::vector<Expr> full() const {
        std::vector<Expr> v;
        v.reserve(cs_.size());
        v.push_back(tau_);
        for (const auto& p : phi_) v.push_back(p);
        return v;
    }

    VectorField as_vector_field() const { return VectorField(cs_, full()); }

private:
    CoordinateSystem cs_;
    std::vector<Expr> phi_;
    Expr tau_;
};

// L = A^{ab} d_{ab} + b^a d_a with A symmetric and both indices summed freely.
class Diffusor {
public:
    Diffusor(CoordinateSystem cs, SymExprMatrix a, std::vector<Expr> b)
        : cs_(std::move(cs)), a_(std::move(a)), b_(std::move(b)) {
        if (a_.size() != cs_.size() || b_.size() != cs_.size())
            throw DimensionMismatch("diffusor coefficient shapes do not match coordinates");
        for (std::size_t i = 0; i < cs_.size(); ++i)
            for (std::size_t j = i; j < cs_.size(); ++j) {
                detail::require_declared(a_.at(i, j), cs_, "diffusion coefficient");
                a_.set(i, j, normalize(a_.at(i, j)));
            }
        for (auto& e : b_) {
            detail::require_declared(e, cs_, "drift coefficient");
            e = normalize(e);
        }
    }

    // standard good form: unit time drift, no second-order time row
    static Diffusor standard(const CoordinateSystem& cs, const SymExprMatrix& a_spatial,
                             const std::vector<Expr>& b_spatial) {
        std::size_t m = cs.dim();
        if (a_spatial.size() != m || b_spatial.size() != m)
            throw DimensionMismatch("spatial coefficient shapes do not match coordinates");
        SymExprMatrix a(m + 1);
        std::vector<Expr> b(m + 1, constant(1));
        for (std::size_t i = 0; i < m; ++i) {
            b[i + 1] = b_spatial[i];
            for (std::size_t j = i; j < m; ++j) a.set(i + 1, j + 1, a_spatial.at(i, j));
        }
        return Diffusor(cs, a, b);
    }

    const CoordinateSystem& coords() const { return cs_; }
    const Expr& a(std::size_t i, std::size_t j) const { return a_.at(i, j); }
    const Expr& b(std::size_t i) const { return b_.at(i); }
    const SymExprMatrix& a() const { return a_; }
    const std::vector<Expr>& b() const { return b_; }

    bool is_standard() const {
        if (!is_zero(b_[0] - constant(1))) return false;
        for (std::size_t j = 0; j < cs_.size(); ++j)
            if (!is_zero(a_.at(0, j))) return false;
        return true;
    }

private:
    CoordinateSystem cs_;
    SymExprMatrix a_;
    std::vector<Expr> b_;
};

// lambda = lambda_a d2x^a + lambda_{ab} dx^a.dx^b, second part symmetric.
class Codiffusor {
public:
    Codiffusor(CoordinateSystem cs, std::vector<Expr> first, SymExprMatrix second)
        : cs_(std::move(cs)), first_(std::move(first)), second_(std::move(second)) {
        if (first_.size() != cs_.size() || second_.size() != cs_.size())
            throw DimensionMismatch("codiffusor coefficient shapes do not match coordinates");
        for (auto& e : first_) {
            detail::require_declared(e, cs_, "first-order coefficient");
            e = normalize(e);
        }
        for (std::size_t i = 0; i < cs_.size(); ++i)
            for (std::size_t j = i; j < cs_.size(); ++j) {
                detail::require_declared(second_.at(i, j), cs_, "second-order coefficient");
                second_.set(i, j, normalize(second_.at(i, j)));
            }
    }

    static Codiffusor zero(const CoordinateSystem& cs) {
        return Codiffusor(cs, std::vector<Expr>(cs.size(), constant(0)),
                          SymExprMatrix(cs.size()));
    }

    const CoordinateSystem& coords() const { return cs_; }
    const Expr& first(std::size_t i) const { return first_.at(i); }
    const Expr& second(std::size_t i, std::size_t j) const { return second_.at(i, j); }
    const std::vector<Expr>& first() const { return first_; }
    const SymExprMatrix& second() const { return second_; }

private:
    CoordinateSystem cs_;
    std::vector<Expr> first_;
    SymExprMatrix second_;
};

// ---- arithmetic on coefficient arrays ----

inline Codiffusor operator+(const Codiffusor& a, const Codiffusor& b) {
    detail::require_same(a.coords(), b.coords());
    std::size_t n = a.coords().size();
    std::vector<Expr> first(n);
    SymExprMatrix second(n);
    for (std::size_t i = 0; i < n; ++i) {
        first[i] = a.first(i) + b.first(i);
        for (std::size_t j = i; j < n; ++j) second.set(i, j, a.second(i, j) + b.second(i, j));
    }
    return Codiffusor(a.coords(), std::move(first), std::move(second));
}

inline Codiffusor operator*(const Expr& f, const Codiffusor& a) {
    std::size_t n = a.coords().size();
    std::vector<Expr> first(n);
    SymExprMatrix second(n);
    for (std::size_t i = 0; i < n; ++i) {
        first[i] = f * a.first(i);
        for (std::size_t j = i; j < n; ++j) second.set(i, j, f * a.second(i, j));
    }
    return Codiffusor(a.coords(), std::move(first), std::move(second));
}

inline Codiffusor operator-(const Codiffusor& a, const Codiffusor& b) {
    return a + (constant(-1) * b);
}

inline Diffusor operator+(const Diffusor& a, const Diffusor& b) {
    detail::require_same(a.coords(), b.coords());
    std::size_t n = a.coords().size();
    SymExprMatrix aa(n);
    std::vector<Expr> bb(n);
    for (std::size_t i = 0; i < n; ++i) {
        bb[i] = a.b(i) + b.b(i);
        for (std::size_t j = i; j < n; ++j) aa.set(i, j, a.a(i, j) + b.a(i, j));
    }
    return Diffusor(a.coords(), std::move(aa), std::move(bb));
}

inline Diffusor operator*(const Expr& f, const Diffusor& a) {
    std::size_t n = a.coords().size();
    SymExprMatrix aa(n);
    std::vector<Expr> bb(n);
    for (std::size_t i = 0; i < n; ++i) {
        bb[i] = f * a.b(i);
        for (std::size_t j = i; j < n; ++j) aa.set(i, j, f * a.a(i, j));
    }
    return Diffusor(a.coords(), std::move(aa), std::move(bb));
}

inline Diffusor operator-(const Diffusor& a, const Diffusor& b) {
    return a + (constant(-1) * b);
}

inline bool codiffusor_is_zero(const Codiffusor& a) {
    std::size_t n = a.coords().size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_zero(a.first(i))) return false;
        for (std::size_t j = i; j < n; ++j)
            if (!is_zero(a.second(i, j))) return false;
    }
    return true;
}

inline bool diffusor_is_zero(const Diffusor& a) {
    std::size_t n = a.coords().size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_zero(a.b(i))) return false;
        for (std::size_t j = i; j < n; ++j)
            if (!is_zero(a.a(i, j))) return false;
    }
    return true;
}

// ---- core operations ----

inline Codiffusor second_differential(const Expr& g, const CoordinateSystem& cs) {
    detail::require_declared(g, cs, "function");
    std::size_t n = cs.size();
    std::vector<Expr> first(n);
    SymExprMatrix second(n);
    std::vector<Expr> grads(n);
    for (std::size_t i = 0; i < n; ++i) grads[i] = diff_raw(g, cs.name(i));
    for (std::size_t i = 0; i < n; ++i) {
        first[i] = grads[i];
        for (std::size_t j = i; j < n; ++j) second.set(i, j, diff_raw(grads[i], cs.name(j)));
    }
    return Codiffusor(cs, std::move(first), std::move(second));
}

inline Codiffusor one_form_product(const std::vector<Expr>& omega, const std::vector<Expr>& gamma,
                                   const CoordinateSystem& cs) {
    std::size_t n = cs.size();
    if (omega.size() != n || gamma.size() != n)
        throw DimensionMismatch("one-form components do not match coordinates");
    SymExprMatrix second(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            second.set(i, j, constant(Rational(1, 2)) * (omega[i] * gamma[j] + omega[j] * gamma[i]));
    return Codiffusor(cs, std::vector<Expr>(n, constant(0)), std::move(second));
}

// <lambda, L> with both second-order indices summed independently.
inline Expr pair(const Codiffusor& lam, const Diffusor& l) {
    detail::require_same(lam.coords(), l.coords());
    std::size_t n = l.coords().size();
    Expr acc = constant(0);
    for (std::size_t i = 0; i < n; ++i) {
        acc += lam.first(i) * l.b(i);
        acc += lam.second(i, i) * l.a(i, i);
        for (std::size_t j = i + 1; j < n; ++j)
            acc += constant(2) * lam.second(i, j) * l.a(i, j);
    }
    return normalize(acc);
}

inline Expr apply_diffusor(const Diffusor& l, const Expr& g) {
    return pair(second_differential(g, l.coords()), l);
}

inline Diffusor diffusor_from_fields(const VectorField& x, const VectorField& y) {
    detail::require_same(x.cs, y.cs);
    std::size_t n = x.cs.size();
    SymExprMatrix a(n);
    std::vector<Expr> b(n, constant(0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j)
            a.set(i, j, constant(Rational(1, 2)) * (x.comp[i] * y.comp[j] + x.comp[j] * y.comp[i]));
        Expr acc = constant(0);
        for (std::size_t k = 0; k < n; ++k)
            acc += x.comp[k] * diff_raw(y.comp[i], x.cs.name(k));
        b[i] = acc;
    }
    return Diffusor(x.cs, std::move(a), std::move(b));
}

inline VectorField bracket(const VectorField& x, const VectorField& y) {
    detail::require_same(x.cs, y.cs);
    std::size_t n = x.cs.size();
    std::vector<Expr> comp(n);
    for (std::size_t i = 0; i < n; ++i) {
        Expr acc = constant(0);
        for (std::size_t k = 0; k < n; ++k)
            acc += x.comp[k] * diff_raw(y.comp[i], x.cs.name(k)) -
                   y.comp[k] * diff_raw(x.comp[i], x.cs.name(k));
        comp[i] = acc;
    }
    return VectorField(x.cs, std::move(comp));
}

inline Expr lie_derivative_function(const ProjectableVectorField& x, const Expr& g) {
    const CoordinateSystem& cs = x.coords();
    std::vector<Expr> xc = x.full();
    Expr acc = constant(0);
    for (std::size_t k = 0; k < cs.size(); ++k) acc += xc[k] * diff_raw(g, cs.name(k));
    return normalize(acc);
}

inline Diffusor lie_derivative_diffusor(const ProjectableVectorField& x, const Diffusor& l) {
    detail::require_same(x.coords(), l.coords());
    const CoordinateSystem& cs = l.coords();
    std::size_t n = cs.size();
    std::vector<Expr> xc = x.full();
    SymExprMatrix a(n);
    std::vector<Expr> b(n);
    for (std::size_t al = 0; al < n; ++al) {
        for (std::size_t be = al; be < n; ++be) {
            Expr acc = constant(0);
            for (std::size_t k = 0; k < n; ++k) {
                acc += xc[k] * diff_raw(l.a(al, be), cs.name(k));
                acc -= l.a(al, k) * diff_raw(xc[be], cs.name(k));
                acc -= l.a(k, be) * diff_raw(xc[al], cs.name(k));
            }
            a.set(al, be, acc);
        }
        Expr acc = constant(0);
        for (std::size_t k = 0; k < n; ++k) {
            acc += xc[k] * diff_raw(l.b(al), cs.name(k));
            acc -= l.b(k) * diff_raw(xc[al], cs.name(k));
            for (std::size_t j = 0; j < n; ++j)
                acc -= l.a(j, k) * diff_raw(diff_raw(xc[al], cs.name(j)), cs.name(k));
        }
        b[al] = acc;
    }
    return Diffusor(cs, std::move(a), std::move(b));
}

inline Codiffusor lie_derivative_codiffusor(const ProjectableVectorField& x, const Codiffusor& lam) {
    detail::require_same(x.coords(), lam.coords());
    const CoordinateSystem& cs = lam.coords();
    std::size_t n = cs.size();
    std::vector<Expr> xc = x.full();
    std::vector<Expr> first(n);
    SymExprMatrix second(n);
    for (std::size_t i = 0; i < n; ++i) {
        Expr acc = constant(0);
        for (std::size_t k = 0; k < n; ++k) {
            acc += xc[k] * diff_raw(lam.first(i), cs.name(k));
            acc += lam.first(k) * diff_raw(xc[k], cs.name(i));
        }
        first[i] = acc;
        for (std::size_t j = i; j < n; ++j) {
            Expr s = constant(0);
            for (std::size_t k = 0; k < n; ++k) {
                s += xc[k] * diff_raw(lam.second(i, j), cs.name(k));
                s += lam.second(i, k) * diff_raw(xc[k], cs.name(j));
                s += lam.second(k, j) * diff_raw(xc[k], cs.name(i));
                s += lam.first(k) * diff_raw(diff_raw(xc[k], cs.name(i)), cs.name(j));
            }
            second.set(i, j, s);
        }
    }
    return Codiffusor(cs, std::move(first), std::move(second));
}

// one-forms pick up a single gradient term
inline std::vector<Expr> lie_derivative_one_form(const ProjectableVectorField& x,
                                                 const std::vector<Expr>& omega) {
    const CoordinateSystem& cs = x.coords();
    std::size_t n = cs.size();
    if (omega.size() != n) throw DimensionMismatch("one-form components do not match coordinates");
    std::vector<Expr> xc = x.full();
    std::vector<Expr> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Expr acc = constant(0);
        for (std::size_t k = 0; k < n; ++k) {
            acc += xc[k] * diff_raw(omega[i], cs.name(k));
            acc += omega[k] * diff_raw(xc[k], cs.name(i));
        }
        out[i] = normalize(acc);
    }
    return out;
}

// Projectable change of variables (f, Phi): time maps through time alone.
class Diffeomorphism {
public:
    Diffeomorphism(CoordinateSystem source, CoordinateSystem target, Expr f,
                   std::vector<Expr> phi)
        : source_(std::move(source)), target_(std::move(target)), f_(std::move(f)),
          phi_(std::move(phi)) {
        if (source_.dim() != target_.dim())
            throw DimensionMismatch("source and target dimensions differ");
        if (phi_.size() != source_.dim())
            throw DimensionMismatch("transformation needs one spatial map per coordinate");
        detail::require_declared(f_, source_, "time map");
        for (const auto& v : variables(f_))
            if (v != source_.time())
                throw DimensionMismatch("time map depends on spatial variable '" + v + "'");
        f_ = normalize(f_);
        for (auto& p : phi_) {
            detail::require_declared(p, source_, "spatial map");
            p = normalize(p);
        }
    }

    Diffeomorphism(CoordinateSystem source, CoordinateSystem target, Expr f,
                   std::vector<Expr> phi, Expr f_inverse, std::vector<Expr> phi_inverse)
        : Diffeomorphism(std::move(source), std::move(target), std::move(f), std::move(phi)) {
        finv_ = normalize(std::move(f_inverse));
        phinv_ = std::move(phi_inverse);
        if (phinv_.size() != source_.dim())
            throw DimensionMismatch("inverse needs one spatial map per coordinate");
        detail::require_declared(finv_, target_, "inverse time map");
        for (auto& p : phinv_) {
            detail::require_declared(p, target_, "inverse spatial map");
            p = normalize(p);
        }
        has_inverse_ = true;
        validate_roundtrip();
    }

    const CoordinateSystem& source() const { return source_; }
    const CoordinateSystem& target() const { return target_; }
    const Expr& f() const { return f_; }
    const Expr& phi(std::size_t i) const { return phi_.at(i); }
    const std::vector<Expr>& phi() const { return phi_; }
    bool has_inverse() const { return has_inverse_; }

    // components of the full map, [f, Phi^1..Phi^m]
    std::vector<Expr> full() const {
        std::vector<Expr> v{f_};
        for (const auto& p : phi_) v.push_back(p);
        return v;
    }

    // substitution target-name -> forward component (for pulling functions back)
    std::map<std::string, Expr> forward_subst() const {
        std::map<std::string, Expr> m;
        m[target_.time()] = f_;
        for (std::size_t i = 0; i < source_.dim(); ++i) m[target_.name(i + 1)] = phi_[i];
        return m;
    }

    std::map<std::string, Expr> inverse_subst() const {
        require_inverse();
        std::map<std::string, Expr> m;
        m[source_.time()] = finv_;
        for (std::size_t i = 0; i < source_.dim(); ++i) m[source_.name(i + 1)] = phinv_[i];
        return m;
    }

    Diffeomorphism inverse() const {
        require_inverse();
        Diffeomorphism inv(target_, source_, finv_, phinv_);
        inv.finv_ = f_;
        inv.phinv_ = phi_;
        inv.has_inverse_ = true;
        return inv;
    }

    static Diffeomorphism identity(const CoordinateSystem& cs) {
        std::vector<Expr> id;
        for (std::size_t i = 0; i < cs.dim(); ++i) id.push_back(variable(cs.name(i + 1)));
        return Diffeomorphism(cs, cs, variable(cs.time()), id, variable(cs.time()), id);
    }

private:
    void require_inverse() const {
        if (!has_inverse_) throw MissingInverse("transformation has no inverse maps");
    }

    void validate_roundtrip() const {
        auto fwd = forward_subst();
        Expr t_rt = substitute(finv_, fwd);
        if (!is_zero(t_rt - variable(source_.time())))
            throw DimensionMismatch("inverse time map fails the round trip");
        for (std::size_t i = 0; i < source_.dim(); ++i) {
            Expr x_rt = substitute(phinv_[i], fwd);
            if (!is_zero(x_rt - variable(source_.name(i + 1))))
                throw DimensionMismatch("inverse spatial map fails the round trip");
        }
    }

    CoordinateSystem source_, target_;
    Expr f_;
    std::vector<Expr> phi_;
    Expr finv_;
    std::vector<Expr> phinv_;
    bool has_inverse_ = false;
};

inline Expr pullback_function(const Diffeomorphism& phi, const Expr& g) {
    return normalize(substitute(g, phi.forward_subst()));
}

inline Expr pushforward_function(const Diffeomorphism& phi, const Expr& g) {
    return normalize(substitute(g, phi.inverse_subst()));
}

inline std::vector<Expr> pullback_one_form(const Diffeomorphism& phi,
                                           const std::vector<Expr>& omega) {
    const CoordinateSystem& src = phi.source();
    std::size_t n = src.size();
    if (omega.size() != n) throw DimensionMismatch("one-form components do not match coordinates");
    std::vector<Expr> comp = phi.full();
    auto fwd = phi.forward_subst();
    std::vector<Expr> out(n, constant(0));
    for (std::size_t g = 0; g < n; ++g) {
        Expr acc = constant(0);
        for (std::size_t al = 0; al < n; ++al)
            acc += substitute(omega[al], fwd) * diff_raw(comp[al], src.name(g));
        out[g] = normalize(acc);
    }
    return out;
}

// Phi^*(lambda) assembled from Phi^*(lambda_a) d2(Phi^a) and the one-form
// products of the differentials of the components.
inline Codiffusor pullback_codiffusor(const Diffeomorphism& phi, const Codiffusor& lam) {
    detail::require_same(phi.target(), lam.coords());
    const CoordinateSystem& src = phi.source();
    std::size_t n = src.size();
    std::vector<Expr> comp = phi.full();
    auto fwd = phi.forward_subst();

    std::vector<Expr> lam1(n), grad(n * n);
    SymExprMatrix lam2(n);
    for (std::size_t al = 0; al < n; ++al) {
        lam1[al] = substitute(lam.first(al), fwd);
        for (std::size_t g = 0; g < n; ++g)
            grad[al * n + g] = diff_raw(comp[al], src.name(g));
    }

    std::vector<Expr> first(n, constant(0));
    SymExprMatrix second(n);
    for (std::size_t g = 0; g < n; ++g) {
        Expr acc = constant(0);
        for (std::size_t al = 0; al < n; ++al) acc += lam1[al] * grad[al * n + g];
        first[g] = acc;
        for (std::size_t d = g; d < n; ++d) {
            Expr s = constant(0);
            for (std::size_t al = 0; al < n; ++al) {
                s += lam1[al] * diff_raw(grad[al * n + g], src.name(d));
                for (std::size_t be = 0; be < n; ++be)
                    s += substitute(lam.second(al, be), fwd) * grad[al * n + g] * grad[be * n + d];
            }
            second.set(g, d, s);
        }
    }
    return Codiffusor(src, std::move(first), std::move(second));
}

inline Codiffusor pushforward_codiffusor(const Diffeomorphism& phi, const Codiffusor& lam) {
    detail::require_same(phi.source(), lam.coords());
    return pullback_codiffusor(phi.inverse(), lam);
}

// L' with L'(g) = L(g o Phi) o Phi^{-1}; carre-du-champ for the second-order
// part, L applied to the components for the drift.
inline Diffusor pushforward_diffusor(const Diffeomorphism& phi, const Diffusor& l) {
    detail::require_same(phi.source(), l.coords());
    const CoordinateSystem& src = phi.source();
    const CoordinateSystem& tgt = phi.target();
    std::size_t n = src.size();
    std::vector<Expr> comp = phi.full();
    auto inv = phi.inverse_subst();

    std::vector<Expr> grad(n * n);
    for (std::size_t al = 0; al < n; ++al)
        for (std::size_t g = 0; g < n; ++g)
            grad[al * n + g] = diff_raw(comp[al], src.name(g));

    SymExprMatrix a(n);
    std::vector<Expr> b(n);
    for (std::size_t al = 0; al < n; ++al) {
        for (std::size_t be = al; be < n; ++be) {
            Expr acc = constant(0);
            for (std::size_t g = 0; g < n; ++g)
                for (std::size_t d = 0; d < n; ++d)
                    acc += l.a(g, d) * grad[al * n + g] * grad[be * n + d];
            a.set(al, be, substitute(normalize(acc), inv));
        }
        b[al] = substitute(apply_diffusor(l, comp[al]), inv);
    }
    return Diffusor(tgt, std::move(a), std::move(b));
}

inline Diffusor pullback_diffusor(const Diffeomorphism& phi, const Diffusor& l) {
    detail::require_same(phi.target(), l.coords());
    return pushforward_diffusor(phi.inverse(), l);
}

// image of a projectable field, (dPhi X) composed with the inverse
inline ProjectableVectorField pushforward_field(const Diffeomorphism& phi,
                                                const ProjectableVectorField& x) {
    detail::require_same(phi.source(), x.coords());
    const CoordinateSystem& cs = phi.source();
    std::size_t n = cs.size();
    std::vector<Expr> comp = phi.full();
    std::vector<Expr> xc = x.full();
    auto inv = phi.inverse_subst();
    std::vector<Expr> out(n);
    for (std::size_t al = 0; al < n; ++al) {
        Expr acc = constant(0);
        for (std::size_t k = 0; k < n; ++k) acc += xc[k] * diff_raw(comp[al], cs.name(k));
        out[al] = substitute(normalize(acc), inv);
    }
    std::vector<Expr> spatial(out.begin() + 1, out.end());
    return ProjectableVectorField(phi.target(), std::move(spatial), out[0]);
}

// d2g - L(g) d2t, the canonical annihilator element of a standard diffusor.
inline Codiffusor canonical_annihilator_element(const Expr& g, const Diffusor& l) {
    if (!l.is_standard())
        throw NotStandard("canonical annihilator element needs a standard diffusor");
    const CoordinateSystem& cs = l.coords();
    Codiffusor d2g = second_differential(g, cs);
    std::vector<Expr> first = d2g.first();
    first[0] = first[0] - apply_diffusor(l, g);
    return Codiffusor(cs, std::move(first), d2g.second());
}

struct AnnihilatorResult {
    bool member;
    bool probabilistic;
};

inline AnnihilatorResult in_annihilator(const Codiffusor& lam, const Diffusor& l) {
    ZeroResult z = is_zero_detail(pair(lam, l));
    return {z.zero, z.probabilistic};
}

// Numerical PSD probe of the spatial diffusion block at random points.
inline bool good_candidate(const Diffusor& l, int points = 50, double tol = 1e-9) {
    const CoordinateSystem& cs = l.coords();
    std::size_t m = cs.dim();
    std::mt19937 rng(0xD1FF);
    std::uniform_real_distribution<double> mag(0.1, 2.0);
    int valid = 0;
    for (int attempt = 0; attempt < points * 8 && valid < points; ++attempt) {
        Valuation at;
        for (const auto& v : cs.names()) {
            double u = mag(rng);
            at[v] = (rng() & 1) ? u : -u;
        }
        std::vector<double> s(m * m);
        try {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    s[i * m + j] = eval(l.a(i + 1, j + 1), at);
        } catch (const EvaluationDomainError&) {
            continue;
        }
        if (jacobi_min_eigenvalue(s, m) < -tol) return false;
        ++valid;
    }
    if (valid == 0)
        throw EvaluationDomainError("diffusion block could not be probed");
    return true;
}

}  // namespace diffsym
