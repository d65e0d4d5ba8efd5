#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rational.hpp"

namespace diffsym {

enum class Op { Constant, Variable, Sum, Product, Power, Exp, Log, Sin, Cos };

class Expr;
namespace detail {
struct Node {
    Op op;
    Rational value;           // Constant payload, or Power exponent
    std::string name;         // Variable payload
    std::vector<Expr> kids;
};
}  // namespace detail

// Immutable expression handle. Sums and products are n-ary; Power has one
// child and a rational exponent; there is no sqrt node (desugared to ^(1/2)).
class Expr {
public:
    Expr() : Expr(Rational(0)) {}
    explicit Expr(Rational c)
        : p_(std::make_shared<const detail::Node>(
              detail::Node{Op::Constant, std::move(c), {}, {}})) {}
    explicit Expr(long c) : Expr(Rational(c)) {}

    Op op() const { return p_->op; }
    const Rational& value() const { return p_->value; }
    const std::string& name() const { return p_->name; }
    const std::vector<Expr>& children() const { return p_->kids; }
    const Expr& child(std::size_t i = 0) const { return p_->kids.at(i); }

    bool is_constant() const { return p_->op == Op::Constant; }
    bool is_constant(const Rational& c) const { return is_constant() && p_->value == c; }

    static Expr make(Op op, Rational value, std::string name, std::vector<Expr> kids) {
        Expr e;
        e.p_ = std::make_shared<const detail::Node>(
            detail::Node{op, std::move(value), std::move(name), std::move(kids)});
        return e;
    }

    bool same_node(const Expr& o) const { return p_ == o.p_; }

private:
    std::shared_ptr<const detail::Node> p_;
};

inline Expr constant(Rational c) { return Expr(std::move(c)); }
inline Expr constant(long c) { return Expr(c); }

inline Expr variable(std::string name) {
    return Expr::make(Op::Variable, 0, std::move(name), {});
}

// Flattens nested sums and folds literal constants together.
inline Expr sum(std::vector<Expr> terms) {
    std::vector<Expr> kids;
    Rational c = 0;
    for (auto& t : terms) {
        if (t.op() == Op::Sum) {
            for (auto& k : t.children()) {
                if (k.is_constant()) c += k.value();
                else kids.push_back(k);
            }
        } else if (t.is_constant()) {
            c += t.value();
        } else {
            kids.push_back(std::move(t));
        }
    }
    if (c != 0 || kids.empty()) kids.insert(kids.begin(), constant(c));
    if (kids.size() == 1) return kids[0];
    return Expr::make(Op::Sum, 0, {}, std::move(kids));
}

// Flattens nested products; literal constants combine into a leading factor.
inline Expr product(std::vector<Expr> factors) {
    std::vector<Expr> kids;
    Rational c = 1;
    for (auto& f : factors) {
        if (f.op() == Op::Product) {
            for (auto& k : f.children()) {
                if (k.is_constant()) c *= k.value();
                else kids.push_back(k);
            }
        } else if (f.is_constant()) {
            c *= f.value();
        } else {
            kids.push_back(std::move(f));
        }
    }
    if (c == 0) return constant(0);
    if (c != 1 || kids.empty()) kids.insert(kids.begin(), constant(c));
    if (kids.size() == 1) return kids[0];
    return Expr::make(Op::Product, 0, {}, std::move(kids));
}

// Power with a rational exponent. Nested powers collapse multiplicatively;
// constant bases fold only for integer exponents that stay defined.
inline Expr pow(Expr base, Rational e) {
    if (e == 0) return constant(1);
    if (e == 1) return base;
    if (base.op() == Op::Power) {
        Rational combined = base.value() * e;
        return pow(base.child(), combined);
    }
    if (base.is_constant() && is_integer(e)) {
        if (!(base.value() == 0 && e < 0))
            return constant(rpow(base.value(), to_long(num(e))));
    }
    if (base.is_constant(1)) return constant(1);
    return Expr::make(Op::Power, std::move(e), {}, {std::move(base)});
}

inline Expr exp(Expr u) { return Expr::make(Op::Exp, 0, {}, {std::move(u)}); }
inline Expr log(Expr u) { return Expr::make(Op::Log, 0, {}, {std::move(u)}); }
inline Expr sin(Expr u) { return Expr::make(Op::Sin, 0, {}, {std::move(u)}); }
inline Expr cos(Expr u) { return Expr::make(Op::Cos, 0, {}, {std::move(u)}); }
inline Expr sqrt(Expr u) { return pow(std::move(u), Rational(1, 2)); }

inline Expr operator+(Expr a, Expr b) { return sum({std::move(a), std::move(b)}); }
inline Expr operator*(Expr a, Expr b) { return product({std::move(a), std::move(b)}); }
inline Expr operator-(Expr a) { return product({constant(-1), std::move(a)}); }
inline Expr operator-(Expr a, Expr b) { return std::move(a) + (-std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return std::move(a) * pow(std::move(b), -1); }

inline Expr& operator+=(Expr& a, Expr b) { a = a + std::move(b); return a; }
inline Expr& operator*=(Expr& a, Expr b) { a = a * std::move(b); return a; }
inline Expr& operator-=(Expr& a, Expr b) { a = a - std::move(b); return a; }

inline bool equals(const Expr& a, const Expr& b) {
    if (a.same_node(b)) return true;
    if (a.op() != b.op()) return false;
    switch (a.op()) {
        case Op::Constant: return a.value() == b.value();
        case Op::Variable: return a.name() == b.name();
        case Op::Power:
            if (a.value() != b.value()) return false;
            break;
        default: break;
    }
    if (a.children().size() != b.children().size()) return false;
    for (std::size_t i = 0; i < a.children().size(); ++i)
        if (!equals(a.children()[i], b.children()[i])) return false;
    return true;
}

inline void collect_variables(const Expr& e, std::set<std::string>& out) {
    if (e.op() == Op::Variable) out.insert(e.name());
    for (const auto& k : e.children()) collect_variables(k, out);
}

inline std::set<std::string> variables(const Expr& e) {
    std::set<std::string> s;
    collect_variables(e, s);
    return s;
}

using Valuation = std::map<std::string, double>;

inline double eval(const Expr& e, const Valuation& at) {
    switch (e.op()) {
        case Op::Constant: return to_double(e.value());
        case Op::Variable: {
            auto it = at.find(e.name());
            if (it == at.end()) throw UnknownVariable(e.name());
            return it->second;
        }
        case Op::Sum: {
            double s = 0;
            for (const auto& k : e.children()) s += eval(k, at);
            return s;
        }
        case Op::Product: {
            double p = 1;
            for (const auto& k : e.children()) p *= eval(k, at);
            return p;
        }
        case Op::Power: {
            double b = eval(e.child(), at);
            const Rational& q = e.value();
            if (is_integer(q)) {
                if (b == 0 && q < 0)
                    throw EvaluationDomainError("division by zero");
                return std::pow(b, to_double(q));
            }
            if (b < 0)
                throw EvaluationDomainError("fractional power of a negative base");
            if (b == 0 && q < 0)
                throw EvaluationDomainError("division by zero");
            return std::pow(b, to_double(q));
        }
        case Op::Exp: return std::exp(eval(e.child(), at));
        case Op::Log: {
            double u = eval(e.child(), at);
            if (u <= 0) throw EvaluationDomainError("log of a nonpositive number");
            return std::log(u);
        }
        case Op::Sin: return std::sin(eval(e.child(), at));
        case Op::Cos: return std::cos(eval(e.child(), at));
    }
    throw Error("unreachable");
}

// Simultaneous substitution: replacements are not re-substituted.
inline Expr substitute(const Expr& e, const std::map<std::string, Expr>& repl) {
    switch (e.op()) {
        case Op::Constant: return e;
        case Op::Variable: {
            auto it = repl.find(e.name());
            return it == repl.end() ? e : it->second;
        }
        default: break;
    }
    std::vector<Expr> kids;
    kids.reserve(e.children().size());
    for (const auto& k : e.children()) kids.push_back(substitute(k, repl));
    switch (e.op()) {
        case Op::Sum: return sum(std::move(kids));
        case Op::Product: return product(std::move(kids));
        case Op::Power: return pow(std::move(kids[0]), e.value());
        case Op::Exp: return exp(std::move(kids[0]));
        case Op::Log: return log(std::move(kids[0]));
        case Op::Sin: return sin(std::move(kids[0]));
        case Op::Cos: return cos(std::move(kids[0]));
        default: throw Error("unreachable");
    }
}

// Partial derivative by variable name; raw tree, callers normalize.
inline Expr diff_raw(const Expr& e, const std::string& x) {
    switch (e.op()) {
        case Op::Constant: return constant(0);
        case Op::Variable: return e.name() == x ? constant(1) : constant(0);
        case Op::Sum: {
            std::vector<Expr> terms;
            for (const auto& k : e.children()) terms.push_back(diff_raw(k, x));
            return sum(std::move(terms));
        }
        case Op::Product: {
            std::vector<Expr> terms;
            const auto& f = e.children();
            for (std::size_t i = 0; i < f.size(); ++i) {
                std::vector<Expr> factors;
                for (std::size_t j = 0; j < f.size(); ++j)
                    factors.push_back(i == j ? diff_raw(f[j], x) : f[j]);
                terms.push_back(product(std::move(factors)));
            }
            return sum(std::move(terms));
        }
        case Op::Power: {
            const Rational& q = e.value();
            return constant(q) * pow(e.child(), q - 1) * diff_raw(e.child(), x);
        }
        case Op::Exp: return exp(e.child()) * diff_raw(e.child(), x);
        case Op::Log: return diff_raw(e.child(), x) / e.child();
        case Op::Sin: return cos(e.child()) * diff_raw(e.child(), x);
        case Op::Cos: return -(sin(e.child()) * diff_raw(e.child(), x));
    }
    throw Error("unreachable");
}

namespace detail {

inline int precedence(const Expr& e) {
    switch (e.op()) {
        case Op::Sum: return 1;
        case Op::Product: return 2;
        case Op::Power: return 3;
        default: return 4;
    }
}

inline void print_expr(const Expr& e, std::string& out, int parent_prec);

inline void print_paren(const Expr& e, std::string& out, int min_prec) {
    if (precedence(e) <= min_prec) {
        out += '(';
        print_expr(e, out, 0);
        out += ')';
    } else {
        print_expr(e, out, 0);
    }
}

// A product prints its constant lead inline and folds negative-exponent
// factors into a '/' tail so output reparses to the same tree.
inline void print_product(const Expr& e, std::string& out) {
    std::vector<Expr> kids = e.op() == Op::Product
                                 ? e.children()
                                 : std::vector<Expr>{e};
    std::string numpart;
    std::string denpart;
    int nnum = 0, nden = 0;
    Rational c = 1;
    std::size_t i = 0;
    if (!kids.empty() && kids[0].is_constant()) {
        c = kids[0].value();
        i = 1;
    }
    for (; i < kids.size(); ++i) {
        const Expr& k = kids[i];
        if (k.op() == Op::Power && k.value() < 0) {
            if (!denpart.empty()) denpart += '*';
            if (k.value() == -1) print_paren(k.child(), denpart, 2);
            else print_paren(pow(k.child(), -k.value()), denpart, 2);
            ++nden;
        } else {
            if (!numpart.empty()) numpart += '*';
            print_paren(k, numpart, 1);
            ++nnum;
        }
    }
    std::string lead;
    if (c == -1 && nnum + nden > 0) lead = "-";
    else if (c != 1 || nnum + nden == 0) {
        lead = to_string(c);
        if (nnum + nden > 0) lead += numpart.empty() ? "" : "*";
    }
    out += lead;
    if (numpart.empty() && nden > 0) out += "1";
    out += numpart;
    if (nden > 0) {
        out += '/';
        if (nden > 1) { out += '('; out += denpart; out += ')'; }
        else out += denpart;
    }
}

inline void print_expr(const Expr& e, std::string& out, int) {
    switch (e.op()) {
        case Op::Constant: out += to_string(e.value()); return;
        case Op::Variable: out += e.name(); return;
        case Op::Sum: {
            bool first = true;
            for (const auto& k : e.children()) {
                bool neg = (k.is_constant() && k.value() < 0) ||
                           (k.op() == Op::Product && k.children()[0].is_constant() &&
                            k.children()[0].value() < 0);
                if (first) {
                    print_expr(k, out, 1);
                    first = false;
                    continue;
                }
                if (neg) {
                    out += " - ";
                    if (k.is_constant()) out += to_string(-k.value());
                    else {
                        std::vector<Expr> kk = k.children();
                        kk[0] = constant(-kk[0].value());
                        print_product(product(std::move(kk)), out);
                    }
                } else {
                    out += " + ";
                    print_expr(k, out, 1);
                }
            }
            return;
        }
        case Op::Product: print_product(e, out); return;
        case Op::Power: {
            const Rational& q = e.value();
            if (q < 0) {
                // bare reciprocal, printed as the quotient 1/(...)
                print_product(Expr::make(Op::Product, 0, {}, {constant(1), e}), out);
                return;
            }
            bool base_parens = detail::precedence(e.child()) <= 3 ||
                               (e.child().is_constant() &&
                                (e.child().value() < 0 || !is_integer(e.child().value())));
            if (base_parens) {
                out += '(';
                print_expr(e.child(), out, 0);
                out += ')';
            } else {
                print_expr(e.child(), out, 0);
            }
            out += '^';
            if (is_integer(q) && q >= 0) out += to_string(q);
            else { out += '('; out += to_string(q); out += ')'; }
            return;
        }
        case Op::Exp: out += "exp("; print_expr(e.child(), out, 0); out += ')'; return;
        case Op::Log: out += "log("; print_expr(e.child(), out, 0); out += ')'; return;
        case Op::Sin: out += "sin("; print_expr(e.child(), out, 0); out += ')'; return;
        case Op::Cos: out += "cos("; print_expr(e.child(), out, 0); out += ')'; return;
    }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print_expr(e, out, 0);
    return out;
}

}  // namespace diffsym
