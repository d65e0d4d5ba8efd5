#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "coords.hpp"
#include "expr.hpp"

namespace diffsym {
namespace detail {

struct ParseCtx {
    const std::string& src;
    std::size_t pos = 0;
    const std::vector<std::string>& vars;

    void skip_ws() {
        while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t')) ++pos;
    }
    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }
    bool eat(char c) {
        if (peek() == c) { ++pos; return true; }
        return false;
    }
};

inline bool is_function_name(const std::string& s) {
    return s == "exp" || s == "log" || s == "sin" || s == "cos" || s == "sqrt";
}

inline Expr parse_expr(ParseCtx& c);

// NUMBER := digits | digits '.' digits | digits '/' digits; the quotient and
// decimal forms lex as one token and become exact rationals.
inline Rational parse_number(ParseCtx& c) {
    c.skip_ws();
    std::size_t start = c.pos;
    while (c.pos < c.src.size() && std::isdigit(static_cast<unsigned char>(c.src[c.pos]))) ++c.pos;
    Integer intpart(c.src.substr(start, c.pos - start));
    Rational r(intpart);
    if (c.pos < c.src.size() && c.src[c.pos] == '.') {
        ++c.pos;
        std::size_t fs = c.pos;
        while (c.pos < c.src.size() && std::isdigit(static_cast<unsigned char>(c.src[c.pos]))) ++c.pos;
        if (c.pos == fs) throw SyntaxError("expected digits after decimal point", c.pos);
        Integer frac(c.src.substr(fs, c.pos - fs));
        r += Rational(frac, ipow(Integer(10), c.pos - fs));
    } else if (c.pos + 1 < c.src.size() && c.src[c.pos] == '/' &&
               std::isdigit(static_cast<unsigned char>(c.src[c.pos + 1]))) {
        ++c.pos;
        std::size_t ds = c.pos;
        while (c.pos < c.src.size() && std::isdigit(static_cast<unsigned char>(c.src[c.pos]))) ++c.pos;
        Integer d(c.src.substr(ds, c.pos - ds));
        if (d == 0) throw SyntaxError("zero denominator in rational literal", ds);
        r /= Rational(d);
    }
    return r;
}

inline std::string parse_ident(ParseCtx& c) {
    c.skip_ws();
    std::size_t start = c.pos;
    while (c.pos < c.src.size() &&
           (std::isalnum(static_cast<unsigned char>(c.src[c.pos])) || c.src[c.pos] == '_'))
        ++c.pos;
    return c.src.substr(start, c.pos - start);
}

inline Expr parse_atom(ParseCtx& c) {
    char ch = c.peek();
    if (ch == '(') {
        ++c.pos;
        Expr e = parse_expr(c);
        if (!c.eat(')')) throw SyntaxError("expected ')'", c.pos);
        return e;
    }
    if (std::isdigit(static_cast<unsigned char>(ch))) return constant(parse_number(c));
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
        std::size_t at = c.pos;
        std::string id = parse_ident(c);
        if (c.peek() == '(') {
            if (!is_function_name(id)) throw SyntaxError("unknown function '" + id + "'", at);
            ++c.pos;
            Expr arg = parse_expr(c);
            if (!c.eat(')')) throw SyntaxError("expected ')'", c.pos);
            if (id == "exp") return exp(std::move(arg));
            if (id == "log") return log(std::move(arg));
            if (id == "sin") return sin(std::move(arg));
            if (id == "cos") return cos(std::move(arg));
            return sqrt(std::move(arg));
        }
        if (is_function_name(id))
            throw SyntaxError("function name '" + id + "' needs an argument list", at);
        for (const auto& v : c.vars)
            if (v == id) return variable(id);
        throw UnknownVariable(id);
    }
    throw SyntaxError("unexpected character", c.pos);
}

// exponent := NUMBER | '(' expr ')' and must fold to a rational constant
inline Expr parse_power(ParseCtx& c) {
    Expr base = parse_atom(c);
    if (!c.eat('^')) return base;
    char ch = c.peek();
    if (std::isdigit(static_cast<unsigned char>(ch)))
        return pow(std::move(base), parse_number(c));
    if (ch == '(') {
        std::size_t at = c.pos;
        ++c.pos;
        Expr e = parse_expr(c);
        if (!c.eat(')')) throw SyntaxError("expected ')'", c.pos);
        if (!e.is_constant())
            throw SyntaxError("exponent must be a rational constant", at);
        return pow(std::move(base), e.value());
    }
    throw SyntaxError("expected exponent", c.pos);
}

inline Expr parse_unary(ParseCtx& c) {
    if (c.peek() == '-') {
        ++c.pos;
        return -parse_unary(c);
    }
    return parse_power(c);
}

inline Expr parse_term(ParseCtx& c) {
    Expr e = parse_unary(c);
    for (;;) {
        char ch = c.peek();
        if (ch == '*') {
            ++c.pos;
            e = std::move(e) * parse_unary(c);
        } else if (ch == '/') {
            ++c.pos;
            e = std::move(e) / parse_unary(c);
        } else {
            return e;
        }
    }
}

inline Expr parse_expr(ParseCtx& c) {
    Expr e = parse_term(c);
    for (;;) {
        char ch = c.peek();
        if (ch == '+') {
            ++c.pos;
            e = std::move(e) + parse_term(c);
        } else if (ch == '-') {
            ++c.pos;
            e = std::move(e) - parse_term(c);
        } else {
            return e;
        }
    }
}

}  // namespace detail

inline Expr parse_expr(const std::string& src, const std::vector<std::string>& vars) {
    detail::ParseCtx c{src, 0, vars};
    Expr e = detail::parse_expr(c);
    c.skip_ws();
    if (c.pos != src.size()) throw SyntaxError("unexpected trailing input", c.pos);
    return e;
}

inline Expr parse_expr(const std::string& src, const CoordinateSystem& cs) {
    return parse_expr(src, cs.names());
}

}  // namespace diffsym
