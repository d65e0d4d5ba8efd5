#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>

#include "error.hpp"

namespace diffsym {

using Integer  = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Integer num(const Rational& q) { return boost::multiprecision::numerator(q); }
inline Integer den(const Rational& q) { return boost::multiprecision::denominator(q); }

inline bool is_integer(const Rational& q) { return den(q) == 1; }

inline double to_double(const Rational& q) { return q.template convert_to<double>(); }

inline long to_long(const Integer& n) { return n.template convert_to<long>(); }

inline std::string to_string(const Rational& q) {
    std::string s = num(q).str();
    if (!is_integer(q)) s += "/" + den(q).str();
    return s;
}

inline Integer ipow(Integer base, unsigned long e) {
    Integer r = 1;
    while (e) {
        if (e & 1) r *= base;
        base *= base;
        e >>= 1;
    }
    return r;
}

// q^n for integer n; throws on 0^negative.
inline Rational rpow(const Rational& q, long n) {
    if (n == 0) return 1;
    if (q == 0) {
        if (n < 0) throw EvaluationDomainError("zero raised to a negative power");
        return 0;
    }
    unsigned long e = n < 0 ? static_cast<unsigned long>(-n) : static_cast<unsigned long>(n);
    Integer pn = ipow(num(q), e), pd = ipow(den(q), e);
    if (n < 0) {
        std::swap(pn, pd);
        if (pd < 0) { pn = -pn; pd = -pd; }
    }
    return Rational(pn, pd);
}

// Exact k-th root of a nonnegative integer, if it exists.
inline std::optional<Integer> exact_root(const Integer& n, unsigned long k) {
    if (n < 0) return std::nullopt;
    if (n == 0 || n == 1 || k == 1) return n;
    Integer lo = 0, hi = 1;
    while (ipow(hi, k) < n) hi <<= 1;
    while (lo < hi) {
        Integer mid = (lo + hi) / 2;
        if (ipow(mid, k) < n) lo = mid + 1; else hi = mid;
    }
    return ipow(lo, k) == n ? std::optional<Integer>(lo) : std::nullopt;
}

// Exact q-th root of a rational, honoring sign (odd roots of negatives exist).
inline std::optional<Rational> exact_root(const Rational& c, unsigned long k) {
    bool neg = c < 0;
    if (neg && k % 2 == 0) return std::nullopt;
    Rational a = neg ? Rational(-c) : c;
    auto rn = exact_root(num(a), k);
    if (!rn) return std::nullopt;
    auto rd = exact_root(den(a), k);
    if (!rd) return std::nullopt;
    Rational r(*rn, *rd);
    return neg ? Rational(-r) : r;
}

inline Integer gcd(const Integer& a, const Integer& b) { return boost::multiprecision::gcd(a, b); }
inline Integer lcm(const Integer& a, const Integer& b) { return boost::multiprecision::lcm(a, b); }

// floor of a rational as an Integer (cpp_int division truncates toward zero).
inline Integer rfloor(const Rational& q) {
    Integer d = num(q) / den(q);
    if (q < 0 && d * den(q) != num(q)) d -= 1;
    return d;
}

}  // namespace diffsym
