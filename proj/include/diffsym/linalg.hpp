#pragma once

#include <cmath>
#include <vector>

#include "rational.hpp"

namespace diffsym {

using RatVec = std::vector<Rational>;
using RatMat = std::vector<RatVec>;

namespace detail {

// Gauss-Jordan to reduced row echelon form; returns pivot column per row.
inline std::vector<std::size_t> rref(RatMat& a) {
    std::vector<std::size_t> pivots;
    if (a.empty()) return pivots;
    std::size_t rows = a.size(), cols = a[0].size(), r = 0;
    for (std::size_t c = 0; c < cols && r < rows; ++c) {
        std::size_t p = r;
        while (p < rows && a[p][c] == 0) ++p;
        if (p == rows) continue;
        std::swap(a[p], a[r]);
        Rational inv = Rational(1) / a[r][c];
        for (std::size_t j = c; j < cols; ++j) a[r][j] *= inv;
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == r || a[i][c] == 0) continue;
            Rational f = a[i][c];
            for (std::size_t j = c; j < cols; ++j) a[i][j] -= f * a[r][j];
        }
        pivots.push_back(c);
        ++r;
    }
    return pivots;
}

}  // namespace detail

inline std::size_t rank(RatMat a) { return detail::rref(a).size(); }

// Scale a rational vector to coprime integers with positive leading entry.
inline RatVec primitive_scale(RatVec v) {
    Integer l = 1;
    for (const auto& q : v) l = lcm(l, den(q));
    Integer g = 0;
    for (auto& q : v) {
        q *= Rational(l);
        g = gcd(g, num(q) < 0 ? Integer(-num(q)) : num(q));
    }
    if (g > 1)
        for (auto& q : v) q /= Rational(g);
    for (const auto& q : v) {
        if (q == 0) continue;
        if (q < 0)
            for (auto& w : v) w = -w;
        break;
    }
    return v;
}

// Basis of the right nullspace of a (rows may be fewer or more than cols).
inline std::vector<RatVec> nullspace(RatMat a, std::size_t cols) {
    if (a.empty()) {
        std::vector<RatVec> basis;
        for (std::size_t c = 0; c < cols; ++c) {
            RatVec v(cols, 0);
            v[c] = 1;
            basis.push_back(std::move(v));
        }
        return basis;
    }
    std::vector<std::size_t> pivots = detail::rref(a);
    std::vector<bool> is_pivot(cols, false);
    for (std::size_t c : pivots) is_pivot[c] = true;
    std::vector<RatVec> basis;
    for (std::size_t fc = 0; fc < cols; ++fc) {
        if (is_pivot[fc]) continue;
        RatVec v(cols, 0);
        v[fc] = 1;
        for (std::size_t r = 0; r < pivots.size(); ++r)
            v[pivots[r]] = -a[r][fc];
        basis.push_back(primitive_scale(std::move(v)));
    }
    return basis;
}

// ---- small dense numeric helpers (row-major n x n) ----

inline double jacobi_min_eigenvalue(std::vector<double> s, std::size_t n) {
    auto at = [&](std::size_t i, std::size_t j) -> double& { return s[i * n + j]; };
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (at(q, q) - at(p, p)) / (2 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1));
                double c = 1 / std::sqrt(t * t + 1), sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - sn * akq;
                    at(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - sn * aqk;
                    at(q, k) = sn * apk + c * aqk;
                }
            }
        }
    }
    double mn = at(0, 0);
    for (std::size_t i = 1; i < n; ++i) mn = std::min(mn, at(i, i));
    return mn;
}

struct PsdFactor {
    std::vector<double> sigma;  // n x n, sigma * sigma^T reproduces the input
    double min_pivot = 0;
};

// Pivoted Cholesky with clipping of slightly negative pivots. Pivots below
// -1e-9 mean the matrix is not positive semidefinite at this point.
inline bool psd_factor(const std::vector<double>& s, std::size_t n, PsdFactor& out,
                       double clip_tol = 1e-9) {
    std::vector<double> l(n * n, 0.0);
    std::vector<std::size_t> p(n);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = i;
        d[i] = s[i * n + i];
    }
    out.min_pivot = 0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t best = k;
        for (std::size_t j = k + 1; j < n; ++j)
            if (d[p[j]] > d[p[best]]) best = j;
        std::swap(p[k], p[best]);
        double piv = d[p[k]];
        out.min_pivot = std::min(out.min_pivot, piv);
        if (piv < -clip_tol) return false;
        if (piv <= 0) continue;  // clipped column stays zero
        double lkk = std::sqrt(piv);
        l[p[k] * n + k] = lkk;
        for (std::size_t i = k + 1; i < n; ++i) {
            double acc = s[p[i] * n + p[k]];
            for (std::size_t t = 0; t < k; ++t) acc -= l[p[i] * n + t] * l[p[k] * n + t];
            double lik = acc / lkk;
            l[p[i] * n + k] = lik;
            d[p[i]] -= lik * lik;
        }
    }
    out.sigma = std::move(l);
    return true;
}

}  // namespace diffsym
