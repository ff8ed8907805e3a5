#pragma once

// Independent reference implementations used only by the tests. Everything here
// works on plain std::vector<long double> data and hand-written formulas, and
// does not call into the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "dak/types.hpp"

namespace oracle {

using LVec = std::vector<long double>;
using LMat = std::vector<LVec>;

inline LVec to_l(const dak::Vector& v) {
    LVec out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
    return out;
}

inline long double dot(const LVec& a, const LVec& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline long double sqdist(const LVec& a, const LVec& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

enum class Family { gaussian, polynomial, cosine };

struct Kern {
    Family family = Family::gaussian;
    long double sigma = 1;
    long double gamma = 1;
    int degree = 2;
    bool normalize = true;

    long double raw(const LVec& x, const LVec& y) const {
        switch (family) {
            case Family::gaussian: return std::exp(-sqdist(x, y) / (2 * sigma * sigma));
            case Family::polynomial: return std::pow(gamma * dot(x, y) + 1, degree);
            case Family::cosine: return dot(x, y);
        }
        return 0;
    }
    long double operator()(const LVec& x, const LVec& y) const {
        const long double v = raw(x, y);
        if (family == Family::gaussian || !normalize) return v;
        return v / std::sqrt(raw(x, x) * raw(y, y));
    }
    long double operator()(const dak::Vector& x, const dak::Vector& y) const { return (*this)(to_l(x), to_l(y)); }
};

inline long double rel_err(long double got, long double want) {
    return std::fabs(got - want) / std::max<long double>(1e-300L, std::fabs(want));
}

// ---------------------------------------------------------------------------
// Scores as literal sums.

inline long double kd_v(const std::vector<dak::Vector>& p, const std::vector<dak::Vector>& q, const Kern& k) {
    long double pp = 0, qq = 0, pq = 0;
    for (auto& a : p)
        for (auto& b : p) pp += k(a, b);
    for (auto& a : q)
        for (auto& b : q) qq += k(a, b);
    for (auto& a : p)
        for (auto& b : q) pq += k(a, b);
    const long double n = p.size(), m = q.size();
    return pp / (n * n) + qq / (m * m) - 2 * pq / (n * m);
}

inline long double kd_u(const std::vector<dak::Vector>& p, const std::vector<dak::Vector>& q, const Kern& k) {
    long double pp = 0, qq = 0, pq = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j)
            if (i != j) pp += k(p[i], p[j]);
    for (std::size_t i = 0; i < q.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
            if (i != j) qq += k(q[i], q[j]);
    for (auto& a : p)
        for (auto& b : q) pq += k(a, b);
    const long double n = p.size(), m = q.size();
    return pp / (n * (n - 1)) + qq / (m * (m - 1)) - 2 * pq / (n * m);
}

inline long double rke(const std::vector<dak::Vector>& x, const Kern& k) {
    long double s = 0;
    for (auto& a : x)
        for (auto& b : x) {
            const long double v = k(a, b);
            s += v * v;
        }
    const long double n = x.size();
    return n * n / s;
}

inline long double ijrke(const std::vector<dak::Vector>& t, const std::vector<dak::Vector>& x, const Kern& kt,
                         const Kern& kx) {
    long double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j) {
            const long double a = kt(t[i], t[j]), b = kx(x[i], x[j]);
            s += a * a * b * b;
        }
    const long double n = t.size();
    return s / (n * n);
}

inline long double jkd(const std::vector<dak::Vector>& t, const std::vector<dak::Vector>& x,
                       const std::vector<dak::Vector>& y, const Kern& kt, const Kern& kx) {
    long double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j)
            s += kt(t[i], t[j]) * (kx(x[i], x[j]) + kx(y[i], y[j]) - kx(x[i], y[j]) - kx(x[j], y[i]));
    const long double n = t.size();
    return s / (n * n);
}

// Cyclic Jacobi eigenvalues of a symmetric matrix.
inline LVec jacobi_eigenvalues(LMat a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        long double off = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) off += a[i][j] * a[i][j];
        if (off < 1e-36L) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a[p][q]) < 1e-300L) continue;
                const long double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const long double t = (theta >= 0 ? 1 : -1) / (std::fabs(theta) + std::sqrt(theta * theta + 1));
                const long double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const long double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const long double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    LVec ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    return ev;
}

inline long double vendi(const std::vector<dak::Vector>& x, const Kern& k) {
    const std::size_t n = x.size();
    LMat m(n, LVec(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m[i][j] = k(x[i], x[j]) / static_cast<long double>(n);
    long double h = 0;
    for (long double l : jacobi_eigenvalues(m))
        if (l > 0) h -= l * std::log(l);
    return std::exp(h);
}

// ---------------------------------------------------------------------------
// Dense linear algebra.

// Solves A x = b by Gaussian elimination with partial pivoting.
inline LVec solve(LMat a, LVec b) {
    const std::size_t n = a.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const long double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    LVec x(n);
    for (std::size_t i = n; i-- > 0;) {
        long double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

// log det via LU with pivoting (matrix assumed positive definite).
inline long double logdet(LMat a) {
    const std::size_t n = a.size();
    long double out = 0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        out += std::log(std::fabs(a[c][c]));
        for (std::size_t r = c + 1; r < n; ++r) {
            const long double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
        }
    }
    return out;
}

struct KrrDense {
    long double mean;
    long double variance;
};

// mu = k'(K + aI)^{-1} y, sigma^2 = (k(t,t) - k'(K + aI)^{-1} k) / a.
inline KrrDense krr_dense(const std::vector<dak::Vector>& xs, const std::vector<double>& ys, const dak::Vector& t,
                          const Kern& k, long double ridge) {
    const std::size_t n = xs.size();
    if (n == 0) return {0, k(t, t) / ridge};
    LMat a(n, LVec(n));
    LVec kv(n), y(ys.begin(), ys.end());
    for (std::size_t i = 0; i < n; ++i) {
        kv[i] = k(xs[i], t);
        for (std::size_t j = 0; j < n; ++j) a[i][j] = k(xs[i], xs[j]) + (i == j ? ridge : 0);
    }
    const LVec alpha = solve(a, y);
    const LVec beta = solve(a, kv);
    return {dot(kv, alpha), (k(t, t) - dot(kv, beta)) / ridge};
}

// 1/2 log det(I + K/a).
inline long double info_gain(const std::vector<dak::Vector>& xs, const Kern& k, long double ridge) {
    const std::size_t n = xs.size();
    if (n == 0) return 0;
    LMat a(n, LVec(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] = (i == j ? 1 : 0) + k(xs[i], xs[j]) / ridge;
    return logdet(a) / 2;
}

// Explicit feature map of the unnormalized polynomial kernel (gamma <x,y> + 1)^2.
inline LVec poly2_features(const dak::Vector& x, long double gamma) {
    LVec f;
    f.push_back(1);
    for (Eigen::Index i = 0; i < x.size(); ++i) f.push_back(std::sqrt(2 * gamma) * x(i));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        for (Eigen::Index j = 0; j < x.size(); ++j) f.push_back(gamma * x(i) * x(j));
    return f;
}

// ---------------------------------------------------------------------------
// Simplex grid for three arms.

inline long double qp_value(const std::vector<double>& s, const std::vector<std::vector<double>>& m, double lambda,
                            const LVec& a) {
    long double lin = 0, quad = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        lin += a[i] * s[i];
        for (std::size_t j = 0; j < a.size(); ++j) quad += a[i] * m[i][j] * a[j];
    }
    return lin - lambda * quad;
}

inline long double grid_max3(const std::vector<double>& s, const std::vector<std::vector<double>>& m, double lambda,
                             int steps = 100) {
    long double best = -1e300L;
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; i + j <= steps; ++j) {
            const LVec a{static_cast<long double>(i) / steps, static_cast<long double>(j) / steps,
                         static_cast<long double>(steps - i - j) / steps};
            best = std::max(best, qp_value(s, m, lambda, a));
        }
    return best;
}

// ---------------------------------------------------------------------------
// Random inputs.

inline dak::Vector gaussian_vec(Eigen::Index dim, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    dak::Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = n(rng);
    return v;
}

inline std::vector<dak::Vector> gaussian_set(std::size_t n, Eigen::Index dim, std::mt19937_64& rng,
                                             double scale = 1.0) {
    std::vector<dak::Vector> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(gaussian_vec(dim, rng, scale));
    return out;
}

}  // namespace oracle
