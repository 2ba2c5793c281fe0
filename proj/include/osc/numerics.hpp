#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <queue>
#include <utility>
#include <vector>

#include "osc/config.hpp"

namespace osc {

// Neumaier compensated accumulator; order of add() calls fixes the result.
template <class T>
struct KahanSum;

template <>
struct KahanSum<double> {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

template <>
struct KahanSum<std::complex<double>> {
    KahanSum<double> re, im;
    void add(std::complex<double> z) {
        re.add(z.real());
        im.add(z.imag());
    }
    std::complex<double> value() const { return {re.value(), im.value()}; }
};

inline double double_factorial(int n) {
    double r = 1.0;
    for (int k = n; k > 1; k -= 2) r *= k;
    return r;
}

inline double log_binomial(double n, double k) {
    return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return r;
}

struct Rule {
    std::vector<double> x, w;
};

// n-point Gauss-Legendre on [-1, 1]
inline Rule gauss_legendre(int n) {
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int j = 1; j <= n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double p0 = 1, p1 = 0;
        for (int j = 1; j <= n; ++j) {
            double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = n * (z * p0 - p1) / (z * z - 1);
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = r.w[n - 1 - i] = 2.0 / ((1 - z * z) * dp * dp);
    }
    return r;
}

// n-point rule for weight (1-x)^alpha (1+x)^beta on [-1, 1] (Golub-Welsch)
inline Rule gauss_jacobi(int n, double alpha, double beta) {
    if (!(alpha > -1 && beta > -1)) throw Error("gauss_jacobi: exponents must exceed -1");
    Eigen::VectorXd diag(n), sub(std::max(n - 1, 1));
    double ab = alpha + beta;
    for (int k = 0; k < n; ++k) {
        double den = (2.0 * k + ab) * (2.0 * k + ab + 2.0);
        diag[k] = (k == 0) ? (beta - alpha) / (ab + 2.0)
                           : (beta * beta - alpha * alpha) / den;
    }
    for (int k = 1; k < n; ++k) {
        double b2;
        if (k == 1)
            b2 = 4.0 * (1 + alpha) * (1 + beta) / ((2 + ab) * (2 + ab) * (3 + ab));
        else {
            double s = 2.0 * k + ab;
            b2 = 4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1) * (s - 1));
        }
        sub[k - 1] = std::sqrt(b2);
    }
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    double mu0 = std::exp((ab + 1) * std::log(2.0) + std::lgamma(alpha + 1) + std::lgamma(beta + 1) -
                          std::lgamma(ab + 2));
    if (n == 1) {
        r.x[0] = diag[0];
        r.w[0] = mu0;
        return r;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::ComputeEigenvectors);
    for (int i = 0; i < n; ++i) {
        r.x[i] = es.eigenvalues()[i];
        double v0 = es.eigenvectors()(0, i);
        r.w[i] = mu0 * v0 * v0;
    }
    return r;
}

struct QuadResult {
    double value = 0;
    double error = 0;
    int intervals = 0;
};

// Globally adaptive Gauss-Kronrod (7/15) on [a, b], bisecting the worst interval.
inline QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                     double abs_tol = 1e-10, double rel_tol = 1e-12,
                                     int max_intervals = 4000) {
    static const double xk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                 0.207784955007898467600689403773245, 0.0};
    static const double wk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static const double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                 0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
    struct Piece {
        double a, b, v, e;
        bool operator<(const Piece& o) const { return e < o.e; }
    };
    auto gk = [&](double lo, double hi) {
        double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        double fc = f(c);
        double k = wk[7] * fc, g = wg[3] * fc;
        for (int j = 0; j < 7; ++j) {
            double f1 = f(c - h * xk[j]), f2 = f(c + h * xk[j]);
            k += wk[j] * (f1 + f2);
            if (j % 2 == 1) g += wg[j / 2] * (f1 + f2);
        }
        return Piece{lo, hi, k * h, std::abs((k - g) * h)};
    };
    std::priority_queue<Piece> heap;
    heap.push(gk(a, b));
    double total = heap.top().v, err = heap.top().e;
    int count = 1;
    while (err > std::max(abs_tol, rel_tol * std::abs(total)) && count < max_intervals) {
        Piece p = heap.top();
        heap.pop();
        double mid = 0.5 * (p.a + p.b);
        if (!(mid > p.a && mid < p.b)) {
            heap.push(p);
            break;
        }
        Piece l = gk(p.a, mid), r = gk(mid, p.b);
        heap.push(l);
        heap.push(r);
        ++count;
        total += l.v + r.v - p.v;
        err += l.e + r.e - p.e;
    }
    KahanSum<double> ts;
    err = 0;
    while (!heap.empty()) {
        ts.add(heap.top().v);
        err += heap.top().e;
        heap.pop();
    }
    total = ts.value();
    return {total, err, count};
}

// int_a^inf f via x = a + s / (1 - s)
inline QuadResult integrate_to_infinity(const std::function<double(double)>& f, double a,
                                        double abs_tol = 1e-10) {
    auto g = [&](double s) {
        double one_m = 1.0 - s;
        return f(a + s / one_m) / (one_m * one_m);
    };
    return integrate_adaptive(g, 0.0, 1.0, abs_tol);
}

// Divided difference of x -> e^{i x t} over a cluster of points, by Taylor
// expansion about the cluster midpoint. Accurate when (max - min) t <= 1.
inline std::complex<double> dd_exp_cluster(const double* a, int count, double t) {
    double lo = a[0], hi = a[0];
    for (int k = 1; k < count; ++k) {
        lo = std::min(lo, a[k]);
        hi = std::max(hi, a[k]);
    }
    double c = 0.5 * (lo + hi);
    int p = count - 1;
    constexpr int K = 40;
    // h[k] = complete homogeneous polynomial of degree k in u_0..u_j
    std::array<double, K> h{};
    h[0] = 1.0;
    for (int j = 0; j < count; ++j) {
        double u = (a[j] - c) * t;
        if (j == 0) {
            for (int k = 1; k < K; ++k) h[k] = h[k - 1] * u;
        } else {
            for (int k = 1; k < K; ++k) h[k] += u * h[k - 1];
        }
    }
    static const std::complex<double> ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    // |h_k| <= binom(p + k, k) umax^k, so the k-th term is below umax^k / (k! p!).
    // Single terms can vanish (odd k for symmetric nodes); stop on the bound.
    double umax = 0.5 * (hi - lo) * t;
    std::complex<double> s = 0;
    double fact = std::tgamma(p + 1.0);
    double bound = 1.0 / fact;
    for (int k = 0; k < K; ++k) {
        if (k > 0) {
            fact *= (p + k);
            bound *= umax / k;
        }
        s += ipow[(p + k) % 4] * (h[k] / fact);
        if (bound < 1e-17 * std::abs(s)) break;
    }
    return std::polar(1.0, c * t) * std::pow(t, p) * s;
}

// int over {tau_0 + .. + tau_n = t, tau >= 0} of exp(i sum tau_k a_k).
// Equals i^{-n} times the divided difference of e^{i x t} at a_0..a_n.
inline std::complex<double> simplex_phase_integral(const double* a_in, int count, double t) {
    constexpr int MAXP = 16;
    if (count < 1 || count > MAXP) throw GuardExceeded("simplex_phase_integral: 1..16 points");
    if (t == 0.0) return count == 1 ? 1.0 : 0.0;
    std::array<double, MAXP> a;
    std::copy(a_in, a_in + count, a.begin());
    std::sort(a.begin(), a.begin() + count);
    // row-by-row table of divided differences D[i][i+len]
    std::array<std::complex<double>, MAXP> D;
    for (int i = 0; i < count; ++i) D[i] = std::polar(1.0, a[i] * t);
    for (int len = 1; len < count; ++len) {
        for (int i = 0; i + len < count; ++i) {
            int j = i + len;
            double gap = a[j] - a[i];
            if (gap * t >= 1.0)
                D[i] = (D[i + 1] - D[i]) / gap;
            else
                D[i] = dd_exp_cluster(&a[i], len + 1, t);
        }
    }
    static const std::complex<double> ipow_inv[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
    return ipow_inv[(count - 1) % 4] * D[0];
}

inline std::complex<double> simplex_phase_integral(const std::vector<double>& a, double t) {
    return simplex_phase_integral(a.data(), static_cast<int>(a.size()), t);
}

}  // namespace osc
