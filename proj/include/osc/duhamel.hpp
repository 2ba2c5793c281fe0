#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "osc/fft.hpp"
#include "osc/fields.hpp"
#include "osc/numerics.hpp"
#include "osc/solver.hpp"

namespace osc {

struct DuhamelTerm {
    int order = 0;
    WaveFunction u;  // u^(n)(t, .)
    double time = 0.0;
    double eps = 1.0;
};

// Number of quadrature steps used for [0, t]: even, at least 2, step <= dt.
inline long duhamel_steps(double t, double dt) {
    long J = static_cast<long>(std::ceil(t / dt - 1e-9));
    if (J % 2) ++J;
    return std::max<long>(J, 2);
}

namespace detail {

// running integral C_j = int_0^{s_j} h, composite Simpson on even nodes and
// one extra (5, 8, -1)/12 panel on odd nodes
inline void cumulative_simpson(const std::vector<CVec>& h, double ds, std::vector<CVec>& C) {
    const long J = static_cast<long>(h.size()) - 1;
    const std::size_t N = h[0].size();
    C.assign(h.size(), CVec(N, cplx(0.0)));
    for (long j = 1; j <= J; ++j) {
        if (j % 2 == 0) {
            for (std::size_t f = 0; f < N; ++f)
                C[j][f] = C[j - 2][f] + (ds / 3.0) * (h[j - 2][f] + 4.0 * h[j - 1][f] + h[j][f]);
        } else if (j + 1 <= J) {
            for (std::size_t f = 0; f < N; ++f)
                C[j][f] = C[j - 1][f] + (ds / 12.0) * (5.0 * h[j - 1][f] + 8.0 * h[j][f] - h[j + 1][f]);
        } else {
            for (std::size_t f = 0; f < N; ++f)
                C[j][f] = C[j - 1][f] + (ds / 12.0) * (-h[j - 2][f] + 8.0 * h[j - 1][f] + 5.0 * h[j][f]);
        }
    }
}

}  // namespace detail

// All Duhamel terms of order 0..N at time t, from the recursion
// u^(n)(t) = -i eps^{-d/2} int_0^t e^{i|xi|^m (t-s)} (q u^(n-1)(s))^ ds.
inline std::vector<DuhamelTerm> duhamel_terms(int N, double t, const RandomField& q, const WaveFunction& u0,
                                              const PhysicalConfig& cfg, double dt) {
    if (N < 0) throw Error("duhamel: order must be >= 0");
    if (t < 0.0) throw Error("duhamel: t must be >= 0");
    if (!(dt > 0.0)) throw Error("duhamel: dt must be > 0");
    if (!(q.grid == u0.grid)) throw GridMismatch("duhamel: wavefunction and potential grids differ");
    const SpectralGrid& g = u0.grid;
    const std::size_t M = g.size();
    auto sym = symbol_table(g, cfg);

    std::vector<DuhamelTerm> out;
    DuhamelTerm t0;
    t0.order = 0;
    t0.u = free_propagate(u0, t, cfg);
    t0.time = t;
    t0.eps = cfg.eps;
    out.push_back(t0);
    if (N == 0) return out;
    if (t == 0.0) {
        for (int n = 1; n <= N; ++n) {
            DuhamelTerm z = t0;
            z.order = n;
            std::fill(z.u.amplitudes_hat.begin(), z.u.amplitudes_hat.end(), cplx(0.0));
            out.push_back(z);
        }
        return out;
    }

    const long J = duhamel_steps(t, dt);
    const double ds = t / static_cast<double>(J);
    // prev[j] = u^(n-1)(s_j) at every quadrature node
    std::vector<CVec> prev(J + 1, CVec(M));
    for (long j = 0; j <= J; ++j)
        for (std::size_t f = 0; f < M; ++f) prev[j][f] = u0.amplitudes_hat[f] * std::polar(1.0, sym[f] * j * ds);

    const cplx coef = cplx(0.0, -cfg.amplitude());
    std::vector<CVec> h(J + 1, CVec(M)), C;
    CVec work(M);
    for (int n = 1; n <= N; ++n) {
        for (long j = 0; j <= J; ++j) {
            work = prev[j];
            to_physical(work, g);
            for (std::size_t x = 0; x < M; ++x) work[x] *= q.values[x];
            to_spectral(work, g);
            double s = j * ds;
            for (std::size_t f = 0; f < M; ++f) h[j][f] = std::polar(1.0, -sym[f] * s) * work[f];
        }
        detail::cumulative_simpson(h, ds, C);
        for (long j = 0; j <= J; ++j) {
            double s = j * ds;
            for (std::size_t f = 0; f < M; ++f) prev[j][f] = coef * std::polar(1.0, sym[f] * s) * C[j][f];
        }
        DuhamelTerm dn;
        dn.order = n;
        dn.u.grid = g;
        dn.u.amplitudes_hat = prev[J];
        dn.u.time = u0.time + t;
        dn.time = t;
        dn.eps = cfg.eps;
        out.push_back(dn);
    }
    return out;
}

inline DuhamelTerm duhamel_term(int n, double t, const RandomField& q, const WaveFunction& u0,
                                const PhysicalConfig& cfg, double dt) {
    return duhamel_terms(n, t, q, u0, cfg, dt).back();
}

struct PartialSum {
    WaveFunction sum;
    std::vector<double> order_norms;  // l2 of each term
};

inline PartialSum duhamel_partial_sum(int N, double t, const RandomField& q, const WaveFunction& u0,
                                      const PhysicalConfig& cfg, double dt) {
    auto terms = duhamel_terms(N, t, q, u0, cfg, dt);
    PartialSum ps;
    ps.sum = terms[0].u;
    std::fill(ps.sum.amplitudes_hat.begin(), ps.sum.amplitudes_hat.end(), cplx(0.0));
    for (const auto& tm : terms) {
        for (std::size_t f = 0; f < tm.u.amplitudes_hat.size(); ++f) ps.sum.amplitudes_hat[f] += tm.u.amplitudes_hat[f];
        ps.order_norms.push_back(tm.u.l2());
    }
    return ps;
}

// ---------------------------------------------------------------------------
// Resolvent representation of the time-ordered integral.

struct ResolventFactor {
    std::vector<double> a_values;
    double beta = 0.0;
    double rho = 1.0;
    double eta = 1.0;
};

struct ResolventResult {
    cplx beta_path;
    cplx time_path;
    double discrepancy = 0.0;
    double tail_estimate = 0.0;
};

// e^{iAt} t^{rho-1} e^{-eta t} for t > 0, zero otherwise
inline cplx resolvent_kernel(double A, double t, double rho = 1.0, double eta = 1.0) {
    if (t <= 0.0) return 0.0;
    return std::polar(std::pow(t, rho - 1.0) * std::exp(-eta * t), A * t);
}

namespace detail {

// int_B^inf e^{i w b} b^{-p} db by its integration-by-parts series;
// returns false if the series does not reach `tol`
inline bool oscillatory_tail(double w, double B, int p, double tol, cplx& out) {
    const cplx iwB(0.0, w * B);
    cplx term = 1.0, sum = 0.0;
    double prev_mag = 1e300;
    for (int k = 0; k < 200; ++k) {
        double mag = std::abs(term);
        if (mag > prev_mag) return false;
        sum += term;
        if (mag < tol) {
            out = -std::polar(1.0, w * B) / cplx(0.0, w) * std::pow(B, -p) * sum;
            return true;
        }
        prev_mag = mag;
        term *= static_cast<double>(p + k) / iwB;
    }
    return false;
}

}  // namespace detail

// (2pi)^{-1} int e^{i beta t} prod_k [eta - i(A_k - beta)]^{-1} d beta, by
// (a) panel quadrature in beta with analytic tails and (b) the closed-form
// convolution of the kernels e^{iA_k s} e^{-eta s}.
inline ResolventResult resolvent_product_integral(const ResolventFactor& rf, double t) {
    if (!(t > 0.0)) throw Error("resolvent_product_integral: t must be > 0");
    if (rf.a_values.empty()) throw Error("resolvent_product_integral: no factors");
    const int n = static_cast<int>(rf.a_values.size());
    const double eta = rf.eta;
    std::vector<cplx> c(n);
    double amax = 0.0;
    for (int k = 0; k < n; ++k) {
        c[k] = cplx(eta, -rf.a_values[k]);
        amax = std::max(amax, std::abs(c[k]));
    }
    ResolventResult res;
    res.time_path = std::exp(-eta * t) * simplex_phase_integral(rf.a_values, t);

    auto integrand = [&](double b) {
        cplx p = std::polar(1.0, b * t);
        for (int k = 0; k < n; ++k) p /= cplx(c[k].real(), b + c[k].imag());
        return p;
    };
    double B = std::max(4.0 * amax, 60.0 / t) + 40.0;
    double width = std::min(0.5, 1.0 / t);
    int panels = static_cast<int>(std::ceil(2.0 * B / width));
    width = 2.0 * B / panels;
    static const Rule gl = gauss_legendre(16);
    KahanSum<cplx> body;
    for (int p = 0; p < panels; ++p) {
        double lo = -B + p * width, mid = lo + 0.5 * width;
        for (int i = 0; i < 16; ++i) body.add(0.5 * width * gl.w[i] * integrand(mid + 0.5 * width * gl.x[i]));
    }
    // tails: prod (i b + c_k)^{-1} = sum_j (-1)^j h_j(c) (i b)^{-n-j} on b > B,
    // and with b -> -b on the left
    std::vector<cplx> hj{1.0};
    {
        std::vector<cplx> h(60, 0.0);
        h[0] = 1.0;
        for (int k = 0; k < n; ++k)
            for (int j = 1; j < 60; ++j) h[j] += c[k] * h[j - 1];
        hj = h;
    }
    const double tol = 1e-18;
    KahanSum<cplx> tail;
    double tail_mag = 0.0;
    for (int side = 0; side < 2; ++side) {
        double w = side == 0 ? t : -t;
        cplx ib = side == 0 ? cplx(0.0, 1.0) : cplx(0.0, -1.0);
        for (int j = 0; j < 60; ++j) {
            double sz = std::abs(hj[j]) * std::pow(B, -n - j);
            if (j > 0 && sz < tol) break;
            if (j == 59) throw QuadratureError("resolvent tail: inverse-power expansion did not converge");
            cplx I;
            if (!detail::oscillatory_tail(w, B, n + j, tol * std::pow(B, n + j), I))
                throw QuadratureError("resolvent tail: asymptotic series diverges (B t = " + std::to_string(B * t) +
                                      ", order " + std::to_string(n + j) + ")");
            cplx term = ((j % 2) ? -1.0 : 1.0) * hj[j] * std::pow(ib, -(n + j)) * I;
            tail.add(term);
            tail_mag += std::abs(term);
        }
    }
    res.tail_estimate = tail_mag / (2.0 * pi);
    res.beta_path = (body.value() + tail.value()) / (2.0 * pi);
    res.discrepancy = std::abs(res.beta_path - res.time_path);
    return res;
}

}  // namespace osc
