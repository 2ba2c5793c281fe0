#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "osc/duhamel.hpp"
#include "osc/fft.hpp"
#include "osc/fields.hpp"
#include "osc/moments.hpp"
#include "osc/numerics.hpp"
#include "osc/pairing.hpp"
#include "osc/rng.hpp"

// Wiener chaos on a periodic lattice x_j = j h, j < M (d = 1). A kernel of
// order n is a tensor of M^n values, first argument slowest. The lattice
// Stratonovich integral of f is sum_i f(i) prod dW_{i_k}; the Ito integral
// replaces the product by its Wick product.

namespace osc {

enum class ChaosKind { stratonovich, ito };

inline constexpr int chaos_max_order = 4;
inline constexpr std::size_t chaos_max_entries = std::size_t(1) << 22;

struct ChaosExpansion {
    SpectralGrid lattice{1, 32, 16.0};
    std::vector<CVec> kernels;  // kernels[n].size() == M^n
    ChaosKind kind = ChaosKind::stratonovich;

    int truncation() const { return static_cast<int>(kernels.size()) - 1; }
    double h() const { return lattice.dx(); }
};

inline std::size_t tensor_size(std::size_t M, int n) {
    std::size_t s = 1;
    for (int k = 0; k < n; ++k) s *= M;
    return s;
}

inline void check_tensor_guard(std::size_t M, int n) {
    if (n > chaos_max_order || tensor_size(M, n) > chaos_max_entries)
        throw GuardExceeded("chaos: kernel order " + std::to_string(n) + " exceeds the tensor guard");
}

inline ChaosExpansion zero_expansion(const SpectralGrid& lat, int N, ChaosKind kind = ChaosKind::stratonovich) {
    ChaosExpansion e;
    e.lattice = lat;
    e.kind = kind;
    for (int n = 0; n <= N; ++n) {
        check_tensor_guard(lat.n, n);
        e.kernels.emplace_back(tensor_size(lat.n, n), cplx(0.0));
    }
    return e;
}

// average over all argument permutations
inline CVec symmetrize(const CVec& f, int n, std::size_t M) {
    if (n <= 1) return f;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> perms;
    do perms.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));
    CVec out(f.size());
    std::vector<std::size_t> dig(n), stride(n);
    for (int k = n - 1; k >= 0; --k) stride[k] = (k == n - 1) ? 1 : stride[k + 1] * M;
    for (std::size_t i = 0; i < f.size(); ++i) {
        std::size_t r = i;
        for (int k = n - 1; k >= 0; --k) {
            dig[k] = r % M;
            r /= M;
        }
        cplx s = 0.0;
        for (const auto& p : perms) {
            std::size_t j = 0;
            for (int k = 0; k < n; ++k) j += dig[p[k]] * stride[k];
            s += f[j];
        }
        out[i] = s / static_cast<double>(perms.size());
    }
    return out;
}

// sum_y f(x_1..x_r, y_1, y_1, .., y_k, y_k), r = n - 2k
inline CVec contract_diagonals(const CVec& f, int n, std::size_t M, int k) {
    const int r = n - 2 * k;
    const std::size_t out_size = tensor_size(M, r), inner = tensor_size(M, 2 * k);
    CVec out(out_size, cplx(0.0));
    const std::size_t ny = tensor_size(M, k);
    std::vector<std::size_t> diag_offsets(ny);
    for (std::size_t y = 0; y < ny; ++y) {
        std::size_t rem = y, off = 0;
        std::vector<std::size_t> yd(k);
        for (int j = k - 1; j >= 0; --j) {
            yd[j] = rem % M;
            rem /= M;
        }
        for (int j = 0; j < k; ++j) off = (off * M + yd[j]) * M + yd[j];
        diag_offsets[y] = off;
    }
    for (std::size_t i = 0; i < out_size; ++i) {
        KahanSum<cplx> s;
        for (std::size_t y = 0; y < ny; ++y) s.add(f[i * inner + diag_offsets[y]]);
        out[i] = s.value();
    }
    return out;
}

// Lattice Stratonovich -> Ito: g_m = sum_k (m+2k)!/(m! k! 2^k) h^k
// sum_y sym(f_{m+2k})(x, y1, y1, .., yk, yk); orders beyond N are dropped.
inline ChaosExpansion strat_to_ito(const ChaosExpansion& e) {
    if (e.kind == ChaosKind::ito) return e;
    const std::size_t M = e.lattice.n;
    const double h = e.h();
    const int N = e.truncation();
    std::vector<CVec> sym(N + 1);
    for (int n = 0; n <= N; ++n) sym[n] = symmetrize(e.kernels[n], n, M);
    ChaosExpansion g = zero_expansion(e.lattice, N, ChaosKind::ito);
    for (int m = 0; m <= N; ++m) {
        for (int k = 0; m + 2 * k <= N; ++k) {
            double coef = std::tgamma(m + 2.0 * k + 1) / (std::tgamma(m + 1.0) * std::tgamma(k + 1.0) * std::pow(2.0, k)) *
                          std::pow(h, k);
            CVec c = k == 0 ? sym[m] : contract_diagonals(sym[m + 2 * k], m + 2 * k, M, k);
            for (std::size_t i = 0; i < c.size(); ++i) g.kernels[m][i] += coef * c[i];
        }
    }
    return g;
}

// E[I(F) conj(I(G))] for lattice Stratonovich kernels of orders a and b:
// Isserlis over the a + b increments, each pair contributing h delta.
inline cplx stratonovich_pair_expectation(const CVec& F, int a, const CVec& G, int b, std::size_t M, double h) {
    const int S = a + b;
    if (S % 2) return 0.0;
    if (S == 0) return F[0] * std::conj(G[0]);
    const int P = S / 2;
    KahanSum<cplx> total;
    std::vector<int> var_of(S);
    std::vector<std::size_t> pick(P), digit(S);
    for (const auto& pr : enumerate_pairings(S)) {
        for (int p = 0; p < P; ++p) {
            var_of[pr.pairs[p].first] = p;
            var_of[pr.pairs[p].second] = p;
        }
        std::fill(pick.begin(), pick.end(), 0);
        while (true) {
            std::size_t iF = 0, iG = 0;
            for (int s = 0; s < a; ++s) iF = iF * M + pick[var_of[s]];
            for (int s = a; s < S; ++s) iG = iG * M + pick[var_of[s]];
            total.add(F[iF] * std::conj(G[iG]));
            int p = P - 1;
            while (p >= 0 && ++pick[p] == M) pick[p--] = 0;
            if (p < 0) break;
        }
    }
    return total.value() * std::pow(h, P);
}

inline cplx expectation_of_expansion(const ChaosExpansion& e) {
    if (e.kind == ChaosKind::ito) return e.kernels[0][0];
    const CVec one{cplx(1.0)};
    KahanSum<cplx> s;
    for (int n = 0; n <= e.truncation(); n += 2)
        s.add(stratonovich_pair_expectation(e.kernels[n], n, one, 0, e.lattice.n, e.h()));
    return s.value();
}

// sqrt(E|F|^2) = sqrt(sum_m m! h^m sum |g_m|^2) after conversion
inline double l2_norm(const ChaosExpansion& e) {
    ChaosExpansion g = strat_to_ito(e);
    KahanSum<double> s;
    for (int m = 0; m <= g.truncation(); ++m) {
        KahanSum<double> sq;
        for (const auto& z : g.kernels[m]) sq.add(std::norm(z));
        s.add(std::tgamma(m + 1.0) * std::pow(g.h(), m) * sq.value());
    }
    return std::sqrt(s.value());
}

struct WhiteNoiseRealization {
    std::vector<double> increments;  // dW_j ~ N(0, h)
    std::uint64_t seed = 0;
};

inline WhiteNoiseRealization sample_white_noise(const SpectralGrid& lat, std::uint64_t seed) {
    WhiteNoiseRealization w;
    w.seed = seed;
    NormalStream rng(seed);
    double sh = std::sqrt(lat.dx());
    w.increments.resize(lat.n);
    for (auto& v : w.increments) v = sh * rng();
    return w;
}

// sum_i f(i) prod dW_{i_k}, contracting the last argument first
inline cplx plain_contraction(const CVec& f, int n, const std::vector<double>& dw) {
    const std::size_t M = dw.size();
    CVec cur = f;
    for (int r = n; r > 0; --r) {
        CVec next(tensor_size(M, r - 1), cplx(0.0));
        for (std::size_t i = 0; i < next.size(); ++i) {
            cplx s = 0.0;
            for (std::size_t j = 0; j < M; ++j) s += cur[i * M + j] * dw[j];
            next[i] = s;
        }
        cur.swap(next);
    }
    return cur[0];
}

// One sample of the expansion. Stratonovich kernels are converted first; the
// Ito integral of a symmetric g_m is its Wick product, expanded over partial
// pairings: sum_k (-1)^k m!/((m-2k)! k! 2^k) h^k <tr_k g_m, dW^{m-2k}>,
// which equals the Hermite form h^{c/2} He_c(dW/sqrt h) for repeated indices.
inline cplx sample_stratonovich(const ChaosExpansion& e, const WhiteNoiseRealization& w) {
    if (w.increments.size() != e.lattice.n) throw GridMismatch("sample_stratonovich: noise and kernel lattices differ");
    ChaosExpansion g = strat_to_ito(e);
    const std::size_t M = e.lattice.n;
    const double h = e.h();
    KahanSum<cplx> total;
    for (int m = 0; m <= g.truncation(); ++m) {
        CVec sym = symmetrize(g.kernels[m], m, M);
        for (int k = 0; 2 * k <= m; ++k) {
            double coef = std::tgamma(m + 1.0) / (std::tgamma(m - 2.0 * k + 1) * std::tgamma(k + 1.0) * std::pow(2.0, k)) *
                          std::pow(-h, k);
            CVec c = k == 0 ? sym : contract_diagonals(sym, m, M, k);
            total.add(coef * plain_contraction(c, m - 2 * k, w.increments));
        }
    }
    return total.value();
}

// ---------------------------------------------------------------------------
// Kernels of the white-noise limit u^(n)(t, xi) on the lattice:
// f_n(x) = (-i sigma)^n (2pi)^{-n} dk^n sum_kappa prod_j e^{-i kappa_j x_j}
//          K_t(|xi_0|^m, .., |xi_n|^m) u0^(xi_n),  xi_j = xi_{j-1} - kappa_j,
// with partial sums wrapped onto the lattice.
inline CVec duhamel_limit_kernel(int n, double t, std::size_t xi_index, const SpectralGrid& lat,
                                 const PhysicalConfig& cfg, const CovarianceSpec& spec, const InitialCondition& ic) {
    check_tensor_guard(lat.n, n);
    const std::size_t M = lat.n;
    const double sigma = spec.sigma(1);
    cplx pref = std::pow(cplx(0.0, -sigma) * lat.dk() / (2.0 * pi), n);
    const std::size_t total = tensor_size(M, n);
    CVec C(total);
    std::vector<std::size_t> dig(n);
    double a[chaos_max_order + 1];
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t r = i;
        for (int k = n - 1; k >= 0; --k) {
            dig[k] = r % M;
            r /= M;
        }
        std::size_t cur = xi_index;
        a[0] = cfg.symbol(std::abs(lat.axis_k(cur)));
        for (int k = 0; k < n; ++k) {
            cur = lat.add(cur, dig[k], -1);
            a[k + 1] = cfg.symbol(std::abs(lat.axis_k(cur)));
        }
        C[i] = pref * simplex_phase_integral(a, n + 1, t) * ic.u0_hat({lat.axis_k(cur), 0, 0});
    }
    fft_forward_tensor(C, n, M);
    return C;
}

inline ChaosExpansion duhamel_limit_expansion(int N, double t, std::size_t xi_index, const SpectralGrid& lat,
                                              const PhysicalConfig& cfg, const CovarianceSpec& spec,
                                              const InitialCondition& ic) {
    ChaosExpansion e;
    e.lattice = lat;
    e.kind = ChaosKind::stratonovich;
    for (int n = 0; n <= N; ++n) e.kernels.push_back(duhamel_limit_kernel(n, t, xi_index, lat, cfg, spec, ic));
    return e;
}

// Kernels of one order over a set of times and every lattice frequency:
// data[time][xi] is a tensor of M^order values.
struct ChaosField {
    SpectralGrid lattice{1, 32, 16.0};
    std::vector<double> times;
    std::vector<std::vector<std::vector<CVec>>> orders;  // orders[n][time][xi]

    int truncation() const { return static_cast<int>(orders.size()) - 1; }
    ChaosExpansion at(std::size_t ti, std::size_t xi) const {
        ChaosExpansion e;
        e.lattice = lattice;
        for (const auto& o : orders) e.kernels.push_back(o[ti][xi]);
        return e;
    }
};

inline ChaosField duhamel_limit_field(int N, const std::vector<double>& times, const SpectralGrid& lat,
                                      const PhysicalConfig& cfg, const CovarianceSpec& spec,
                                      const InitialCondition& ic) {
    ChaosField F;
    F.lattice = lat;
    F.times = times;
    F.orders.assign(N + 1, std::vector<std::vector<CVec>>(times.size(), std::vector<CVec>(lat.n)));
    for (int n = 0; n <= N; ++n)
        for (std::size_t ti = 0; ti < times.size(); ++ti)
            for (std::size_t xi = 0; xi < lat.n; ++xi)
                F.orders[n][ti][xi] = duhamel_limit_kernel(n, times[ti], xi, lat, cfg, spec, ic);
    return F;
}

// (J f)_{n+1}(t, xi, x, x_1..x_n) = e^{-i xi x} sum_{xi0} dk e^{i xi0 x} f_n(t, xi0, x_1..x_n):
// multiplication by the noise, without the coupling prefactor.
inline ChaosField apply_J(const ChaosField& F) {
    const std::size_t M = F.lattice.n;
    const int N = F.truncation();
    ChaosField out;
    out.lattice = F.lattice;
    out.times = F.times;
    out.orders.assign(N + 2, std::vector<std::vector<CVec>>(F.times.size(), std::vector<CVec>(M)));
    for (std::size_t ti = 0; ti < F.times.size(); ++ti)
        for (std::size_t xi = 0; xi < M; ++xi) out.orders[0][ti][xi] = CVec{cplx(0.0)};
    const double dk = F.lattice.dk();
    for (int n = 0; n <= N; ++n) {
        check_tensor_guard(M, n + 1);
        const std::size_t rest = tensor_size(M, n);
        for (std::size_t ti = 0; ti < F.times.size(); ++ti) {
            // T[x][r] = sum_xi0 dk e^{i xi0 x} f_n(xi0, r)
            CVec T(M * rest);
            CVec col(M);
            for (std::size_t r = 0; r < rest; ++r) {
                for (std::size_t k = 0; k < M; ++k) col[k] = F.orders[n][ti][k][r];
                fft_backward_tensor(col, 1, M);
                for (std::size_t x = 0; x < M; ++x) T[x * rest + r] = dk * col[x];
            }
            for (std::size_t xi = 0; xi < M; ++xi) {
                CVec g(M * rest);
                for (std::size_t x = 0; x < M; ++x) {
                    cplx ph = std::polar(1.0, -F.lattice.axis_k(xi) * F.lattice.axis_x(x));
                    for (std::size_t r = 0; r < rest; ++r) g[x * rest + r] = ph * T[x * rest + r];
                }
                out.orders[n + 1][ti][xi] = std::move(g);
            }
        }
    }
    return out;
}

// (H f)_{n+1}(t, xi, x, ..) = (-i sigma)(2pi)^{-1} int_0^t sum_{xi0} dk
//     e^{i(t-s)|xi|^m} e^{i(xi0 - xi)x} f_n(s, xi0, ..) ds,
// with the time integral done first (cumulative Simpson over the field's
// uniform time nodes, which must start at 0 and have an even count of steps).
inline ChaosField apply_H(const ChaosField& F, const PhysicalConfig& cfg, const CovarianceSpec& spec) {
    const std::size_t M = F.lattice.n;
    const int N = F.truncation();
    const std::size_t T = F.times.size();
    if (T < 3 || F.times[0] != 0.0 || (T - 1) % 2) throw Error("apply_H: need uniform times from 0 with an even step count");
    const double ds = F.times[1] - F.times[0];
    for (std::size_t j = 1; j < T; ++j)
        if (std::abs(F.times[j] - j * ds) > 1e-12) throw Error("apply_H: times must be uniform");
    const cplx pref = cplx(0.0, -spec.sigma(1)) / (2.0 * pi) * F.lattice.dk();
    ChaosField out;
    out.lattice = F.lattice;
    out.times = F.times;
    out.orders.assign(N + 2, std::vector<std::vector<CVec>>(T, std::vector<CVec>(M)));
    for (std::size_t ti = 0; ti < T; ++ti)
        for (std::size_t xi = 0; xi < M; ++xi) out.orders[0][ti][xi] = CVec{cplx(0.0)};
    for (int n = 0; n <= N; ++n) {
        check_tensor_guard(M, n + 1);
        const std::size_t rest = tensor_size(M, n);
        for (std::size_t xi = 0; xi < M; ++xi) {
            const double lam = cfg.symbol(std::abs(F.lattice.axis_k(xi)));
            // G[ti][xi0 * rest + r] = int_0^{t_i} e^{i(t_i - s) lam} f_n(s, xi0, r) ds
            std::vector<CVec> h(T, CVec(M * rest)), C;
            for (std::size_t j = 0; j < T; ++j) {
                cplx ph = std::polar(1.0, -lam * F.times[j]);
                for (std::size_t k = 0; k < M; ++k)
                    for (std::size_t r = 0; r < rest; ++r) h[j][k * rest + r] = ph * F.orders[n][j][k][r];
            }
            detail::cumulative_simpson(h, ds, C);
            for (std::size_t j = 0; j < T; ++j) {
                cplx ph = std::polar(1.0, lam * F.times[j]);
                CVec g(M * rest);
                CVec col(M);
                for (std::size_t r = 0; r < rest; ++r) {
                    for (std::size_t k = 0; k < M; ++k) col[k] = ph * C[j][k * rest + r];
                    fft_backward_tensor(col, 1, M);
                    for (std::size_t x = 0; x < M; ++x)
                        g[x * rest + r] = pref * std::polar(1.0, -F.lattice.axis_k(xi) * F.lattice.axis_x(x)) * col[x];
                }
                out.orders[n + 1][j][xi] = std::move(g);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

struct MassReport {
    std::vector<double> times;
    std::vector<double> mass;           // E sum_xi dk |u_N(t, xi)|^2
    double relative_variation = 0.0;    // (max - min) / mass(0)
    double truncation_budget = 0.0;     // relative, from the fitted second-moment bound
    double quadrature_tolerance = 1e-10;
    std::vector<double> im_j_term;      // |Im E sum dk (J u) conj(u)| / mass
    double max_im_j = 0.0;
    bool pass = false;
};

// sum over n > N of sqrt(sum_xi dk C^n shape_n(t, xi)), the l2 tail of the
// dropped orders under the fitted bound
inline double dropped_order_norm(int N, double t, double C, double rho, const SpectralGrid& lat,
                                 const PhysicalConfig& cfg) {
    KahanSum<double> tail;
    for (int n = N + 1; n < 200; ++n) {
        KahanSum<double> s;
        for (std::size_t xi = 0; xi < lat.n; ++xi)
            s.add(lat.dk() * std::pow(C, n) * second_moment_shape(n, t, std::abs(lat.axis_k(xi)), rho, cfg.m_order));
        double term = std::sqrt(s.value());
        tail.add(term);
        if (term < 1e-16 * std::max(1.0, tail.value())) break;
    }
    return tail.value();
}

// Mass of the expansion truncated at order N over the requested times, with
// the budget 2 (2 sqrt(M_N) T + T^2) / M(0), T the dropped-order tail norm.
inline MassReport mass_conservation_check(int N, const std::vector<double>& times, const SpectralGrid& lat,
                                          const PhysicalConfig& cfg, const CovarianceSpec& spec,
                                          const InitialCondition& ic, double fitted_C, double rho) {
    MassReport rep;
    rep.times = times;
    const std::size_t M = lat.n;
    const double h = lat.dx(), dk = lat.dk();
    ChaosField F = duhamel_limit_field(N, times, lat, cfg, spec, ic);
    ChaosField JF = apply_J(F);
    double worst_budget = 0.0;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        KahanSum<cplx> mass, jterm;
        for (std::size_t xi = 0; xi < M; ++xi) {
            for (int n = 0; n <= N; ++n)
                for (int m = 0; m <= N; ++m) {
                    mass.add(dk * stratonovich_pair_expectation(F.orders[n][ti][xi], n, F.orders[m][ti][xi], m, M, h));
                    jterm.add(dk * stratonovich_pair_expectation(JF.orders[n + 1][ti][xi], n + 1, F.orders[m][ti][xi],
                                                                 m, M, h));
                }
        }
        double mv = mass.value().real();
        rep.mass.push_back(mv);
        rep.im_j_term.push_back(std::abs(jterm.value().imag()) / mv);
        double T = dropped_order_norm(N, times[ti], fitted_C, rho, lat, cfg);
        worst_budget = std::max(worst_budget, 2.0 * std::sqrt(mv) * T + T * T);
    }
    auto [lo, hi] = std::minmax_element(rep.mass.begin(), rep.mass.end());
    rep.relative_variation = (*hi - *lo) / rep.mass.front();
    rep.truncation_budget = 2.0 * worst_budget / rep.mass.front();
    rep.max_im_j = *std::max_element(rep.im_j_term.begin(), rep.im_j_term.end());
    rep.pass = rep.relative_variation <= rep.truncation_budget + rep.quadrature_tolerance && rep.max_im_j <= 1e-8;
    return rep;
}

// Norms behind the three membership conditions of the solution space,
// evaluated on the lattice at one time: E sum dk |f|^2, E sum dk |J f|^2,
// E sum dk |xi|^m |f|^2.
struct MembershipDiagnostic {
    double l2 = 0.0, j_norm = 0.0, symbol_norm = 0.0;
    bool finite = false;
};

inline MembershipDiagnostic membership_diagnostic(const ChaosField& F, std::size_t ti, const PhysicalConfig& cfg) {
    const std::size_t M = F.lattice.n;
    const double dk = F.lattice.dk();
    ChaosField JF = apply_J(F);
    KahanSum<double> a, b, c;
    for (std::size_t xi = 0; xi < M; ++xi) {
        double lam = cfg.symbol(std::abs(F.lattice.axis_k(xi)));
        double ex = l2_norm(F.at(ti, xi));
        double jx = l2_norm(JF.at(ti, xi));
        a.add(dk * ex * ex);
        b.add(dk * jx * jx);
        c.add(dk * lam * ex * ex);
    }
    MembershipDiagnostic d{std::sqrt(a.value()), std::sqrt(b.value()), std::sqrt(c.value()), false};
    d.finite = std::isfinite(d.l2) && std::isfinite(d.j_norm) && std::isfinite(d.symbol_norm);
    return d;
}

// E|I(e)|^2 by sampling against the isometry value sum_m m! h^m ||g_m||^2
struct IsometryCheck {
    double sample_mean = 0.0;  // mean of |I|^2
    double std_error = 0.0;
    double expected = 0.0;
    bool pass = false;
};

inline IsometryCheck isometry_check(const ChaosExpansion& e, long samples, std::uint64_t base_seed) {
    IsometryCheck c;
    double n2 = l2_norm(e);
    c.expected = n2 * n2;
    KahanSum<double> s, s2;
    for (long i = 0; i < samples; ++i) {
        double v = std::norm(sample_stratonovich(e, sample_white_noise(e.lattice, realization_seed(base_seed, i))));
        s.add(v);
        s2.add(v * v);
    }
    const double n = static_cast<double>(samples);
    c.sample_mean = s.value() / n;
    double var = std::max(0.0, (s2.value() / n - c.sample_mean * c.sample_mean) * n / (n - 1.0));
    c.std_error = std::sqrt(var / n);
    c.pass = std::abs(c.sample_mean - c.expected) <= 3.0 * c.std_error;
    return c;
}

// E I(f_2) through the frequency-side pairing rule: with W^_k = sum_j dW_j
// e^{-ik x_j}, E W^_k W^_k' = h M delta_{k+k'} = 2pi delta / dk, so the
// pairing sum of the potential module applies with R^ = 2pi.
inline cplx order_two_expectation_by_pairing(const CVec& f2, const SpectralGrid& lat) {
    const std::size_t M = lat.n;
    if (f2.size() != M * M) throw GridMismatch("order_two_expectation_by_pairing: kernel is not M x M");
    CVec F = f2;
    fft_backward_tensor(F, 2, M);  // sum_j f(j1, j2) e^{i k1 x1 + i k2 x2}
    const auto pairings = enumerate_pairings(2);
    auto r = [](const Vec3&) { return 2.0 * pi; };
    KahanSum<cplx> s;
    for (std::size_t a = 0; a < M; ++a)
        for (std::size_t b = 0; b < M; ++b) {
            double w = gaussian_moment_potential(pairings, r, {lat.wavenumber(a), lat.wavenumber(b)}, lat).total;
            if (w != 0.0) s.add(F[a * M + b] * w);
        }
    return s.value() / static_cast<double>(M * M);
}

}  // namespace osc
