#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "osc/config.hpp"
#include "osc/fields.hpp"
#include "osc/grid.hpp"
#include "osc/numerics.hpp"
#include "osc/pairing.hpp"

namespace osc {

// Quadrature rule for one frequency variable in R^d. A grid rule carries the
// lattice of a SpectralGrid with cell weights and wraps sums periodically,
// which reproduces the exact expectation of the discretized model.
struct FrequencyRule {
    int d = 1;
    std::vector<Vec3> nodes;
    std::vector<double> weights;
    bool periodic = false;
    std::size_t n = 0;
    double dk = 0.0;

    Vec3 wrap(Vec3 v) const {
        if (!periodic) return v;
        const long nn = static_cast<long>(n), half = nn / 2;
        for (int a = 0; a < d; ++a) {
            long k = std::lround(v[a] / dk);
            k = ((k + half) % nn + nn) % nn - half;
            v[a] = dk * static_cast<double>(k);
        }
        return v;
    }

    static FrequencyRule grid(const SpectralGrid& g) {
        FrequencyRule r;
        r.d = g.d;
        r.periodic = true;
        r.n = g.n;
        r.dk = g.dk();
        for (std::size_t f = 0; f < g.size(); ++f) {
            r.nodes.push_back(g.wavenumber(f));
            r.weights.push_back(g.cell_k());
        }
        return r;
    }

    // Composite Gauss-Legendre on [-Z, Z] with panel width growing as
    // base_width (1 + |s| / grade); optional tails s = +-Z / u, u in (0, 1].
    static FrequencyRule continuum(int d, double Z, double base_width = 0.25, int per_panel = 8, bool tails = true,
                                   double grade = 8.0, int tail_panels = 4) {
        const Rule gl = gauss_legendre(per_panel);
        std::vector<double> x1, w1;
        std::vector<double> edges{0.0};
        while (edges.back() < Z) {
            double s = edges.back();
            edges.push_back(std::min(Z, s + base_width * (1.0 + s / grade)));
        }
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
            double lo = edges[p], hi = edges[p + 1], c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
            for (int i = 0; i < per_panel; ++i) {
                x1.push_back(c + h * gl.x[i]);
                w1.push_back(h * gl.w[i]);
                x1.push_back(-(c + h * gl.x[i]));
                w1.push_back(h * gl.w[i]);
            }
        }
        if (tails) {
            for (int p = 0; p < tail_panels; ++p) {
                double lo = static_cast<double>(p) / tail_panels, hi = static_cast<double>(p + 1) / tail_panels;
                double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
                for (int i = 0; i < per_panel; ++i) {
                    double u = c + h * gl.x[i];
                    double s = Z / u, w = h * gl.w[i] * Z / (u * u);
                    x1.push_back(s);
                    w1.push_back(w);
                    x1.push_back(-s);
                    w1.push_back(w);
                }
            }
        }
        FrequencyRule r;
        r.d = d;
        const std::size_t m = x1.size();
        std::size_t total = 1;
        for (int a = 0; a < d; ++a) total *= m;
        for (std::size_t f = 0; f < total; ++f) {
            std::size_t rem = f;
            Vec3 v{0, 0, 0};
            double w = 1.0;
            for (int a = d - 1; a >= 0; --a) {
                v[a] = x1[rem % m];
                w *= w1[rem % m];
                rem /= m;
            }
            r.nodes.push_back(v);
            r.weights.push_back(w);
        }
        return r;
    }
};

// Limit rule: unbounded frequencies with tails. The refined rule halves the
// panels and doubles the tail panels; the difference serves as error budget.
inline FrequencyRule default_limit_rule(int d) { return FrequencyRule::continuum(d, 32.0, 0.5, 8, true, 16.0, 4); }
inline FrequencyRule refined_limit_rule(int d) { return FrequencyRule::continuum(d, 32.0, 0.25, 8, true, 16.0, 8); }

// eps-model rule: frequencies cut where R^(eps s) / R^(0) < 1e-17.
inline FrequencyRule default_eps_rule(int d, double eps, const CovarianceSpec& spec) {
    double r0 = spec.r_hat0();
    double cut = 1.0;
    while (cut < 1e4 && spec.r_hat({eps * cut, 0, 0}) > 1e-17 * r0) cut *= 1.05;
    return FrequencyRule::continuum(d, cut, 0.25, 8, false);
}

struct MomentGroup {
    int order = 0;
    double t = 0.0;
    Vec3 xi{0, 0, 0};
    bool conj = false;
};

struct MomentValue {
    enum class Method { quadrature, monte_carlo };
    cplx value = 0.0;
    double std_error = 0.0;
    Method method = Method::quadrature;
};

struct MultiIndex {
    std::vector<int> orders;
    std::vector<double> times;
    std::vector<Vec3> frequencies;
    std::vector<bool> conj;  // optional; conjugate factor l when set

    int total() const {
        int s = 0;
        for (int n : orders) s += n;
        return s;
    }
    bool conjugated(std::size_t l) const { return l < conj.size() && conj[l]; }
};

// E prod_g [u^(n_g)(t_g, xi_g)] (conjugated where flagged) for the Duhamel
// terms of a Gaussian potential whose spectral amplitudes pair with weight
// pair_weight(s) delta(s + s'). Each group contributes (-i)^n (or i^n),
// the time-ordered phase integral over its partial sums xi - sum kappa_j,
// and u0^ at the last partial sum; a conjugated group sees kappa = -s.
inline cplx pairing_moment(const std::vector<MomentGroup>& groups,
                           const std::function<double(const Vec3&)>& pair_weight, const FrequencyRule& rule,
                           const PhysicalConfig& cfg, const InitialCondition& ic) {
    int S = 0;
    for (const auto& g : groups) S += g.order;
    if (S % 2) return 0.0;
    const int P = S / 2;
    if (S > 12) throw GuardExceeded("pairing_moment: at most 12 potential factors");

    // compressed nodes with nonzero combined weight
    std::vector<Vec3> nodes;
    std::vector<double> nw;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        double w = rule.weights[i] * pair_weight(rule.nodes[i]);
        if (w != 0.0) {
            nodes.push_back(rule.nodes[i]);
            nw.push_back(w);
        }
    }
    static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    std::vector<int> group_of(S), first_slot(groups.size());
    {
        int s = 0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            first_slot[g] = s;
            for (int k = 0; k < groups[g].order; ++k) group_of[s++] = static_cast<int>(g);
        }
    }
    std::vector<cplx> prefactor(groups.size());
    std::vector<Vec3> xi0(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        int n = groups[g].order % 4;
        prefactor[g] = groups[g].conj ? ipow[n] : ipow[(4 - n) % 4];
        xi0[g] = rule.wrap(groups[g].xi);
    }
    if (P > 0 && nodes.empty()) return 0.0;

    KahanSum<cplx> total;
    std::vector<int> var_of(S), sign_of(S);
    std::vector<std::size_t> pick(P, 0);
    std::vector<Vec3> slot(S);
    double a[16];
    const auto pairings = enumerate_pairings(S);
    for (const auto& pr : pairings) {
        for (int p = 0; p < P; ++p) {
            var_of[pr.pairs[p].first] = p;
            sign_of[pr.pairs[p].first] = 1;
            var_of[pr.pairs[p].second] = p;
            sign_of[pr.pairs[p].second] = -1;
        }
        std::fill(pick.begin(), pick.end(), 0);
        while (true) {
            double w = 1.0;
            for (int p = 0; p < P; ++p) w *= nw[pick[p]];
            for (int s = 0; s < S; ++s) {
                const Vec3& v = nodes[pick[var_of[s]]];
                for (int c = 0; c < 3; ++c) slot[s][c] = sign_of[s] * v[c];
            }
            cplx term = w;
            for (std::size_t g = 0; g < groups.size(); ++g) {
                const auto& G = groups[g];
                Vec3 cur = xi0[g];
                a[0] = cfg.symbol(norm3(cur));
                for (int k = 0; k < G.order; ++k) {
                    const Vec3& kap = slot[first_slot[g] + k];
                    for (int c = 0; c < 3; ++c) cur[c] += G.conj ? kap[c] : -kap[c];
                    cur = rule.wrap(cur);
                    a[k + 1] = cfg.symbol(norm3(cur));
                }
                cplx K = simplex_phase_integral(a, G.order + 1, G.t);
                cplx u0 = ic.u0_hat(cur);
                term *= G.conj ? prefactor[g] * std::conj(K) * std::conj(u0) : prefactor[g] * K * u0;
            }
            total.add(term);
            int p = P - 1;
            while (p >= 0 && ++pick[p] == nodes.size()) pick[p--] = 0;
            if (p < 0) break;
        }
    }
    return total.value();
}

inline MomentValue mean_term_eps(int n, double t, const Vec3& xi, const PhysicalConfig& cfg,
                                 const CovarianceSpec& spec, const InitialCondition& ic, const FrequencyRule& rule) {
    if (n < 0 || n > 3) throw GuardExceeded("mean_term_eps: 0 <= n <= 3");
    if (t < 0.0) throw Error("mean_term_eps: t must be >= 0");
    const double eps = cfg.eps;
    auto w = [&](const Vec3& s) { return spec.r_hat({eps * s[0], eps * s[1], eps * s[2]}); };
    return {pairing_moment({{2 * n, t, xi, false}}, w, rule, cfg, ic), 0.0, MomentValue::Method::quadrature};
}

inline MomentValue mean_term_eps(int n, double t, const Vec3& xi, const PhysicalConfig& cfg,
                                 const CovarianceSpec& spec, const InitialCondition& ic) {
    return mean_term_eps(n, t, xi, cfg, spec, ic, default_eps_rule(cfg.d, cfg.eps, spec));
}

inline MomentValue mean_term_limit(int n, double t, const Vec3& xi, const PhysicalConfig& cfg,
                                   const CovarianceSpec& spec, const InitialCondition& ic, const FrequencyRule& rule) {
    if (n < 0 || n > 3) throw GuardExceeded("mean_term_limit: 0 <= n <= 3");
    if (t < 0.0) throw Error("mean_term_limit: t must be >= 0");
    const double r0 = spec.r_hat0();
    auto w = [r0](const Vec3&) { return r0; };
    return {pairing_moment({{2 * n, t, xi, false}}, w, rule, cfg, ic), 0.0, MomentValue::Method::quadrature};
}

inline MomentValue mean_term_limit(int n, double t, const Vec3& xi, const PhysicalConfig& cfg,
                                   const CovarianceSpec& spec, const InitialCondition& ic) {
    return mean_term_limit(n, t, xi, cfg, spec, ic, default_limit_rule(cfg.d));
}

// E |u^(n)(t, xi)|^2 of the limit term of order n
inline MomentValue second_moment_limit(int n, double t, const Vec3& xi, const PhysicalConfig& cfg,
                                       const CovarianceSpec& spec, const InitialCondition& ic,
                                       const FrequencyRule& rule) {
    if (n < 0 || n > 2) throw GuardExceeded("second_moment_limit: 0 <= n <= 2");
    const double r0 = spec.r_hat0();
    auto w = [r0](const Vec3&) { return r0; };
    cplx v = pairing_moment({{n, t, xi, false}, {n, t, xi, true}}, w, rule, cfg, ic);
    return {cplx(v.real(), 0.0), 0.0, MomentValue::Method::quadrature};
}

inline MomentValue second_moment_limit(int n, double t, const Vec3& xi, const PhysicalConfig& cfg,
                                       const CovarianceSpec& spec, const InitialCondition& ic) {
    return second_moment_limit(n, t, xi, cfg, spec, ic, default_limit_rule(cfg.d));
}

// E prod_l u^(n_l)(t_l, xi_l) of limit terms
inline MomentValue general_moment_limit(const MultiIndex& mi, const PhysicalConfig& cfg, const CovarianceSpec& spec,
                                        const InitialCondition& ic, const FrequencyRule& rule) {
    if (mi.orders.size() != mi.times.size() || mi.orders.size() != mi.frequencies.size())
        throw Error("general_moment_limit: orders, times and frequencies differ in length");
    const int tot = mi.total();
    if (tot % 2) return {0.0, 0.0, MomentValue::Method::quadrature};
    if (tot > 6 || mi.orders.size() > 3) throw GuardExceeded("general_moment_limit: |n| <= 6 and r <= 3");
    std::vector<MomentGroup> groups;
    for (std::size_t l = 0; l < mi.orders.size(); ++l)
        groups.push_back({mi.orders[l], mi.times[l], mi.frequencies[l], mi.conjugated(l)});
    const double r0 = spec.r_hat0();
    auto w = [r0](const Vec3&) { return r0; };
    return {pairing_moment(groups, w, rule, cfg, ic), 0.0, MomentValue::Method::quadrature};
}

inline MomentValue general_moment_limit(const MultiIndex& mi, const PhysicalConfig& cfg, const CovarianceSpec& spec,
                                        const InitialCondition& ic) {
    return general_moment_limit(mi, cfg, spec, ic, default_limit_rule(cfg.d));
}

}  // namespace osc

namespace osc {

// (2n-1)!! t^{n(2-rho)} e^t (n!)^{-(2-rho)} (1 + log+|xi|) (1 + |xi|^{2m})^{-1/2};
// the bound on E|u^(n)|^2 is C^n times this.
inline double second_moment_shape(int n, double t, double xi_abs, double rho, double m) {
    double lp = xi_abs > 1.0 ? std::log(xi_abs) : 0.0;
    return double_factorial(2 * n - 1) * std::pow(t, n * (2.0 - rho)) * std::exp(t) /
           std::pow(std::tgamma(n + 1.0), 2.0 - rho) * (1.0 + lp) / std::sqrt(1.0 + std::pow(xi_abs, 2.0 * m));
}

struct SecondMomentFit {
    double C = 0.0;
    double rho = 0.0;
    int max_ratio_order = 0;
};

// C = max over the scan of (E|u^(n)|^2 / shape)^{1/n}
inline SecondMomentFit fit_second_moment_constant(const std::vector<int>& orders, const std::vector<double>& times,
                                                  const std::vector<double>& xis, double rho, const PhysicalConfig& cfg,
                                                  const CovarianceSpec& spec, const InitialCondition& ic,
                                                  const FrequencyRule& rule) {
    SecondMomentFit fit;
    fit.rho = rho;
    for (int n : orders)
        for (double t : times)
            for (double xi : xis) {
                if (n == 0 || t <= 0.0) continue;
                double v = second_moment_limit(n, t, {xi, 0, 0}, cfg, spec, ic, rule).value.real();
                double c = std::pow(std::max(v, 0.0) / second_moment_shape(n, t, std::abs(xi), rho, cfg.m_order),
                                    1.0 / n);
                if (c > fit.C) {
                    fit.C = c;
                    fit.max_ratio_order = n;
                }
            }
    return fit;
}

}  // namespace osc
