#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "osc/config.hpp"
#include "osc/fft.hpp"
#include "osc/grid.hpp"
#include "osc/numerics.hpp"
#include "osc/rng.hpp"

namespace osc {

// Spectral density R^ of the potential, normalized so that
// R(x) = E q(x+y) q(y) = int R^(xi) e^{i xi x} d xi.
struct CovarianceSpec {
    std::string kind = "gaussian";
    std::vector<double> params{1.0, 1.0};
    std::function<double(const Vec3&)> r_hat;
    double correlation_length = 1.0;

    double sigma(int d) const { return std::sqrt(sigma_squared(d)); }
    double sigma_squared(int d) const { return std::pow(2.0 * pi, d) * r_hat({0, 0, 0}); }
    double r_hat0() const { return r_hat({0, 0, 0}); }
};

// gaussian: params (amplitude a, length l): R^ = a exp(-l^2 |xi|^2 / 2)
// zero:     R^ = 0
inline CovarianceSpec make_covariance(const std::string& kind, const std::vector<double>& params) {
    CovarianceSpec c;
    c.kind = kind;
    c.params = params;
    if (kind == "gaussian") {
        double a = params.size() > 0 ? params[0] : 1.0;
        double l = params.size() > 1 ? params[1] : 1.0;
        if (!(a >= 0.0)) throw ConfigError("covariance.params", "amplitude must be >= 0");
        if (!(l > 0.0)) throw ConfigError("covariance.params", "correlation length must be > 0");
        c.params = {a, l};
        c.correlation_length = l;
        c.r_hat = [a, l](const Vec3& xi) {
            double r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            return a * std::exp(-0.5 * l * l * r2);
        };
    } else if (kind == "zero") {
        c.params = {};
        c.r_hat = [](const Vec3&) { return 0.0; };
    } else {
        throw ConfigError("covariance.kind", "unknown covariance '" + kind + "' (gaussian, zero)");
    }
    return c;
}

struct InitialCondition {
    std::string kind = "gaussian";
    std::vector<double> params{1.0, 1.0};
    std::function<cplx(const Vec3&)> u0_hat;
    double decay_constant = 0.0;
};

// gaussian: (a, w): a exp(-|xi|^2 / w^2)
// rational: (a):    a / (1 + |xi|^{2m}), decay constant a
// flat:     (a, C): a, decay constant C supplied
// zero
inline InitialCondition make_initial(const std::string& kind, const std::vector<double>& params,
                                     double m_order) {
    InitialCondition ic;
    ic.kind = kind;
    ic.params = params;
    auto p = [&](std::size_t i, double dflt) { return params.size() > i ? params[i] : dflt; };
    if (kind == "gaussian") {
        double a = p(0, 1.0), w = p(1, 1.0);
        if (!(w > 0.0)) throw ConfigError("initial.params", "width must be > 0");
        ic.params = {a, w};
        ic.u0_hat = [a, w](const Vec3& xi) { return cplx(a * std::exp(-norm3(xi) * norm3(xi) / (w * w))); };
        // sup over r of (1 + r^{2m}) |a| exp(-r^2/w^2), by a fine radial scan
        double best = 0.0;
        for (int i = 0; i <= 200000; ++i) {
            double r = 1e-4 * i * std::max(1.0, w);
            best = std::max(best, (1.0 + std::pow(r, 2 * m_order)) * std::abs(a) * std::exp(-r * r / (w * w)));
        }
        ic.decay_constant = best * (1.0 + 1e-9);
    } else if (kind == "rational") {
        double a = p(0, 1.0);
        ic.params = {a};
        ic.u0_hat = [a, m_order](const Vec3& xi) { return cplx(a / (1.0 + std::pow(norm3(xi), 2 * m_order))); };
        ic.decay_constant = std::abs(a);
    } else if (kind == "flat") {
        double a = p(0, 1.0), c = p(1, 1.0);
        ic.params = {a, c};
        ic.u0_hat = [a](const Vec3&) { return cplx(a); };
        ic.decay_constant = c;
    } else if (kind == "zero") {
        ic.params = {};
        ic.u0_hat = [](const Vec3&) { return cplx(0.0); };
    } else {
        throw ConfigError("initial.kind", "unknown initial condition '" + kind + "' (gaussian, rational, flat, zero)");
    }
    return ic;
}

struct InitialReport {
    double max_weighted = 0.0;
    double decay_constant = 0.0;
    bool pass = true;
};

inline InitialReport check_initial_condition(const InitialCondition& ic, const SpectralGrid& g, double m_order) {
    InitialReport r;
    r.decay_constant = ic.decay_constant;
    for (std::size_t f = 0; f < g.size(); ++f) {
        Vec3 xi = g.wavenumber(f);
        double v = (1.0 + std::pow(norm3(xi), 2 * m_order)) * std::abs(ic.u0_hat(xi));
        r.max_weighted = std::max(r.max_weighted, v);
    }
    r.pass = r.max_weighted <= ic.decay_constant;
    return r;
}

// One realization of q(x / eps) on the grid. spectrum holds the amplitudes
// Z_k with q(x_j / eps) = sum_k Z_k e^{i k x_j}; E Z_k conj(Z_k) =
// eps^d R^(eps k) dk^d, the lattice version of E q^ q^' = R^ delta.
struct RandomField {
    SpectralGrid grid;
    double eps = 1.0;
    std::vector<double> values;
    CVec spectrum;
    std::uint64_t seed = 0;
};

inline RandomField synthesize_field(const CovarianceSpec& spec, const SpectralGrid& g, std::uint64_t seed,
                                    double eps = 1.0) {
    RandomField q;
    q.grid = g;
    q.eps = eps;
    q.seed = seed;
    const std::size_t N = g.size();
    std::vector<double> var(N);
    double epsd = std::pow(eps, g.d), ck = g.cell_k();
    for (std::size_t f = 0; f < N; ++f) {
        Vec3 k = g.wavenumber(f);
        for (auto& c : k) c *= eps;
        double r = spec.r_hat(k);
        if (r < 0.0 || !std::isfinite(r))
            throw Error("synthesize_field: spectral density is negative or not finite at grid node " +
                        std::to_string(f));
        var[f] = epsd * r * ck;
    }
    q.spectrum.assign(N, cplx(0.0));
    NormalStream rng(seed);
    for (std::size_t f = 0; f < N; ++f) {
        std::size_t nf = g.negate(f);
        if (nf < f) continue;
        if (nf == f) {
            q.spectrum[f] = std::sqrt(var[f]) * rng();
        } else {
            double s = std::sqrt(0.5 * var[f]);
            double a = rng(), b = rng();
            q.spectrum[f] = cplx(s * a, s * b);
            q.spectrum[nf] = std::conj(q.spectrum[f]);
        }
    }
    CVec work = q.spectrum;
    fft_backward(work, g);
    q.values.resize(N);
    for (std::size_t j = 0; j < N; ++j) q.values[j] = work[j].real();
    return q;
}

inline RandomField constant_field(const SpectralGrid& g, double c, double eps = 1.0) {
    RandomField q;
    q.grid = g;
    q.eps = eps;
    q.values.assign(g.size(), c);
    q.spectrum.assign(g.size(), cplx(0.0));
    q.spectrum[0] = c;
    return q;
}

// Scaled copy lambda * q
inline RandomField scaled_field(const RandomField& q, double lambda) {
    RandomField r = q;
    for (auto& v : r.values) v *= lambda;
    for (auto& z : r.spectrum) z *= lambda;
    return r;
}

// R(x) = int R^(xi) cos(xi x) d xi in d = 1, by adaptive quadrature
inline double covariance_by_quadrature(const CovarianceSpec& spec, double lag) {
    auto f = [&](double xi) { return 2.0 * spec.r_hat({xi, 0, 0}) * std::cos(xi * lag); };
    return integrate_to_infinity(f, 0.0, 1e-12).value;
}

struct CovarianceEstimate {
    std::vector<double> lag;
    std::vector<double> value;
    std::vector<double> std_error;
};

// Unbiased ensemble covariance between q(x_base) and q(x_base + lag), d = 1.
inline CovarianceEstimate empirical_covariance(const std::vector<RandomField>& fields, const std::vector<double>& lags,
                                               std::size_t base = 0) {
    if (fields.size() < 2) throw Error("empirical_covariance: need at least two realizations");
    const SpectralGrid& g = fields.front().grid;
    CovarianceEstimate out;
    const double n = static_cast<double>(fields.size());
    for (double lag : lags) {
        double r = lag / g.dx();
        long k = std::lround(r);
        if (std::abs(r - static_cast<double>(k)) > 1e-9) throw GridMismatch("lag is not a multiple of dx");
        std::size_t j = g.wrap(static_cast<long>(base) + k);
        KahanSum<double> sa, sb;
        for (const auto& q : fields) {
            sa.add(q.values[base]);
            sb.add(q.values[j]);
        }
        double ma = sa.value() / n, mb = sb.value() / n;
        KahanSum<double> sp, sp2;
        for (const auto& q : fields) {
            double p = (q.values[base] - ma) * (q.values[j] - mb);
            sp.add(p);
            sp2.add(p * p);
        }
        double cov = sp.value() / (n - 1.0);
        double mp = sp.value() / n;
        double varp = std::max(0.0, (sp2.value() / n - mp * mp) * n / (n - 1.0));
        out.lag.push_back(lag);
        out.value.push_back(cov);
        out.std_error.push_back(std::sqrt(varp / n));
    }
    return out;
}

// dx <= eps * l / 8, the anti-aliasing rule for q(x / eps)
inline void validate_resolution(const SpectralGrid& g, double eps, const CovarianceSpec& spec) {
    if (spec.kind == "zero") return;
    double max_dx = eps * spec.correlation_length / 8.0;
    if (g.dx() > max_dx * (1.0 + 1e-12))
        throw ConfigError("grid.n", "grid spacing " + std::to_string(g.dx()) + " exceeds eps * l / 8 = " +
                                        std::to_string(max_dx));
}

}  // namespace osc
