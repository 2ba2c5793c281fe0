#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "osc/bounds.hpp"
#include "osc/duhamel.hpp"
#include "osc/fields.hpp"
#include "osc/moments.hpp"
#include "osc/rng.hpp"
#include "osc/solver.hpp"

namespace osc {

inline constexpr int schema_version = 1;

// ---------------------------------------------------------------------------
// Parallel map over realization indices. Results land in index order, so any
// reduction done afterwards is independent of the worker count.

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("OSC_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

template <class T>
std::vector<T> parallel_map(long count, int workers, const std::function<T(long)>& fn) {
    std::vector<T> out(count);
    workers = std::max(1, std::min<int>(resolve_workers(workers), static_cast<int>(std::max(1L, count))));
    if (workers == 1) {
        for (long i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<long> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto run = [&] {
        // small chunks keep the load balanced; the chunk size does not affect results
        constexpr long chunk = 8;
        while (true) {
            long lo = next.fetch_add(chunk);
            if (lo >= count) return;
            for (long i = lo; i < std::min(count, lo + chunk); ++i) {
                try {
                    out[i] = fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err) err = std::current_exception();
                    next = count;
                    return;
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    return out;
}

// mean and jackknife standard error of complex samples; for the plain mean
// the jackknife reduces to sqrt(sum |x - mean|^2 / (n (n - 1)))
inline MomentValue sample_mean(const std::vector<cplx>& xs) {
    const long n = static_cast<long>(xs.size());
    KahanSum<cplx> s;
    for (const auto& x : xs) s.add(x);
    cplx mean = s.value() / static_cast<double>(n);
    KahanSum<double> v;
    for (const auto& x : xs) v.add(std::norm(x - mean));
    double se = n > 1 ? std::sqrt(v.value() / (static_cast<double>(n) * (n - 1))) : 0.0;
    return {mean, se, MomentValue::Method::monte_carlo};
}

// ---------------------------------------------------------------------------

enum class MomentRoute { solver, duhamel_sum, duhamel_term };

inline MomentRoute parse_route(const std::string& s) {
    if (s == "solver") return MomentRoute::solver;
    if (s == "duhamel_sum") return MomentRoute::duhamel_sum;
    if (s == "duhamel_term") return MomentRoute::duhamel_term;
    throw ConfigError("study.route", "unknown route '" + s + "' (solver, duhamel_sum, duhamel_term)");
}

inline std::string route_name(MomentRoute r) {
    switch (r) {
        case MomentRoute::solver: return "solver";
        case MomentRoute::duhamel_sum: return "duhamel_sum";
        default: return "duhamel_term";
    }
}

struct EnsembleOptions {
    std::size_t grid_n = 512;     // lower bound; refined per eps
    double box_length = 20.0;
    double dt = 1e-3;
    MomentRoute route = MomentRoute::solver;
    int duhamel_order = 8;        // partial-sum order, or the single term's order
    int workers = 0;
    bool refine_grid = true;
};

// grid for one eps: box fixed, n the smallest power of two with dx <= eps l / 8
inline SpectralGrid grid_for_eps(double eps, const CovarianceSpec& spec, const EnsembleOptions& opt, int d = 1) {
    std::size_t n = opt.grid_n;
    if (opt.refine_grid && spec.kind != "zero")
        n = SpectralGrid::refine_for(opt.box_length, eps * spec.correlation_length / 8.0, opt.grid_n);
    SpectralGrid g(d, n, opt.box_length);
    validate_resolution(g, eps, spec);
    return g;
}

// Amplitudes u^_eps(t, .) of one realization at each requested time.
inline std::vector<CVec> realization_amplitudes(double eps, const std::vector<double>& times, const SpectralGrid& g,
                                                const PhysicalConfig& cfg_in, const CovarianceSpec& spec,
                                                const InitialCondition& ic, std::uint64_t seed,
                                                const EnsembleOptions& opt, long index) {
    PhysicalConfig cfg = cfg_in;
    cfg.eps = eps;
    RandomField q = synthesize_field(spec, g, seed, eps);
    WaveFunction u0 = initial_wavefunction(ic, g);
    std::vector<CVec> out;
    if (opt.route == MomentRoute::solver) {
        std::vector<double> ts = times;
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
        Trajectory tr;
        try {
            tr = solve(u0, q, ts.back(), opt.dt, cfg, ts);
        } catch (const SolverAbort& e) {
            throw SolverAbort(e.step, std::string(e.what()) + " (realization " + std::to_string(index) + ")", index);
        }
        for (double t : times) {
            std::size_t k = std::lower_bound(ts.begin(), ts.end(), t) - ts.begin();
            out.push_back(tr.snapshots[k].amplitudes_hat);
        }
        return out;
    }
    for (double t : times) {
        if (opt.route == MomentRoute::duhamel_sum)
            out.push_back(duhamel_partial_sum(opt.duhamel_order, t, q, u0, cfg, opt.dt).sum.amplitudes_hat);
        else
            out.push_back(duhamel_term(opt.duhamel_order, t, q, u0, cfg, opt.dt).u.amplitudes_hat);
    }
    return out;
}

// E prod_l [u^_eps(t_l, xi_l)]^{m_l}, conjugated where flagged; mi.orders holds
// the powers m_l. Realization i uses seed realization_seed(base_seed, i).
inline MomentValue mc_moment(double eps, const MultiIndex& mi, const PhysicalConfig& cfg, const CovarianceSpec& spec,
                             const InitialCondition& ic, long n_real, std::uint64_t base_seed,
                             const EnsembleOptions& opt = {}) {
    if (n_real < 100) throw ConfigError("study.realizations", "need at least 100 realizations");
    if (mi.orders.size() != mi.times.size() || mi.orders.size() != mi.frequencies.size())
        throw Error("mc_moment: powers, times and frequencies differ in length");
    SpectralGrid g = grid_for_eps(eps, spec, opt, cfg.d);
    std::vector<std::size_t> idx;
    for (const auto& xi : mi.frequencies) idx.push_back(g.index_of(xi));
    auto fn = std::function<cplx(long)>([&](long i) {
        auto amps = realization_amplitudes(eps, mi.times, g, cfg, spec, ic, realization_seed(base_seed, i), opt, i);
        cplx p = 1.0;
        for (std::size_t l = 0; l < mi.orders.size(); ++l) {
            cplx z = amps[l][idx[l]];
            if (mi.conjugated(l)) z = std::conj(z);
            for (int k = 0; k < mi.orders[l]; ++k) p *= z;
        }
        return p;
    });
    return sample_mean(parallel_map<cplx>(n_real, opt.workers, fn));
}

// ---------------------------------------------------------------------------

struct StudyConfig {
    PhysicalConfig phys;
    std::string covariance_kind = "gaussian";
    std::vector<double> covariance_params{1.0, 1.0};
    std::string initial_kind = "gaussian";
    std::vector<double> initial_params{1.0, 1.0};
    std::vector<double> eps_list{0.4, 0.2, 0.1};
    long realizations = 10000;
    std::vector<double> times{0.5};
    std::vector<double> xis{0.0};
    int orders = 2;  // limit side: sum of mean terms n = 0..orders
    int workers = 0;
    std::uint64_t base_seed = 1;
    std::string output_dir = "out";
    EnsembleOptions ensemble;

    void validate() const {
        phys.validate();
        if (eps_list.empty()) throw ConfigError("study.eps_list", "empty");
        for (std::size_t i = 0; i < eps_list.size(); ++i) {
            if (!(eps_list[i] > 0.0 && eps_list[i] <= 1.0)) throw ConfigError("study.eps_list", "values must lie in (0, 1]");
            if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ConfigError("study.eps_list", "must be strictly decreasing");
        }
        if (realizations < 100) throw ConfigError("study.realizations", "must be >= 100");
        if (orders < 0 || orders > 3) throw ConfigError("study.orders", "limit truncation must lie in 0..3");
        if (times.empty() || xis.empty()) throw ConfigError("study.times", "need at least one probe point");
        for (double t : times)
            if (!(t > 0.0)) throw ConfigError("study.times", "probe times must be > 0");
        if (!(ensemble.dt > 0.0)) throw ConfigError("solver.dt", "must be > 0");
    }
    CovarianceSpec covariance() const { return make_covariance(covariance_kind, covariance_params); }
    InitialCondition initial() const { return make_initial(initial_kind, initial_params, phys.m_order); }
};

// Sum of the limit mean terms n = 0..N with the default and refined rules;
// their difference is the quadrature budget.
struct LimitValue {
    cplx value = 0.0;
    double quadrature_budget = 0.0;
    double truncation_budget = 0.0;  // sum over dropped n of the fitted majorant
    double fitted_C = 0.0;
    std::vector<cplx> terms;
};

// C fitted from |E u^(2n)| <= a_{2n}(C, t) (1 + log+|xi|) / (1 + |xi|^{2m})^{1/2}
inline double fit_mean_majorant(const std::vector<cplx>& terms, double t, double xi, double rho, double m) {
    double C = 0.0;
    for (std::size_t n = 1; n < terms.size(); ++n) {
        double shape = std::exp(log_majorant_a(static_cast<int>(n), 1.0, t, rho)) * log_integral_shape(xi, m);
        C = std::max(C, std::pow(std::abs(terms[n]) / shape, 1.0 / n));
    }
    return C;
}

inline double majorant_tail(int N, double C, double t, double xi, double rho, double m) {
    KahanSum<double> s;
    for (int n = N + 1; n < 400; ++n) {
        double v = std::exp(log_majorant_a(n, C, t, rho)) * log_integral_shape(xi, m);
        s.add(v);
        if (n > N + 5 && v < 1e-17 * s.value()) break;
    }
    return s.value();
}

inline LimitValue limit_mean(int N, double t, double xi, const PhysicalConfig& cfg, const CovarianceSpec& spec,
                             const InitialCondition& ic) {
    LimitValue lv;
    FrequencyRule base = default_limit_rule(cfg.d), fine = refined_limit_rule(cfg.d);
    for (int n = 0; n <= N; ++n) {
        cplx a = mean_term_limit(n, t, {xi, 0, 0}, cfg, spec, ic, base).value;
        cplx b = n == 0 ? a : mean_term_limit(n, t, {xi, 0, 0}, cfg, spec, ic, fine).value;
        lv.terms.push_back(a);
        lv.value += a;
        lv.quadrature_budget += std::abs(a - b);
    }
    lv.fitted_C = fit_mean_majorant(lv.terms, t, xi, cfg.default_rho(), cfg.m_order);
    lv.truncation_budget = lv.fitted_C > 0.0 ? majorant_tail(N, lv.fitted_C, t, xi, cfg.default_rho(), cfg.m_order) : 0.0;
    return lv;
}

struct ConvergenceRow {
    double eps = 0.0;
    double t = 0.0, xi = 0.0;
    std::size_t grid_n = 0;
    MomentValue mc;
    cplx eps_frozen = 0.0;       // sum_{n <= N} mean_term_eps on the MC grid
    double eps_frozen_gap = 0.0; // |mc - eps_frozen| / stderr
    double discrepancy = 0.0;    // |mc - limit|
    double runtime_s = 0.0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    std::vector<LimitValue> limits;  // one per (t, xi) probe
    std::vector<std::string> probe_labels;
    bool trend_checked = false;
    bool trend_pass = true;
    bool eps_frozen_computed = false;
    std::vector<std::string> checks;  // "name: measured vs tolerance (oracle) -> pass"
    std::uint64_t base_seed = 0;
    long realizations = 0;
    int workers = 0;
    std::string route;
    double runtime_s = 0.0;
    bool pass = true;
};

// First moments E u^_eps(t, xi) for every eps and probe, against the limit
// sum. The trend gate per probe: d_{i+1} < d_i + 2 (s_i + s_{i+1} + q), with s
// the MC standard errors and q the limit quadrature budget.
inline ConvergenceReport convergence_study(const StudyConfig& sc, bool with_eps_frozen = false) {
    sc.validate();
    auto t_start = std::chrono::steady_clock::now();
    ConvergenceReport rep;
    rep.base_seed = sc.base_seed;
    rep.realizations = sc.realizations;
    rep.workers = resolve_workers(sc.workers);
    rep.route = route_name(sc.ensemble.route);
    rep.eps_frozen_computed = with_eps_frozen;
    const CovarianceSpec spec = sc.covariance();
    const InitialCondition ic = sc.initial();
    EnsembleOptions opt = sc.ensemble;
    opt.workers = sc.workers;
    for (double t : sc.times)
        for (double xi : sc.xis) {
            rep.limits.push_back(limit_mean(sc.orders, t, xi, sc.phys, spec, ic));
            rep.probe_labels.push_back("t=" + std::to_string(t) + ",xi=" + std::to_string(xi));
        }
    for (double eps : sc.eps_list) {
        std::size_t p = 0;
        for (double t : sc.times)
            for (double xi : sc.xis) {
                auto t0 = std::chrono::steady_clock::now();
                ConvergenceRow row;
                row.eps = eps;
                row.t = t;
                row.xi = xi;
                row.grid_n = grid_for_eps(eps, spec, opt, sc.phys.d).n;
                MultiIndex mi{{1}, {t}, {{xi, 0, 0}}, {}};
                row.mc = mc_moment(eps, mi, sc.phys, spec, ic, sc.realizations, sc.base_seed, opt);
                row.discrepancy = std::abs(row.mc.value - rep.limits[p].value);
                if (with_eps_frozen) {
                    PhysicalConfig c = sc.phys;
                    c.eps = eps;
                    FrequencyRule grid_rule = FrequencyRule::grid(grid_for_eps(eps, spec, opt, sc.phys.d));
                    for (int n = 0; n <= sc.orders; ++n)
                        row.eps_frozen += mean_term_eps(n, t, {xi, 0, 0}, c, spec, ic, grid_rule).value;
                    row.eps_frozen_gap = std::abs(row.mc.value - row.eps_frozen) / row.mc.std_error;
                }
                row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                rep.rows.push_back(row);
                ++p;
            }
    }
    const std::size_t probes = rep.limits.size();
    rep.trend_checked = sc.eps_list.size() > 1;
    for (std::size_t p = 0; p < probes && rep.trend_checked; ++p) {
        for (std::size_t i = 0; i + 1 < sc.eps_list.size(); ++i) {
            const auto& a = rep.rows[i * probes + p];
            const auto& b = rep.rows[(i + 1) * probes + p];
            double tol = 2.0 * (a.mc.std_error + b.mc.std_error + rep.limits[p].quadrature_budget);
            bool ok = b.discrepancy < a.discrepancy + tol;
            rep.trend_pass = rep.trend_pass && ok;
            rep.checks.push_back("trend " + rep.probe_labels[p] + " eps " + std::to_string(a.eps) + " -> " +
                                 std::to_string(b.eps) + ": d " + std::to_string(a.discrepancy) + " -> " +
                                 std::to_string(b.discrepancy) + ", tolerance 2 (s_i + s_j + q) = " +
                                 std::to_string(tol) + " (oracle: limit mean-term quadrature) -> " +
                                 (ok ? "pass" : "fail"));
        }
    }
    rep.pass = rep.trend_pass;
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Increments of u^phi(t) = sum_k u^(t, xi_k) conj(phi(xi_k)) dk.

struct TightnessReport {
    double s = 0.0;
    std::vector<double> deltas;
    std::vector<MomentValue> increments;  // E |u^phi(s + delta) - u^phi(s)|^2
    std::vector<double> ratios;           // increments / delta^2
    double fitted_C = 0.0;                // max ratio
    double spread = 0.0;                  // max / min ratio
    bool pass = false;
};

inline cplx pair_with(const CVec& amps, const SpectralGrid& g, const std::function<cplx(double)>& phi) {
    KahanSum<cplx> s;
    for (std::size_t k = 0; k < g.size(); ++k) s.add(amps[k] * std::conj(phi(g.axis_k(k))));
    return s.value() * g.cell_k();
}

inline TightnessReport tightness_increment_check(const std::function<cplx(double)>& phi, double eps,
                                                 const PhysicalConfig& cfg, const CovarianceSpec& spec,
                                                 const InitialCondition& ic, double s,
                                                 const std::vector<double>& deltas, long n_real,
                                                 std::uint64_t base_seed, const EnsembleOptions& opt = {}) {
    if (cfg.d != 1) throw Error("tightness_increment_check: d = 1 only");
    TightnessReport rep;
    rep.s = s;
    rep.deltas = deltas;
    SpectralGrid g = grid_for_eps(eps, spec, opt, cfg.d);
    std::vector<double> times{s};
    for (double dl : deltas) times.push_back(s + dl);
    auto fn = std::function<std::vector<cplx>(long)>([&](long i) {
        auto amps = realization_amplitudes(eps, times, g, cfg, spec, ic, realization_seed(base_seed, i), opt, i);
        std::vector<cplx> inc;
        cplx base = pair_with(amps[0], g, phi);
        for (std::size_t k = 1; k < times.size(); ++k) inc.push_back(pair_with(amps[k], g, phi) - base);
        return inc;
    });
    auto all = parallel_map<std::vector<cplx>>(n_real, opt.workers, fn);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        std::vector<cplx> sq;
        sq.reserve(all.size());
        for (const auto& v : all) sq.push_back(std::norm(v[k]));
        MomentValue mv = sample_mean(sq);
        rep.increments.push_back(mv);
        double r = mv.value.real() / (deltas[k] * deltas[k]);
        rep.ratios.push_back(r);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    rep.fitted_C = hi;
    rep.spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    rep.pass = std::isfinite(rep.spread) && rep.spread <= 3.0;
    return rep;
}

// sigma = 0: u^(t, xi) = e^{i|xi|^m t} u0^(xi), so the increment is deterministic
inline cplx free_increment(const std::function<cplx(double)>& phi, const InitialCondition& ic, double m, double s,
                           double t, const SpectralGrid& g) {
    KahanSum<cplx> acc;
    for (std::size_t k = 0; k < g.size(); ++k) {
        double xi = g.axis_k(k);
        double lam = std::pow(std::abs(xi), m);
        acc.add((std::polar(1.0, lam * t) - std::polar(1.0, lam * s)) * ic.u0_hat({xi, 0, 0}) * std::conj(phi(xi)));
    }
    return acc.value() * g.cell_k();
}

}  // namespace osc
