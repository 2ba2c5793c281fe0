#pragma once

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "osc/bounds.hpp"
#include "osc/chaos.hpp"
#include "osc/duhamel.hpp"
#include "osc/fields.hpp"
#include "osc/harness.hpp"
#include "osc/io.hpp"
#include "osc/moments.hpp"
#include "osc/solver.hpp"

namespace osc {

namespace exit_code {
inline constexpr int pass = 0;
inline constexpr int gate_failure = 1;
inline constexpr int usage = 2;
inline constexpr int config = 3;
}  // namespace exit_code

// Subcommand bodies. Each returns its JSON report; report["pass"] decides
// the exit code.
namespace cmd {

inline std::string out_path(const RunConfig& rc, const std::string& file) {
    return (std::filesystem::path(rc.study.output_dir) / file).string();
}

inline Json header(const std::string& kind) { return {{"schema_version", schema_version}, {"kind", kind}}; }

inline EnsembleOptions ensemble(const RunConfig& rc) {
    EnsembleOptions opt = rc.study.ensemble;
    opt.workers = rc.study.workers;
    return opt;
}

inline Json simulate(const RunConfig& rc, std::ostream& out) {
    const auto& sc = rc.study;
    CovarianceSpec spec = sc.covariance();
    InitialCondition ic = sc.initial();
    SpectralGrid g = grid_for_eps(sc.phys.eps, spec, sc.ensemble, sc.phys.d);
    RandomField q = synthesize_field(spec, g, realization_seed(sc.base_seed, 0), sc.phys.eps);
    Trajectory tr = solve(initial_wavefunction(ic, g), q, rc.solver_T, sc.ensemble.dt, sc.phys);
    const WaveFunction& u = tr.snapshots.back();
    std::vector<std::vector<double>> rows;
    for (std::size_t f = 0; f < g.size(); ++f) {
        Vec3 k = g.wavenumber(f);
        rows.push_back({k[0], u.amplitudes_hat[f].real(), u.amplitudes_hat[f].imag()});
    }
    write_csv(out_path(rc, "simulate.csv"), {"xi", "re", "im"}, rows);
    const double tol = 1e-12;
    Json j = header("simulate");
    j["eps"] = sc.phys.eps;
    j["grid_n"] = g.n;
    j["T"] = rc.solver_T;
    j["dt"] = sc.ensemble.dt;
    j["steps"] = tr.steps;
    j["seed"] = q.seed;
    j["mass_drift"] = tr.mass_drift;
    j["mass_drift_tolerance"] = tol;
    j["pass"] = tr.mass_drift <= tol && u.finite();
    out << "simulate: eps " << sc.phys.eps << ", n " << g.n << ", " << tr.steps << " steps, mass drift "
        << tr.mass_drift << " (tolerance " << tol << ")\n";
    return j;
}

inline Json field_stats(const RunConfig& rc, std::ostream& out) {
    const auto& sc = rc.study;
    CovarianceSpec spec = sc.covariance();
    SpectralGrid g = grid_for_eps(sc.phys.eps, spec, sc.ensemble, sc.phys.d);
    if (g.d != 1) throw Error("field-stats: d = 1 only");
    if (rc.field_samples < 2) throw ConfigError("fields.samples", "need at least 2 samples");
    std::vector<double> lags;
    for (double c : rc.field_lag_cells) {
        if (c < 0 || c != std::floor(c)) throw ConfigError("fields.lag_cells", "lags are non-negative integers");
        lags.push_back(c * g.dx());
    }
    auto fields = parallel_map<RandomField>(rc.field_samples, sc.workers, [&](long i) {
        return synthesize_field(spec, g, realization_seed(sc.base_seed, i), sc.phys.eps);
    });
    CovarianceEstimate est = empirical_covariance(fields, lags);
    Json rows = Json::array();
    std::vector<std::vector<double>> csv;
    bool pass = true;
    for (std::size_t i = 0; i < lags.size(); ++i) {
        // q(x / eps) has covariance R(lag / eps)
        double expect = covariance_by_quadrature(spec, lags[i] / sc.phys.eps);
        bool ok = std::abs(est.value[i] - expect) <= 3.0 * est.std_error[i];
        pass = pass && ok;
        rows.push_back({{"lag", lags[i]}, {"empirical", est.value[i]}, {"std_error", est.std_error[i]},
                        {"expected", expect}, {"pass", ok}});
        csv.push_back({lags[i], est.value[i], est.std_error[i], expect});
        out << "field-stats: lag " << lags[i] << " empirical " << est.value[i] << " +- " << est.std_error[i]
            << " expected " << expect << (ok ? " ok" : " FAIL") << "\n";
    }
    write_csv(out_path(rc, "field_stats.csv"), {"lag", "empirical", "std_error", "expected"}, csv);
    Json j = header("field-stats");
    j["samples"] = rc.field_samples;
    j["grid_n"] = g.n;
    j["rows"] = rows;
    j["tolerance"] = "3 standard errors";
    j["pass"] = pass;
    return j;
}

inline Json duhamel_compare(const RunConfig& rc, std::ostream& out) {
    const auto& sc = rc.study;
    CovarianceSpec spec = sc.covariance();
    InitialCondition ic = sc.initial();
    SpectralGrid g = grid_for_eps(sc.phys.eps, spec, sc.ensemble, sc.phys.d);
    RandomField q = synthesize_field(spec, g, realization_seed(sc.base_seed, 0), sc.phys.eps);
    WaveFunction u0 = initial_wavefunction(ic, g);
    const CVec ref = solve(u0, q, rc.solver_T, sc.ensemble.dt, sc.phys).snapshots.back().amplitudes_hat;
    auto terms = duhamel_terms(rc.duhamel_order, rc.solver_T, q, u0, sc.phys, sc.ensemble.dt);
    CVec sum(g.size(), cplx(0.0));
    std::vector<std::vector<double>> csv;
    Json rows = Json::array();
    double last = 0.0;
    for (const auto& tm : terms) {
        for (std::size_t f = 0; f < sum.size(); ++f) sum[f] += tm.u.amplitudes_hat[f];
        last = relative_l2_diff(sum, ref);
        csv.push_back({static_cast<double>(tm.order), tm.u.l2(), last});
        rows.push_back({{"order", tm.order}, {"l2_norm", tm.u.l2()}, {"discrepancy_vs_solver", last}});
    }
    write_csv(out_path(rc, "duhamel_compare.csv"), {"order", "l2_norm", "discrepancy_vs_solver"}, csv);
    Json j = header("duhamel-compare");
    j["eps"] = sc.phys.eps;
    j["T"] = rc.solver_T;
    j["seed"] = q.seed;
    j["rows"] = rows;
    j["discrepancy"] = last;
    j["tolerance"] = rc.duhamel_tolerance;
    j["pass"] = last <= rc.duhamel_tolerance;
    out << "duhamel-compare: order " << rc.duhamel_order << " partial sum vs solver, relative L2 " << last
        << " (tolerance " << rc.duhamel_tolerance << ")\n";
    return j;
}

struct MomentsRequest {
    int order = 1;
    std::vector<double> eps;
    double time = -1.0;
    double xi = 0.0;
    bool xi_set = false;
};

inline Json moments(const RunConfig& rc, const MomentsRequest& req, std::ostream& out) {
    const auto& sc = rc.study;
    CovarianceSpec spec = sc.covariance();
    InitialCondition ic = sc.initial();
    double t = req.time >= 0.0 ? req.time : sc.times.front();
    double xi = req.xi_set ? req.xi : sc.xis.front();
    std::vector<double> eps = req.eps.empty() ? std::vector<double>{sc.phys.eps} : req.eps;
    for (double e : eps)
        if (!(e > 0.0 && e <= 1.0)) throw ConfigError("--eps", "values must lie in (0, 1]");
    cplx lim = mean_term_limit(req.order, t, {xi, 0, 0}, sc.phys, spec, ic).value;
    std::vector<std::vector<double>> csv;
    Json rows = Json::array();
    for (double e : eps) {
        PhysicalConfig c = sc.phys;
        c.eps = e;
        cplx v = mean_term_eps(req.order, t, {xi, 0, 0}, c, spec, ic).value;
        csv.push_back({e, static_cast<double>(req.order), v.real(), v.imag(), std::abs(v - lim)});
        rows.push_back({{"eps", e}, {"value", cplx_json(v)}, {"abs_err_vs_limit", std::abs(v - lim)}});
        out << "moments: n " << req.order << " eps " << e << " value " << v << " |err vs limit| " << std::abs(v - lim)
            << "\n";
    }
    write_csv(out_path(rc, "moments.csv"), {"eps", "order", "re", "im", "abs_err_vs_limit"}, csv);
    Json j = header("moments");
    j["order"] = req.order;
    j["t"] = t;
    j["xi"] = xi;
    j["limit"] = cplx_json(lim);
    j["rows"] = rows;
    j["pass"] = true;  // no gate
    return j;
}

inline Json chaos_verify(const RunConfig& rc, std::ostream& out) {
    const auto& sc = rc.study;
    if (sc.phys.d != 1) throw Error("chaos-verify: d = 1 only");
    CovarianceSpec spec = sc.covariance();
    InitialCondition ic = sc.initial();
    SpectralGrid lat(1, rc.chaos_n, rc.chaos_L);
    const double t = sc.times.front();
    const std::size_t xi = lat.index_of({sc.xis.front(), 0, 0});
    const std::size_t M = lat.n;
    const double h = lat.dx();
    Json checks = Json::array();
    bool pass = true;
    auto record = [&](const std::string& name, double measured, double tol, const std::string& oracle) {
        bool ok = measured <= tol;
        pass = pass && ok;
        checks.push_back({{"name", name}, {"measured", measured}, {"tolerance", tol}, {"oracle", oracle}, {"pass", ok}});
        out << "chaos-verify: " << name << " " << measured << " (tolerance " << tol << ")" << (ok ? " ok" : " FAIL")
            << "\n";
    };

    // conversion: f_1 only gives g_1 = f_1; f_2 only gives g_2 = sym f_2, g_1 = 0, g_0 = h tr f_2
    CVec f1 = duhamel_limit_kernel(1, t, xi, lat, sc.phys, spec, ic);
    CVec f2 = duhamel_limit_kernel(2, t, xi, lat, sc.phys, spec, ic);
    {
        ChaosExpansion e = zero_expansion(lat, 2);
        e.kernels[1] = f1;
        ChaosExpansion g = strat_to_ito(e);
        double d = std::abs(g.kernels[0][0]), scale = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            d = std::max(d, std::abs(g.kernels[1][i] - f1[i]));
            scale = std::max(scale, std::abs(f1[i]));
        }
        for (const auto& z : g.kernels[2]) d = std::max(d, std::abs(z));
        record("conversion_f1_only", d / scale, 1e-14, "g_1 = f_1, other orders zero");
    }
    cplx g0;
    {
        ChaosExpansion e = zero_expansion(lat, 2);
        e.kernels[2] = f2;
        ChaosExpansion g = strat_to_ito(e);
        CVec sym = symmetrize(f2, 2, M);
        cplx trace = 0.0;
        double d = 0.0, scale = 0.0;
        for (std::size_t y = 0; y < M; ++y) trace += f2[y * M + y];
        trace *= h;
        for (std::size_t i = 0; i < M * M; ++i) {
            d = std::max(d, std::abs(g.kernels[2][i] - sym[i]));
            scale = std::max(scale, std::abs(f2[i]));
        }
        for (const auto& z : g.kernels[1]) d = std::max(d, std::abs(z));
        d = std::max(d, std::abs(g.kernels[0][0] - trace));
        record("conversion_f2_only", d / scale, 1e-14, "g_2 = sym f_2, g_1 = 0, g_0 = h sum_y f_2(y, y)");
        g0 = g.kernels[0][0];
        cplx oracle = order_two_expectation_by_pairing(f2, lat);
        record("conversion_g0_vs_pairing", std::abs(g0 - oracle) / std::abs(oracle), 1e-10,
               "frequency-side Gaussian pairing sum");
    }

    // cross identity against the pairing quadrature on the lattice's own frequency rule
    FrequencyRule rule = FrequencyRule::grid(lat);
    for (int n = 0; n <= std::min(rc.chaos_order, 2); ++n) {
        ChaosExpansion e = zero_expansion(lat, 2 * n);
        e.kernels[2 * n] = duhamel_limit_kernel(2 * n, t, xi, lat, sc.phys, spec, ic);
        cplx a = expectation_of_expansion(e);
        cplx b = mean_term_limit(n, t, {lat.axis_k(xi), 0, 0}, sc.phys, spec, ic, rule).value;
        record("cross_identity_n" + std::to_string(n), std::abs(a - b) / std::abs(b), 1e-8,
               "limit mean term by pairing quadrature");
    }

    // Ito isometry on f_1
    {
        ChaosExpansion e = zero_expansion(lat, 1);
        e.kernels[1] = f1;
        IsometryCheck iso = isometry_check(e, rc.chaos_samples, sc.base_seed);
        double z = std::abs(iso.sample_mean - iso.expected) / iso.std_error;
        record("isometry_f1_in_se", z, 3.0, "h sum |f_1|^2");
    }

    // mass of the truncated limit
    MassReport mass;
    {
        const double rho = sc.phys.default_rho();
        SecondMomentFit fit = fit_second_moment_constant({1, 2}, {0.25, 0.5, 1.0}, {0.0, 1.0, 3.0}, rho, sc.phys,
                                                         spec, ic, default_limit_rule(1));
        mass = mass_conservation_check(rc.chaos_order, {0.0, 0.25, 0.5, 1.0}, lat, sc.phys, spec, ic, fit.C, rho);
        record("mass_relative_variation", mass.relative_variation, mass.truncation_budget + mass.quadrature_tolerance,
               "dropped-order tail of the fitted second-moment bound");
        record("mass_im_j_term", mass.max_im_j, 1e-8, "real-valuedness of the J pairing");
    }
    Json j = header("chaos-verify");
    j["lattice"] = {{"n", lat.n}, {"L", lat.box_length}};
    j["t"] = t;
    j["xi"] = lat.axis_k(xi);
    j["checks"] = checks;
    j["mass"] = {{"times", mass.times}, {"mass", mass.mass}, {"relative_variation", mass.relative_variation},
                 {"truncation_budget", mass.truncation_budget}, {"im_j_term", mass.im_j_term}};
    j["pass"] = pass;
    return j;
}

// same fit as limit_mean, without the refined-rule pass it only needs for budgets
inline double mean_majorant_C(const RunConfig& rc) {
    const auto& sc = rc.study;
    std::vector<cplx> terms;
    for (int n = 0; n <= sc.orders; ++n)
        terms.push_back(mean_term_limit(n, rc.majorant_T, {0, 0, 0}, sc.phys, sc.covariance(), sc.initial(),
                                        default_limit_rule(sc.phys.d)).value);
    return fit_mean_majorant(terms, rc.majorant_T, 0.0, sc.phys.default_rho(), sc.phys.m_order);
}

inline Json verify_bounds(const RunConfig& rc, const std::string& which, std::ostream& out) {
    static const std::vector<std::string> all{"kernel", "resolvent", "log", "majorant", "carleman"};
    std::vector<std::string> picked;
    std::stringstream ss(which);
    for (std::string w; std::getline(ss, w, ',');) {
        if (w != "all" && std::find(all.begin(), all.end(), w) == all.end())
            throw ConfigError("--check", "unknown check '" + w + "' (all, kernel, resolvent, log, majorant, carleman)");
        picked.push_back(w);
    }
    if (picked.empty()) throw ConfigError("--check", "empty check list");
    auto want = [&](const std::string& s) {
        return std::find(picked.begin(), picked.end(), "all") != picked.end() ||
               std::find(picked.begin(), picked.end(), s) != picked.end();
    };
    const auto& sc = rc.study;
    const double m = sc.phys.m_order, rho0 = sc.phys.default_rho();
    Json j = header("verify-bounds");
    Json reports = Json::array();
    bool pass = true;
    auto note = [&](const std::string& name, bool ok, const std::string& msg) {
        pass = pass && ok;
        out << "verify-bounds: " << name << " " << msg << (ok ? " ok" : " FAIL") << "\n";
    };
    if (want("kernel")) {
        std::vector<double> a = uniform_draws(sc.base_seed, rc.kernel_draws, -10.0, 10.0), tg;
        for (int i = 1; i <= 40; ++i) tg.push_back(0.125 * i);
        KernelConvolutionStability st = kernel_convolution_stability(rc.rho_list, a, tg);
        for (std::size_t r = 0; r < st.rhos.size(); ++r)
            for (int n = 1; n <= 4; ++n) {
                BoundReport b = verify_kernel_convolution(n, st.rhos[r], a, tg);
                b.name = "kernel_n" + std::to_string(n) + "_rho" + std::to_string(st.rhos[r]);
                reports.push_back(to_json(b));
            }
        j["kernel"] = {{"a_values", a}, {"rhos", st.rhos}, {"fitted_C", st.fitted}, {"worst_growth", st.worst_growth},
                        {"growth_tolerance", 2.0}, {"n1_exact", st.n1_exact}, {"pass", st.pass}};
        std::ostringstream msg;
        msg << "n = 1 exact " << (st.n1_exact ? "yes" : "no") << ", growth " << st.worst_growth << " (tolerance 2)";
        note("kernel", st.pass, msg.str());
    }
    if (want("resolvent")) {
        Json per = Json::array();
        bool ok = true;
        for (double rho : rc.rho_list) {
            ResolventReport r = verify_resolvent_integral(rho, sc.phys.d, m, resolvent_beta_grid(61));
            Json pieces = Json::array();
            for (const auto& b : r.piece_reports) {
                pieces.push_back(to_json(b));
                reports.push_back(to_json(b));
                out << "verify-bounds: rho " << rho << " " << b.name << " max " << b.lhs_max << " vs printed "
                    << b.rhs_with_fitted_C << (b.pass ? " ok" : " FAIL") << "\n";
            }
            per.push_back({{"rho", rho}, {"sup", r.sup}, {"sup_beta", r.sup_beta}, {"sup_refined", r.sup_refined},
                           {"refinement_change", r.refinement_change}, {"refinement_tolerance", 1e-4},
                           {"sup_pass", r.sup_pass}, {"pieces", pieces}, {"pass", r.pass}});
            ok = ok && r.pass;
            std::ostringstream msg;
            msg << "rho " << rho << " sup " << r.sup << " at beta " << r.sup_beta << ", refinement change "
                << r.refinement_change;
            note("resolvent", r.sup_pass, msg.str());
        }
        pass = pass && ok;
        j["resolvent"] = per;
    }
    if (want("log")) {
        LogIntegralReport r = verify_log_integral(log_integral_grid(41), m);
        reports.push_back(to_json(r.base));
        reports.push_back(to_json(r.doubled));
        j["log_integral"] = {{"fitted_C", r.base.fitted_C}, {"fitted_C_range_doubled", r.doubled.fitted_C},
                             {"relative_change", r.relative_change}, {"tolerance", 0.05}, {"pass", r.pass}};
        std::ostringstream msg;
        msg << "C " << r.base.fitted_C << ", range doubled " << r.doubled.fitted_C;
        note("log", r.pass, msg.str());
    }
    if (want("majorant") || want("carleman")) {
        const double C = mean_majorant_C(rc);
        j["majorant_C"] = C;
        j["majorant_T"] = rc.majorant_T;
        if (want("majorant")) {
            MajorantSeries ms = majorant_series(rc.majorant_N, 1, rc.majorant_T, rho0, C);
            bool ok = ms.ratio_test_pass && ms.n0 <= 60 && ms.cauchy_pass;
            j["majorant"] = {{"n0", ms.n0}, {"n0_limit", 60}, {"tail_fraction", ms.tail_fraction},
                             {"tail_tolerance", 1e-12}, {"pass", ok}};
            std::ostringstream msg;
            msg << "C " << C << ", ratios below 1 from N = " << ms.n0 << " (limit 60), tail " << ms.tail_fraction;
            note("majorant", ok, msg.str());
        }
        if (want("carleman")) {
            CarlemanReport cr = carleman_check(carleman_moment_bounds(rc.carleman_R, C, rc.majorant_T, rho0));
            j["carleman"] = {{"R", rc.carleman_R}, {"kappa", cr.kappa}, {"kappa_low", cr.kappa_low},
                             {"kappa_high", cr.kappa_high}, {"partial", cr.partial}, {"pass", cr.pass}};
            std::ostringstream msg;
            msg << "kappa " << cr.kappa << ", min S_R/sqrt R " << cr.kappa_low << " then " << cr.kappa_high;
            note("carleman", cr.pass, msg.str());
        }
    }
    j["check"] = which;
    j["reports"] = reports;
    j["pass"] = pass;
    return j;
}

inline Json convergence(const RunConfig& rc, bool eps_frozen, std::ostream& out) {
    ConvergenceReport rep = convergence_study(rc.study, eps_frozen);
    write_csv(out_path(rc, "convergence.csv"), {"eps", "t", "xi", "grid_n", "re", "im", "std_error", "discrepancy"},
              convergence_csv_rows(rep));
    for (std::size_t p = 0; p < rep.limits.size(); ++p)
        out << "convergence: limit " << rep.probe_labels[p] << " = " << rep.limits[p].value << " (quadrature "
            << rep.limits[p].quadrature_budget << ", truncation " << rep.limits[p].truncation_budget << ")\n";
    for (const auto& r : rep.rows) {
        out << "convergence: eps " << r.eps << " n " << r.grid_n << " mc " << r.mc.value << " +- " << r.mc.std_error
            << " discrepancy " << r.discrepancy;
        if (eps_frozen) out << " eps-frozen gap " << r.eps_frozen_gap << " se";
        out << " (" << r.runtime_s << " s)\n";
    }
    for (const auto& c : rep.checks) out << "convergence: " << c << "\n";
    return to_json(rep);
}

inline Json tightness(const RunConfig& rc, std::ostream& out) {
    const auto& sc = rc.study;
    auto phi = [](double xi) { return cplx(std::exp(-xi * xi)); };
    TightnessReport r = tightness_increment_check(phi, rc.tight_eps, sc.phys, sc.covariance(), sc.initial(), rc.tight_s,
                                                  rc.tight_deltas, rc.tight_realizations, sc.base_seed, ensemble(rc));
    Json rows = Json::array();
    for (std::size_t k = 0; k < r.deltas.size(); ++k) {
        rows.push_back({{"delta", r.deltas[k]}, {"increment", to_json(r.increments[k])}, {"ratio", r.ratios[k]}});
        out << "tightness: t - s = " << r.deltas[k] << " E|increment|^2 " << r.increments[k].value.real() << " +- "
            << r.increments[k].std_error << " ratio " << r.ratios[k] << "\n";
    }
    out << "tightness: fitted C " << r.fitted_C << ", max/min ratio " << r.spread << " (tolerance 3)\n";
    Json j = header("tightness");
    j["eps"] = rc.tight_eps;
    j["s"] = r.s;
    j["phi"] = "exp(-xi^2)";
    j["realizations"] = rc.tight_realizations;
    j["rows"] = rows;
    j["fitted_C"] = r.fitted_C;
    j["spread"] = r.spread;
    j["spread_tolerance"] = 3.0;
    j["pass"] = r.pass;
    return j;
}

}  // namespace cmd

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Schroedinger equation with oscillatory random potential: simulation and verification"};
    app.name("oscschr");
    app.fallthrough();
    std::string config_path, output_dir;
    std::vector<std::string> sets;
    int workers = 0;
    app.add_option("--config", config_path, "key = value config file");
    app.add_option("--set", sets, "override one key (key=value), repeatable");
    app.add_option("--output", output_dir, "output directory (study.output_dir)");
    app.add_option("--workers", workers, "worker threads; 0 uses OSC_WORKERS or the core count")
        ->check(CLI::NonNegativeNumber);

    auto* simulate = app.add_subcommand("simulate", "one solver realization at physics.eps");
    auto* field_stats = app.add_subcommand("field-stats", "ensemble covariance of the synthesized potential");
    auto* duhamel = app.add_subcommand("duhamel-compare", "Duhamel partial sums against the solver");
    auto* moments = app.add_subcommand("moments", "eps-frozen and limit mean terms");
    cmd::MomentsRequest mreq;
    moments->add_option("--order", mreq.order, "mean term index n (Duhamel order 2n)")->check(CLI::Range(0, 3));
    moments->add_option("--eps", mreq.eps, "correlation length, repeatable");
    moments->add_option("--time", mreq.time, "probe time");
    auto* xi_opt = moments->add_option("--xi", mreq.xi, "probe frequency");
    auto* chaos = app.add_subcommand("chaos-verify", "chaos conversion, isometry and mass checks");
    auto* bounds = app.add_subcommand("verify-bounds", "analytic bounds on their grids");
    std::string which = "all";
    bounds->add_option("--check", which, "all, or a comma list of kernel, resolvent, log, majorant, carleman");
    auto* conv = app.add_subcommand("convergence", "first-moment eps-convergence study");
    bool eps_frozen = false;
    conv->add_flag("--eps-frozen", eps_frozen, "also report the eps-frozen quadrature sum per eps");
    auto* tight = app.add_subcommand("tightness", "increment bound for <u, phi>");
    app.require_subcommand(1);

    if (argc <= 1) {
        err << app.help();
        return exit_code::usage;
    }
    if (argv[1][0] != '-') {
        bool known = false;
        for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == argv[1];
        if (!known) {
            err << "error: unknown subcommand '" << argv[1] << "'\n" << app.help();
            return exit_code::usage;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return exit_code::pass;
        }
        err << "error: " << e.what() << "\n" << app.help();
        return exit_code::usage;
    }
    mreq.xi_set = xi_opt->count() > 0;

    try {
        ConfigFile cf = config_path.empty() ? ConfigFile{} : ConfigFile::load(config_path);
        for (const auto& s : sets) cf.set(s);
        RunConfig rc = build_run_config(cf);
        if (!output_dir.empty()) rc.study.output_dir = output_dir;
        if (workers > 0) rc.study.workers = workers;

        auto sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        Json report;
        if (sub == simulate) report = cmd::simulate(rc, out);
        else if (sub == field_stats) report = cmd::field_stats(rc, out);
        else if (sub == duhamel) report = cmd::duhamel_compare(rc, out);
        else if (sub == moments) report = cmd::moments(rc, mreq, out);
        else if (sub == chaos) report = cmd::chaos_verify(rc, out);
        else if (sub == bounds) report = cmd::verify_bounds(rc, which, out);
        else if (sub == conv) report = cmd::convergence(rc, eps_frozen, out);
        else if (sub == tight) report = cmd::tightness(rc, out);
        std::string file = name;
        std::replace(file.begin(), file.end(), '-', '_');
        write_json(cmd::out_path(rc, file + ".json"), report);
        bool ok = report.value("pass", false);
        out << name << ": " << (ok ? "PASS" : "FAIL") << " (report " << cmd::out_path(rc, file + ".json") << ")\n";
        return ok ? exit_code::pass : exit_code::gate_failure;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_code::config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::gate_failure;
    }
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"oscschr"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace osc
