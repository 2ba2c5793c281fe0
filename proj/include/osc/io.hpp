#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "osc/config.hpp"
#include "osc/harness.hpp"

namespace osc {

// Flat "key = value" config. '#' starts a comment, blank lines are ignored,
// lists are comma separated. Every value remembers its line for diagnostics.
class ConfigFile {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static const std::vector<std::string>& known_keys() {
        static const std::vector<std::string> keys{
            "physics.d", "physics.m", "physics.eps", "physics.fourier_convention",
            "covariance.kind", "covariance.params", "initial.kind", "initial.params",
            "grid.n", "grid.box_length", "solver.dt", "solver.T",
            "duhamel.order", "duhamel.tolerance", "rng.base_seed",
            "study.eps_list", "study.realizations", "study.times", "study.xis", "study.orders",
            "study.workers", "study.route", "study.output_dir",
            "tightness.eps", "tightness.s", "tightness.deltas", "tightness.realizations",
            "bounds.rho_list", "bounds.kernel_draws", "bounds.majorant_T", "bounds.majorant_N", "bounds.carleman_R",
            "chaos.lattice_n", "chaos.lattice_L", "chaos.order", "chaos.samples",
            "fields.samples", "fields.lag_cells"};
        return keys;
    }

    static ConfigFile parse(std::istream& in) {
        ConfigFile cf;
        std::string raw;
        int ln = 0;
        while (std::getline(in, raw)) {
            ++ln;
            std::string s = raw.substr(0, raw.find('#'));
            s = trim(s);
            if (s.empty()) continue;
            auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("line " + std::to_string(ln), "expected 'key = value'", ln);
            std::string k = trim(s.substr(0, eq)), v = trim(s.substr(eq + 1));
            if (k.empty()) throw ConfigError("line " + std::to_string(ln), "empty key", ln);
            if (v.empty()) throw ConfigError(k, "empty value (line " + std::to_string(ln) + ")", ln);
            const auto& kk = known_keys();
            if (std::find(kk.begin(), kk.end(), k) == kk.end())
                throw ConfigError(k, "unknown key (line " + std::to_string(ln) + ")", ln);
            if (cf.entries_.count(k))
                throw ConfigError(k, "duplicate key (line " + std::to_string(ln) + ", first on line " +
                                         std::to_string(cf.entries_[k].line) + ")", ln);
            cf.entries_[k] = {v, ln};
        }
        return cf;
    }

    static ConfigFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config", "cannot open '" + path + "'");
        return parse(in);
    }

    // "key=value" overrides from the command line; line 0 marks them
    void set(const std::string& assignment) {
        auto eq = assignment.find('=');
        if (eq == std::string::npos) throw ConfigError(assignment, "override must look like key=value");
        std::string k = trim(assignment.substr(0, eq));
        const auto& kk = known_keys();
        if (std::find(kk.begin(), kk.end(), k) == kk.end()) throw ConfigError(k, "unknown key (override)");
        entries_[k] = {trim(assignment.substr(eq + 1)), 0};
    }

    bool has(const std::string& k) const { return entries_.count(k) > 0; }

    std::string str(const std::string& k, const std::string& dflt) const {
        auto it = entries_.find(k);
        return it == entries_.end() ? dflt : it->second.value;
    }

    double num(const std::string& k, double dflt) const {
        auto it = entries_.find(k);
        if (it == entries_.end()) return dflt;
        return to_double(k, it->second.value, it->second.line);
    }

    long integer(const std::string& k, long dflt) const {
        auto it = entries_.find(k);
        if (it == entries_.end()) return dflt;
        double v = to_double(k, it->second.value, it->second.line);
        if (v != std::floor(v)) throw ConfigError(k, "expected an integer" + where(it->second.line), it->second.line);
        return static_cast<long>(v);
    }

    std::vector<double> list(const std::string& k, const std::vector<double>& dflt) const {
        auto it = entries_.find(k);
        if (it == entries_.end()) return dflt;
        std::vector<double> out;
        std::stringstream ss(it->second.value);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(to_double(k, trim(item), it->second.line));
        return out;
    }

    int line_of(const std::string& k) const {
        auto it = entries_.find(k);
        return it == entries_.end() ? 0 : it->second.line;
    }

private:
    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }
    static std::string where(int line) { return line > 0 ? " (line " + std::to_string(line) + ")" : ""; }
    static double to_double(const std::string& k, const std::string& v, int line) {
        try {
            std::size_t pos = 0;
            double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ConfigError(k, "not a number: '" + v + "'" + where(line), line);
        }
    }

    std::map<std::string, Entry> entries_;
};

// Everything a subcommand may need, validated with key and line on failure.
struct RunConfig {
    StudyConfig study;
    double solver_T = 0.5;
    int duhamel_order = 8;
    double duhamel_tolerance = 1e-4;
    double tight_eps = 0.2, tight_s = 0.1;
    std::vector<double> tight_deltas{0.4, 0.2, 0.1, 0.05};
    long tight_realizations = 10000;
    std::vector<double> rho_list{0.6, 0.75};
    int kernel_draws = 4;
    double majorant_T = 0.5;
    int majorant_N = 400, carleman_R = 60;
    std::size_t chaos_n = 32;
    double chaos_L = 16.0;
    int chaos_order = 2;
    long chaos_samples = 10000;
    long field_samples = 2000;
    std::vector<double> field_lag_cells{0, 1, 2, 4, 8};
};

inline RunConfig build_run_config(const ConfigFile& cf) {
    RunConfig rc;
    StudyConfig& sc = rc.study;
    auto wrap = [&](auto&& fn) {
        try {
            fn();
        } catch (const ConfigError& e) {
            if (e.line > 0 || cf.line_of(e.key) == 0) throw;
            throw ConfigError(e.key, std::string(e.what()).substr(e.key.size() + 2) + " (line " +
                                         std::to_string(cf.line_of(e.key)) + ")", cf.line_of(e.key));
        }
    };
    wrap([&] {
        sc.phys.d = static_cast<int>(cf.integer("physics.d", 1));
        sc.phys.m_order = cf.num("physics.m", 2.0);
        sc.phys.eps = cf.num("physics.eps", 0.4);
        std::string conv = cf.str("physics.fourier_convention", "forward_unitless_inverse_2pi");
        if (conv != "forward_unitless_inverse_2pi")
            throw ConfigError("physics.fourier_convention", "only forward_unitless_inverse_2pi is implemented");
        sc.phys.validate();
    });
    sc.covariance_kind = cf.str("covariance.kind", "gaussian");
    sc.covariance_params = cf.list("covariance.params", {1.0, 1.0});
    sc.initial_kind = cf.str("initial.kind", "gaussian");
    sc.initial_params = cf.list("initial.params", {1.0, 1.0});
    wrap([&] { (void)sc.covariance(); });
    wrap([&] { (void)sc.initial(); });
    wrap([&] {
        long n = cf.integer("grid.n", 512);
        if (n < 2) throw ConfigError("grid.n", "must be >= 2");
        sc.ensemble.grid_n = static_cast<std::size_t>(n);
        sc.ensemble.box_length = cf.num("grid.box_length", 20.0);
        if (!(sc.ensemble.box_length > 0.0)) throw ConfigError("grid.box_length", "must be > 0");
        SpectralGrid(sc.phys.d, sc.ensemble.grid_n, sc.ensemble.box_length).validate();
    });
    sc.ensemble.dt = cf.num("solver.dt", 1e-3);
    rc.solver_T = cf.num("solver.T", 0.5);
    rc.duhamel_order = static_cast<int>(cf.integer("duhamel.order", 8));
    rc.duhamel_tolerance = cf.num("duhamel.tolerance", 1e-4);
    sc.ensemble.duhamel_order = rc.duhamel_order;
    long seed = cf.integer("rng.base_seed", 1);
    if (seed < 0) throw ConfigError("rng.base_seed", "must be >= 0", cf.line_of("rng.base_seed"));
    sc.base_seed = static_cast<std::uint64_t>(seed);
    sc.eps_list = cf.list("study.eps_list", {0.4, 0.2, 0.1});
    sc.realizations = cf.integer("study.realizations", 10000);
    sc.times = cf.list("study.times", {0.5});
    sc.xis = cf.list("study.xis", {0.0});
    sc.orders = static_cast<int>(cf.integer("study.orders", 2));
    sc.workers = static_cast<int>(cf.integer("study.workers", 0));
    sc.output_dir = cf.str("study.output_dir", "out");
    wrap([&] { sc.ensemble.route = parse_route(cf.str("study.route", "solver")); });
    wrap([&] { sc.validate(); });
    if (!(sc.ensemble.dt > 0.0)) throw ConfigError("solver.dt", "must be > 0", cf.line_of("solver.dt"));
    if (!(rc.solver_T >= 0.0)) throw ConfigError("solver.T", "must be >= 0", cf.line_of("solver.T"));
    if (rc.duhamel_order < 0 || rc.duhamel_order > 16)
        throw ConfigError("duhamel.order", "must lie in 0..16", cf.line_of("duhamel.order"));
    rc.tight_eps = cf.num("tightness.eps", 0.2);
    rc.tight_s = cf.num("tightness.s", 0.1);
    rc.tight_deltas = cf.list("tightness.deltas", {0.4, 0.2, 0.1, 0.05});
    rc.tight_realizations = cf.integer("tightness.realizations", sc.realizations);
    if (!(rc.tight_eps > 0.0 && rc.tight_eps <= 1.0))
        throw ConfigError("tightness.eps", "must lie in (0, 1]", cf.line_of("tightness.eps"));
    rc.rho_list = cf.list("bounds.rho_list", {0.6, 0.75});
    rc.kernel_draws = static_cast<int>(cf.integer("bounds.kernel_draws", 4));
    rc.majorant_T = cf.num("bounds.majorant_T", sc.times.empty() ? 0.5 : *std::max_element(sc.times.begin(), sc.times.end()));
    rc.majorant_N = static_cast<int>(cf.integer("bounds.majorant_N", 400));
    rc.carleman_R = static_cast<int>(cf.integer("bounds.carleman_R", 60));
    rc.chaos_n = static_cast<std::size_t>(cf.integer("chaos.lattice_n", 32));
    rc.chaos_L = cf.num("chaos.lattice_L", 16.0);
    rc.chaos_order = static_cast<int>(cf.integer("chaos.order", 2));
    rc.chaos_samples = cf.integer("chaos.samples", 10000);
    rc.field_samples = cf.integer("fields.samples", 2000);
    rc.field_lag_cells = cf.list("fields.lag_cells", {0, 1, 2, 4, 8});
    return rc;
}

// ---------------------------------------------------------------------------

using Json = nlohmann::json;

inline Json cplx_json(cplx z) { return Json::array({z.real(), z.imag()}); }

inline Json to_json(const MomentValue& m) {
    return {{"value", cplx_json(m.value)}, {"std_error", m.std_error},
            {"method", m.method == MomentValue::Method::quadrature ? "quadrature" : "monte_carlo"}};
}

inline Json to_json(const BoundReport& b) {
    return {{"name", b.name}, {"lhs_max", b.lhs_max}, {"rhs_with_fitted_C", b.rhs_with_fitted_C},
            {"fitted_C", b.fitted_C}, {"grid", b.grid}, {"pass", b.pass}};
}

inline Json to_json(const ConvergenceReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json j{{"eps", row.eps}, {"t", row.t}, {"xi", row.xi}, {"grid_n", row.grid_n},
               {"mc", to_json(row.mc)}, {"discrepancy", row.discrepancy}, {"runtime_s", row.runtime_s}};
        if (r.eps_frozen_computed) {
            j["eps_frozen"] = cplx_json(row.eps_frozen);
            j["eps_frozen_gap_in_se"] = row.eps_frozen_gap;
        }
        rows.push_back(j);
    }
    Json limits = Json::array();
    for (std::size_t p = 0; p < r.limits.size(); ++p) {
        Json terms = Json::array();
        for (auto z : r.limits[p].terms) terms.push_back(cplx_json(z));
        limits.push_back({{"probe", r.probe_labels[p]}, {"value", cplx_json(r.limits[p].value)}, {"terms", terms},
                          {"quadrature_budget", r.limits[p].quadrature_budget},
                          {"truncation_budget", r.limits[p].truncation_budget},
                          {"majorant_C", r.limits[p].fitted_C}});
    }
    return {{"schema_version", schema_version}, {"kind", "convergence"}, {"rows", rows}, {"limits", limits},
            {"trend_checked", r.trend_checked}, {"checks", r.checks}, {"base_seed", r.base_seed},
            {"realizations", r.realizations}, {"workers", r.workers}, {"route", r.route},
            {"runtime_s", r.runtime_s}, {"pass", r.pass}};
}

inline void write_text(const std::string& path, const std::string& text) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

inline void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// comma separated, '.' decimals, header row
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
        os << "\n";
    }
    write_text(path, os.str());
}

inline std::vector<std::vector<double>> convergence_csv_rows(const ConvergenceReport& r) {
    std::vector<std::vector<double>> rows;
    for (const auto& row : r.rows)
        rows.push_back({row.eps, row.t, row.xi, static_cast<double>(row.grid_n), row.mc.value.real(),
                        row.mc.value.imag(), row.mc.std_error, row.discrepancy});
    return rows;
}

}  // namespace osc
