#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "osc/fft.hpp"
#include "osc/fields.hpp"
#include "osc/grid.hpp"

namespace osc {

struct WaveFunction {
    SpectralGrid grid;
    CVec amplitudes_hat;
    double time = 0.0;

    // sum |u^|^2 dk^d, proportional to int |u|^2 dx
    double mass() const {
        KahanSum<double> s;
        for (const auto& z : amplitudes_hat) s.add(std::norm(z));
        return s.value() * grid.cell_k();
    }
    double l2() const { return std::sqrt(mass()); }
    bool finite() const {
        for (const auto& z : amplitudes_hat)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }
};

inline WaveFunction initial_wavefunction(const InitialCondition& ic, const SpectralGrid& g) {
    WaveFunction u;
    u.grid = g;
    u.amplitudes_hat.resize(g.size());
    for (std::size_t f = 0; f < g.size(); ++f) u.amplitudes_hat[f] = ic.u0_hat(g.wavenumber(f));
    return u;
}

// |xi|^m at every grid node
inline std::vector<double> symbol_table(const SpectralGrid& g, const PhysicalConfig& cfg) {
    std::vector<double> s(g.size());
    for (std::size_t f = 0; f < g.size(); ++f) s[f] = cfg.symbol(norm3(g.wavenumber(f)));
    return s;
}

inline double relative_l2_diff(const CVec& a, const CVec& b) {
    KahanSum<double> num, den;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num.add(std::norm(a[i] - b[i]));
        den.add(std::norm(b[i]));
    }
    return std::sqrt(num.value() / den.value());
}

inline WaveFunction free_propagate(const WaveFunction& u, double dt, const PhysicalConfig& cfg) {
    WaveFunction out = u;
    if (dt == 0.0) return out;
    for (std::size_t f = 0; f < u.amplitudes_hat.size(); ++f)
        out.amplitudes_hat[f] *= std::polar(1.0, cfg.symbol(norm3(u.grid.wavenumber(f))) * dt);
    out.time = u.time + dt;
    return out;
}

// Strang splitting with cached phase tables; reused for many steps of one
// trajectory. Both sub-flows are pointwise unimodular multiplications.
class StrangStepper {
public:
    StrangStepper(const SpectralGrid& g, const RandomField& q, double dt, const PhysicalConfig& cfg)
        : g_(g), dt_(dt), half_kin_(g.size()), pot_(g.size()), work_(g.size()) {
        if (!(q.grid == g)) throw GridMismatch("strang_step: wavefunction and potential grids differ");
        if (dt == 0.0) throw Error("strang_step: dt must be nonzero");
        auto sym = symbol_table(g, cfg);
        for (std::size_t f = 0; f < g.size(); ++f) half_kin_[f] = std::polar(1.0, 0.5 * dt * sym[f]);
        double amp = cfg.amplitude();
        for (std::size_t j = 0; j < g.size(); ++j) pot_[j] = std::polar(1.0, -amp * q.values[j] * dt);
    }

    void step(CVec& uh) {
        for (std::size_t f = 0; f < uh.size(); ++f) work_[f] = uh[f] * half_kin_[f];
        to_physical(work_, g_);
        for (std::size_t j = 0; j < work_.size(); ++j) work_[j] *= pot_[j];
        to_spectral(work_, g_);
        for (std::size_t f = 0; f < uh.size(); ++f) uh[f] = work_[f] * half_kin_[f];
    }
    double dt() const { return dt_; }

private:
    SpectralGrid g_;
    double dt_;
    CVec half_kin_, pot_, work_;
};

inline WaveFunction strang_step(const WaveFunction& u, const RandomField& q, double dt, const PhysicalConfig& cfg) {
    if (!(u.grid == q.grid)) throw GridMismatch("strang_step: wavefunction and potential grids differ");
    StrangStepper st(u.grid, q, dt, cfg);
    WaveFunction out = u;
    st.step(out.amplitudes_hat);
    out.time = u.time + dt;
    return out;
}

struct Trajectory {
    std::vector<WaveFunction> snapshots;
    double mass_drift = 0.0;      // |M(T) - M(0)| / M(0)
    double max_step_change = 0.0;  // max_k | ||u_{k+1}|| - ||u_k|| | / ||u_0||
    long steps = 0;
};

// Integrates to T with step dt; snapshots at output_times (default {T}).
inline Trajectory solve(const WaveFunction& u0, const RandomField& q, double T, double dt, const PhysicalConfig& cfg,
                        std::vector<double> output_times = {}) {
    if (T < 0.0) throw Error("solve: T must be >= 0");
    Trajectory tr;
    if (output_times.empty()) output_times = {T};
    if (T == 0.0) {
        tr.snapshots.push_back(u0);
        return tr;
    }
    if (!(dt > 0.0)) throw Error("solve: dt must be > 0");
    std::vector<long> out_steps;
    for (double t : output_times) {
        double r = t / dt;
        long k = std::lround(r);
        if (std::abs(r - static_cast<double>(k)) > 1e-9 * std::max(1.0, r) || t < 0.0 || t > T * (1 + 1e-12))
            throw Error("solve: output time " + std::to_string(t) + " is not a multiple of dt inside [0, T]");
        out_steps.push_back(k);
    }
    long nsteps = std::lround(T / dt);
    StrangStepper st(u0.grid, q, dt, cfg);
    WaveFunction u = u0;
    double n0 = u0.l2(), prev = n0;
    double m0 = u0.mass();
    auto emit = [&](long k) {
        for (std::size_t i = 0; i < out_steps.size(); ++i)
            if (out_steps[i] == k) {
                WaveFunction s = u;
                s.time = u0.time + k * dt;
                tr.snapshots.push_back(s);
            }
    };
    emit(0);
    for (long k = 1; k <= nsteps; ++k) {
        st.step(u.amplitudes_hat);
        double nk = u.l2();
        if (!std::isfinite(nk)) throw SolverAbort(k, "solve: non-finite amplitudes at step " + std::to_string(k));
        tr.max_step_change = std::max(tr.max_step_change, std::abs(nk - prev) / n0);
        prev = nk;
        emit(k);
    }
    u.time = u0.time + nsteps * dt;
    tr.steps = nsteps;
    tr.mass_drift = std::abs(u.mass() - m0) / m0;
    return tr;
}

}  // namespace osc
