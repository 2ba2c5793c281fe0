#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "osc/fft.hpp"
#include "osc/solver.hpp"

using namespace osc;

namespace {

PhysicalConfig phys(double eps = 0.4) {
    PhysicalConfig c;
    c.eps = eps;
    return c;
}

WaveFunction gaussian_u0(const SpectralGrid& g) { return initial_wavefunction(make_initial("gaussian", {1.0, 1.0}, 2.0), g); }

// smooth deterministic potential, resolved on every grid used below
RandomField cosine_field(const SpectralGrid& g, double eps) {
    RandomField q = constant_field(g, 0.0, eps);
    for (std::size_t j = 0; j < g.size(); ++j) q.values[j] = std::cos(3.0 * g.dk() * g.axis_x(j));
    return q;
}

double max_abs_diff(const CVec& a, const CVec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST(FreePropagate, ZeroStepIsIdentity) {
    SpectralGrid g(1, 256, 20.0);
    WaveFunction u = gaussian_u0(g);
    WaveFunction v = free_propagate(u, 0.0, phys());
    EXPECT_EQ(v.amplitudes_hat, u.amplitudes_hat);
    EXPECT_EQ(v.time, u.time);
}

TEST(FreePropagate, PurePhaseAndSemigroup) {
    SpectralGrid g(1, 256, 20.0);
    WaveFunction u = gaussian_u0(g);
    WaveFunction v = free_propagate(u, 0.37, phys());
    for (std::size_t f = 0; f < g.size(); ++f) {
        double a = std::abs(u.amplitudes_hat[f]);
        EXPECT_LE(std::abs(std::abs(v.amplitudes_hat[f]) - a), 2 * std::numeric_limits<double>::epsilon() * a);
    }
    WaveFunction two = free_propagate(free_propagate(u, 0.2, phys()), 0.3, phys());
    WaveFunction one = free_propagate(u, 0.5, phys());
    EXPECT_LE(relative_l2_diff(two.amplitudes_hat, one.amplitudes_hat), 1e-13);
    EXPECT_DOUBLE_EQ(two.time, 0.5);
}

TEST(StrangStep, VanishingPotentialIsFreeFlow) {
    SpectralGrid g(1, 512, 20.0);
    WaveFunction u = gaussian_u0(g);
    WaveFunction a = strang_step(u, constant_field(g, 0.0, 0.4), 1e-3, phys());
    WaveFunction b = free_propagate(u, 1e-3, phys());
    EXPECT_LE(relative_l2_diff(a.amplitudes_hat, b.amplitudes_hat), 1e-14);
}

TEST(StrangStep, ConstantPotentialIsGlobalPhase) {
    SpectralGrid g(1, 512, 20.0);
    const double c = 0.7, dt = 1e-3;
    PhysicalConfig cfg = phys();
    WaveFunction u = gaussian_u0(g);
    WaveFunction a = strang_step(u, constant_field(g, c, 0.4), dt, cfg);
    WaveFunction b = free_propagate(u, dt, cfg);
    for (auto& z : b.amplitudes_hat) z *= std::polar(1.0, -cfg.amplitude() * c * dt);
    EXPECT_LE(relative_l2_diff(a.amplitudes_hat, b.amplitudes_hat), 1e-13);
}

TEST(StrangStep, GridMismatchThrows) {
    WaveFunction u = gaussian_u0(SpectralGrid(1, 256, 20.0));
    EXPECT_THROW(strang_step(u, constant_field(SpectralGrid(1, 512, 20.0), 0.0), 1e-3, phys()), GridMismatch);
    EXPECT_THROW(solve(u, constant_field(SpectralGrid(1, 256, 10.0), 0.0), 0.1, 1e-3, phys()), GridMismatch);
}

TEST(StrangStep, SecondOrderBySelfConvergence) {
    SpectralGrid g(1, 512, 20.0);
    RandomField q = synthesize_field(make_covariance("gaussian", {1.0, 1.0}), g, 1, 0.4);
    WaveFunction u0 = gaussian_u0(g);
    auto at = [&](double dt) { return solve(u0, q, 0.5, dt, phys()).snapshots.back().amplitudes_hat; };
    CVec c1 = at(1e-2), c2 = at(5e-3), c3 = at(2.5e-3);
    double e12 = relative_l2_diff(c1, c2), e23 = relative_l2_diff(c2, c3);
    double order = std::log2(e12 / e23);
    EXPECT_GE(order, 1.8);
    EXPECT_LE(order, 2.2);
}

TEST(Solve, ZeroHorizonReturnsInitialState) {
    SpectralGrid g(1, 256, 20.0);
    WaveFunction u0 = gaussian_u0(g);
    Trajectory tr = solve(u0, constant_field(g, 1.0), 0.0, 1e-3, phys());
    ASSERT_EQ(tr.snapshots.size(), 1u);
    EXPECT_EQ(tr.snapshots[0].amplitudes_hat, u0.amplitudes_hat);
}

TEST(Solve, VanishingPotentialMatchesFreeFlow) {
    SpectralGrid g(1, 512, 20.0);
    WaveFunction u0 = gaussian_u0(g);
    Trajectory tr = solve(u0, constant_field(g, 0.0, 0.4), 0.75, 1e-3, phys(), {0.25, 0.75});
    ASSERT_EQ(tr.snapshots.size(), 2u);
    EXPECT_LE(relative_l2_diff(tr.snapshots[1].amplitudes_hat, free_propagate(u0, 0.75, phys()).amplitudes_hat),
              1e-12);
    EXPECT_NEAR(tr.snapshots[0].time, 0.25, 1e-15);
    EXPECT_THROW(solve(u0, constant_field(g, 0.0), 0.75, 1e-3, phys(), {0.2505}), Error);
}

TEST(Solve, GaugeIdentityOverTheWholeRun) {
    SpectralGrid g(1, 512, 20.0);
    const double c = -1.3, T = 0.5;
    PhysicalConfig cfg = phys();
    WaveFunction u0 = gaussian_u0(g);
    CVec a = solve(u0, constant_field(g, c, 0.4), T, 1e-3, cfg).snapshots.back().amplitudes_hat;
    CVec b = free_propagate(u0, T, cfg).amplitudes_hat;
    for (auto& z : b) z *= std::polar(1.0, -cfg.amplitude() * c * T);
    EXPECT_LE(relative_l2_diff(a, b), 1e-12);
}

TEST(Solve, UnitaryPerStepAndOverRun) {
    SpectralGrid g(1, 512, 20.0);
    RandomField q = synthesize_field(make_covariance("gaussian", {1.0, 1.0}), g, 5, 0.4);
    Trajectory tr = solve(gaussian_u0(g), q, 0.5, 1e-3, phys());
    EXPECT_LE(tr.max_step_change, 1e-13);
    EXPECT_LE(tr.mass_drift, 1e-12);
    EXPECT_EQ(tr.steps, 500);
}

TEST(Solve, TimeReversible) {
    SpectralGrid g(1, 512, 20.0);
    RandomField q = synthesize_field(make_covariance("gaussian", {1.0, 1.0}), g, 9, 0.4);
    WaveFunction u0 = gaussian_u0(g);
    CVec u = solve(u0, q, 0.5, 1e-3, phys()).snapshots.back().amplitudes_hat;
    StrangStepper back(g, q, -1e-3, phys());
    for (int k = 0; k < 500; ++k) back.step(u);
    EXPECT_LE(relative_l2_diff(u, u0.amplitudes_hat), 1e-10);
}

TEST(Solve, NonFiniteAmplitudesAbortWithStep) {
    SpectralGrid g(1, 256, 20.0);
    RandomField q = constant_field(g, 0.0);
    q.values[3] = std::numeric_limits<double>::quiet_NaN();
    try {
        solve(gaussian_u0(g), q, 0.1, 1e-2, phys());
        FAIL() << "expected SolverAbort";
    } catch (const SolverAbort& e) {
        EXPECT_EQ(e.step, 1);
    }
}

TEST(Solve, GridRefinementChangesSharedNodesLittle) {
    // same box, twice the points: the low-frequency nodes coincide
    SpectralGrid g1(1, 256, 20.0), g2(1, 512, 20.0);
    CVec a = solve(gaussian_u0(g1), cosine_field(g1, 0.4), 0.5, 1e-3, phys()).snapshots.back().amplitudes_hat;
    CVec b = solve(gaussian_u0(g2), cosine_field(g2, 0.4), 0.5, 1e-3, phys()).snapshots.back().amplitudes_hat;
    CVec shared(g1.size());
    for (std::size_t f = 0; f < g1.size(); ++f) shared[f] = b[g2.wrap(g1.signed_index(f))];
    EXPECT_LE(max_abs_diff(a, shared), 1e-10);
}
