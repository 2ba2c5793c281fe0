#include <gtest/gtest.h>

#include <cmath>

#include "osc/bounds.hpp"
#include "osc/rng.hpp"

using namespace osc;

namespace {

std::vector<double> t_grid(double step, int count) {
    std::vector<double> g;
    for (int i = 1; i <= count; ++i) g.push_back(step * i);
    return g;
}

cplx kernel(double A, double t, double rho) { return std::polar(std::pow(t, rho - 1.0) * std::exp(-t), A * t); }

}  // namespace

TEST(KernelConvolution, SingleKernelRatioIsOne) {
    for (double rho : {0.6, 0.75, 1.0}) {
        BoundReport r = verify_kernel_convolution(1, rho, {3.7}, t_grid(0.125, 40));
        EXPECT_NEAR(r.fitted_C, 1.0, 1e-14);
        EXPECT_TRUE(r.pass);
        KernelConvolution k({3.7}, rho);
        EXPECT_LE(std::abs(k.value(0.8) - kernel(3.7, 0.8, rho)), 1e-15);
    }
}

TEST(KernelConvolution, TwoZeroFrequencyKernelsAtRhoOne) {
    // (e^{-t} * e^{-t})(t) = t e^{-t}, so C = 1 suffices
    KernelConvolution k({0.0, 0.0}, 1.0);
    for (double t : {0.1, 1.0, 4.0}) EXPECT_NEAR(std::abs(k.value(t) - t * std::exp(-t)), 0.0, 1e-14);
    BoundReport r = verify_kernel_convolution(2, 1.0, {0.0, 0.0}, t_grid(0.125, 40));
    EXPECT_NEAR(r.fitted_C, 1.0, 1e-13);
}

TEST(KernelConvolution, ZeroFrequencyPowerLawsGiveBetaFunctions) {
    // n-fold convolution of t^{rho-1}: Gamma(rho)^n / Gamma(n rho) t^{n rho - 1}
    for (double rho : {0.6, 0.75, 0.9})
        for (int n = 2; n <= 4; ++n) {
            KernelConvolution k(std::vector<double>(n, 0.0), rho);
            double exact = std::pow(std::tgamma(rho), n) / std::tgamma(n * rho);
            EXPECT_NEAR(k.smooth_factor(1.3).real(), exact, 1e-12 * exact) << rho << " " << n;
            EXPECT_NEAR(k.smooth_factor(1.3).imag(), 0.0, 1e-12);
        }
}

TEST(KernelConvolution, RhoOneMatchesSimplexIntegral) {
    // e^{-t} times the time-ordered phase integral
    std::vector<double> A{-4.0, 1.5, 7.2, 0.3};
    KernelConvolution k(A, 1.0);
    for (double t : {0.5, 2.0, 5.0}) {
        cplx exact = std::exp(-t) * simplex_phase_integral(A, t);
        EXPECT_LE(std::abs(k.value(t) - exact), 1e-12) << t;
    }
}

TEST(KernelConvolution, FittedConstantStableAcrossOrdersAndGrids) {
    std::vector<double> A = uniform_draws(1, 4, -10.0, 10.0);
    KernelConvolutionStability st = kernel_convolution_stability({0.75}, A, t_grid(0.125, 40));
    EXPECT_TRUE(st.n1_exact);
    EXPECT_LE(st.worst_growth, 2.0);
    EXPECT_TRUE(std::isfinite(st.fitted[0][3]));
    // halving the t step moves C by at most 5%
    for (int n = 2; n <= 4; ++n) {
        double c1 = verify_kernel_convolution(n, 0.75, A, t_grid(0.125, 40)).fitted_C;
        double c2 = verify_kernel_convolution(n, 0.75, A, t_grid(0.0625, 80)).fitted_C;
        EXPECT_LE(std::abs(c2 - c1), 0.05 * c1) << n;
    }
    EXPECT_THROW(verify_kernel_convolution(5, 0.75, {1, 2, 3, 4, 5}, {1.0}), GuardExceeded);
    EXPECT_THROW(verify_kernel_convolution(1, 0.0, {1.0}, {1.0}), Error);
}

TEST(ResolventIntegral, ShiftInvariantInOmega) {
    for (double beta : {0.0, 0.5, 3.0, 40.0}) {
        double base = resolvent_integral(beta, 0.0, 0.75, 2.0);
        for (double omega : {-2.5, 0.7, 11.0})
            EXPECT_NEAR(resolvent_integral(beta, omega, 0.75, 2.0), base, 1e-8) << beta << " " << omega;
    }
}

TEST(ResolventIntegral, PiecesSumToFullIntegral) {
    // d = 1, m = 2: int_R dxi = (2/m) int_0^inf dQ Q^{1/m - 1}, and 2/m = 1
    for (double beta : {0.0, 0.3, 2.0, 50.0}) {
        ResolventPieces p = resolvent_pieces(beta, 0.75, 1, 2.0);
        EXPECT_NEAR(p.total(), resolvent_integral(beta, 0.0, 0.75, 2.0), 1e-8) << beta;
    }
}

TEST(ResolventIntegral, PieceOneAtBetaTwo) {
    ResolventPieces p = resolvent_pieces(2.0, 0.75, 1, 2.0);
    EXPECT_LE(p.I, printed_bound_I(1, 2.0) * (1 + 1e-6));
}

TEST(ResolventIntegral, SupremumFiniteAndRefinementStable) {
    ResolventReport r = verify_resolvent_integral(0.75, 1, 2.0, resolvent_beta_grid(61));
    EXPECT_TRUE(std::isfinite(r.sup));
    EXPECT_LE(r.refinement_change, 1e-4);
    EXPECT_TRUE(r.sup_pass);
    EXPECT_THROW(verify_resolvent_integral(0.5, 1, 2.0, {1.0}), Error);
    EXPECT_THROW(verify_resolvent_integral(1.0, 1, 2.0, {1.0}), Error);
}

TEST(ResolventIntegral, ProofPiecesRespectPrintedConstants) {
    ResolventReport r = verify_resolvent_integral(0.75, 1, 2.0, resolvent_beta_grid(61));
    for (const auto& b : r.piece_reports) EXPECT_TRUE(b.pass) << b.name << ": " << b.lhs_max << " > " << b.rhs_with_fitted_C;
}

TEST(LogIntegral, ClosedFormAtZeroAndShapeAtOne) {
    // xi = 0: int dbeta / (1 + beta^2) = pi
    EXPECT_NEAR(log_integral_lhs(0.0, 2.0), pi, 1e-9);
    EXPECT_DOUBLE_EQ(log_integral_shape(1.0, 2.0), 1.0 / std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(log_integral_shape(0.0, 2.0), 1.0);
}

TEST(LogIntegral, FittedConstantStableUnderRangeDoubling) {
    LogIntegralReport r = verify_log_integral(log_integral_grid(41), 2.0);
    EXPECT_TRUE(r.pass);
    EXPECT_LE(r.relative_change, 0.05);
    double at100 = log_integral_lhs(100.0, 2.0) / log_integral_shape(100.0, 2.0);
    EXPECT_LE(at100, r.base.fitted_C * (1 + 1e-6));
}

TEST(Majorant, ZeroHorizonIsTriviallySummable) {
    MajorantSeries ms = majorant_series(60, 2, 0.0, 0.75, 1.2);
    for (int N = 1; N <= 60; ++N) EXPECT_EQ(ms.c[N], 0.0) << N;
    EXPECT_TRUE(ms.ratio_test_pass);
    EXPECT_TRUE(ms.cauchy_pass);
}

TEST(Majorant, RatiosVanishAndTailIsNegligible) {
    MajorantSeries ms = majorant_series(60, 2, 0.5, 0.75, 1.2);
    EXPECT_TRUE(ms.ratio_test_pass);
    for (std::size_t N = ms.n0 + 2; N < ms.ratio.size(); ++N) EXPECT_LT(ms.ratio[N], ms.ratio[N - 2]) << N;
    // the ratio decays like N^{rho - 1}: slowly, so the Cauchy tail needs a longer run
    MajorantSeries longer = majorant_series(400, 2, 0.5, 0.75, 1.2);
    EXPECT_LT(longer.ratio.back(), ms.ratio.back());
    EXPECT_LE(longer.tail_fraction, 1e-12);
    // c_N agrees with its defining product at a small N
    const int N = 4, r = 2;
    double direct = binomial(N + r - 1, r - 1) * double_factorial(N - 1) * std::pow(1.2 * std::pow(0.5, 1.25), N / 2.0) *
                    std::exp(r * 0.5) / std::pow(std::tgamma(N / 2.0 + 1), 1.25);
    EXPECT_NEAR(ms.c[N], direct, 1e-12 * direct);
}

TEST(Majorant, MultiIndexCountIsBinomial) {
    for (int N = 0; N <= 8; ++N)
        for (int r = 1; r <= 4; ++r) EXPECT_EQ(static_cast<double>(count_multi_indices(N, r)), binomial(N + r - 1, r - 1));
}

TEST(Carleman, UnitBoundsDivergeLinearly) {
    CarlemanReport r = carleman_check(std::vector<double>(60, 0.0));
    EXPECT_DOUBLE_EQ(r.partial.back(), 60.0);
    EXPECT_TRUE(r.pass);
}

TEST(Carleman, FactorialBoundsGiveSquareRootGrowth) {
    // B_{2r} = r^r: terms r^{-1/2}, partial sums about 2 sqrt R
    std::vector<double> logb;
    for (int r = 1; r <= 60; ++r) logb.push_back(r * std::log(static_cast<double>(r)));
    CarlemanReport c = carleman_check(logb);
    EXPECT_NEAR(c.kappa, 2.0, 0.4);
    EXPECT_TRUE(c.pass);
    EXPECT_THROW(carleman_check(std::vector<double>(10, 0.0)), Error);
}

TEST(Carleman, MajorantBoundsPassDivergenceGate) {
    CarlemanReport c = carleman_check(carleman_moment_bounds(60, 1.2, 0.5, 0.75));
    EXPECT_TRUE(c.pass);
    EXPECT_GT(c.kappa, 0.0);
}
