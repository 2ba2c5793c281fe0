#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "osc/chaos.hpp"
#include "osc/moments.hpp"

using namespace osc;

namespace {

PhysicalConfig phys() { return PhysicalConfig{}; }
CovarianceSpec spec(double a = 1.0) { return make_covariance("gaussian", {a, 1.0}); }
InitialCondition ic() { return make_initial("gaussian", {1.0, 1.0}, 2.0); }

CVec random_tensor(std::size_t size, unsigned seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> n;
    CVec v(size);
    for (auto& z : v) z = cplx(n(eng), n(eng));
    return v;
}

double max_abs(const CVec& a) {
    double m = 0.0;
    for (const auto& z : a) m = std::max(m, std::abs(z));
    return m;
}

double max_diff(const CVec& a, const CVec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::vector<double> uniform_times(double t, int steps) {
    std::vector<double> ts;
    for (int j = 0; j <= steps; ++j) ts.push_back(t * j / steps);
    return ts;
}

}  // namespace

TEST(StratToIto, FirstOrderOnlyIsUnchanged) {
    SpectralGrid lat(1, 16, 16.0);
    ChaosExpansion e = zero_expansion(lat, 3);
    e.kernels[1] = random_tensor(16, 1);
    ChaosExpansion g = strat_to_ito(e);
    EXPECT_EQ(g.kind, ChaosKind::ito);
    EXPECT_EQ(g.kernels[1], e.kernels[1]);
    EXPECT_EQ(max_abs(g.kernels[0]), 0.0);
    EXPECT_EQ(max_abs(g.kernels[2]), 0.0);
    EXPECT_EQ(max_abs(g.kernels[3]), 0.0);
}

TEST(StratToIto, SecondOrderOnlyGivesDiagonalTrace) {
    SpectralGrid lat(1, 16, 16.0);
    const std::size_t M = 16;
    ChaosExpansion e = zero_expansion(lat, 2);
    e.kernels[2] = random_tensor(M * M, 2);
    ChaosExpansion g = strat_to_ito(e);
    cplx trace = 0.0;
    for (std::size_t y = 0; y < M; ++y) trace += e.kernels[2][y * M + y];
    EXPECT_LE(std::abs(g.kernels[0][0] - lat.dx() * trace), 1e-13 * std::abs(trace));
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j)
            EXPECT_LE(std::abs(g.kernels[2][i * M + j] - 0.5 * (e.kernels[2][i * M + j] + e.kernels[2][j * M + i])),
                      1e-15);
    EXPECT_EQ(max_abs(g.kernels[1]), 0.0);
}

TEST(StratToIto, ExpectationMatchesFrequencyPairing) {
    SpectralGrid lat(1, 32, 16.0);
    ChaosExpansion e = zero_expansion(lat, 2);
    e.kernels[2] = random_tensor(32 * 32, 3);
    cplx g0 = strat_to_ito(e).kernels[0][0];
    cplx via_pairing = order_two_expectation_by_pairing(e.kernels[2], lat);
    EXPECT_LE(std::abs(g0 - via_pairing), 1e-10 * std::max(1.0, std::abs(g0)));
}

TEST(Expectation, TrivialCases) {
    SpectralGrid lat(1, 16, 16.0);
    ChaosExpansion e = zero_expansion(lat, 3);
    e.kernels[0][0] = cplx(0.3, -2.0);
    EXPECT_EQ(expectation_of_expansion(e), cplx(0.3, -2.0));
    ChaosExpansion odd = zero_expansion(lat, 3);
    odd.kernels[1] = random_tensor(16, 4);
    odd.kernels[3] = random_tensor(16 * 16 * 16, 5);
    EXPECT_EQ(expectation_of_expansion(odd), cplx(0.0));
    EXPECT_EQ(expectation_of_expansion(strat_to_ito(odd)), cplx(0.0));
}

TEST(Expectation, SecondOrderLimitKernelEqualsLimitMean) {
    SpectralGrid lat(1, 32, 16.0);
    ChaosExpansion e = zero_expansion(lat, 2);
    e.kernels[2] = duhamel_limit_kernel(2, 0.5, 0, lat, phys(), spec(), ic());
    cplx chaos = expectation_of_expansion(e);
    cplx pairing = mean_term_limit(1, 0.5, {0, 0, 0}, phys(), spec(), ic(), FrequencyRule::grid(lat)).value;
    EXPECT_LE(std::abs(chaos - pairing), 1e-8);
}

TEST(Expectation, ConversionConsistentUpToOrderFour) {
    SpectralGrid lat(1, 8, 16.0);
    for (int N = 0; N <= 4; ++N) {
        ChaosExpansion e = zero_expansion(lat, N);
        for (int n = 0; n <= N; ++n) e.kernels[n] = random_tensor(tensor_size(8, n), 10 + n);
        cplx a = expectation_of_expansion(e), b = expectation_of_expansion(strat_to_ito(e));
        EXPECT_LE(std::abs(a - b), 1e-10 * std::max(1.0, std::abs(a))) << N;
    }
    EXPECT_THROW(zero_expansion(lat, chaos_max_order + 1), GuardExceeded);
}

TEST(Sampling, TrivialCases) {
    SpectralGrid lat(1, 16, 16.0);
    WhiteNoiseRealization w = sample_white_noise(lat, 7);
    EXPECT_EQ(sample_stratonovich(zero_expansion(lat, 3), w), cplx(0.0));
    ChaosExpansion e = zero_expansion(lat, 0);
    e.kernels[0][0] = cplx(1.5, 0.5);
    EXPECT_EQ(sample_stratonovich(e, w), cplx(1.5, 0.5));
    EXPECT_EQ(sample_stratonovich(e, sample_white_noise(lat, 8)), cplx(1.5, 0.5));
    EXPECT_THROW(sample_stratonovich(e, sample_white_noise(SpectralGrid(1, 32, 16.0), 1)), GridMismatch);
}

TEST(Sampling, WhiteNoiseIncrementsHaveCellVariance) {
    SpectralGrid lat(1, 32, 16.0);
    KahanSum<double> s, s2;
    const int R = 2000;
    for (int i = 0; i < R; ++i)
        for (double v : sample_white_noise(lat, i).increments) {
            s.add(v);
            s2.add(v * v);
        }
    const double n = R * 32.0, h = lat.dx();
    EXPECT_LE(std::abs(s.value() / n), 3.0 * std::sqrt(h / n));
    EXPECT_LE(std::abs(s2.value() / n - h), 3.0 * h * std::sqrt(2.0 / n));
}

TEST(Sampling, FirstOrderVarianceIsLatticeNorm) {
    SpectralGrid lat(1, 32, 16.0);
    ChaosExpansion e = zero_expansion(lat, 1);
    e.kernels[1] = duhamel_limit_kernel(1, 0.5, 0, lat, phys(), spec(), ic());
    KahanSum<double> sq;
    for (const auto& z : e.kernels[1]) sq.add(std::norm(z));
    IsometryCheck c = isometry_check(e, 10000, 1);
    EXPECT_NEAR(c.expected, lat.dx() * sq.value(), 1e-14 * c.expected);
    EXPECT_TRUE(c.pass) << c.sample_mean << " vs " << c.expected << " se " << c.std_error;
}

TEST(Sampling, ItoIsometryAtOrderTwo) {
    SpectralGrid lat(1, 8, 16.0);
    ChaosExpansion g = zero_expansion(lat, 2, ChaosKind::ito);
    g.kernels[2] = symmetrize(random_tensor(64, 21), 2, 8);
    KahanSum<double> sq;
    for (const auto& z : g.kernels[2]) sq.add(std::norm(z));
    IsometryCheck c = isometry_check(g, 10000, 3);
    EXPECT_NEAR(c.expected, 2.0 * std::pow(lat.dx(), 2) * sq.value(), 1e-12 * c.expected);
    EXPECT_TRUE(c.pass) << c.sample_mean << " vs " << c.expected << " se " << c.std_error;
}

TEST(ApplyJ, ZeroAndTransformOracle) {
    SpectralGrid lat(1, 16, 16.0);
    const std::size_t M = 16;
    ChaosField F = duhamel_limit_field(0, {0.0, 0.3}, lat, phys(), spec(), ic());
    ChaosField J = apply_J(F);
    ASSERT_EQ(J.truncation(), 1);
    for (std::size_t xi = 0; xi < M; xi += 5)
        for (std::size_t x = 0; x < M; ++x) {
            cplx direct = 0.0;
            for (std::size_t k = 0; k < M; ++k)
                direct += lat.dk() * std::polar(1.0, lat.axis_k(k) * lat.axis_x(x)) * F.orders[0][1][k][0];
            direct *= std::polar(1.0, -lat.axis_k(xi) * lat.axis_x(x));
            EXPECT_LE(std::abs(J.orders[1][1][xi][x] - direct), 1e-13);
        }
    ChaosField Z = F;
    for (auto& row : Z.orders[0])
        for (auto& k : row) k[0] = 0.0;
    ChaosField JZ = apply_J(Z);
    for (const auto& k : JZ.orders[1][1]) EXPECT_EQ(max_abs(k), 0.0);
}

TEST(ApplyH, FreeTermGivesFirstOrderKernel) {
    SpectralGrid lat(1, 16, 16.0);
    const double t = 0.5;
    ChaosField F = duhamel_limit_field(0, uniform_times(t, 80), lat, phys(), spec(), ic());
    ChaosField H = apply_H(F, phys(), spec());
    for (std::size_t xi = 0; xi < 16; ++xi) {
        CVec exact = duhamel_limit_kernel(1, t, xi, lat, phys(), spec(), ic());
        EXPECT_LE(max_diff(H.orders[1][80][xi], exact), 1e-6 * max_abs(exact)) << xi;
        // empty time integral at t = 0
        EXPECT_EQ(max_abs(H.orders[1][0][xi]), 0.0);
    }
    EXPECT_THROW(apply_H(duhamel_limit_field(0, {0.0, 0.2, 0.5}, lat, phys(), spec(), ic()), phys(), spec()), Error);
}

TEST(ApplyH, ZeroFieldGivesZero) {
    SpectralGrid lat(1, 16, 16.0);
    ChaosField F = duhamel_limit_field(1, uniform_times(0.5, 4), lat, phys(), spec(), ic());
    for (auto& o : F.orders)
        for (auto& row : o)
            for (auto& k : row) std::fill(k.begin(), k.end(), cplx(0.0));
    ChaosField H = apply_H(F, phys(), spec());
    for (const auto& o : H.orders)
        for (const auto& row : o)
            for (const auto& k : row) EXPECT_EQ(max_abs(k), 0.0);
}

TEST(ApplyH, IsTimeConvolutionOfJ) {
    // H f = (-i sigma)(2pi)^{-1} int_0^t e^{i(t-s)|xi|^m} (J f)(s) ds, done here
    // with a trapezoid rule on a finer grid than the one apply_H sees
    SpectralGrid lat(1, 16, 16.0);
    const double t = 0.5;
    const int fine = 1600;
    ChaosField F = duhamel_limit_field(0, uniform_times(t, 80), lat, phys(), spec(), ic());
    ChaosField H = apply_H(F, phys(), spec());
    ChaosField Ff = duhamel_limit_field(0, uniform_times(t, fine), lat, phys(), spec(), ic());
    ChaosField J = apply_J(Ff);
    const cplx pref = cplx(0.0, -spec().sigma(1)) / (2.0 * pi);
    for (std::size_t xi : {std::size_t(0), std::size_t(3), std::size_t(9)}) {
        const double lam = std::pow(lat.axis_k(xi), 2);
        CVec conv(16, 0.0);
        for (int j = 0; j <= fine; ++j) {
            double s = t * j / fine, w = (j == 0 || j == fine) ? 0.5 : 1.0;
            for (std::size_t x = 0; x < 16; ++x)
                conv[x] += w * (t / fine) * std::polar(1.0, (t - s) * lam) * J.orders[1][j][xi][x];
        }
        for (auto& z : conv) z *= pref;
        EXPECT_LE(max_diff(H.orders[1][80][xi], conv), 1e-5 * max_abs(conv)) << xi;
    }
}

TEST(ApplyH, DuhamelFixedPointUpToDroppedOrder) {
    SpectralGrid lat(1, 16, 16.0);
    const double t = 0.5;
    ChaosField F = duhamel_limit_field(1, uniform_times(t, 80), lat, phys(), spec(), ic());
    ChaosField H = apply_H(F, phys(), spec());
    for (std::size_t xi = 0; xi < 16; xi += 3) {
        EXPECT_LE(max_diff(H.orders[1][80][xi], F.orders[1][80][xi]), 1e-6 * max_abs(F.orders[1][80][xi]));
        // H also produces the order N + 1 kernel the truncation drops
        CVec two = duhamel_limit_kernel(2, t, xi, lat, phys(), spec(), ic());
        EXPECT_LE(max_diff(H.orders[2][80][xi], two), 1e-5 * max_abs(two));
    }
}

TEST(Mass, FreeEvolutionAndZeroNoiseAreFlat) {
    SpectralGrid lat(1, 32, 16.0);
    std::vector<double> times{0.0, 0.25, 0.5, 1.0};
    MassReport free = mass_conservation_check(0, times, lat, phys(), spec(), ic(), 1.0, 0.75);
    EXPECT_LE(free.relative_variation, 1e-14);
    MassReport quiet = mass_conservation_check(2, times, lat, phys(), make_covariance("zero", {}), ic(), 1.0, 0.75);
    EXPECT_LE(quiet.relative_variation, 1e-14);
}

TEST(Mass, SecondOrderTruncationWithinBudget) {
    SpectralGrid lat(1, 32, 16.0);
    const double rho = 0.75;
    SecondMomentFit fit = fit_second_moment_constant({1, 2}, {0.25, 0.5, 1.0}, {0.0, 1.0, 3.0}, rho, phys(), spec(), ic(),
                                                     default_limit_rule(1));
    MassReport r = mass_conservation_check(2, {0.0, 0.25, 0.5, 1.0}, lat, phys(), spec(), ic(), fit.C, rho);
    EXPECT_LE(r.relative_variation, r.truncation_budget + r.quadrature_tolerance);
    EXPECT_LE(r.max_im_j, 1e-8);
    EXPECT_TRUE(r.pass);
}

TEST(Mass, VariationScalesAsSigmaToTheFourth) {
    // orders 1 and 2 cancel in E|u|^2 up to sigma^2; what is left is O(sigma^4)
    SpectralGrid lat(1, 32, 16.0);
    std::vector<double> ratio;
    for (double a : {1e-2, 1e-3, 1e-4}) {
        MassReport r = mass_conservation_check(2, {0.0, 0.5}, lat, phys(), spec(a), ic(), 1.0, 0.75);
        ratio.push_back(r.relative_variation / (a * a));
    }
    EXPECT_NEAR(ratio[1] / ratio[0], 1.0, 0.05);
    EXPECT_NEAR(ratio[2] / ratio[1], 1.0, 0.01);
}

TEST(Membership, NormsFiniteOnLimitField) {
    SpectralGrid lat(1, 16, 16.0);
    ChaosField F = duhamel_limit_field(2, {0.5}, lat, phys(), spec(), ic());
    MembershipDiagnostic d = membership_diagnostic(F, 0, phys());
    EXPECT_TRUE(d.finite);
    EXPECT_GT(d.l2, 0.0);
    EXPECT_GT(d.j_norm, 0.0);
    EXPECT_GT(d.symbol_norm, 0.0);
}
