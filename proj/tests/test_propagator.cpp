#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "rotordyn/propagator.hpp"

using namespace rotordyn;

namespace {

ModelParams params(int M, double K = 6.0, double eps = 0.0, double kbar = 1.7)
{
    ModelParams p;
    p.M = M;
    p.K = K;
    p.epsilon = eps;
    p.kbar = kbar;
    return p;
}

RotorState random_state(int M, unsigned seed, ModelParams p)
{
    p.M = M;
    return {p, oracle::random_state(2 * M + 1, seed)};
}

RotorState random_even_state(const ModelParams& p, unsigned seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g;
    std::vector<cplx> b(static_cast<std::size_t>(p.size()));
    for (int m = 0; m <= p.M; ++m) b[static_cast<std::size_t>(p.M + m)] = b[static_cast<std::size_t>(p.M - m)] = {g(gen), 0.0};
    RotorState s(p, b);
    s.normalize();
    return s;
}

} // namespace

TEST(KickCoefficients, IdentityAtZero)
{
    const auto kc = kick_coefficients(0.0);
    EXPECT_EQ(kc.n_max, 0);
    EXPECT_EQ(kc[0], cplx(1.0));
    EXPECT_EQ(kc[1], cplx(0.0));
}

TEST(KickCoefficients, BesselSumIdentity)
{
    for (double A : {0.1, 1.0, 2.5, 6.0, 6.24, 12.0, 20.0, 55.0, -3.0}) {
        const auto kc = kick_coefficients(A, 1e-16);
        EXPECT_NEAR(kc.weight(), 1.0, 1e-14) << "A=" << A;
        EXPECT_LE(kc.weight(), 1.0 + 1e-14);
    }
}

TEST(KickCoefficients, TruncationIsMinimal)
{
    for (double A : {1.0, 6.0, 20.0}) {
        const auto kc = kick_coefficients(A, 1e-16);
        // Tail beyond n_max is below tol; including n_max itself in the tail is not.
        double tail = 0.0;
        for (int n = kc.n_max + 1; n < kc.n_max + 60; ++n) tail += 2.0 * std::pow(std::cyl_bessel_j(n, A), 2);
        EXPECT_LT(tail, 1e-16);
        EXPECT_GE(tail + 2.0 * std::pow(std::cyl_bessel_j(kc.n_max, A), 2), 1e-16);
    }
}

TEST(KickCoefficients, MatchAngleGridQuadrature)
{
    for (double A : {0.3, 2.0, 6.0, 13.7, -4.0}) {
        // Retained band at the default tail tolerance.
        const auto kc = kick_coefficients(A);
        for (int n = -kc.n_max; n <= kc.n_max; ++n)
            EXPECT_NEAR(std::abs(kc[n] - oracle::kick_fourier_coefficient(A, n)), 0.0, 1e-10) << "A=" << A << " n=" << n;
        // With the propagator's tolerance the dropped tail is invisible too.
        const auto deep = kick_coefficients(A, kick_tail_tol);
        for (int n = -deep.n_max - 5; n <= deep.n_max + 5; ++n)
            EXPECT_NEAR(std::abs(deep[n] - oracle::kick_fourier_coefficient(A, n)), 0.0, 1e-10) << "A=" << A << " n=" << n;
    }
}

TEST(FreeEvolution, Phases)
{
    const auto p = params(3);
    const auto s0 = momentum_eigenstate(p, 0);
    EXPECT_EQ(free_evolution(s0).vector(), s0.vector());
    const auto s2 = free_evolution(momentum_eigenstate(p, 2));
    EXPECT_NEAR(std::abs(s2.at(2) - std::polar(1.0, -3.4)), 0.0, 1e-15);

    const auto r = random_state(40, 3, p);
    const auto r1 = free_evolution(r);
    EXPECT_NEAR(r1.norm_squared(), r.norm_squared(), 1e-14);
    EXPECT_LT(oracle::max_abs_diff(free_evolution_inverse(r1).vector(), r.vector()), 1e-15);
}

TEST(ApplyKick, ZeroIsIdentity)
{
    const auto r = random_state(10, 5, params(10));
    EXPECT_LT(oracle::max_abs_diff(apply_kick(r, 0.0, KickMethod::bessel).vector(), r.vector()), 1e-15);
    EXPECT_LT(oracle::max_abs_diff(apply_kick(r, 0.0, KickMethod::spectral).vector(), r.vector()), 1e-15);
}

TEST(ApplyKick, MethodsAgreeOnRandomStates)
{
    for (unsigned seed = 0; seed < 12; ++seed) {
        const int M = 5 + 17 * static_cast<int>(seed);
        const double A = 20.0 * seed / 11.0;
        const auto r = random_state(M, seed, params(M));
        const auto b = apply_kick(r, A, KickMethod::bessel);
        const auto s = apply_kick(r, A, KickMethod::spectral);
        EXPECT_LT(oracle::max_abs_diff(b.vector(), s.vector()), 1e-9) << "M=" << M << " A=" << A;
        EXPECT_NEAR(b.norm_squared(), 1.0, 1e-10);
        EXPECT_NEAR(s.norm_squared(), 1.0, 1e-10);
    }
}

TEST(ApplyKick, MatchesDenseRingOracle)
{
    for (double A : {1.0, 6.0}) {
        for (int M : {3, 20}) {
            const int L = 2 * M + 1;
            const auto r = random_state(M, 9, params(M));
            const auto ref = oracle::matvec(oracle::ring_kick_matrix(L, A), r.vector());
            EXPECT_LT(oracle::max_abs_diff(apply_kick(r, A, KickMethod::spectral).vector(), ref), 1e-10);
            EXPECT_LT(oracle::max_abs_diff(apply_kick(r, A, KickMethod::bessel).vector(), ref), 1e-10);
        }
    }
}

TEST(ApplyKick, PhaseShiftedKick)
{
    // exp(-i A cos(theta + phi)) against the quadrature of the shifted function.
    const int M = 12, L = 2 * M + 1;
    const double A = 3.3, phi = 0.7;
    const auto r = random_state(M, 4, params(M));
    std::vector<cplx> folded(static_cast<std::size_t>(L));
    for (int n = -60; n <= 60; ++n) folded[static_cast<std::size_t>(((n % L) + L) % L)] += oracle::kick_fourier_coefficient(A, n) * std::polar(1.0, n * phi);
    std::vector<cplx> ref(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i)
        for (int k = 0; k < L; ++k) ref[static_cast<std::size_t>(i)] += folded[static_cast<std::size_t>(((i - k) % L + L) % L)] * r.vector()[static_cast<std::size_t>(k)];
    EXPECT_LT(oracle::max_abs_diff(apply_kick(r, A, KickMethod::spectral, phi).vector(), ref), 1e-10);
    EXPECT_LT(oracle::max_abs_diff(apply_kick(r, A, KickMethod::bessel, phi).vector(), ref), 1e-10);
}

TEST(ApplyKick, FirstOrderPopulation)
{
    const double A = 1e-3;
    const auto s = apply_kick(momentum_eigenstate(params(8), 0), A, KickMethod::spectral);
    const double j1 = std::cyl_bessel_j(1.0, A);
    EXPECT_NEAR(std::norm(s.at(1)), j1 * j1, 1e-15);
    EXPECT_NEAR(std::norm(s.at(-1)), j1 * j1, 1e-15);
}

TEST(Step, EpsilonZeroIsSingleRotorMap)
{
    const auto p = params(30, 6.0, 0.0);
    const auto r = random_state(30, 2, p);
    const auto [s, F] = step(r);
    const auto ref = apply_kick(free_evolution(r), 6.0, KickMethod::bessel);
    EXPECT_LT(oracle::max_abs_diff(s.vector(), ref.vector()), 1e-12);
    EXPECT_NEAR(std::abs(F - order_parameter(free_evolution(r), Boundary::periodic)), 0.0, 1e-15);
}

TEST(Step, MethodsAgreeWithFeedback)
{
    const auto p = params(25, 6.0, 0.52);
    auto a = random_even_state(p, 8);
    auto b = a;
    Propagator pa(p, {}, {KickMethod::spectral});
    Propagator pb(p, {}, {KickMethod::bessel});
    for (int t = 1; t <= 20; ++t) {
        pa.step(a.amplitudes(), t);
        pb.step(b.amplitudes(), t);
    }
    EXPECT_LT(oracle::max_abs_diff(a.vector(), b.vector()), 1e-9);
}

TEST(Step, KZeroConservesEnergy)
{
    const auto p = params(16, 0.0, 0.52);
    const auto r = random_state(16, 1, p);
    const auto res = evolve(r, 200, 1);
    for (double e : res.energy.values) EXPECT_NEAR(e, energy(r), 1e-12);
}

TEST(Step, NormPreservation)
{
    const auto p = params(64, 6.0, 0.52);
    auto s = random_even_state(p, 3);
    Propagator prop(p);
    prop.step(s.amplitudes(), 1);
    prop.step(s.amplitudes(), 2);
    EXPECT_NEAR(s.norm_squared(), 1.0, 2e-10);
}

TEST(Step, TimeReversalOfOneStep)
{
    const auto p = params(40, 6.0, 0.52);
    const auto s0 = random_even_state(p, 21);
    const auto [s1, F] = step(s0);
    const double A = p.K * (1.0 - p.epsilon * F.real());
    const auto back = free_evolution_inverse(apply_kick(s1, -A, KickMethod::spectral));
    EXPECT_LT(oracle::max_abs_diff(back.vector(), s0.vector()), 1e-10);
}

TEST(Step, FeedbackOrderParameterConservedByKick)
{
    const auto p = params(20, 6.0, 0.52);
    const auto s0 = random_state(20, 6, p);
    const auto freed = free_evolution(s0);
    const auto [s1, F] = step(s0);
    EXPECT_NEAR(std::abs(F - order_parameter(s1, Boundary::periodic)), 0.0, 1e-13);
}

TEST(Evolve, SymmetricSectorKeepsRealF)
{
    const auto p = params(64, 6.0, 0.52);
    const auto res = evolve(momentum_eigenstate(p, 0), 2000, 1);
    double worst = 0.0;
    for (auto F : res.F.values) worst = std::max(worst, std::abs(F.imag()));
    EXPECT_LT(worst, 1e-9);
    EXPECT_LT(res.max_norm_drift, 1e-10);
}

TEST(Evolve, RecordsOnGridAndFlagsEdge)
{
    const auto p = params(4, 6.0, 0.52);
    std::vector<std::string> warnings;
    ScopedWarningSink sink([&](const std::string& m) { warnings.push_back(m); });
    const auto res = evolve(momentum_eigenstate(p, 0), 50, 5);
    ASSERT_EQ(res.energy.size(), 10u);
    EXPECT_EQ(res.energy.times.front(), 5);
    EXPECT_EQ(res.energy.times.back(), 50);
    ASSERT_TRUE(res.edge_warning_at.has_value());
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(Evolve, RejectsBadArguments)
{
    const auto p = params(4);
    EXPECT_THROW(evolve(momentum_eigenstate(p, 0), 0, 1), ValidationError);
    EXPECT_THROW(evolve(momentum_eigenstate(p, 0), 10, 0), ValidationError);
}

TEST(Noise, DrawsArePureFunctionsOfSeedAndKick)
{
    const auto n = NoiseModel::gaussian(0.5, 42);
    EXPECT_EQ(n.draw(17), n.draw(17));
    EXPECT_NE(n.draw(17), n.draw(18));
    EXPECT_NE(n.draw(17), NoiseModel::gaussian(0.5, 43).draw(17));
    EXPECT_EQ(NoiseModel{}.draw(3), 0.0);

    double s = 0.0, s2 = 0.0;
    const int count = 200000;
    for (int k = 1; k <= count; ++k) {
        const double x = n.draw(k);
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / count, 0.0, 5.0 * 0.5 / std::sqrt(count));
    EXPECT_NEAR(s2 / count, 0.25, 0.01);
}

TEST(Noise, NoisyRunsReproduce)
{
    const auto p = params(32, 6.0, 0.0);
    const auto noise = NoiseModel::gaussian(0.5, 9);
    const auto a = evolve(momentum_eigenstate(p, 0), 300, 10, noise);
    const auto b = evolve(momentum_eigenstate(p, 0), 300, 10, noise);
    EXPECT_EQ(a.energy.values, b.energy.values);
    const auto c = evolve(momentum_eigenstate(p, 0), 300, 10);
    EXPECT_NE(a.energy.values, c.energy.values);
}

TEST(Philox, KnownAnswer)
{
    // Random123 known-answer vectors for philox4x32-10.
    const Philox zero(0);
    EXPECT_EQ(zero({0, 0, 0, 0}), (Philox::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    const Philox ones(0xffffffffffffffffull);
    EXPECT_EQ(ones({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}),
              (Philox::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}
