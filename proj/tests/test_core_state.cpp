#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rotordyn/core_state.hpp"

using namespace rotordyn;

namespace {

ModelParams params(int M, double kbar = 1.0)
{
    ModelParams p;
    p.M = M;
    p.kbar = kbar;
    return p;
}

} // namespace

TEST(ModelParams, Validation)
{
    EXPECT_NO_THROW(params(1).validate());
    auto p = params(1);
    p.M = 0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = params(1);
    p.kbar = 0.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = params(1);
    p.K = -1.0;
    EXPECT_THROW(p.validate(), ValidationError);
    EXPECT_EQ(params(4).size(), 9);
    EXPECT_EQ(params(4).slot(-4), 0);
    EXPECT_EQ(params(4).momentum(8), 4);
}

TEST(MomentumEigenstate, Layout)
{
    const auto s = momentum_eigenstate(params(2), 0);
    const std::vector<cplx> expect{0, 0, 1, 0, 0};
    EXPECT_EQ(s.vector(), expect);
    EXPECT_EQ(s.norm_squared(), 1.0);

    const auto t = momentum_eigenstate(params(1), 1);
    EXPECT_EQ(t.vector(), (std::vector<cplx>{0, 0, 1}));
    EXPECT_EQ(t.at(1), cplx(1.0));

    EXPECT_THROW(momentum_eigenstate(params(1), 2), ValidationError);
    EXPECT_THROW(momentum_eigenstate(params(1), -2), ValidationError);
}

TEST(UniformPhaseState, Examples)
{
    const double r = 1.0 / std::sqrt(3.0);
    const std::vector<double> zero{0, 0, 0};
    const auto a = uniform_phase_state(params(1), zero);
    for (auto b : a.vector()) EXPECT_NEAR(std::abs(b - cplx(r)), 0.0, 1e-15);

    const std::vector<double> flip{0, std::numbers::pi, 0};
    const auto b = uniform_phase_state(params(1), flip);
    EXPECT_NEAR(std::abs(b.at(0) - cplx(-r)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(b.at(1) - cplx(r)), 0.0, 1e-15);

    const std::vector<double> bad{0, 0};
    EXPECT_THROW(uniform_phase_state(params(1), bad), ValidationError);
}

TEST(UniformPhaseState, NormIsOneForRandomPhases)
{
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    for (int M : {1, 5, 64, 300}) {
        std::vector<double> ph(static_cast<std::size_t>(2 * M + 1));
        for (auto& x : ph) x = u(gen);
        EXPECT_NEAR(uniform_phase_state(params(M), ph).norm_squared(), 1.0, 1e-12);
    }
}

TEST(Energy, Examples)
{
    EXPECT_EQ(energy(momentum_eigenstate(params(3, 1.7), 0)), 0.0);
    EXPECT_NEAR(energy(momentum_eigenstate(params(1, 1.7), 1)), 1.445, 1e-14);
    const std::vector<double> zero{0, 0, 0};
    EXPECT_NEAR(energy(uniform_phase_state(params(1, 1.7), zero)), 1.7 * 1.7 / 2.0 * 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(energy(uniform_phase_state(params(1, 1.7), zero)), 0.9633333333333333, 1e-14);
}

TEST(Energy, BoundedByLargestEigenvalue)
{
    for (unsigned seed = 0; seed < 20; ++seed) {
        const int M = 3 + static_cast<int>(seed);
        RotorState s(params(M, 1.3), oracle::random_state(2 * M + 1, seed));
        EXPECT_GE(energy(s), 0.0);
        EXPECT_LE(energy(s), 0.5 * 1.3 * 1.3 * M * M);
    }
}

TEST(OrderParameter, Examples)
{
    EXPECT_EQ(order_parameter(momentum_eigenstate(params(2), 0)), cplx(0.0));
    EXPECT_EQ(order_parameter(momentum_eigenstate(params(2), 2), Boundary::periodic), cplx(0.0));
    const std::vector<double> zero{0, 0, 0};
    const auto u = uniform_phase_state(params(1), zero);
    EXPECT_NEAR(std::abs(order_parameter(u) - cplx(2.0 / 3.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(order_parameter(u, Boundary::periodic) - cplx(1.0)), 0.0, 1e-15);
}

TEST(OrderParameter, SingleModeIsZero)
{
    for (int m0 = -4; m0 <= 4; ++m0) {
        EXPECT_EQ(order_parameter(momentum_eigenstate(params(4), m0)), cplx(0.0));
        EXPECT_EQ(order_parameter(momentum_eigenstate(params(4), m0), Boundary::periodic), cplx(0.0));
    }
}

TEST(OrderParameter, EvenStatesHaveRealF)
{
    // beta_m = beta_{-m} (any complex values) makes F real; real-even is a special case.
    std::mt19937_64 gen(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        const int M = 2 + trial;
        std::vector<cplx> b(static_cast<std::size_t>(2 * M + 1));
        for (int m = 0; m <= M; ++m) {
            const cplx v = trial % 2 ? cplx(g(gen), 0.0) : cplx(g(gen), g(gen));
            b[static_cast<std::size_t>(M + m)] = v;
            b[static_cast<std::size_t>(M - m)] = v;
        }
        RotorState s(params(M), b);
        s.normalize();
        EXPECT_LT(std::abs(order_parameter(s).imag()), 1e-12);
        EXPECT_LT(std::abs(order_parameter(s, Boundary::periodic).imag()), 1e-12);
        EXPECT_LE(std::abs(order_parameter(s)), 1.0 + 1e-12);
    }
}

TEST(InfiniteTemperatureEnergy, Examples)
{
    EXPECT_NEAR(infinite_temperature_energy(params(1, 1.7)), 1.7 * 1.7 / 3.0, 1e-15);
    EXPECT_NEAR(infinite_temperature_energy(params(2, 1.0)), 1.0, 1e-15);
    for (int M : {1, 2, 3, 10, 128, 512, 4096}) {
        const double ref = oracle::infinite_temperature_energy(1.7, M);
        EXPECT_NEAR(infinite_temperature_energy(params(M, 1.7)), ref, 1e-13 * ref) << "M=" << M;
    }
}

TEST(Series, StrictlyIncreasingTimes)
{
    TimeSeries s;
    s.push_back(1, 0.5);
    s.push_back(3, 0.7);
    EXPECT_THROW(s.push_back(3, 0.1), ValidationError);
    EXPECT_EQ(s.size(), 2u);
    EXPECT_EQ(s.values.size(), s.times.size());
}

TEST(RotorState, EdgeOccupationAndBounds)
{
    auto s = momentum_eigenstate(params(3), 3);
    EXPECT_EQ(s.edge_occupation(), 1.0);
    EXPECT_THROW((void)s.at(4), ValidationError);
    EXPECT_THROW(RotorState(params(3), std::vector<cplx>(5)), ValidationError);
}
