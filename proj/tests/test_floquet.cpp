#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rotordyn/floquet.hpp"

using namespace rotordyn;

namespace {

ModelParams params(int M, double K = 6.0, double kbar = 1.7)
{
    ModelParams p;
    p.K = K;
    p.kbar = kbar;
    p.M = M;
    return p;
}

} // namespace

TEST(FloquetOperator, ZeroKickIsDiagonalFreePhase)
{
    const auto U = build_floquet_operator(params(5, 0.0));
    for (int i = 0; i < 11; ++i)
        for (int k = 0; k < 11; ++k) {
            const double m = i - 5;
            const cplx expect = i == k ? std::polar(1.0, -0.5 * 1.7 * m * m) : cplx{0.0, 0.0};
            EXPECT_NEAR(std::abs(U(i, k) - expect), 0.0, 1e-15);
        }
}

TEST(FloquetOperator, MatchesPropagatorStep)
{
    const auto p = params(20);
    const auto U = build_floquet_operator(p);
    EXPECT_LT(max_unitarity_defect(U), 1e-12);
    const auto r = oracle::random_state(p.size(), 3);
    const Eigen::Map<const Eigen::VectorXcd> b(r.data(), p.size());
    const Eigen::VectorXcd ub = U * b;
    const auto [s, F] = step(RotorState(p, r));
    for (int i = 0; i < p.size(); ++i) EXPECT_NEAR(std::abs(ub(i) - s.vector()[static_cast<std::size_t>(i)]), 0.0, 1e-12);
}

TEST(FloquetOperator, RequiresSingleRotor)
{
    auto p = params(4);
    p.epsilon = 0.1;
    EXPECT_THROW(build_floquet_operator(p), ValidationError);
}

TEST(Diagonalize, FreeCase)
{
    const auto p = params(6, 0.0);
    const auto sp = diagonalize_floquet(build_floquet_operator(p));
    std::vector<double> expect;
    for (int m = -6; m <= 6; ++m) expect.push_back(wrap_phase(0.5 * 1.7 * m * m));
    std::sort(expect.begin(), expect.end());
    for (int j = 0; j < sp.size(); ++j) EXPECT_NEAR(sp.quasienergies(j), expect[static_cast<std::size_t>(j)], 1e-12);
    // Modes are momentum eigenstates (up to the degenerate +-m pairs, which
    // mix only within the pair).
    for (int j = 0; j < sp.size(); ++j) {
        const auto col = sp.modes.col(j).cwiseAbs2();
        int support = 0;
        for (int i = 0; i < p.size(); ++i) support += col(i) > 1e-20;
        EXPECT_LE(support, 2);
    }
}

TEST(Diagonalize, KickedSpectrumQuality)
{
    const auto p = params(64);
    const auto U = build_floquet_operator(p);
    const auto sp = diagonalize_floquet(U);
    EXPECT_LT(sp.unitarity_residual, 1e-8);
    EXPECT_LT(orthonormality_residual(sp), 1e-10);
    EXPECT_LT(involution_check(sp), 1e-9);
    for (int j = 0; j < sp.size(); ++j) {
        EXPECT_GT(sp.quasienergies(j), -std::numbers::pi);
        EXPECT_LE(sp.quasienergies(j), std::numbers::pi);
    }
    // Eigenvalue moduli come from an independent general eigensolver.
    const Eigen::VectorXcd ev = U.eigenvalues();
    for (Eigen::Index j = 0; j < ev.size(); ++j) EXPECT_NEAR(std::abs(ev(j)), 1.0, 1e-10);
}

TEST(Diagonalize, LocalizedModes)
{
    const auto sp = diagonalize_floquet(build_floquet_operator(params(64)));
    const auto pr = participation_ratios(sp);
    EXPECT_LT(pr.mean(), 129.0 / 4.0);
    EXPECT_GE(pr.minCoeff(), 1.0 - 1e-12);
}

TEST(Diagonalize, RejectsNonUnitary)
{
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(4, 4);
    A(0, 1) = 1e-3;
    EXPECT_THROW(diagonalize_floquet(A), NumericalError);
}

TEST(ProjectO, BasisColumnsAndParseval)
{
    const auto p = params(15);
    const auto sp = diagonalize_floquet(build_floquet_operator(p));
    std::vector<cplx> col(static_cast<std::size_t>(p.size()));
    for (int i = 0; i < p.size(); ++i) col[static_cast<std::size_t>(i)] = sp.modes(i, 4);
    const auto O = project_O(col, sp);
    for (int j = 0; j < p.size(); ++j) EXPECT_NEAR(std::abs(O(j) - (j == 4 ? cplx(1.0) : cplx(0.0))), 0.0, 1e-12);

    for (unsigned seed = 0; seed < 5; ++seed) {
        const auto r = oracle::random_state(p.size(), seed);
        const auto o = project_O(r, sp);
        EXPECT_NEAR(o.squaredNorm(), 1.0, 1e-10);
        // Adjoint round trip.
        const Eigen::VectorXcd back = sp.modes * o;
        for (int i = 0; i < p.size(); ++i) EXPECT_NEAR(std::abs(back(i) - r[static_cast<std::size_t>(i)]), 0.0, 1e-12);
    }
    EXPECT_THROW(project_O(std::vector<cplx>(3), sp), ValidationError);
}

TEST(ProjectO, ConservedUnderSingleRotorEvolution)
{
    const auto p = params(40);
    const auto sp = diagonalize_floquet(build_floquet_operator(p));
    const auto r = oracle::random_state(p.size(), 17);
    RotorState s(p, r);
    const Eigen::VectorXd O0 = project_O(s, sp).cwiseAbs();
    Propagator prop(p);
    double worst = 0.0;
    for (int t = 1; t <= 2000; ++t) {
        prop.step(s.amplitudes(), t);
        if (t % 50 == 0) worst = std::max(worst, (project_O(s, sp).cwiseAbs() - O0).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(Involution, PerturbedColumn)
{
    auto sp = diagonalize_floquet(build_floquet_operator(params(10)));
    EXPECT_LT(involution_check(sp), 1e-10);
    sp.modes.col(3) += 1e-3 * sp.modes.col(7);
    EXPECT_NEAR(involution_check(sp), 1e-3, 1e-6);
}

TEST(EvenSector, MatchesFullSpectrumSubset)
{
    const auto p = params(12);
    const auto even = even_sector_quasienergies(p);
    const auto full = diagonalize_floquet(build_floquet_operator(p)).quasienergies;
    ASSERT_EQ(even.size(), 13);
    for (Eigen::Index j = 0; j < even.size(); ++j) {
        double best = 10.0;
        for (Eigen::Index k = 0; k < full.size(); ++k) best = std::min(best, std::abs(wrap_phase(full(k) - even(j))));
        EXPECT_LT(best, 1e-10);
    }
}

TEST(SlopeBreak, FindsKnee)
{
    std::vector<double> x, y;
    for (int i = 0; i < 60; ++i) {
        x.push_back(0.1 * i);
        y.push_back(i < 35 ? 0.5 * x.back() : 0.5 * 3.5);
    }
    const auto br = find_slope_break(x, y, 5);
    EXPECT_EQ(br.split, 35u);
    EXPECT_NEAR(br.left_slope, 0.5, 1e-12);
    EXPECT_NEAR(br.right_slope, 0.0, 1e-12);
}

TEST(RecordingTimes, Grids)
{
    EXPECT_EQ(recording_times(10, 0, 3), (std::vector<std::int64_t>{3, 6, 9}));
    const auto g = recording_times(10000, 50, 0);
    EXPECT_EQ(g.front(), 1);
    EXPECT_EQ(g.back(), 10000);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
}

TEST(Nekhoroshev, TinyEpsilonStaysNearIntegrable)
{
    NekhoroshevConfig cfg;
    cfg.eps_list = {1e-6};
    cfg.n_diso = 2;
    cfg.n_kicks = 1000;
    cfg.log_points = 30;
    const auto res = nekhoroshev_experiment(params(20), cfg);
    EXPECT_LT(res.per_eps[0].delta_mean.maxCoeff(), 1e-3);
    EXPECT_GE(res.per_eps[0].eta.minCoeff(), 0.0);
}

TEST(Nekhoroshev, DeterministicAcrossThreadCounts)
{
    NekhoroshevConfig cfg;
    cfg.eps_list = {0.1, 0.2};
    cfg.n_diso = 7;
    cfg.n_kicks = 300;
    cfg.log_points = 25;
    cfg.chunk = 2;
    cfg.seed = 99;
    cfg.threads = 1;
    const auto a = nekhoroshev_experiment(params(16), cfg);
    cfg.threads = 3;
    const auto b = nekhoroshev_experiment(params(16), cfg);
    for (std::size_t e = 0; e < 2; ++e) {
        EXPECT_EQ(a.per_eps[e].eta, b.per_eps[e].eta);
        EXPECT_EQ(a.per_eps[e].A, b.per_eps[e].A);
    }
    EXPECT_EQ(a.a_exponent, b.a_exponent);
}

TEST(Nekhoroshev, MatchesDirectSingleRealization)
{
    // One realization by hand against the experiment's bookkeeping.
    const auto p0 = params(10);
    NekhoroshevConfig cfg;
    cfg.eps_list = {0.3};
    cfg.n_diso = 1;
    cfg.n_kicks = 50;
    cfg.record_every = 10;
    cfg.fit_t_min = 1;
    cfg.seed = 5;
    const auto res = nekhoroshev_experiment(p0, cfg);

    CounterRng rng(5, stream_id({0x6E656B6Full, 0, 0}));
    std::vector<double> ph(static_cast<std::size_t>(p0.size()));
    for (auto& x : ph) x = 2.0 * std::numbers::pi * rng.uniform();
    auto p = p0;
    p.epsilon = 0.3;
    auto s = uniform_phase_state(p, ph);
    const auto O0 = project_O(s, res.spectrum).cwiseAbs().eval();
    Propagator prop(p);
    for (int t = 1; t <= 50; ++t) {
        prop.step(s.amplitudes(), t);
        if (t % 10 == 0) {
            const Eigen::VectorXd d = (project_O(s, res.spectrum).cwiseAbs() - O0).cwiseAbs();
            for (int j = 0; j < p.size(); ++j) EXPECT_NEAR(res.per_eps[0].delta_mean(j, t / 10 - 1), d(j), 1e-15);
        }
    }
}

TEST(Nekhoroshev, Validation)
{
    NekhoroshevConfig cfg;
    cfg.eps_list = {0.0};
    EXPECT_THROW(nekhoroshev_experiment(params(5), cfg), ValidationError);
    cfg.eps_list = {0.1};
    cfg.n_diso = 0;
    EXPECT_THROW(nekhoroshev_experiment(params(5), cfg), ValidationError);
}
