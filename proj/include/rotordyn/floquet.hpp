#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "rotordyn/core_state.hpp"
#include "rotordyn/errors.hpp"
#include "rotordyn/observables.hpp"
#include "rotordyn/parallel.hpp"
#include "rotordyn/propagator.hpp"
#include "rotordyn/rng.hpp"

namespace rotordyn {

/// Quasienergies mu_j in (-pi, pi] and Floquet modes as columns, with
/// U0 V_j = exp(-i mu_j) V_j.
struct FloquetSpectrum {
    Eigen::VectorXd quasienergies;
    Eigen::MatrixXcd modes;
    double unitarity_residual = 0.0; ///< max_j |U0 V_j - e^{-i mu_j} V_j|

    [[nodiscard]] int size() const { return static_cast<int>(quasienergies.size()); }
};

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double x)
{
    x = std::remainder(x, 2.0 * std::numbers::pi);
    if (x <= -std::numbers::pi) x += 2.0 * std::numbers::pi;
    return x;
}

inline double max_unitarity_defect(const Eigen::MatrixXcd& U)
{
    const Eigen::MatrixXcd G = U.adjoint() * U - Eigen::MatrixXcd::Identity(U.rows(), U.cols());
    return G.cwiseAbs().maxCoeff();
}

/// Single-rotor Floquet operator Kick(K) * diag(exp(-i kbar m^2 / 2)) on the
/// momentum ring, i.e. exactly the matrix of one eps = 0 propagator step.
inline Eigen::MatrixXcd build_floquet_operator(const ModelParams& params, double tol = 1e-10)
{
    params.validate();
    require(params.epsilon == 0.0, "build_floquet_operator: the single-rotor operator needs epsilon = 0");
    const int L = params.size(), M = params.M;
    const auto kc = kick_coefficients(params.K, kick_tail_tol);
    std::vector<cplx> folded(static_cast<std::size_t>(L), cplx{0.0, 0.0});
    for (int n = -kc.n_max; n <= kc.n_max; ++n) folded[static_cast<std::size_t>(((n % L) + L) % L)] += kc[n];

    Eigen::MatrixXcd U(L, L);
    for (int k = 0; k < L; ++k) {
        const double m = k - M;
        const cplx phase = std::polar(1.0, -0.5 * params.kbar * m * m);
        for (int i = 0; i < L; ++i) U(i, k) = folded[static_cast<std::size_t>(((i - k) % L + L) % L)] * phase;
    }
    const double defect = max_unitarity_defect(U);
    if (defect > tol) throw NumericalError("build_floquet_operator: unitarity defect " + std::to_string(defect));
    return U;
}

/// Complex Schur form of a unitary matrix. For a normal matrix the triangular
/// factor is diagonal up to rounding and the Schur vectors are an orthonormal
/// eigenbasis, so near-degenerate clusters come out orthonormal as well.
inline FloquetSpectrum diagonalize_floquet(const Eigen::MatrixXcd& U0, double tol = 1e-8)
{
    require(U0.rows() == U0.cols() && U0.rows() > 0, "diagonalize_floquet: matrix must be square and nonempty");
    const double defect = max_unitarity_defect(U0);
    if (defect > tol) throw NumericalError("diagonalize_floquet: input not unitary (defect " + std::to_string(defect) + ")");

    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(U0);
    if (schur.info() != Eigen::Success) throw NumericalError("diagonalize_floquet: Schur decomposition failed");
    const Eigen::MatrixXcd& T = schur.matrixT();
    const Eigen::MatrixXcd& Q = schur.matrixU();
    const auto n = U0.rows();

    std::vector<std::pair<double, Eigen::Index>> order;
    for (Eigen::Index j = 0; j < n; ++j) {
        const cplx lam = T(j, j);
        if (std::abs(std::abs(lam) - 1.0) > tol) throw NumericalError("diagonalize_floquet: eigenvalue off the unit circle");
        order.emplace_back(wrap_phase(-std::arg(lam)), j);
    }
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    FloquetSpectrum out;
    out.quasienergies.resize(n);
    out.modes.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.quasienergies(k) = order[static_cast<std::size_t>(k)].first;
        out.modes.col(k) = Q.col(order[static_cast<std::size_t>(k)].second);
    }
    const Eigen::MatrixXcd R = U0 * out.modes - out.modes * (-cplx{0.0, 1.0} * out.quasienergies.cast<cplx>()).array().exp().matrix().asDiagonal();
    out.unitarity_residual = R.colwise().norm().maxCoeff();
    if (out.unitarity_residual > tol) throw NumericalError("diagonalize_floquet: eigen-residual " + std::to_string(out.unitarity_residual));
    return out;
}

/// O_j = sum_m conj(U_{m j}) beta_m.
inline Eigen::VectorXcd project_O(std::span<const cplx> beta, const FloquetSpectrum& spectrum)
{
    require(static_cast<Eigen::Index>(beta.size()) == spectrum.modes.rows(), "project_O: dimension mismatch");
    const Eigen::Map<const Eigen::VectorXcd> b(beta.data(), static_cast<Eigen::Index>(beta.size()));
    return spectrum.modes.adjoint() * b;
}

inline Eigen::VectorXcd project_O(const RotorState& state, const FloquetSpectrum& spectrum)
{
    return project_O(state.amplitudes(), spectrum);
}

/// max_{j != j'} |sum_m conj(U_{m j}) U_{m j'}|. The Poisson bracket
/// {|O_j|^2, |O_j'|^2} is proportional to this overlap, so its vanishing puts
/// the |O_j| in involution.
inline double involution_check(const FloquetSpectrum& spectrum)
{
    Eigen::MatrixXcd G = spectrum.modes.adjoint() * spectrum.modes;
    G.diagonal().setZero();
    return G.size() ? G.cwiseAbs().maxCoeff() : 0.0;
}

/// max_{j, j'} |(U^dagger U - 1)_{j j'}|, diagonal included.
inline double orthonormality_residual(const FloquetSpectrum& spectrum)
{
    return max_unitarity_defect(spectrum.modes);
}

/// 1 / sum_m |U_{m j}|^4 for each mode.
inline Eigen::VectorXd participation_ratios(const FloquetSpectrum& spectrum)
{
    Eigen::VectorXd pr(spectrum.modes.cols());
    for (Eigen::Index j = 0; j < pr.size(); ++j) pr(j) = 1.0 / spectrum.modes.col(j).cwiseAbs2().cwiseAbs2().sum();
    return pr;
}

/// Isometry onto the m -> -m even subspace, columns |0>, (|m> + |-m>)/sqrt 2 for m = 1..M.
inline Eigen::MatrixXd even_sector_isometry(int M)
{
    const int L = 2 * M + 1;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(L, M + 1);
    P(M, 0) = 1.0;
    for (int m = 1; m <= M; ++m) P(M + m, m) = P(M - m, m) = std::sqrt(0.5);
    return P;
}

/// Quasienergies of the single rotor restricted to states even under m -> -m,
/// sorted ascending in (-pi, pi].
inline Eigen::VectorXd even_sector_quasienergies(const ModelParams& params)
{
    const auto U = build_floquet_operator(params);
    const Eigen::MatrixXcd P = even_sector_isometry(params.M).cast<cplx>();
    const Eigen::MatrixXcd Ue = P.adjoint() * U * P;
    return diagonalize_floquet(Ue).quasienergies;
}

// ---------------------------------------------------------------------------
// Deviation of the eps = 0 conserved quantities under the interacting map.

struct NekhoroshevConfig {
    std::vector<double> eps_list;
    int n_diso = 32;
    std::int64_t n_kicks = 10000;
    std::uint64_t seed = 0;
    double b = 0.7;
    /// Number of log-spaced recording times; ignored when record_every > 0.
    int log_points = 120;
    std::int64_t record_every = 0;
    std::int64_t fit_t_min = 10;
    int min_segment = 6; ///< fewest grid points on either side of a slope break
    int chunk = 4;       ///< realizations per reduction leaf
    int threads = 0;     ///< 0 -> thread_count()

    void validate() const
    {
        require(!eps_list.empty(), "nekhoroshev: eps list is empty");
        for (double e : eps_list) require(e > 0.0 && std::isfinite(e), "nekhoroshev: every epsilon must be > 0");
        require(n_diso >= 1, "nekhoroshev: N_diso must be >= 1");
        require(n_kicks >= 2, "nekhoroshev: n_kicks must be >= 2");
        require(b > 0.0, "nekhoroshev: b must be > 0");
        require(record_every > 0 || log_points >= 2, "nekhoroshev: need log_points >= 2 or record_every >= 1");
        require(record_every >= 0, "nekhoroshev: record_every must be >= 0");
        require(fit_t_min >= 1 && fit_t_min < n_kicks, "nekhoroshev: fit_t_min must lie in [1, n_kicks)");
        require(min_segment >= 3, "nekhoroshev: min_segment must be >= 3");
        require(chunk >= 1, "nekhoroshev: chunk must be >= 1");
    }
};

/// Per-mode log-log fit of eta_j(t) on [t_min, break].
struct ModeFit {
    double A = std::numeric_limits<double>::quiet_NaN();
    double B = std::numeric_limits<double>::quiet_NaN();
    std::int64_t t_max = 0;
    bool shrunk = false;
};

struct NekhoroshevEpsilon {
    double epsilon = 0.0;
    Eigen::MatrixXd eta;          ///< modes x times
    Eigen::MatrixXd delta_mean;   ///< <delta_j>(t)
    Eigen::MatrixXd delta_stderr; ///< standard error of <delta_j>(t) over realizations
    Eigen::VectorXd O0_mean;      ///< <|O_j(0)|>
    std::vector<ModeFit> fits;
    double A = 0.0, B = 0.0;
    double A_stderr = 0.0, B_stderr = 0.0;
    int fitted_modes = 0;
    int shrunk_windows = 0;
    double t_star = 0.0;
};

struct NekhoroshevResult {
    std::vector<std::int64_t> times;
    std::vector<NekhoroshevEpsilon> per_eps;
    double a_exponent = std::numeric_limits<double>::quiet_NaN(); ///< slope of log(-B_eps) vs log eps
    double a_stderr = std::numeric_limits<double>::quiet_NaN();
    double b = 0.7;
    int n_diso = 0;
    FloquetSpectrum spectrum;
};

/// Recording grid: multiples of `every`, or `points` log-spaced integers in [1, n].
inline std::vector<std::int64_t> recording_times(std::int64_t n, int points, std::int64_t every)
{
    std::vector<std::int64_t> t;
    if (every > 0) {
        for (std::int64_t k = every; k <= n; k += every) t.push_back(k);
        return t;
    }
    for (int k = 0; k < points; ++k) {
        const auto v = static_cast<std::int64_t>(std::llround(std::exp(std::log(static_cast<double>(n)) * k / (points - 1))));
        if (t.empty() || v > t.back()) t.push_back(v);
    }
    return t;
}

/// Two-segment least squares in (x, y): the split index k (first point of
/// the right segment) that minimizes the total residual, using prefix sums.
/// Returns the slopes of both segments along with k.
struct SlopeBreak {
    std::size_t split = 0;
    double left_slope = 0.0;
    double right_slope = 0.0;
};

inline SlopeBreak find_slope_break(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_segment)
{
    const std::size_t n = x.size();
    require(n >= 2 * min_segment, "find_slope_break: too few points");
    std::vector<double> sx(n + 1, 0), sy(n + 1, 0), sxx(n + 1, 0), sxy(n + 1, 0), syy(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        sx[i + 1] = sx[i] + x[i];
        sy[i + 1] = sy[i] + y[i];
        sxx[i + 1] = sxx[i] + x[i] * x[i];
        sxy[i + 1] = sxy[i] + x[i] * y[i];
        syy[i + 1] = syy[i] + y[i] * y[i];
    }
    auto segment = [&](std::size_t lo, std::size_t hi, double& slope) {
        const double m = static_cast<double>(hi - lo);
        const double X = sx[hi] - sx[lo], Y = sy[hi] - sy[lo];
        const double cxx = (sxx[hi] - sxx[lo]) - X * X / m;
        const double cxy = (sxy[hi] - sxy[lo]) - X * Y / m;
        const double cyy = (syy[hi] - syy[lo]) - Y * Y / m;
        slope = cxx > 0 ? cxy / cxx : 0.0;
        return std::max(0.0, cyy - (cxx > 0 ? cxy * cxy / cxx : 0.0));
    };
    SlopeBreak best;
    double best_ssr = std::numeric_limits<double>::infinity();
    for (std::size_t k = min_segment; k + min_segment <= n; ++k) {
        double a = 0, b = 0;
        const double ssr = segment(0, k, a) + segment(k, n, b);
        if (ssr < best_ssr) {
            best_ssr = ssr;
            best = {k, a, b};
        }
    }
    return best;
}

namespace detail {

/// Sums of delta_j(t), delta_j(t)^2 and |O_j(0)| over a set of realizations.
struct DeviationSums {
    Eigen::MatrixXd s1, s2;
    Eigen::VectorXd o0;

    DeviationSums operator+(const DeviationSums& o) const { return {s1 + o.s1, s2 + o.s2, o0 + o.o0}; }
};

inline ModeFit fit_mode(const std::vector<std::int64_t>& times, const Eigen::MatrixXd& eta, Eigen::Index j, const NekhoroshevConfig& cfg,
                        bool& shrunk)
{
    std::vector<double> x, y;
    std::vector<std::int64_t> tt;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < cfg.fit_t_min) continue;
        const double v = eta(j, static_cast<Eigen::Index>(k));
        if (!(v > 0.0)) continue;
        x.push_back(std::log(static_cast<double>(times[k])));
        y.push_back(std::log(v));
        tt.push_back(times[k]);
    }
    ModeFit f;
    const auto ms = static_cast<std::size_t>(cfg.min_segment);
    if (x.size() < 3) return f;
    std::size_t end = x.size();
    if (x.size() >= 2 * ms) {
        const auto br = find_slope_break(x, y, ms);
        // A break counts as a plateau when the late slope has dropped below half the early one.
        if (br.left_slope > 0.0 && br.right_slope < 0.5 * br.left_slope) {
            end = br.split;
            shrunk = true;
            f.shrunk = true;
        }
    }
    const auto lf = fit_line(std::span(x).first(end), std::span(y).first(end));
    f.A = lf.slope;
    f.B = lf.intercept;
    f.t_max = tt[end - 1];
    return f;
}

} // namespace detail

/// Random-phase ensemble: evolves each initial state under the interacting
/// map, tracks delta_j(t) = ||O_j(t)| - |O_j(0)|| in the eps = 0 Floquet basis
/// and fits log eta_j = A_j log t + B_j.
///
/// Realizations are grouped into fixed-size chunks whose partial sums are
/// combined by a fixed pairwise tree, so results do not depend on the thread
/// count. Realization r at eps index e draws its phases from the stream
/// (seed, e, r).
inline NekhoroshevResult nekhoroshev_experiment(const ModelParams& params, const NekhoroshevConfig& cfg)
{
    params.validate();
    cfg.validate();
    ModelParams single = params;
    single.epsilon = 0.0;
    NekhoroshevResult out;
    out.spectrum = diagonalize_floquet(build_floquet_operator(single));
    out.times = recording_times(cfg.n_kicks, cfg.log_points, cfg.record_every);
    out.b = cfg.b;
    out.n_diso = cfg.n_diso;

    const int L = params.size();
    const auto T = static_cast<Eigen::Index>(out.times.size());
    const int n_chunks = (cfg.n_diso + cfg.chunk - 1) / cfg.chunk;
    const int threads = cfg.threads > 0 ? cfg.threads : thread_count();

    for (std::size_t e = 0; e < cfg.eps_list.size(); ++e) {
        ModelParams p = params;
        p.epsilon = cfg.eps_list[e];
        std::vector<detail::DeviationSums> partial(static_cast<std::size_t>(n_chunks));

        parallel_for(
            static_cast<std::size_t>(n_chunks),
            [&](std::size_t c) {
                detail::DeviationSums acc{Eigen::MatrixXd::Zero(L, T), Eigen::MatrixXd::Zero(L, T), Eigen::VectorXd::Zero(L)};
                const int r_lo = static_cast<int>(c) * cfg.chunk, r_hi = std::min(cfg.n_diso, r_lo + cfg.chunk);
                std::vector<double> phases(static_cast<std::size_t>(L));
                for (int r = r_lo; r < r_hi; ++r) {
                    CounterRng rng(cfg.seed, stream_id({0x6E656B6Full, e, static_cast<std::uint64_t>(r)}));
                    for (auto& ph : phases) ph = 2.0 * std::numbers::pi * rng.uniform();
                    auto state = uniform_phase_state(p, phases);
                    const Eigen::VectorXd O0 = project_O(state, out.spectrum).cwiseAbs();
                    acc.o0 += O0;
                    Propagator prop(p);
                    std::int64_t t = 0;
                    for (Eigen::Index k = 0; k < T; ++k) {
                        while (t < out.times[static_cast<std::size_t>(k)]) prop.step(state.amplitudes(), ++t);
                        const Eigen::VectorXd d = (project_O(state, out.spectrum).cwiseAbs() - O0).cwiseAbs();
                        acc.s1.col(k) += d;
                        acc.s2.col(k) += d.cwiseAbs2();
                    }
                }
                partial[c] = std::move(acc);
            },
            threads);

        const auto total = pairwise_reduce(partial, 0, partial.size(), [](const auto& a, const auto& b) { return a + b; });
        const double n = cfg.n_diso;
        NekhoroshevEpsilon res;
        res.epsilon = p.epsilon;
        res.O0_mean = total.o0 / n;
        res.delta_mean = total.s1 / n;
        res.delta_stderr = Eigen::MatrixXd::Zero(L, T);
        if (cfg.n_diso > 1) {
            const Eigen::MatrixXd var = ((total.s2 / n) - res.delta_mean.cwiseAbs2()).cwiseMax(0.0) * (n / (n - 1.0));
            res.delta_stderr = (var / n).cwiseSqrt();
        }
        res.eta = res.delta_mean.array().colwise() / res.O0_mean.array();

        std::vector<double> As, Bs;
        for (Eigen::Index j = 0; j < L; ++j) {
            bool shrunk = false;
            const auto f = detail::fit_mode(out.times, res.eta, j, cfg, shrunk);
            res.fits.push_back(f);
            if (shrunk) ++res.shrunk_windows;
            if (std::isfinite(f.A)) {
                As.push_back(f.A);
                Bs.push_back(f.B);
            }
        }
        res.fitted_modes = static_cast<int>(As.size());
        if (As.empty()) throw FitRejected("nekhoroshev: no mode had enough positive eta samples to fit at eps=" + std::to_string(p.epsilon));
        if (res.fitted_modes < L) warn("nekhoroshev: " + std::to_string(L - res.fitted_modes) + " modes skipped (too few positive samples) at eps=" + std::to_string(p.epsilon));
        if (res.shrunk_windows > 0)
            warn("nekhoroshev: fit window shrunk at a slope break for " + std::to_string(res.shrunk_windows) + " of " + std::to_string(L) +
                 " modes at eps=" + std::to_string(p.epsilon));
        auto mean_se = [](const std::vector<double>& v, double& se) {
            double m = 0.0;
            for (double x : v) m += x;
            m /= static_cast<double>(v.size());
            double s = 0.0;
            for (double x : v) s += (x - m) * (x - m);
            se = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
            return m;
        };
        res.A = mean_se(As, res.A_stderr);
        res.B = mean_se(Bs, res.B_stderr);
        res.t_star = std::pow(res.epsilon, cfg.b / res.A) * std::exp(-res.B / res.A);
        out.per_eps.push_back(std::move(res));
    }

    if (out.per_eps.size() >= 2) {
        std::vector<double> lx, ly;
        bool ok = true;
        for (const auto& r : out.per_eps) {
            if (!(r.B < 0.0)) ok = false;
            lx.push_back(std::log(r.epsilon));
            ly.push_back(std::log(-r.B));
        }
        if (ok) {
            const auto lf = fit_line(lx, ly);
            out.a_exponent = lf.slope;
            out.a_stderr = lf.stderr_slope;
        } else {
            warn("nekhoroshev: some B_eps >= 0, so log(-B_eps) is undefined; exponent a not fitted");
        }
    }
    return out;
}

} // namespace rotordyn
