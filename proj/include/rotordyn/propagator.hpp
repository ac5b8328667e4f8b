#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "rotordyn/core_state.hpp"
#include "rotordyn/errors.hpp"
#include "rotordyn/fft.hpp"
#include "rotordyn/rng.hpp"

namespace rotordyn {

/// Jacobi-Anger weights of the kick exp(-i A cos theta) in momentum transfer n:
/// c_n = (-i)^n J_n(A), stored for n = -n_max..n_max.
struct KickCoefficients {
    double A = 0.0;
    int n_max = 0;
    std::vector<cplx> coeffs;

    [[nodiscard]] cplx operator[](int n) const
    {
        if (n < -n_max || n > n_max) return {0.0, 0.0};
        return coeffs[static_cast<std::size_t>(n + n_max)];
    }

    [[nodiscard]] double weight() const
    {
        double s = 0.0;
        for (const auto& c : coeffs) s += std::norm(c);
        return s;
    }
};

namespace detail {

inline cplx minus_i_pow(int n)
{
    switch (((n % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, -1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, 1.0};
    }
}

} // namespace detail

/// Tail mass used by the kick paths. A tail of 1e-16 still leaves
/// amplitudes of order 1e-8 behind, so the propagator truncates much deeper.
inline constexpr double kick_tail_tol = 1e-30;

/// Truncates at the smallest n_max with sum_{|n|>n_max} J_n(A)^2 < tol.
inline KickCoefficients kick_coefficients(double A, double tol = 1e-16)
{
    require(std::isfinite(A), "kick_coefficients: A must be finite");
    require(tol > 0.0, "kick_coefficients: tol must be > 0");
    const double x = std::abs(A);

    // J_n(x) decays super-exponentially once n > x; go well past that and
    // accumulate the tail from the top so small tails are not lost to
    // cancellation against 1.
    const int n_hi = static_cast<int>(std::ceil(x + 30.0 + 10.0 * std::cbrt(x)));
    std::vector<double> j(static_cast<std::size_t>(n_hi + 1));
    for (int n = 0; n <= n_hi; ++n) j[static_cast<std::size_t>(n)] = x == 0.0 ? (n == 0 ? 1.0 : 0.0) : std::cyl_bessel_j(static_cast<double>(n), x);

    int n_max = n_hi;
    double tail = 0.0; // mass with |n| > current n
    for (int n = n_hi; n >= 0; --n) {
        if (tail >= tol) break;
        n_max = n;
        tail += 2.0 * j[static_cast<std::size_t>(n)] * j[static_cast<std::size_t>(n)];
    }
    if (x == 0.0) n_max = 0;

    KickCoefficients out;
    out.A = A;
    out.n_max = n_max;
    out.coeffs.resize(static_cast<std::size_t>(2 * n_max + 1));
    for (int n = -n_max; n <= n_max; ++n) {
        const int a = std::abs(n);
        double jn = j[static_cast<std::size_t>(a)];
        if (n < 0 && (a % 2)) jn = -jn;  // J_{-n} = (-1)^n J_n
        if (A < 0.0 && (a % 2)) jn = -jn; // J_n(-x) = (-1)^n J_n(x)
        out.coeffs[static_cast<std::size_t>(n + n_max)] = detail::minus_i_pow(n) * jn;
    }
    return out;
}

enum class KickMethod {
    bessel,   ///< circular convolution with the Bessel weights
    spectral, ///< pointwise phase on the (2M+1)-point angle grid
};

/// How the order parameter feeds back into the kick.
enum class Coupling {
    real_part, ///< A = K(1 - eps Re F) + xi, a pure cos(theta) kick
    full,      ///< kick exp(-i Re[z e^{i theta}]) with z = K(1 - eps F) + xi
};

/// Multiplies beta_m by exp(sign * i kbar m^2 / 2), sign = -1 for the forward map.
inline void apply_free_phase(std::span<cplx> beta, double kbar, int sign = -1)
{
    const int M = (static_cast<int>(beta.size()) - 1) / 2;
    for (int i = 0; i < static_cast<int>(beta.size()); ++i) {
        const double m = i - M;
        beta[static_cast<std::size_t>(i)] *= std::polar(1.0, sign * 0.5 * kbar * m * m);
    }
}

inline RotorState free_evolution(RotorState state)
{
    apply_free_phase(state.amplitudes(), state.params().kbar);
    return state;
}

/// Inverse of free_evolution.
inline RotorState free_evolution_inverse(RotorState state)
{
    apply_free_phase(state.amplitudes(), state.params().kbar, +1);
    return state;
}

/// Angle-grid tables for a lattice of L = 2M+1 sites, theta_j = 2 pi j / L.
///
/// The backward DFT of the slot-indexed amplitudes gives the wave function on
/// this grid up to the phase exp(i M theta_j), which cancels between the two
/// transforms around a pointwise multiplication.
class AngleGrid {
public:
    explicit AngleGrid(int L) : L_(L), cos_(static_cast<std::size_t>(L)), sin_(static_cast<std::size_t>(L)), scratch_(static_cast<std::size_t>(L)),
                                fwd_(&Dft::get(L, Dft::Sign::forward)), bwd_(&Dft::get(L, Dft::Sign::backward))
    {
        for (int j = 0; j < L; ++j) {
            const double th = 2.0 * std::numbers::pi * j / L;
            cos_[static_cast<std::size_t>(j)] = std::cos(th);
            sin_[static_cast<std::size_t>(j)] = std::sin(th);
        }
    }

    [[nodiscard]] int size() const { return L_; }
    [[nodiscard]] double cos_theta(int j) const { return cos_[static_cast<std::size_t>(j)]; }
    [[nodiscard]] double sin_theta(int j) const { return sin_[static_cast<std::size_t>(j)]; }

    /// Momentum amplitudes -> angle samples (unnormalized).
    void to_angle(std::span<const cplx> beta, std::span<cplx> psi) const { bwd_->execute(beta, psi); }

    /// Angle samples -> momentum amplitudes, including the 1/L.
    void to_momentum(std::span<const cplx> psi, std::span<cplx> beta) const
    {
        fwd_->execute(psi, beta);
        const double s = 1.0 / L_;
        for (auto& b : beta) b *= s;
    }

    /// beta <- exp(-i Re[z e^{i theta}]) beta, evaluated on the grid.
    void kick(std::span<cplx> beta, cplx z)
    {
        if (z == cplx{0.0, 0.0}) return;
        to_angle(beta, scratch_);
        for (int j = 0; j < L_; ++j) {
            const auto u = static_cast<std::size_t>(j);
            scratch_[u] *= std::polar(1.0, -(z.real() * cos_[u] - z.imag() * sin_[u]));
        }
        to_momentum(scratch_, beta);
    }

private:
    int L_;
    std::vector<double> cos_;
    std::vector<double> sin_;
    std::vector<cplx> scratch_;
    const Dft* fwd_;
    const Dft* bwd_;
};

/// beta <- exp(-i A cos(theta + phi)) beta with the Bessel weights folded onto
/// the momentum ring (the same periodic truncation as the angle grid).
inline void bessel_kick(std::span<cplx> beta, const KickCoefficients& kc, double phi = 0.0)
{
    const int L = static_cast<int>(beta.size());
    std::vector<cplx> folded(static_cast<std::size_t>(L), cplx{0.0, 0.0});
    for (int n = -kc.n_max; n <= kc.n_max; ++n) {
        const cplx c = phi == 0.0 ? kc[n] : kc[n] * std::polar(1.0, n * phi);
        folded[static_cast<std::size_t>(((n % L) + L) % L)] += c;
    }
    std::vector<cplx> out(static_cast<std::size_t>(L), cplx{0.0, 0.0});
    for (int d = 0; d < L; ++d) {
        const cplx c = folded[static_cast<std::size_t>(d)];
        if (c == cplx{0.0, 0.0}) continue;
        for (int i = 0; i < L; ++i) {
            int k = i - d;
            if (k < 0) k += L;
            out[static_cast<std::size_t>(i)] += c * beta[static_cast<std::size_t>(k)];
        }
    }
    std::copy(out.begin(), out.end(), beta.begin());
}

/// Applies exp(-i A cos(theta + phi)) to the state.
inline RotorState apply_kick(RotorState state, double A, KickMethod method, double phi = 0.0)
{
    require(std::isfinite(A) && std::isfinite(phi), "apply_kick: A and phi must be finite");
    if (method == KickMethod::bessel) {
        bessel_kick(state.amplitudes(), kick_coefficients(A, kick_tail_tol), phi);
    } else {
        AngleGrid grid(state.size());
        grid.kick(state.amplitudes(), cplx{A * std::cos(phi), A * std::sin(phi)});
    }
    return state;
}

/// Per-kick additive noise on the kick strength.
struct NoiseModel {
    enum class Kind { none, gaussian_iid };
    Kind kind = Kind::none;
    double sigma = 0.0;
    std::uint64_t seed = 0;

    static NoiseModel gaussian(double sigma, std::uint64_t seed) { return {Kind::gaussian_iid, sigma, seed}; }

    void validate() const { require(std::isfinite(sigma) && sigma >= 0.0, "noise sigma must be finite and >= 0"); }

    /// xi for kick number `kick` (1-based); a pure function of (seed, kick).
    [[nodiscard]] double draw(std::int64_t kick) const
    {
        if (kind == Kind::none || sigma == 0.0) return 0.0;
        CounterRng rng(seed, stream_id({0x6E6F697365ull /* "noise" */}), static_cast<std::uint64_t>(kick));
        return sigma * rng.normal();
    }
};

struct PropagatorOptions {
    KickMethod method = KickMethod::spectral;
    Coupling coupling = Coupling::real_part;
    /// Boundary used for the F that feeds the kick. The ring sum is the one the
    /// periodic kick conserves exactly.
    Boundary feedback_boundary = Boundary::periodic;
    double bessel_tol = kick_tail_tol;
    double edge_threshold = 1e-6;
};

/// Self-consistent kick parameter z for a given F: the kick is exp(-i Re[z e^{i theta}]).
inline cplx kick_parameter(const ModelParams& p, Coupling coupling, cplx F, double xi)
{
    if (coupling == Coupling::real_part) return {p.K * (1.0 - p.epsilon * F.real()) + xi, 0.0};
    return p.K * (1.0 - p.epsilon * F) + xi;
}

/// One-period stroboscopic map: free rotation, then F, then the kick.
class Propagator {
public:
    Propagator(const ModelParams& params, NoiseModel noise = {}, PropagatorOptions options = {})
        : params_(params), noise_(noise), options_(options), grid_(params.size())
    {
        params_.validate();
        noise_.validate();
    }

    [[nodiscard]] const ModelParams& params() const { return params_; }
    [[nodiscard]] const NoiseModel& noise() const { return noise_; }
    [[nodiscard]] const PropagatorOptions& options() const { return options_; }
    [[nodiscard]] AngleGrid& grid() { return grid_; }

    /// Advances beta by one period; `kick` is the 1-based index of the kick
    /// (it selects the noise draw). Returns the F that set the kick.
    cplx step(std::span<cplx> beta, std::int64_t kick)
    {
        apply_free_phase(beta, params_.kbar);
        const cplx F = order_parameter(beta, options_.feedback_boundary);
        const cplx z = kick_parameter(params_, options_.coupling, F, noise_.draw(kick));
        if (options_.method == KickMethod::spectral) {
            grid_.kick(beta, z);
        } else {
            bessel_kick(beta, kick_coefficients(std::abs(z), options_.bessel_tol), std::arg(z));
        }
        return F;
    }

private:
    ModelParams params_;
    NoiseModel noise_;
    PropagatorOptions options_;
    AngleGrid grid_;
};

struct StepResult {
    RotorState state;
    cplx F;
};

/// Value-semantics single step (kick index 1 unless given).
inline StepResult step(RotorState state, const NoiseModel& noise = {}, const PropagatorOptions& options = {}, std::int64_t kick = 1)
{
    Propagator prop(state.params(), noise, options);
    const cplx F = prop.step(state.amplitudes(), kick);
    return {std::move(state), F};
}

struct EvolveResult {
    TimeSeries energy;
    ComplexSeries F;
    RotorState final_state;
    /// First kick after which |beta_{+-M}|^2 exceeded the edge threshold.
    std::optional<std::int64_t> edge_warning_at;
    double max_norm_drift = 0.0;
};

/// Iterates the map n_kicks times from kick index 1, recording e and the F
/// used by the kick at every multiple of record_every.
inline EvolveResult evolve(RotorState state, std::int64_t n_kicks, std::int64_t record_every, const NoiseModel& noise = {},
                           const PropagatorOptions& options = {})
{
    require(n_kicks >= 1, "evolve: n_kicks must be >= 1");
    require(record_every >= 1, "evolve: record_every must be >= 1");
    Propagator prop(state.params(), noise, options);
    EvolveResult out{{}, {}, state, std::nullopt, 0.0};
    out.energy.label = "energy";
    out.F.label = "F";
    auto meta = describe(state.params());
    meta["noise_sigma"] = format_g17(noise.kind == NoiseModel::Kind::none ? 0.0 : noise.sigma);
    meta["seed"] = std::to_string(noise.seed);
    out.energy.meta = meta;
    out.F.meta = meta;
    out.energy.times.reserve(static_cast<std::size_t>(n_kicks / record_every));
    out.energy.values.reserve(static_cast<std::size_t>(n_kicks / record_every));

    auto beta = state.amplitudes();
    for (std::int64_t t = 1; t <= n_kicks; ++t) {
        const cplx F = prop.step(beta, t);
        if (!out.edge_warning_at && std::max(std::norm(beta.front()), std::norm(beta.back())) > options.edge_threshold) {
            out.edge_warning_at = t;
            char thr[32];
            std::snprintf(thr, sizeof thr, "%g", options.edge_threshold);
            warn(std::string("edge occupation exceeded ") + thr + " at t=" + std::to_string(t) +
                 "; truncation M=" + std::to_string(state.M()) + " may be too small");
        }
        if (t % record_every == 0) {
            out.energy.push_back(t, energy(state));
            out.F.push_back(t, F);
            out.max_norm_drift = std::max(out.max_norm_drift, std::abs(state.norm_squared() - 1.0));
        }
    }
    out.max_norm_drift = std::max(out.max_norm_drift, std::abs(state.norm_squared() - 1.0));
    out.final_state = std::move(state);
    return out;
}

} // namespace rotordyn
