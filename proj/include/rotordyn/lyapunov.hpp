#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rotordyn/core_state.hpp"
#include "rotordyn/errors.hpp"
#include "rotordyn/propagator.hpp"

namespace rotordyn {

enum class Pairing {
    m0_perturbed,      ///< beta = |m0>, beta' = sqrt(1-d^2)|m0> + d|m0+1>
    uniform_perturbed, ///< all modes 1/sqrt(L); beta' reweights m=0 by (1-d) and m=1 by (1+d)
};

struct LyapunovConfig {
    double delta = 1e-10;
    std::int64_t n_periods = 1000;
    std::int64_t record_every = 1;
    Pairing pairing = Pairing::m0_perturbed;
    int m0 = 0;
    Coupling coupling = Coupling::real_part;
    NoiseModel noise{};

    void validate(const ModelParams& p) const
    {
        require(delta > 0.0 && delta < 0.1, "lyapunov: delta must be in (0, 0.1)");
        require(n_periods >= 1, "lyapunov: n_periods must be >= 1");
        require(record_every >= 1, "lyapunov: record_every must be >= 1");
        require(m0 >= -p.M && m0 < p.M, "lyapunov: m0 and m0+1 must lie in [-M, M]");
        require(p.M >= 1, "lyapunov: M must be >= 1");
        noise.validate();
    }
};

struct BenettinResult {
    TimeSeries lambda;    ///< running average lambda(T)
    TimeSeries energy;    ///< reference-trajectory energy on the same grid
    double plateau = 0.0; ///< mean log stretch per period over the final 10% of periods
    double final_lambda = 0.0;
    double d0 = 0.0;                  ///< target distance sqrt(2) delta
    double max_rescale_error = 0.0;   ///< max | |Delta| / d0 - 1 | after rescaling
    double max_norm_defect = 0.0;     ///< max | |beta + Delta|^2 - 1 | after rescaling
    std::int64_t underflows = 0;
    RotorState reference;
};

namespace detail {

inline double norm2(std::span<const cplx> v)
{
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
}

/// Puts the offset back on the unit sphere around beta at Euclidean length d0:
/// Delta = -(d0^2/2) beta + d0 sqrt(1 - d0^2/4) w, with w the unit part of
/// Delta orthogonal to beta in the real inner product. Then |Delta| = d0 and
/// |beta + Delta| = 1 hold exactly in exact arithmetic.
inline bool rescale_on_sphere(std::span<const cplx> beta, std::span<cplx> delta, double d0)
{
    double r = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) r += (std::conj(beta[i]) * delta[i]).real();
    double nw2 = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) nw2 += std::norm(delta[i] - r * beta[i]);
    const double nw = std::sqrt(nw2);
    if (!(nw > 0.0)) return false;
    const double a = -0.5 * d0 * d0;
    const double b = d0 * std::sqrt(1.0 - 0.25 * d0 * d0) / nw;
    for (std::size_t i = 0; i < beta.size(); ++i) delta[i] = a * beta[i] + b * (delta[i] - r * beta[i]);
    return true;
}

inline double norm_defect(std::span<const cplx> beta, std::span<const cplx> delta)
{
    // |beta + Delta|^2 - 1 = (|beta|^2 - 1) + 2 Re<beta, Delta> + |Delta|^2
    double nb = 0.0, cross = 0.0, nd = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        nb += std::norm(beta[i]);
        cross += (std::conj(beta[i]) * delta[i]).real();
        nd += std::norm(delta[i]);
    }
    return (nb - 1.0) + 2.0 * cross + nd;
}

} // namespace detail

/// Reference state and initial offset for a pairing.
inline std::pair<RotorState, std::vector<cplx>> benettin_initial_pair(const ModelParams& params, const LyapunovConfig& cfg)
{
    const int L = params.size();
    std::vector<cplx> delta(static_cast<std::size_t>(L), cplx{0.0, 0.0});
    const double d = cfg.delta;
    if (cfg.pairing == Pairing::m0_perturbed) {
        auto ref = momentum_eigenstate(params, cfg.m0);
        delta[static_cast<std::size_t>(params.slot(cfg.m0))] = -d * d / (1.0 + std::sqrt(1.0 - d * d)); // sqrt(1-d^2) - 1
        delta[static_cast<std::size_t>(params.slot(cfg.m0 + 1))] = d;
        return {std::move(ref), std::move(delta)};
    }
    const double a = 1.0 / std::sqrt(static_cast<double>(L));
    RotorState ref(params, std::vector<cplx>(static_cast<std::size_t>(L), cplx{a, 0.0}));
    // sqrt(1 -+ d) - 1 without cancellation
    delta[static_cast<std::size_t>(params.slot(0))] = a * (-d / (1.0 + std::sqrt(1.0 - d)));
    delta[static_cast<std::size_t>(params.slot(1))] = a * (d / (1.0 + std::sqrt(1.0 + d)));
    return {std::move(ref), std::move(delta)};
}

/// Advances a reference state and the offset Delta = beta' - beta of a
/// companion trajectory by one period, without ever forming beta' (so an
/// offset of 1e-10 keeps full relative precision). The reference goes through
/// the ordinary propagator step, unchanged by anything done to Delta.
class OffsetPropagator {
public:
    OffsetPropagator(const ModelParams& params, Coupling coupling, const NoiseModel& noise)
        : params_(params), coupling_(coupling), noise_(noise), prop_(params, noise, make_options(coupling)),
          free_beta_(static_cast<std::size_t>(params.size())), psi_(free_beta_.size()), chi_(free_beta_.size())
    {
    }

    /// Returns the reference F that set this period's kick.
    cplx advance(std::span<cplx> beta, std::span<cplx> delta, std::int64_t t)
    {
        AngleGrid& grid = prop_.grid();
        const std::size_t L = free_beta_.size();
        std::copy(beta.begin(), beta.end(), free_beta_.begin());
        apply_free_phase(free_beta_, params_.kbar);
        grid.to_angle(free_beta_, psi_);
        const cplx F = prop_.step(beta, t);
        const cplx z = kick_parameter(params_, coupling_, F, noise_.draw(t));

        apply_free_phase(delta, params_.kbar);
        // F' - F on the ring, expanded so nothing of size 1 is subtracted.
        cplx dF{0.0, 0.0};
        for (std::size_t i = 0; i < L; ++i) {
            const std::size_t j = i + 1 == L ? 0 : i + 1;
            dF += std::conj(free_beta_[i]) * delta[j] + std::conj(delta[i]) * (free_beta_[j] + delta[j]);
        }
        const double Ke = params_.K * params_.epsilon;
        const cplx dz = coupling_ == Coupling::real_part ? cplx{-Ke * dF.real(), 0.0} : -Ke * dF;

        // Angle space: chi' = p' chi + (p' - p) psi, with p' - p = p (e^{ix} - 1).
        grid.to_angle(delta, chi_);
        for (std::size_t j = 0; j < L; ++j) {
            const double c = grid.cos_theta(static_cast<int>(j)), s = grid.sin_theta(static_cast<int>(j));
            const cplx p = std::polar(1.0, -(z.real() * c - z.imag() * s));
            const double h = -0.5 * (dz.real() * c - dz.imag() * s);
            const cplx dp = p * (2.0 * std::sin(h)) * cplx{-std::sin(h), std::cos(h)};
            chi_[j] = (p + dp) * chi_[j] + dp * psi_[j];
        }
        grid.to_momentum(chi_, delta);
        return F;
    }

private:
    static PropagatorOptions make_options(Coupling coupling)
    {
        PropagatorOptions o;
        o.method = KickMethod::spectral;
        o.coupling = coupling;
        return o;
    }

    ModelParams params_;
    Coupling coupling_;
    NoiseModel noise_;
    Propagator prop_;
    std::vector<cplx> free_beta_, psi_, chi_;
};

/// Benettin two-trajectory estimate of the largest Lyapunov exponent.
inline BenettinResult benettin_run(const ModelParams& params, const LyapunovConfig& cfg)
{
    params.validate();
    cfg.validate(params);
    OffsetPropagator stepper(params, cfg.coupling, cfg.noise);

    auto [ref, delta] = benettin_initial_pair(params, cfg);
    BenettinResult out{{}, {}, 0.0, 0.0, std::sqrt(2.0) * cfg.delta, 0.0, 0.0, 0, ref};
    const double d0 = out.d0;
    auto beta = ref.amplitudes();
    if (!detail::rescale_on_sphere(beta, delta, d0)) throw NumericalError("benettin_run: initial offset is parallel to the reference state");

    auto meta = describe(params);
    meta["delta"] = format_g17(cfg.delta);
    meta["pairing"] = cfg.pairing == Pairing::m0_perturbed ? "m0-perturbed" : "uniform-perturbed";
    meta["seed"] = std::to_string(cfg.noise.seed);
    out.lambda.label = "lambda";
    out.lambda.meta = meta;
    out.energy.label = "energy";
    out.energy.meta = meta;

    std::vector<cplx> last_good(delta);
    const std::int64_t tail_start = cfg.n_periods - std::max<std::int64_t>(1, cfg.n_periods / 10) + 1;
    double sum_log = 0.0, tail_sum = 0.0;
    std::int64_t tail_count = 0;

    for (std::int64_t t = 1; t <= cfg.n_periods; ++t) {
        stepper.advance(beta, delta, t);

        const double d = detail::norm2(delta);
        double log_ratio = 0.0;
        if (d > 0.0 && std::isfinite(d)) {
            log_ratio = std::log(d / d0);
        } else {
            ++out.underflows;
            warn("benettin_run: pair distance underflowed at T=" + std::to_string(t) + "; log ratio taken as 0");
            std::copy(last_good.begin(), last_good.end(), delta.begin());
        }
        sum_log += log_ratio;
        if (t >= tail_start) {
            tail_sum += log_ratio;
            ++tail_count;
        }
        if (!detail::rescale_on_sphere(beta, delta, d0)) {
            ++out.underflows;
            std::copy(last_good.begin(), last_good.end(), delta.begin());
            detail::rescale_on_sphere(beta, delta, d0);
        }
        std::copy(delta.begin(), delta.end(), last_good.begin());
        out.max_rescale_error = std::max(out.max_rescale_error, std::abs(detail::norm2(delta) / d0 - 1.0));
        out.max_norm_defect = std::max(out.max_norm_defect, std::abs(detail::norm_defect(beta, delta)));

        if (t % cfg.record_every == 0) {
            out.lambda.push_back(t, sum_log / static_cast<double>(t));
            out.energy.push_back(t, energy(ref));
        }
    }
    out.final_lambda = sum_log / static_cast<double>(cfg.n_periods);
    out.plateau = tail_sum / static_cast<double>(tail_count);
    out.reference = std::move(ref);
    return out;
}

struct LambdaVsM {
    std::vector<std::int64_t> times;
    std::vector<double> m;
    std::vector<double> lambda;
};

/// Pairs lambda(T) with m(T) = sqrt(2 e(T)) / kbar.
inline LambdaVsM lambda_vs_m(const TimeSeries& lambda, const TimeSeries& e, double kbar)
{
    require(kbar > 0.0, "lambda_vs_m: kbar must be > 0");
    require(lambda.times == e.times, "lambda_vs_m: lambda and energy series must share the time grid");
    LambdaVsM out;
    out.times = lambda.times;
    out.lambda = lambda.values;
    out.m.reserve(e.size());
    for (double v : e.values) out.m.push_back(std::sqrt(2.0 * std::max(v, 0.0)) / kbar);
    return out;
}

/// Time up to which the mean-field description holds for N rotors: log(N)/(2 lambda).
inline double validity_time(double lambda_m, double N)
{
    require(N >= 2.0, "validity_time: N must be >= 2");
    if (!(lambda_m > 0.0)) {
        warn("validity_time: nonpositive Lyapunov exponent (regular regime); the mean-field description does not break down exponentially");
        return std::numeric_limits<double>::infinity();
    }
    return std::log(N) / (2.0 * lambda_m);
}

} // namespace rotordyn
