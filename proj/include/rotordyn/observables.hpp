#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "rotordyn/core_state.hpp"
#include "rotordyn/errors.hpp"
#include "rotordyn/propagator.hpp"
#include "rotordyn/rng.hpp"

namespace rotordyn {

/// A power-law fit refused its input (nonpositive samples, too few points,
/// or a flat series where a growth law was expected).
class FitRejected : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct CoarseGrainConfig {
    int window = 50; ///< half-width Delta t in kicks
    int stride = 1;
    bool subtract_mean = false; ///< use Var[Re F] in each window instead of mean (Re F)^2
};

struct PowerLawFit {
    double exponent = 0.0;
    double prefactor_log = 0.0; ///< intercept of log(value) against log(t)
    std::int64_t t_min = 0;
    std::int64_t t_max = 0;
    double stderr_exponent = 0.0;
    std::size_t samples = 0;

    [[nodiscard]] double operator()(double t) const { return std::exp(prefactor_log) * std::pow(t, exponent); }
};

/// Ordinary least squares of y against x; returns slope, intercept, slope stderr.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
    require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two paired samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, "fit_line: abscissae are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (x.size() > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - f.intercept - f.slope * x[i];
            ssr += r * r;
        }
        f.stderr_slope = std::sqrt(ssr / (n - 2.0) / sxx);
    }
    return f;
}

/// log-log OLS over the samples with t in [t_min, t_max].
inline PowerLawFit fit_power_law(const TimeSeries& series, std::int64_t t_min, std::int64_t t_max)
{
    require(t_min > 0 && t_min < t_max, "fit_power_law: need 0 < t_min < t_max");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto t = series.times[i];
        if (t < t_min || t > t_max) continue;
        const double v = series.values[i];
        if (!(v > 0.0) || !std::isfinite(v))
            throw FitRejected("fit_power_law: nonpositive value " + std::to_string(v) + " at t=" + std::to_string(t));
        lx.push_back(std::log(static_cast<double>(t)));
        ly.push_back(std::log(v));
    }
    if (lx.size() < 10) throw FitRejected("fit_power_law: fewer than 10 samples in [" + std::to_string(t_min) + ", " + std::to_string(t_max) + "]");
    const auto lf = fit_line(lx, ly);
    return {lf.slope, lf.intercept, t_min, t_max, lf.stderr_slope, lx.size()};
}

/// sigma(t) = g eps^2 K^2 <(Re F)^2> over [t - Dt, t + Dt]. F must be sampled
/// at every kick.
template <class V>
TimeSeries sigma_series(const Series<V>& F, const CoarseGrainConfig& cfg, double epsilon, double K, double g = 1.0)
{
    require(cfg.window >= 1 && cfg.stride >= 1, "sigma_series: window and stride must be >= 1");
    require(g > 0.0, "sigma_series: g must be > 0");
    const std::size_t n = F.size();
    const std::size_t width = 2 * static_cast<std::size_t>(cfg.window) + 1;
    require(width <= n, "sigma_series: coarse-graining window exceeds the series length");
    for (std::size_t i = 1; i < n; ++i) require(F.times[i] == F.times[i - 1] + 1, "sigma_series: F must be sampled at every kick");

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::real(F.values[i]);
    // Prefix sums make every window O(1); sums are of O(1) numbers so the
    // difference loses nothing that matters at these lengths.
    std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s1[i + 1] = s1[i] + x[i];
        s2[i + 1] = s2[i] + x[i] * x[i];
    }
    const double scale = g * epsilon * epsilon * K * K;
    TimeSeries out;
    out.label = "sigma";
    out.meta = F.meta;
    out.meta["coarse_grain_window"] = std::to_string(cfg.window);
    for (std::size_t c = static_cast<std::size_t>(cfg.window); c + static_cast<std::size_t>(cfg.window) < n; c += static_cast<std::size_t>(cfg.stride)) {
        const std::size_t lo = c - static_cast<std::size_t>(cfg.window), hi = c + static_cast<std::size_t>(cfg.window) + 1;
        const double mean2 = (s2[hi] - s2[lo]) / static_cast<double>(width);
        double v = mean2;
        if (cfg.subtract_mean) {
            const double mean = (s1[hi] - s1[lo]) / static_cast<double>(width);
            v = std::max(0.0, mean2 - mean * mean);
        }
        out.push_back(F.times[c], scale * v);
    }
    return out;
}

/// Closed-form solution of d(m^2)/dt = D/m.
inline double diffusion_closed_form(double D, double m0, double t)
{
    return std::pow(m0 * m0 * m0 + 1.5 * D * t, 2.0 / 3.0);
}

/// Integrates y' = D / sqrt(y), y = m^2, with an adaptive Dormand-Prince
/// stepper and samples y on `n_samples` log-spaced integer times in [1, t_final]
/// plus t = 0.
inline TimeSeries diffusion_ode_oracle(double D, double m0, double t_final, int n_samples = 200, double tol = 1e-13)
{
    require(D > 0.0 && std::isfinite(D), "diffusion_ode_oracle: D must be > 0");
    require(m0 > 0.0 && std::isfinite(m0), "diffusion_ode_oracle: m0 must be > 0");
    require(t_final >= 1.0, "diffusion_ode_oracle: t_final must be >= 1");
    require(n_samples >= 2, "diffusion_ode_oracle: need at least 2 samples");

    std::vector<double> times{0.0};
    for (int k = 0; k < n_samples; ++k) {
        const double t = std::round(std::exp(std::log(t_final) * k / (n_samples - 1)));
        if (t > times.back()) times.push_back(t);
    }

    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    State y{m0 * m0};
    TimeSeries out;
    out.label = "m2";
    out.meta = {{"D", std::to_string(D)}, {"m0", std::to_string(m0)}};
    auto rhs = [D](const State& s, State& dsdt, double) { dsdt[0] = D / std::sqrt(s[0]); };
    auto observer = [&out](const State& s, double t) { out.push_back(static_cast<std::int64_t>(t), s[0]); };
    ode::integrate_times(ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<State>()), rhs, y, times.begin(), times.end(), 1e-3, observer);
    return out;
}

struct ConstantSigmaResult {
    PowerLawFit fit;
    double diffusion_coefficient = 0.0; ///< mean of e(t)/t over the fit window
    TimeSeries energy;                  ///< realization-averaged e(t)
};

/// Energy growth of the noisy single rotor (eps = 0) from m = 0, averaged over
/// `realizations` independent noise streams, fitted on [t_min, t_max].
/// A series that does not at least double across the window is rejected as
/// bounded rather than fitted.
inline ConstantSigmaResult constant_sigma_check(const ModelParams& params, const NoiseModel& noise, std::int64_t t_min, std::int64_t t_max,
                                                int realizations = 1)
{
    params.validate();
    require(params.epsilon == 0.0, "constant_sigma_check: epsilon must be 0");
    require(realizations >= 1, "constant_sigma_check: realizations must be >= 1");
    require(t_min >= 1 && t_min < t_max, "constant_sigma_check: need 1 <= t_min < t_max");

    TimeSeries mean;
    for (int r = 0; r < realizations; ++r) {
        NoiseModel nr = noise;
        if (realizations > 1) nr.seed = stream_id({noise.seed, static_cast<std::uint64_t>(r)});
        const auto run = evolve(momentum_eigenstate(params, 0), t_max, 1, nr);
        if (r == 0) {
            mean = run.energy;
        } else {
            for (std::size_t i = 0; i < mean.size(); ++i) mean.values[i] += run.energy.values[i];
        }
    }
    for (auto& v : mean.values) v /= realizations;
    mean.meta["realizations"] = std::to_string(realizations);

    std::vector<double> in_window;
    double rate = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        if (mean.times[i] < t_min || mean.times[i] > t_max) continue;
        in_window.push_back(mean.values[i]);
        rate += mean.values[i] / static_cast<double>(mean.times[i]);
    }
    const std::size_t tenth = std::max<std::size_t>(1, in_window.size() / 10);
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < tenth; ++i) {
        head += in_window[i];
        tail += in_window[in_window.size() - 1 - i];
    }
    if (!(tail >= 2.0 * head))
        throw FitRejected("constant_sigma_check: energy is flat across the window (late/early mean ratio " + std::to_string(tail / head) +
                          "); no diffusion to fit");

    ConstantSigmaResult out;
    out.fit = fit_power_law(mean, t_min, t_max);
    out.diffusion_coefficient = rate / static_cast<double>(in_window.size());
    out.energy = std::move(mean);
    return out;
}

} // namespace rotordyn
