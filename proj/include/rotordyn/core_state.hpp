#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rotordyn/errors.hpp"

namespace rotordyn {

using cplx = std::complex<double>;

/// Couplings of the infinite-range kicked rotor and the momentum cutoff.
///
/// The momentum lattice is m = -M..M; array slot i holds m = i - M.
struct ModelParams {
    double K = 0.0;       ///< kick strength
    double epsilon = 0.0; ///< interaction strength
    double kbar = 1.0;    ///< effective Planck constant
    int M = 1;            ///< truncation half-width

    [[nodiscard]] int size() const { return 2 * M + 1; }
    [[nodiscard]] int slot(int m) const { return m + M; }
    [[nodiscard]] int momentum(int slot) const { return slot - M; }

    void validate() const
    {
        require(std::isfinite(K) && K >= 0.0, "K must be finite and >= 0");
        require(std::isfinite(epsilon), "epsilon must be finite");
        require(std::isfinite(kbar) && kbar > 0.0, "kbar must be > 0");
        require(M >= 1, "M must be >= 1");
    }
};

/// Mean-field amplitudes beta_m on the truncated momentum lattice.
class RotorState {
public:
    RotorState(const ModelParams& params, std::vector<cplx> beta) : params_(params), beta_(std::move(beta))
    {
        params_.validate();
        require(static_cast<int>(beta_.size()) == params_.size(), "amplitude vector must have 2M+1 entries");
    }

    [[nodiscard]] const ModelParams& params() const { return params_; }
    [[nodiscard]] int M() const { return params_.M; }
    [[nodiscard]] int size() const { return params_.size(); }

    [[nodiscard]] std::span<const cplx> amplitudes() const { return beta_; }
    [[nodiscard]] std::span<cplx> amplitudes() { return beta_; }
    [[nodiscard]] const std::vector<cplx>& vector() const { return beta_; }

    /// Amplitude at momentum index m (not the array slot).
    [[nodiscard]] cplx at(int m) const
    {
        require(m >= -params_.M && m <= params_.M, "momentum index outside [-M, M]");
        return beta_[static_cast<std::size_t>(params_.slot(m))];
    }
    [[nodiscard]] cplx& at(int m)
    {
        require(m >= -params_.M && m <= params_.M, "momentum index outside [-M, M]");
        return beta_[static_cast<std::size_t>(params_.slot(m))];
    }

    [[nodiscard]] double norm_squared() const
    {
        double s = 0.0;
        for (const auto& b : beta_) s += std::norm(b);
        return s;
    }

    void normalize()
    {
        const double n = std::sqrt(norm_squared());
        require(n > 0.0, "cannot normalize the zero state");
        for (auto& b : beta_) b /= n;
    }

    /// Largest weight on the two truncation edges m = +-M.
    [[nodiscard]] double edge_occupation() const { return std::max(std::norm(beta_.front()), std::norm(beta_.back())); }

private:
    ModelParams params_;
    std::vector<cplx> beta_;
};

/// beta_{m0} = 1, everything else 0.
inline RotorState momentum_eigenstate(const ModelParams& params, int m0)
{
    params.validate();
    if (m0 < -params.M || m0 > params.M) throw ValidationError("momentum_eigenstate: |m0| exceeds M");
    std::vector<cplx> beta(static_cast<std::size_t>(params.size()), cplx{0.0, 0.0});
    beta[static_cast<std::size_t>(params.slot(m0))] = 1.0;
    return {params, std::move(beta)};
}

/// beta_m = exp(-i phi_m) / sqrt(2M+1), with phases given slot by slot.
inline RotorState uniform_phase_state(const ModelParams& params, std::span<const double> phases)
{
    params.validate();
    require(static_cast<int>(phases.size()) == params.size(), "uniform_phase_state: need 2M+1 phases");
    const double amp = 1.0 / std::sqrt(static_cast<double>(params.size()));
    std::vector<cplx> beta(phases.size());
    for (std::size_t i = 0; i < phases.size(); ++i) beta[i] = std::polar(amp, -phases[i]);
    return {params, std::move(beta)};
}

/// Unkicked energy per rotor, (kbar^2/2) sum_m m^2 |beta_m|^2.
inline double energy(const RotorState& state)
{
    const int M = state.M();
    const auto beta = state.amplitudes();
    double s = 0.0;
    for (int i = 0; i < state.size(); ++i) {
        const double m = i - M;
        s += m * m * std::norm(beta[static_cast<std::size_t>(i)]);
    }
    const double kbar = state.params().kbar;
    return 0.5 * kbar * kbar * s;
}

enum class Boundary {
    open,     ///< pairs (m, m+1) inside the window only
    periodic, ///< also the wrap pair (M, -M) of the momentum ring
};

/// F = sum_m conj(beta_m) beta_{m+1}.
inline cplx order_parameter(std::span<const cplx> beta, Boundary boundary = Boundary::open)
{
    cplx s{0.0, 0.0};
    const std::size_t n = beta.size();
    for (std::size_t i = 0; i + 1 < n; ++i) s += std::conj(beta[i]) * beta[i + 1];
    if (boundary == Boundary::periodic && n > 1) s += std::conj(beta[n - 1]) * beta[0];
    return s;
}

inline cplx order_parameter(const RotorState& state, Boundary boundary = Boundary::open)
{
    return order_parameter(state.amplitudes(), boundary);
}

/// Energy of the uniform (infinite-temperature) mixture on the truncated lattice.
inline double infinite_temperature_energy(const ModelParams& params)
{
    params.validate();
    const double M = params.M;
    const double sum_m2 = M * M * M / 3.0 + M * M / 2.0 + M / 6.0;
    return params.kbar * params.kbar / (2.0 * M + 1.0) * sum_m2;
}

/// Stroboscopic record of one observable. Provenance travels in `meta`.
template <class T>
struct Series {
    std::vector<std::int64_t> times;
    std::vector<T> values;
    std::string label;
    std::map<std::string, std::string> meta;

    void push_back(std::int64_t t, T value)
    {
        require(times.empty() || t > times.back(), "series times must be strictly increasing");
        times.push_back(t);
        values.push_back(std::move(value));
    }

    [[nodiscard]] std::size_t size() const { return times.size(); }
    [[nodiscard]] bool empty() const { return times.empty(); }
};

using TimeSeries = Series<double>;
using ComplexSeries = Series<cplx>;

/// Model parameters as provenance metadata.
/// Shortest text that reads back to the same double.
inline std::string format_g17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::map<std::string, std::string> describe(const ModelParams& params)
{
    return {{"K", format_g17(params.K)}, {"epsilon", format_g17(params.epsilon)}, {"kbar", format_g17(params.kbar)}, {"M", std::to_string(params.M)}};
}

} // namespace rotordyn
