#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>

#include <fftw3.h>

#include "rotordyn/errors.hpp"

namespace rotordyn {

/// Unnormalized 1-D complex DFT of a fixed length.
///
/// Plans are created once per (length, direction) under a global lock, since
/// the FFTW planner is not thread-safe. Execution through the new-array
/// interface is, so one plan serves every thread and every buffer.
class Dft {
public:
    enum class Sign { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

    static const Dft& get(int n, Sign sign)
    {
        static std::mutex mutex;
        static std::map<std::pair<int, int>, std::unique_ptr<Dft>> cache;
        std::lock_guard lock(mutex);
        auto& slot = cache[{n, static_cast<int>(sign)}];
        if (!slot) slot.reset(new Dft(n, sign));
        return *slot;
    }

    /// out_k = sum_j in_j exp(sign * 2 pi i j k / n). The plan is out-of-place,
    /// so `in` and `out` must not alias.
    void execute(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const
    {
        require(static_cast<int>(in.size()) == n_ && static_cast<int>(out.size()) == n_, "Dft: length mismatch");
        require(in.data() != out.data(), "Dft: in-place execution is not supported");
        // The plan preserves its input; FFTW just lacks a const overload.
        auto* src = reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data()));
        fftw_execute_dft(plan_, src, reinterpret_cast<fftw_complex*>(out.data()));
    }

    [[nodiscard]] int size() const { return n_; }

    Dft(const Dft&) = delete;
    Dft& operator=(const Dft&) = delete;
    ~Dft() { fftw_destroy_plan(plan_); }

private:
    Dft(int n, Sign sign) : n_(n)
    {
        require(n >= 1, "Dft: length must be positive");
        auto* a = fftw_alloc_complex(static_cast<std::size_t>(n));
        auto* b = fftw_alloc_complex(static_cast<std::size_t>(n));
        plan_ = fftw_plan_dft_1d(n, a, b, static_cast<int>(sign), FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_PRESERVE_INPUT);
        fftw_free(a);
        fftw_free(b);
        if (!plan_) throw NumericalError("Dft: FFTW planning failed");
    }

    int n_;
    fftw_plan plan_ = nullptr;
};

inline void dft_forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out)
{
    Dft::get(static_cast<int>(in.size()), Dft::Sign::forward).execute(in, out);
}

inline void dft_backward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out)
{
    Dft::get(static_cast<int>(in.size()), Dft::Sign::backward).execute(in, out);
}

} // namespace rotordyn
