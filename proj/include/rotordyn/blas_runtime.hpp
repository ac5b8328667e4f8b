#pragma once

#include <cstdlib>
#include <cstring>

#include <unistd.h>

extern "C" char* openblas_get_corename(void);

namespace rotordyn {

/// OpenBLAS 0.3.20 does not recognise some newer Xeon models and falls back to
/// its Prescott (SSE3) kernels, which makes dense eigensolves 3-5x slower.
/// The core type can only be forced through the environment before the library
/// loads, so re-exec once with OPENBLAS_CORETYPE set. No-op when the variable
/// is already set, when detection succeeded, or when ROTORDYN_NO_BLAS_REEXEC is set.
inline void ensure_blas_kernel(char** argv)
{
    if (std::getenv("OPENBLAS_CORETYPE") || std::getenv("ROTORDYN_NO_BLAS_REEXEC")) return;
    const char* core = openblas_get_corename();
    if (!core || std::strcmp(core, "Prescott") != 0) return;
    __builtin_cpu_init();
    const char* pick = nullptr;
    if (__builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512bw") && __builtin_cpu_supports("avx512dq") &&
        __builtin_cpu_supports("avx512vl"))
        pick = "SkylakeX";
    else if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        pick = "Haswell";
    if (!pick) return;
    ::setenv("OPENBLAS_CORETYPE", pick, 1);
    ::execv("/proc/self/exe", argv);
    // exec failed: carry on with the slow kernels
}

} // namespace rotordyn
