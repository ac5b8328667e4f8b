#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>

namespace rotordyn {

/// A violated precondition on user-supplied input (bad parameter, bad index,
/// malformed configuration). The CLI maps it to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical guard tripped at run time (unitarity lost, eigensolver
/// failure, fit rejected). The CLI maps it to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw ValidationError(message);
}

// Warnings go through a replaceable sink so tests can capture them.
using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink()
{
    static WarningSink sink = [](const std::string& msg) { std::cerr << "[W] " << msg << '\n'; };
    return sink;
}

inline void warn(const std::string& msg)
{
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    if (warning_sink()) warning_sink()(msg);
}

/// Swaps the warning sink for the lifetime of the guard.
class ScopedWarningSink {
public:
    explicit ScopedWarningSink(WarningSink sink) : previous_(std::move(warning_sink()))
    {
        warning_sink() = std::move(sink);
    }
    ~ScopedWarningSink() { warning_sink() = std::move(previous_); }
    ScopedWarningSink(const ScopedWarningSink&) = delete;
    ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

private:
    WarningSink previous_;
};

} // namespace rotordyn
