#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace hyperu {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

#define HYPERU_DEFINE_ERROR(Name)          \
    class Name : public Error              \
    {                                      \
    public:                                \
        using Error::Error;                \
    }

HYPERU_DEFINE_ERROR(DomainError);
HYPERU_DEFINE_ERROR(OverflowError);
HYPERU_DEFINE_ERROR(NoConvergence);
HYPERU_DEFINE_ERROR(NotPsd);
HYPERU_DEFINE_ERROR(EmptyPattern);
HYPERU_DEFINE_ERROR(InvalidPattern);
HYPERU_DEFINE_ERROR(ZeroTransformSum);
HYPERU_DEFINE_ERROR(WindowTooSmall);
HYPERU_DEFINE_ERROR(DegenerateScales);
HYPERU_DEFINE_ERROR(ZeroFrequency);
HYPERU_DEFINE_ERROR(Unmatchable);
HYPERU_DEFINE_ERROR(EmptyInput);
HYPERU_DEFINE_ERROR(ParseError);

#undef HYPERU_DEFINE_ERROR

// Warnings go through a replaceable sink so tests can capture them.
using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink()
{
    static WarningSink sink = [](const std::string& msg) { std::cerr << "[hyperu] warning: " << msg << '\n'; };
    return sink;
}

inline void warn(const std::string& msg)
{
    if (warning_sink())
        warning_sink()(msg);
}

/// Swaps the warning sink for the lifetime of the guard.
class ScopedWarningSink
{
public:
    explicit ScopedWarningSink(WarningSink sink) : m_previous(std::exchange(warning_sink(), std::move(sink))) {}
    ~ScopedWarningSink() { warning_sink() = std::move(m_previous); }
    ScopedWarningSink(const ScopedWarningSink&) = delete;
    ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

private:
    WarningSink m_previous;
};

} // namespace hyperu
