#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hardproj {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or registration input (empty layer list, bad partition, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// API misuse such as replaying a consumed tape.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, root-finder failure, out-of-range evaluation.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

/// A Cholesky pivot fell below tolerance. Carries the pivot index and, for
/// batched solves, the offending batch instance.
class RankDeficiencyError : public NumericalError {
public:
    static constexpr std::size_t no_instance = static_cast<std::size_t>(-1);

    RankDeficiencyError(std::size_t pivot, double value, std::size_t instance = no_instance)
        : NumericalError(describe(pivot, value, instance)), pivot_(pivot), value_(value), instance_(instance) {}

    std::size_t pivot() const noexcept { return pivot_; }
    double pivot_value() const noexcept { return value_; }
    std::size_t instance() const noexcept { return instance_; }
    bool has_instance() const noexcept { return instance_ != no_instance; }

    RankDeficiencyError at_instance(std::size_t instance) const { return {pivot_, value_, instance}; }

private:
    static std::string describe(std::size_t pivot, double value, std::size_t instance) {
        std::string msg = "rank-deficient system: non-positive pivot " + std::to_string(value) + " at index " +
                          std::to_string(pivot);
        if (instance != no_instance) msg += " (batch instance " + std::to_string(instance) + ")";
        return msg;
    }

    std::size_t pivot_;
    double value_;
    std::size_t instance_;
};

}  // namespace hardproj
