#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opbench {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration supplied by the caller (CLI exit code 1).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Incompatible shapes, grids or channel counts.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Problems with input data: missing files, malformed containers (CLI exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

/// Container decoding failures. The kind distinguishes the failure modes.
class FormatError : public DataError {
public:
    enum class Kind { BadMagic, VersionMismatch, Truncated, Malformed };

    FormatError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Non-finite values, blow-ups and singular systems (CLI exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Time integration produced a non-finite state.
class BlowupError : public NumericError {
public:
    BlowupError(std::size_t step, const std::string& what)
        : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// A linear system is singular or numerically indistinguishable from singular.
class SingularSystemError : public NumericError {
public:
    SingularSystemError(double condition_estimate, const std::string& what)
        : NumericError(what), condition_estimate_(condition_estimate) {}

    double condition_estimate() const noexcept { return condition_estimate_; }

private:
    double condition_estimate_;
};

}  // namespace opbench
