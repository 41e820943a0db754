#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace memorybeam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched vector or state dimensions. Carries the offending field name.
class DimensionError : public Error {
public:
    DimensionError(std::string field, std::size_t expected, std::size_t actual)
        : Error("dimension mismatch in '" + field + "': expected " + std::to_string(expected) +
                ", got " + std::to_string(actual)),
          field_(std::move(field)),
          expected_(expected),
          actual_(actual) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }
    [[nodiscard]] std::size_t expected() const noexcept { return expected_; }
    [[nodiscard]] std::size_t actual() const noexcept { return actual_; }

private:
    std::string field_;
    std::size_t expected_;
    std::size_t actual_;
};

/// An argument lies outside the mathematical domain of an operation
/// (negative time, nonpositive constant, incompatible initial datum, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Fixed-point iteration failed to reach its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> residuals)
        : Error(what), residuals_(std::move(residuals)) {}

    [[nodiscard]] const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
    std::vector<double> residuals_;
};

/// Invalid scenario configuration; `field()` names the dotted config key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

namespace detail {

inline void require_size(const std::string& field, std::size_t expected, std::size_t actual) {
    if (expected != actual) throw DimensionError(field, expected, actual);
}

}  // namespace detail

}  // namespace memorybeam
