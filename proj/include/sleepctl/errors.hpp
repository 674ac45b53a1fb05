#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sleepctl {

/// Argument outside the mathematical domain of an operation (negative watts,
/// non-positive service rate, P_e <= P_d where thresholds need P_e > P_d).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid or unparsable configuration. `line` is 0 when not tied to a line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// The exact solver refuses problems whose enumeration exceeds its budget.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative method hit its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, long iterations)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + " after " +
                             std::to_string(iterations) + " iterations)"),
          residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    double residual_;
    long iterations_;
};

/// A closed form was requested for a configuration it does not cover.
class UnsupportedConfiguration : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A policy broke its contract, e.g. switched off more than K cells.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace sleepctl
