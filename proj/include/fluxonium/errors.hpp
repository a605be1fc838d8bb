#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fluxonium {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid physical parameter. `fields()` names every offending field.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what, std::vector<std::string> fields = {})
        : Error(what), fields_(std::move(fields)) {}

    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    std::vector<std::string> fields_;
};

/// Malformed, inconsistent or insufficient input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Bad run configuration (CLI, JSON config, unknown keys).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A truncation or optimizer failed to converge. Carries the last two estimates
/// when they exist so callers can judge how far off the result is.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> previous = {},
                     std::vector<double> last = {})
        : Error(what), previous_(std::move(previous)), last_(std::move(last)) {}

    const std::vector<double>& previous_estimate() const noexcept { return previous_; }
    const std::vector<double>& last_estimate() const noexcept { return last_; }

private:
    std::vector<double> previous_;
    std::vector<double> last_;
};

}  // namespace fluxonium
