#pragma once

#include <stdexcept>
#include <string>

namespace aptest {

/// Invalid configuration or domain-invariant violation. Carries the offending
/// field path when one is known (e.g. "/scenarios/0/design/burn_in").
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what, std::string path = {})
        : std::invalid_argument(path.empty() ? what : path + ": " + what),
          path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A value that is incompatible with the outcome family (e.g. a binary outcome of 0.3).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure (quadrature non-convergence, non-finite intermediate).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace aptest
