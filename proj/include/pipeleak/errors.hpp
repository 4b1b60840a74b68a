#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pipeleak {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Physical parameters produced a meaningless result (e.g. non-positive density).
class ParameterDomainError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of a function (e.g. x outside [0, length]).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration. `path` names the offending field, e.g. "/pipeline/length".
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& message)
        : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// An iterative method failed to converge.
class NumericalError : public Error {
public:
    NumericalError(const std::string& message, std::vector<double> history)
        : Error(message), history_(std::move(history)) {}

    /// Residual (or update) norm per iteration.
    const std::vector<double>& history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

/// Newton iteration of the transient or steady solver did not converge.
class SolverError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// The solver produced (or the scenario requires) a non-physical state.
class InfeasibleStateError : public Error {
public:
    InfeasibleStateError(const std::string& message, std::size_t node)
        : Error(message), node_(node) {}

    std::size_t node() const noexcept { return node_; }

private:
    std::size_t node_;
};

}  // namespace pipeleak
