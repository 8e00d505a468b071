#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace damseep {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs violating a documented precondition (elevations, bounds, counts).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Geometry that cannot be built, e.g. an intervention outside the domain.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Two interventions claim the same area.
class ConflictError : public Error {
public:
    using Error::Error;
};

class MeshError : public Error {
public:
    using Error::Error;
};

/// Degenerate element handed to the element kernels.
class DegenerateElementError : public Error {
public:
    using Error::Error;
};

/// Iterative linear solver gave up. Carries the residual history.
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::vector<double> history)
        : Error(what), residual_history_(std::move(history)) {}
    const std::vector<double>& residual_history() const noexcept { return residual_history_; }

private:
    std::vector<double> residual_history_;
};

/// An operation that needs a converged solution was handed an unconverged one.
class NotConvergedError : public Error {
public:
    using Error::Error;
};

/// Query point outside the meshed domain.
class OutOfDomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace damseep
