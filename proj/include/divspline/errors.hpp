#pragma once

#include <stdexcept>
#include <string>

namespace divspline {

/// Invalid construction parameter (degree, element count, config value).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Query point outside the parametric range of a knot vector or mesh.
class DomainError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Operation applied to the wrong kind of object (e.g. a jump on a boundary facet).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Newton iteration failed to reach tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double reynolds, int iterations, double residual)
        : std::runtime_error(what), reynolds_(reynolds), iterations_(iterations), residual_(residual) {}

    double reynolds() const { return reynolds_; }
    int iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    double reynolds_;
    int iterations_;
    double residual_;
};

class TimeStepError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Diagnostics series requested from too little history.
class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace divspline
