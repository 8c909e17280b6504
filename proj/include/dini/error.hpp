#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dini {

/// Argument outside the domain where an operation is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Quadrature or fit could not reach the requested tolerance.
class AccuracyError : public std::runtime_error {
public:
    AccuracyError(const std::string& what, double achieved)
        : std::runtime_error(what + " (achieved error estimate " + std::to_string(achieved) + ")"),
          achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Coefficient matrix fails symmetry or uniform ellipticity.
class EllipticityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Krylov iteration hit max_iter. Carries the best iterate seen.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> best, double residual, int iterations)
        : std::runtime_error(what), best_(std::move(best)), residual_(residual), iterations_(iterations) {}
    const std::vector<double>& best_iterate() const noexcept { return best_; }
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    std::vector<double> best_;
    double residual_;
    int iterations_;
};

} // namespace dini
