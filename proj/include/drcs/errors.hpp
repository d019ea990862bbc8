#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace drcs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix or vector shapes that do not fit together.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what, std::optional<int> step = std::nullopt)
        : Error(step ? what + " (step " + std::to_string(*step) + ")" : what), step_(step) {}

    /// Offending time step, when the mismatch is tied to one.
    [[nodiscard]] std::optional<int> step() const { return step_; }

private:
    std::optional<int> step_;
};

/// Argument outside the domain of a function (probabilities, quantiles).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Matrix expected to be symmetric positive semidefinite is not.
class NotPsdError : public Error {
public:
    NotPsdError(const std::string& what, double min_eigenvalue)
        : Error(what + " (min eigenvalue " + std::to_string(min_eigenvalue) + ")"),
          min_eigenvalue_(min_eigenvalue) {}

    [[nodiscard]] double min_eigenvalue() const { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

/// Mean trajectory sits outside a half-space, so no finite tightening fits.
class InfeasibleMeanError : public Error {
public:
    InfeasibleMeanError(const std::string& what, double slack) : Error(what), slack_(slack) {}

    [[nodiscard]] double slack() const { return slack_; }

private:
    double slack_;
};

/// Where a risk-constrained program breaks: the constraint whose required
/// back-off exceeds the available slack by the largest margin.
struct InfeasibilityDiagnostic {
    int constraint = -1;  ///< half-space (or cone row) index, 0-based
    int step = -1;        ///< time step in [1, N]
    double required_offset = 0.0;
    double available_slack = 0.0;
    std::string detail;
};

class InfeasibleError : public Error {
public:
    explicit InfeasibleError(InfeasibilityDiagnostic diag)
        : Error("steering program infeasible: " + diag.detail), diag_(std::move(diag)) {}

    [[nodiscard]] const InfeasibilityDiagnostic& diagnostic() const { return diag_; }

private:
    InfeasibilityDiagnostic diag_;
};

/// Interior-point solver stopped without meeting the accepted tolerances.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double primal_residual, double dual_residual, double gap)
        : Error(what + " (pres " + std::to_string(primal_residual) + ", dres " +
                std::to_string(dual_residual) + ", gap " + std::to_string(gap) + ")"),
          primal_residual_(primal_residual),
          dual_residual_(dual_residual),
          gap_(gap) {}

    [[nodiscard]] double primal_residual() const { return primal_residual_; }
    [[nodiscard]] double dual_residual() const { return dual_residual_; }
    [[nodiscard]] double gap() const { return gap_; }

private:
    double primal_residual_;
    double dual_residual_;
    double gap_;
};

/// Configuration text that does not describe a valid problem.
class ParseError : public Error {
public:
    ParseError(const std::string& field_path, const std::string& what)
        : Error(field_path + ": " + what), field_path_(field_path) {}

    [[nodiscard]] const std::string& field_path() const { return field_path_; }

private:
    std::string field_path_;
};

}  // namespace drcs
