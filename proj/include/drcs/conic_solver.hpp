/**
 * @file conic_solver.hpp
 * @brief Primal-dual interior-point method for ConicProgram.
 *
 * Mehrotra predictor-corrector with Nesterov-Todd scaling on nonnegative,
 * second-order and semidefinite cones. The normal equations
 * (P + G' W^{-1} W^{-T} G) are formed densely and factored by Cholesky;
 * second-order cone contributions are accumulated as a precomputed G'G plus
 * two rank-one terms per cone, and PSD contributions are restricted to the
 * rows of G that carry variables.
 */
#pragma once

#include <string>

#include <Eigen/Dense>

#include "drcs/conic_program.hpp"

namespace drcs {

struct SolverOptions {
    double feastol = 1e-8;   ///< requested primal/dual residual
    double abstol = 1e-8;    ///< requested absolute gap
    double reltol = 1e-8;    ///< requested relative gap
    double accept_tol = 1e-6;  ///< residuals/gap accepted when the requested ones stall
    int max_iterations = 100;
    double step_fraction = 0.99;
    bool verbose = false;
};

enum class SolverStatus { optimal, optimal_inaccurate, infeasible, max_iterations, numerical_error };

const char* to_string(SolverStatus status);

struct ConicSolution {
    SolverStatus status = SolverStatus::numerical_error;
    Eigen::VectorXd x;
    Eigen::VectorXd y;  ///< equality multipliers
    Eigen::VectorXd z;  ///< cone multipliers
    Eigen::VectorXd s;  ///< cone slacks
    int iterations = 0;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;

    [[nodiscard]] bool usable() const {
        return status == SolverStatus::optimal || status == SolverStatus::optimal_inaccurate;
    }
};

ConicSolution solve_conic(const ConicProgram& program, const SolverOptions& options = {});

}  // namespace drcs
