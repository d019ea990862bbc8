/**
 * @file steering_program.hpp
 * @brief The lower-stage covariance steering program for a fixed risk allocation.
 *
 * Policy U = V + K Y with Y = Acat (x_0 - mu_0) + Dcat W. For fixed risks the
 * problem is convex in (V, K): quadratic cost, terminal mean equality,
 * terminal covariance LMI and one tightened second-order-cone row per
 * (constraint, step). The program is built over (V, L) with L = K F,
 * F = Sigma_Y^{1/2}, and K is recovered as L F^+.
 */
#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "drcs/cone_constraints.hpp"
#include "drcs/conic_program.hpp"
#include "drcs/conic_solver.hpp"
#include "drcs/dynamics.hpp"
#include "drcs/errors.hpp"
#include "drcs/policy_rows.hpp"
#include "drcs/risk.hpp"

namespace drcs {

struct SteeringProblem {
    LinearSystemSpec system;
    MomentPair initial;
    MomentPair terminal;
    std::vector<MatrixXd> Q;  ///< n x n per step k = 0..N-1, PSD
    std::vector<MatrixXd> R;  ///< m x m per step, PD
    std::vector<HalfSpace> halfspaces;
    std::optional<SecondOrderConeSet> cone;  ///< replaces the half-spaces when set
    double risk_budget = 0.1;
    RiskMode mode = RiskMode::dr;
    bool causal_feedback = false;  ///< restrict K to block-lower-triangular

    /// Throws DimensionError / DomainError / NotPsdError.
    void validate() const;

    /// Rows of the risk grid: one per half-space, or one per step for a cone.
    [[nodiscard]] int allocation_rows() const;
    [[nodiscard]] bool has_cone() const { return cone.has_value(); }
};

/// blkdiag(Q_0, ..., Q_{N-1}, 0): the terminal state carries no running penalty.
MatrixXd stacked_state_penalty(const SteeringProblem& problem);
/// blkdiag(R_0, ..., R_{N-1}).
MatrixXd stacked_input_penalty(const SteeringProblem& problem);

struct AssembledProgram {
    ConicProgram program;
    ConcatenatedSystem cs;
    DecisionLayout layout;
    std::optional<ConeRowBlock> cone_rows;
    int tightening_rows = 0;  ///< half-space rows emitted
};

/// Builds the program for the allocation (grid M x N, or 1 x N for a cone).
AssembledProgram assemble(const SteeringProblem& problem, const RiskAllocation& alloc);
AssembledProgram assemble(const SteeringProblem& problem, const RiskAllocation& alloc, const ConcatenatedSystem& cs);

struct CostBreakdown {
    double mean = 0.0;        ///< Xbar'Qbar Xbar + V'Rbar V
    double covariance = 0.0;  ///< tr(Qbar Sigma_X + Rbar K Sigma_Y K')
    [[nodiscard]] double total() const { return mean + covariance; }
};

CostBreakdown cost_breakdown(const SteeringProblem& problem, const ConcatenatedSystem& cs, const VectorXd& V,
                             const MatrixXd& K);

/// Expected quadratic cost of the policy (V, K).
double evaluate_cost(const SteeringProblem& problem, const VectorXd& V, const MatrixXd& K);

struct ControllerSolution {
    VectorXd V;
    MatrixXd K;
    double cost = 0.0;
    CostBreakdown breakdown;
    VectorXd mean_traj;  ///< Xbar, (N+1)n
    MatrixXd state_cov;  ///< Sigma_X
    MatrixXd true_risks;  ///< same shape as the allocation grid
    RiskAllocation allocation;
    SolverStatus status = SolverStatus::numerical_error;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
};

/// True-risk grid of a policy under the problem's constraint geometry.
MatrixXd evaluate_true_risks(const SteeringProblem& problem, const ConcatenatedSystem& cs, const VectorXd& mean_traj,
                             const MatrixXd& K, const RiskAllocation& alloc);

/// Solves the lower stage. Throws InfeasibleError with a diagnostic when the
/// program has no feasible point, SolverError when the solver fails.
ControllerSolution solve_lower_stage(const SteeringProblem& problem, const RiskAllocation& alloc,
                                     const SolverOptions& options = {});
ControllerSolution solve_lower_stage(const SteeringProblem& problem, const RiskAllocation& alloc,
                                     const ConcatenatedSystem& cs, const SolverOptions& options = {});

/// Tightest constraint at the minimum-norm feedforward reaching mu_f, with
/// open-loop covariance: the (i, k) whose required back-off exceeds the
/// available slack by the most.
InfeasibilityDiagnostic diagnose_infeasibility(const SteeringProblem& problem, const RiskAllocation& alloc,
                                               const ConcatenatedSystem& cs);

}  // namespace drcs
