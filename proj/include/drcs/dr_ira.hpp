/**
 * @file dr_ira.hpp
 * @brief Iterative risk allocation around the lower-stage steering program.
 *
 * Each iteration solves the lower stage at the current allocation, marks
 * cells whose true risk meets the allocated risk as active, pulls inactive
 * cells toward their true risk and hands the freed budget to the active ones.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcs/risk.hpp"
#include "drcs/steering_program.hpp"

namespace drcs {

struct IraConfig {
    double rho = 0.7;
    std::optional<double> cost_tol;  ///< default 1e-4 * max(1, |J_1|)
    double tol_active = 1e-3;
    int max_iterations = 30;

    void validate() const;
};

struct ActivityPartition {
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> active;
    int active_count = 0;
};

/// Cell (i, k) is active iff delta - delta_bar <= tol_active * delta. Cells
/// already at the risk floor are frozen and count as inactive.
ActivityPartition classify(const RiskAllocation& alloc, const MatrixXd& true_risks, double tol_active);

/// Inactive cells move to rho delta + (1 - rho) delta_bar, floored.
RiskAllocation tighten_inactive(const RiskAllocation& alloc, const MatrixXd& true_risks,
                                const ActivityPartition& part, double rho);

/// Adds (budget - sum) / N_active to every active cell. Throws std::logic_error
/// when there is no active cell.
RiskAllocation redistribute(const RiskAllocation& alloc, const ActivityPartition& part);

struct IraRecord {
    int iteration = 0;
    MatrixXd allocation;  ///< allocation solved at this iteration
    MatrixXd true_risks;
    double cost = 0.0;         ///< best cost known to be feasible for this allocation
    double solved_cost = 0.0;  ///< cost of this iteration's own solve
    bool kept_incumbent = false;
    int active = 0;
    double residual = 0.0;  ///< budget freed by tightening (0 when the loop stopped here)
};

struct IraTrace {
    std::vector<IraRecord> records;
};

struct IraResult {
    ControllerSolution solution;
    RiskAllocation allocation;  ///< allocation the returned solution was certified against
    IraTrace trace;
    std::string stop_reason;
    bool warning = false;
    std::string warning_text;
};

/// Runs the allocation loop from the uniform allocation. Initial
/// infeasibility propagates as InfeasibleError.
IraResult ira_solve(const SteeringProblem& problem, const IraConfig& cfg = {}, const SolverOptions& options = {});

}  // namespace drcs
