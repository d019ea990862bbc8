#include "drcs/dr_ira.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace drcs {

void IraConfig::validate() const {
    if (!(rho > 0.0 && rho < 1.0)) {
        throw DomainError("rho must lie in (0, 1), got " + std::to_string(rho));
    }
    if (cost_tol && !(*cost_tol > 0.0)) {
        throw DomainError("cost tolerance must be positive");
    }
    if (!(tol_active > 0.0)) {
        throw DomainError("activity tolerance must be positive");
    }
    if (max_iterations < 1) {
        throw DomainError("max iterations must be at least 1");
    }
}

namespace {

bool at_floor(double delta) { return delta <= kRiskFloor * (1.0 + 1e-9); }

}  // namespace

ActivityPartition classify(const RiskAllocation& alloc, const MatrixXd& true_risks, double tol_active) {
    const MatrixXd& grid = alloc.grid();
    if (true_risks.rows() != grid.rows() || true_risks.cols() != grid.cols()) {
        throw DimensionError("true-risk grid does not match the allocation");
    }
    ActivityPartition part;
    part.active.resize(grid.rows(), grid.cols());
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        for (Eigen::Index k = 0; k < grid.cols(); ++k) {
            const double d = grid(i, k);
            const bool on = !at_floor(d) && d - true_risks(i, k) <= tol_active * d;
            part.active(i, k) = on;
            part.active_count += on ? 1 : 0;
        }
    }
    return part;
}

RiskAllocation tighten_inactive(const RiskAllocation& alloc, const MatrixXd& true_risks,
                                const ActivityPartition& part, double rho) {
    RiskAllocation out = alloc;
    MatrixXd& grid = out.grid();
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        for (Eigen::Index k = 0; k < grid.cols(); ++k) {
            if (part.active(i, k) || at_floor(grid(i, k))) {
                continue;
            }
            grid(i, k) = std::max(kRiskFloor, rho * grid(i, k) + (1.0 - rho) * true_risks(i, k));
        }
    }
    return out;
}

RiskAllocation redistribute(const RiskAllocation& alloc, const ActivityPartition& part) {
    if (part.active_count == 0) {
        throw std::logic_error("redistribute called with no active constraint");
    }
    RiskAllocation out = alloc;
    const double share = (alloc.budget() - alloc.total()) / part.active_count;
    MatrixXd& grid = out.grid();
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        for (Eigen::Index k = 0; k < grid.cols(); ++k) {
            if (part.active(i, k)) {
                grid(i, k) += share;
            }
        }
    }
    return out;
}

IraResult ira_solve(const SteeringProblem& problem, const IraConfig& cfg, const SolverOptions& options) {
    cfg.validate();
    problem.validate();
    const ConcatenatedSystem cs = build_concatenation(problem.system, problem.initial);
    const int M = problem.allocation_rows();
    const int cells = M * problem.system.horizon;

    IraResult result;
    RiskAllocation alloc = uniform_allocation(problem.risk_budget, M, problem.system.horizon);
    ControllerSolution best = solve_lower_stage(problem, alloc, cs, options);
    const double tol = cfg.cost_tol.value_or(1e-4 * std::max(1.0, std::abs(best.cost)));
    double prev_cost = std::numeric_limits<double>::infinity();

    for (int it = 1;; ++it) {
        IraRecord rec;
        rec.iteration = it;
        rec.allocation = alloc.grid();
        if (it > 1) {
            ControllerSolution sol;
            try {
                sol = solve_lower_stage(problem, alloc, cs, options);
            } catch (const Error& e) {
                // The incumbent stays feasible for this allocation; stop with it.
                result.warning = true;
                result.warning_text = std::string("lower stage failed after reallocation: ") + e.what();
                result.stop_reason = "solver failure after reallocation";
                alloc = result.allocation;
                break;
            }
            rec.solved_cost = sol.cost;
            if (sol.cost < best.cost) {
                best = std::move(sol);
            } else {
                rec.kept_incumbent = true;
            }
        } else {
            rec.solved_cost = best.cost;
        }
        // Record the incumbent against the allocation it now satisfies.
        best.allocation = alloc;
        rec.cost = best.cost;
        rec.true_risks = best.true_risks;
        result.allocation = alloc;

        const ActivityPartition part = classify(alloc, best.true_risks, cfg.tol_active);
        rec.active = part.active_count;

        const bool converged = std::abs(rec.cost - prev_cost) <= tol;
        const bool degenerate = part.active_count == 0 || part.active_count == cells;
        if (converged || degenerate || it >= cfg.max_iterations) {
            result.stop_reason = converged ? "cost change below tolerance"
                                 : cells == 0 ? "no risk constraints"
                                 : part.active_count == 0 ? "no active constraint"
                                 : part.active_count == cells ? "all constraints active"
                                                              : "iteration limit";
            result.trace.records.push_back(rec);
            break;
        }
        prev_cost = rec.cost;
        const RiskAllocation tightened = tighten_inactive(alloc, best.true_risks, part, cfg.rho);
        rec.residual = tightened.budget() - tightened.total();
        alloc = redistribute(tightened, part);
        result.trace.records.push_back(rec);
    }
    result.solution = std::move(best);
    return result;
}

}  // namespace drcs
