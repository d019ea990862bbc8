#include "drcs/steering_program.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/QR>

namespace drcs {

void SteeringProblem::validate() const {
    system.validate();
    const int N = system.horizon;
    const int n = system.state_dim();
    const int m = system.input_dim();
    for (const auto* mp : {&initial, &terminal}) {
        const char* which = mp == &initial ? "initial" : "terminal";
        if (mp->mean.size() != n || mp->cov.rows() != n || mp->cov.cols() != n) {
            throw DimensionError(std::string(which) + " moments must have dimension n = " + std::to_string(n));
        }
        require_psd(mp->cov, which == std::string("initial") ? "initial covariance" : "terminal covariance");
    }
    if (Q.size() != static_cast<std::size_t>(N) || R.size() != static_cast<std::size_t>(N)) {
        throw DimensionError("Q and R need one block per step k = 0..N-1");
    }
    for (int k = 0; k < N; ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (Q[i].rows() != n || Q[i].cols() != n) {
            throw DimensionError("Q_k must be n x n", k);
        }
        if (R[i].rows() != m || R[i].cols() != m) {
            throw DimensionError("R_k must be m x m", k);
        }
        require_psd(Q[i], "state penalty Q_k");
        require_psd(R[i], "input penalty R_k");
        const double lo = min_eigenvalue(R[i]);
        if (lo <= 1e-10) {
            throw NotPsdError("input penalty R_" + std::to_string(k) + " must be positive definite", lo);
        }
    }
    if (cone && !halfspaces.empty()) {
        throw DomainError("constraint geometry is either half-spaces or one cone, not both");
    }
    for (std::size_t i = 0; i < halfspaces.size(); ++i) {
        if (halfspaces[i].normal.size() != n) {
            throw DimensionError("half-space " + std::to_string(i) + " normal must have length n");
        }
        if (halfspaces[i].normal.norm() == 0.0) {
            throw DomainError("half-space " + std::to_string(i) + " has a zero normal");
        }
    }
    if (cone) {
        cone->validate(n);
    }
    if (!(risk_budget > 0.0 && risk_budget <= 0.5)) {
        throw DomainError("risk budget must lie in (0, 0.5], got " + std::to_string(risk_budget));
    }
}

int SteeringProblem::allocation_rows() const { return cone ? 1 : static_cast<int>(halfspaces.size()); }

MatrixXd stacked_state_penalty(const SteeringProblem& problem) {
    const int N = problem.system.horizon;
    const int n = problem.system.state_dim();
    MatrixXd Qbar = MatrixXd::Zero(static_cast<Eigen::Index>(N + 1) * n, static_cast<Eigen::Index>(N + 1) * n);
    for (int k = 0; k < N; ++k) {
        Qbar.block(static_cast<Eigen::Index>(k) * n, static_cast<Eigen::Index>(k) * n, n, n) =
            problem.Q[static_cast<std::size_t>(k)];
    }
    return Qbar;
}

MatrixXd stacked_input_penalty(const SteeringProblem& problem) {
    const int N = problem.system.horizon;
    const int m = problem.system.input_dim();
    MatrixXd Rbar = MatrixXd::Zero(static_cast<Eigen::Index>(N) * m, static_cast<Eigen::Index>(N) * m);
    for (int k = 0; k < N; ++k) {
        Rbar.block(static_cast<Eigen::Index>(k) * m, static_cast<Eigen::Index>(k) * m, m, m) =
            problem.R[static_cast<std::size_t>(k)];
    }
    return Rbar;
}

namespace {

void check_allocation(const SteeringProblem& problem, const RiskAllocation& alloc) {
    if (alloc.steps() != problem.system.horizon || alloc.constraints() != problem.allocation_rows()) {
        throw DimensionError("risk allocation is " + std::to_string(alloc.constraints()) + "x" +
                             std::to_string(alloc.steps()) + ", expected " +
                             std::to_string(problem.allocation_rows()) + "x" +
                             std::to_string(problem.system.horizon));
    }
    if (std::abs(alloc.budget() - problem.risk_budget) > 1e-15) {
        throw DomainError("risk allocation budget differs from the problem budget");
    }
    alloc.validate();
}

VectorXd step_risks(const RiskAllocation& alloc) { return alloc.grid().row(0).transpose(); }

}  // namespace

AssembledProgram assemble(const SteeringProblem& problem, const RiskAllocation& alloc) {
    problem.validate();
    return assemble(problem, alloc, build_concatenation(problem.system, problem.initial));
}

AssembledProgram assemble(const SteeringProblem& problem, const RiskAllocation& alloc, const ConcatenatedSystem& cs) {
    check_allocation(problem, alloc);
    AssembledProgram out;
    out.cs = cs;
    ConicProgram& prog = out.program;
    const int N = cs.horizon;
    const int n = cs.n;
    const int Nm = cs.stacked_input_dim();
    const int cols = cs.stacked_state_dim();
    const VectorXd& mu0 = problem.initial.mean;
    const MatrixXd& F = cs.sigma_y_sqrt;

    DecisionLayout& lay = out.layout;
    lay.input_rows = Nm;
    lay.state_cols = cols;
    lay.v_offset = prog.add_variables(Nm, "V");
    lay.l_offset = prog.add_variables(Nm * cols, "L");

    // Cost: (Acat mu0 + Bcat V)'Qbar(.) + V'Rbar V + tr((F + Bcat L)'Qbar(F + Bcat L)) + tr(L'Rbar L).
    const MatrixXd Qbar = stacked_state_penalty(problem);
    const MatrixXd Rbar = stacked_input_penalty(problem);
    const MatrixXd QB = Qbar * cs.B_cat;
    const MatrixXd H = cs.B_cat.transpose() * QB + Rbar;
    const VectorXd free_mean = cs.A_cat * mu0;
    const VectorXd qV = 2.0 * QB.transpose() * free_mean;
    const MatrixXd qL = 2.0 * QB.transpose() * F;
    for (int j = 0; j < Nm; ++j) {
        for (int i = 0; i <= j; ++i) {
            prog.add_quadratic(lay.v(i), lay.v(j), 2.0 * H(i, j));
        }
        prog.add_linear(lay.v(j), qV(j));
    }
    for (int c = 0; c < cols; ++c) {
        for (int j = 0; j < Nm; ++j) {
            for (int i = 0; i <= j; ++i) {
                prog.add_quadratic(lay.l(i, c), lay.l(j, c), 2.0 * H(i, j));
            }
            prog.add_linear(lay.l(j, c), qL(j, c));
        }
    }
    prog.add_constant(free_mean.dot(Qbar * free_mean) + (Qbar * cs.sigma_y).trace());

    // Terminal mean.
    for (int a = 0; a < n; ++a) {
        const VectorXd e = lift_to_step(cs, VectorXd::Unit(n, a), N);
        prog.add_equality(mean_projection(cs, mu0, lay, e, 1.0, -problem.terminal.mean(a)),
                          "terminal mean " + std::to_string(a));
    }

    // Terminal covariance: [[Sigma_f, .], [(E_N(F + Bcat L))', I]] >= 0.
    {
        const int order = n + cols;
        MatrixXd constant = MatrixXd::Zero(order, order);
        constant.topLeftCorner(n, n) = problem.terminal.cov;
        constant.bottomRightCorner(cols, cols).setIdentity();
        const MatrixXd ENF = cs.step_rows(F, N);
        const MatrixXd ENB = cs.step_rows(cs.B_cat, N);
        constant.bottomLeftCorner(cols, n) = ENF.transpose();
        constant.topRightCorner(n, cols) = ENF;
        std::vector<PsdTerm> terms;
        for (int j = 0; j < cols; ++j) {
            for (int a = 0; a < n; ++a) {
                for (int l = 0; l < Nm; ++l) {
                    if (ENB(a, l) != 0.0) {
                        terms.push_back({n + j, a, lay.l(l, j), ENB(a, l)});
                    }
                }
            }
        }
        prog.add_psd(constant, terms, "terminal covariance");
    }

    if (problem.causal_feedback) {
        // K = L F^+ must vanish on y_j for j > t in block row t.
        const MatrixXd Finv = psd_pseudo_inverse(F);
        for (int r = 0; r < Nm; ++r) {
            const int t = r / cs.m;
            for (int c = (t + 1) * n; c < cols; ++c) {
                AffineExpr e;
                for (int l = 0; l < cols; ++l) {
                    e.add(lay.l(r, l), Finv(l, c));
                }
                prog.add_equality(e, "causal K(" + std::to_string(r) + "," + std::to_string(c) + ")");
            }
        }
    }

    if (problem.cone) {
        const VectorXd risks = step_risks(alloc);
        out.cone_rows = emit_cone_rows(*problem.cone, default_params(*problem.cone, risks), cs, mu0, lay, prog,
                                       risks, problem.mode);
    } else {
        for (std::size_t i = 0; i < problem.halfspaces.size(); ++i) {
            const HalfSpace& hs = problem.halfspaces[i];
            for (int k = 1; k <= N; ++k) {
                const double q = tightening_quantile(alloc.at(static_cast<int>(i), k), problem.mode);
                const VectorXd c = lift_to_step(cs, hs.normal, k);
                // b - a'E_k Xbar >= q ||(F + Bcat L)' E_k' a||
                std::vector<AffineExpr> rows{mean_projection(cs, mu0, lay, c, -1.0, hs.offset)};
                const auto dev = deviation_rows(cs, lay, c, q);
                rows.insert(rows.end(), dev.begin(), dev.end());
                prog.add_soc(rows, "half-space " + std::to_string(i) + ", step " + std::to_string(k));
                ++out.tightening_rows;
            }
        }
    }
    return out;
}

CostBreakdown cost_breakdown(const SteeringProblem& problem, const ConcatenatedSystem& cs, const VectorXd& V,
                             const MatrixXd& K) {
    const MatrixXd Qbar = stacked_state_penalty(problem);
    const MatrixXd Rbar = stacked_input_penalty(problem);
    const VectorXd mean = propagate_mean(cs, problem.initial.mean, V);
    const MatrixXd cov = propagate_covariance(cs, K);
    CostBreakdown out;
    out.mean = mean.dot(Qbar * mean) + V.dot(Rbar * V);
    out.covariance = (Qbar * cov).trace() + (Rbar * K * cs.sigma_y * K.transpose()).trace();
    return out;
}

double evaluate_cost(const SteeringProblem& problem, const VectorXd& V, const MatrixXd& K) {
    const ConcatenatedSystem cs = build_concatenation(problem.system, problem.initial);
    return cost_breakdown(problem, cs, V, K).total();
}

MatrixXd evaluate_true_risks(const SteeringProblem& problem, const ConcatenatedSystem& cs, const VectorXd& mean_traj,
                             const MatrixXd& K, const RiskAllocation& alloc) {
    const int N = cs.horizon;
    const MatrixXd factor = closed_loop_factor(cs, K);
    MatrixXd risks(problem.allocation_rows(), N);
    if (problem.cone) {
        for (int k = 1; k <= N; ++k) {
            const ConeStepMoments mom = cone_step_moments(*problem.cone, cs, mean_traj, factor, k);
            risks(0, k - 1) = cone_true_risk(mom, alloc.at(0, k), problem.mode);
        }
        return risks;
    }
    for (std::size_t i = 0; i < problem.halfspaces.size(); ++i) {
        const HalfSpace& hs = problem.halfspaces[i];
        for (int k = 1; k <= N; ++k) {
            double slack = hs.offset - hs.normal.dot(cs.step(mean_traj, k));
            // Solver-level round-off on an active row.
            if (slack < 0.0 && slack > -1e-7 * (1.0 + std::abs(hs.offset))) {
                slack = 0.0;
            }
            const double sd = constraint_stddev_from_factor(hs, cs, factor, k);
            risks(static_cast<Eigen::Index>(i), k - 1) = true_risk_from_slack(slack, sd, problem.mode);
        }
    }
    return risks;
}

ControllerSolution solve_lower_stage(const SteeringProblem& problem, const RiskAllocation& alloc,
                                     const SolverOptions& options) {
    problem.validate();
    return solve_lower_stage(problem, alloc, build_concatenation(problem.system, problem.initial), options);
}

ControllerSolution solve_lower_stage(const SteeringProblem& problem, const RiskAllocation& alloc,
                                     const ConcatenatedSystem& cs, const SolverOptions& options) {
    const AssembledProgram ap = assemble(problem, alloc, cs);
    const ConicSolution sol = solve_conic(ap.program, options);
    if (!sol.usable()) {
        if (sol.status == SolverStatus::infeasible) {
            throw InfeasibleError(diagnose_infeasibility(problem, alloc, cs));
        }
        throw SolverError(std::string("lower-stage solve ended with status ") + to_string(sol.status),
                          sol.primal_residual, sol.dual_residual, sol.gap);
    }

    const DecisionLayout& lay = ap.layout;
    ControllerSolution out;
    out.V = sol.x.segment(lay.v_offset, lay.input_rows);
    const Eigen::Map<const MatrixXd> L(sol.x.data() + lay.l_offset, lay.input_rows, lay.state_cols);
    out.K = L * psd_pseudo_inverse(cs.sigma_y_sqrt);
    out.breakdown = cost_breakdown(problem, cs, out.V, out.K);
    out.cost = out.breakdown.total();
    out.mean_traj = propagate_mean(cs, problem.initial.mean, out.V);
    out.state_cov = propagate_covariance(cs, out.K);
    out.allocation = alloc;
    out.true_risks = evaluate_true_risks(problem, cs, out.mean_traj, out.K, alloc);
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.primal_residual = sol.primal_residual;
    out.dual_residual = sol.dual_residual;
    out.gap = sol.gap;
    return out;
}

InfeasibilityDiagnostic diagnose_infeasibility(const SteeringProblem& problem, const RiskAllocation& alloc,
                                               const ConcatenatedSystem& cs) {
    InfeasibilityDiagnostic diag;
    const int N = cs.horizon;
    const MatrixXd ENB = cs.step_rows(cs.B_cat, N);
    const VectorXd target = problem.terminal.mean - cs.step(VectorXd(cs.A_cat * problem.initial.mean), N);
    const VectorXd V = ENB.completeOrthogonalDecomposition().solve(target);
    const double miss = (ENB * V - target).norm();
    if (miss > 1e-6 * (1.0 + target.norm())) {
        diag.step = N;
        diag.required_offset = target.norm();
        diag.available_slack = target.norm() - miss;
        diag.detail = "terminal mean is not reachable (residual " + std::to_string(miss) + ")";
        return diag;
    }
    const VectorXd mean = propagate_mean(cs, problem.initial.mean, V);
    const MatrixXd& factor = cs.sigma_y_sqrt;
    double worst = -std::numeric_limits<double>::infinity();
    if (problem.cone) {
        for (int k = 1; k <= N; ++k) {
            const ConeStepMoments mom = cone_step_moments(*problem.cone, cs, mean, factor, k);
            const double delta = alloc.at(0, k);
            const double eps = 1.0 - 0.5 * delta / static_cast<double>(mom.psi.size());
            const VectorXd f = mom.psi.cwiseAbs() + side_coefficient(eps, problem.mode) * mom.stddev;
            if (f.norm() - mom.kappa > worst) {
                worst = f.norm() - mom.kappa;
                diag.constraint = 0;
                diag.step = k;
                diag.required_offset = f.norm();
                diag.available_slack = mom.kappa;
            }
        }
    } else {
        for (std::size_t i = 0; i < problem.halfspaces.size(); ++i) {
            const HalfSpace& hs = problem.halfspaces[i];
            for (int k = 1; k <= N; ++k) {
                const double slack = hs.offset - hs.normal.dot(cs.step(mean, k));
                const double offset = tightening_quantile(alloc.at(static_cast<int>(i), k), problem.mode) *
                                      constraint_stddev_from_factor(hs, cs, factor, k);
                if (offset - slack > worst) {
                    worst = offset - slack;
                    diag.constraint = static_cast<int>(i);
                    diag.step = k;
                    diag.required_offset = offset;
                    diag.available_slack = slack;
                }
            }
        }
    }
    std::ostringstream os;
    if (diag.step < 0) {
        os << "no risk constraints; terminal covariance bound cannot be met";
    } else {
        os << (problem.cone ? "cone step " : "half-space ") << diag.constraint << " at step " << diag.step
           << " needs back-off " << diag.required_offset << " but the reference mean leaves " << diag.available_slack;
    }
    diag.detail = os.str();
    return diag;
}

}  // namespace drcs
