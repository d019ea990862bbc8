#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "drcs/errors.hpp"
#include "drcs/steering_program.hpp"
#include "problem_config.hpp"
#include "test_support.hpp"

using namespace drcs;
using drcs::testing::random_matrix;
using drcs::testing::random_spd;
using drcs::testing::random_system;
using drcs::testing::simulate;
using drcs::testing::small_double_integrator;

namespace {

// Lower-stage optimum for the double-integrator preset at the uniform
// allocation, computed by tests/oracles/lower_stage_cvxpy.py (cvxpy + Clarabel).
constexpr double kDoubleIntegratorOracle = 287862.2400840244;

SteeringProblem scalar_problem() {
    const MatrixXd one = MatrixXd::Identity(1, 1);
    SteeringProblem p;
    p.system = LinearSystemSpec::time_invariant(one, one, one, one, 1);
    p.initial = {VectorXd::Zero(1), one};
    p.terminal = {VectorXd::Zero(1), 100.0 * 2.0 * one};
    p.Q = {MatrixXd::Zero(1, 1)};
    p.R = {one};
    return p;
}

}  // namespace

TEST(Assemble, StructuralCounts) {
    SteeringProblem p = scalar_problem();
    const auto empty = assemble(p, uniform_allocation(p.risk_budget, 0, 1));
    EXPECT_EQ(empty.program.count_cones(ConeKind::soc), 0);
    EXPECT_EQ(empty.program.count_cones(ConeKind::psd), 1);
    EXPECT_EQ(empty.program.num_equalities(), 1);

    const SteeringProblem di = app::make_preset("double_integrator").to_problem();
    const auto full = assemble(di, uniform_allocation(di.risk_budget, 2, 15));
    EXPECT_EQ(full.program.count_cones(ConeKind::soc), 30);
    EXPECT_EQ(full.tightening_rows, 30);
    EXPECT_EQ(full.program.num_equalities(), 4);
}

TEST(Assemble, ObjectiveAtOrigin) {
    const SteeringProblem di = app::make_preset("double_integrator").to_problem();
    const auto ap = assemble(di, uniform_allocation(di.risk_budget, 2, 15));
    // Oracle: free-response mean cost plus tr(Qbar Sigma_Y), with Qbar built here.
    const int n = 4, N = 15;
    MatrixXd Qbar = MatrixXd::Zero((N + 1) * n, (N + 1) * n);
    for (int k = 0; k < N; ++k) {
        Qbar.block(k * n, k * n, n, n) = di.Q[static_cast<std::size_t>(k)];
    }
    const VectorXd free = ap.cs.A_cat * di.initial.mean;
    const double expected = free.dot(Qbar * free) + (Qbar * ap.cs.sigma_y).trace();
    const double got = ap.program.objective(VectorXd::Zero(ap.program.num_variables()));
    EXPECT_NEAR(got, expected, 1e-9 * expected);
    EXPECT_NEAR(evaluate_cost(di, VectorXd::Zero(30), MatrixXd::Zero(30, 64)), expected, 1e-9 * expected);
}

TEST(EvaluateCost, ControlOnlyAndCovarianceOnly) {
    std::mt19937_64 gen(21);
    SteeringProblem p;
    p.system = random_system(gen, 2, 1, 2, 3);
    p.initial = {VectorXd::Zero(2), random_spd(gen, 2)};
    p.terminal = {VectorXd::Zero(2), MatrixXd::Identity(2, 2)};
    p.Q.assign(3, MatrixXd::Zero(2, 2));
    p.R.assign(3, 2.0 * MatrixXd::Identity(1, 1));
    const auto cs = build_concatenation(p.system, p.initial);
    const VectorXd V = random_matrix(gen, 3, 1);
    const MatrixXd K = random_matrix(gen, 3, 8, 0.3);
    const double expected = 2.0 * V.squaredNorm() + 2.0 * (K * cs.sigma_y * K.transpose()).trace();
    EXPECT_NEAR(evaluate_cost(p, V, K), expected, 1e-10 * expected);

    p.Q.assign(3, random_spd(gen, 2));
    MatrixXd Qbar = MatrixXd::Zero(8, 8);
    for (int k = 0; k < 3; ++k) Qbar.block(2 * k, 2 * k, 2, 2) = p.Q[0];
    EXPECT_NEAR(evaluate_cost(p, VectorXd::Zero(3), MatrixXd::Zero(3, 8)), (Qbar * cs.sigma_y).trace(), 1e-10);
}

TEST(EvaluateCost, MatchesMonteCarloAverage) {
    std::mt19937_64 gen(22);
    SteeringProblem p;
    p.system = random_system(gen, 2, 1, 2, 3);
    p.initial = {random_matrix(gen, 2, 1), random_spd(gen, 2)};
    p.terminal = {VectorXd::Zero(2), MatrixXd::Identity(2, 2)};
    p.Q.assign(3, random_spd(gen, 2));
    p.R.assign(3, MatrixXd::Identity(1, 1));
    const VectorXd V = random_matrix(gen, 3, 1);
    const MatrixXd K = random_matrix(gen, 3, 8, 0.3);
    const double expected = evaluate_cost(p, V, K);

    // Oracle: average of the realized quadratic cost over step-wise rollouts.
    const Eigen::LLT<MatrixXd> l0(p.initial.cov), lw(p.system.noise_cov);
    std::normal_distribution<double> nd;
    const int trials = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int t = 0; t < trials; ++t) {
        VectorXd z(2), W(6);
        for (int i = 0; i < 2; ++i) z(i) = nd(gen);
        for (int k = 0; k < 3; ++k) {
            VectorXd w(2);
            for (int i = 0; i < 2; ++i) w(i) = nd(gen);
            W.segment(2 * k, 2) = lw.matrixL() * w;
        }
        const VectorXd x0 = p.initial.mean + l0.matrixL() * z;
        const VectorXd Y = simulate(p.system, x0 - p.initial.mean, VectorXd::Zero(3), W);
        const VectorXd U = V + K * Y;
        const VectorXd X = simulate(p.system, x0, U, W);
        double c = U.squaredNorm();
        for (int k = 0; k < 3; ++k) c += X.segment(2 * k, 2).dot(p.Q[0] * X.segment(2 * k, 2));
        sum += c;
        sum2 += c * c;
    }
    const double mean = sum / trials;
    const double se = std::sqrt((sum2 / trials - mean * mean) / trials);
    EXPECT_LE(std::abs(mean - expected), 5.0 * se);
}

TEST(SolveLowerStage, ScalarOriginIsOptimal) {
    const SteeringProblem p = scalar_problem();
    const auto sol = solve_lower_stage(p, uniform_allocation(p.risk_budget, 0, 1));
    EXPECT_EQ(sol.status, SolverStatus::optimal);
    EXPECT_LT(sol.V.norm(), 1e-6);
    EXPECT_LT(sol.K.norm(), 1e-6);
    EXPECT_NEAR(sol.cost, 0.0, 1e-6);
}

TEST(SolveLowerStage, FreeResponseHasNoMeanCost) {
    std::mt19937_64 gen(23);
    SteeringProblem p;
    p.system = LinearSystemSpec::time_invariant(MatrixXd::Identity(2, 2) + random_matrix(gen, 2, 2, 0.2),
                                                random_matrix(gen, 2, 1), 0.1 * MatrixXd::Identity(2, 2),
                                                MatrixXd::Identity(2, 2), 3);
    p.initial = {random_matrix(gen, 2, 1), 0.1 * MatrixXd::Identity(2, 2)};
    const auto cs = build_concatenation(p.system, p.initial);
    p.terminal = {cs.step(cs.A_cat * p.initial.mean, 3), 10.0 * MatrixXd::Identity(2, 2)};
    p.Q.assign(3, MatrixXd::Zero(2, 2));
    p.R.assign(3, MatrixXd::Identity(1, 1));
    const auto sol = solve_lower_stage(p, uniform_allocation(p.risk_budget, 0, 3));
    EXPECT_LT(sol.breakdown.mean, 1e-8);
    EXPECT_LT(sol.V.norm(), 1e-5);
}

TEST(SolveLowerStage, DoubleIntegratorMatchesCrossSolver) {
    const SteeringProblem di = app::make_preset("double_integrator").to_problem();
    const auto alloc = uniform_allocation(di.risk_budget, 2, 15);
    const auto sol = solve_lower_stage(di, alloc);
    ASSERT_EQ(sol.status, SolverStatus::optimal);
    EXPECT_NEAR(sol.cost, kDoubleIntegratorOracle, 1e-3 * kDoubleIntegratorOracle);
    EXPECT_NEAR(sol.cost, evaluate_cost(di, sol.V, sol.K), 1e-9 * sol.cost);

    const auto cs = build_concatenation(di.system, di.initial);
    EXPECT_LT((cs.step(sol.mean_traj, 15) - di.terminal.mean).norm(), 1e-6);
    const MatrixXd terminal_cov = sol.state_cov.bottomRightCorner(4, 4);
    EXPECT_GE(min_eigenvalue(di.terminal.cov - terminal_cov), -1e-7);
    EXPECT_LE((sol.true_risks - alloc.grid()).maxCoeff(), 1e-6);
}

TEST(SolveLowerStage, CausalFeedbackIsBlockLowerTriangular) {
    SteeringProblem p = small_double_integrator(4);
    p.causal_feedback = true;
    const auto sol = solve_lower_stage(p, uniform_allocation(p.risk_budget, 2, 4));
    ASSERT_EQ(sol.status, SolverStatus::optimal);
    for (int t = 0; t < 4; ++t) {
        const int first = (t + 1) * 4;
        EXPECT_LT(sol.K.block(2 * t, first, 2, 20 - first).norm(), 1e-6) << t;
    }
    p.causal_feedback = false;
    const auto free = solve_lower_stage(p, uniform_allocation(p.risk_budget, 2, 4));
    EXPECT_LE(free.cost, sol.cost * (1.0 + 1e-7));
}

TEST(SolveLowerStage, GaussianModeIsCheaperAndDrSolutionFeasibleForIt) {
    SteeringProblem p = small_double_integrator(6);
    const auto alloc = uniform_allocation(p.risk_budget, 2, 6);
    const auto dr = solve_lower_stage(p, alloc);
    p.mode = RiskMode::gaussian;
    const auto gauss = solve_lower_stage(p, alloc);
    EXPECT_LE(gauss.cost, dr.cost * (1.0 + 1e-8));
    const auto cs = build_concatenation(p.system, p.initial);
    for (int i = 0; i < 2; ++i) {
        for (int k = 1; k <= 6; ++k) {
            const HalfSpace& hs = p.halfspaces[static_cast<std::size_t>(i)];
            const double slack = hs.offset - hs.normal.dot(cs.step(dr.mean_traj, k));
            EXPECT_GE(slack - tightening_offset(hs, cs, dr.K, k, alloc.at(i, k), RiskMode::gaussian), -1e-7);
        }
    }
}

TEST(SolveLowerStage, InfeasibleReportsDiagnostic) {
    SteeringProblem p = small_double_integrator(6);
    p.halfspaces[0].offset = -0.5;  // excludes the terminal mean
    try {
        solve_lower_stage(p, uniform_allocation(p.risk_budget, 2, 6));
        FAIL() << "expected InfeasibleError";
    } catch (const InfeasibleError& e) {
        EXPECT_EQ(e.diagnostic().constraint, 0);
        EXPECT_GT(e.diagnostic().required_offset, e.diagnostic().available_slack);
    }
}

TEST(SteeringProblem, ValidateRejectsBadInput) {
    SteeringProblem p = small_double_integrator(3);
    p.R[1] = MatrixXd::Zero(2, 2);
    EXPECT_THROW(p.validate(), Error);
    p = small_double_integrator(3);
    p.risk_budget = 0.7;
    EXPECT_THROW(p.validate(), DomainError);
    p = small_double_integrator(3);
    p.Q.pop_back();
    EXPECT_THROW(p.validate(), DimensionError);
    p = small_double_integrator(3);
    EXPECT_THROW(solve_lower_stage(p, uniform_allocation(0.05, 2, 3)), DomainError);
}
