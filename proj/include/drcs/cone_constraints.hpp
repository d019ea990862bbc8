/**
 * @file cone_constraints.hpp
 * @brief Risk-constrained second-order-cone state sets {x : ||Ax + b|| <= c'x + d}.
 *
 * Each step k is replaced by a conservative set of convex rows: the cone
 * right-hand side is frozen at the mean (kappa_k = c' xbar_k + d), row i of
 * A gets a bound |a_i'x_k + b_i| <= f_{i,k} split into two one-sided risk
 * rows with side risks 1 - eps, and the bounds are coupled by
 * ||f_k|| <= kappa_k.
 */
#pragma once

#include <Eigen/Dense>

#include "drcs/conic_program.hpp"
#include "drcs/dynamics.hpp"
#include "drcs/policy_rows.hpp"
#include "drcs/risk.hpp"

namespace drcs {

/// {x : ||A x + b|| <= c'x + d}
struct SecondOrderConeSet {
    MatrixXd A;  ///< p x n
    VectorXd b;
    VectorXd c;
    double d = 0.0;

    [[nodiscard]] int rows() const { return static_cast<int>(A.rows()); }

    /// Throws DimensionError on inconsistent shapes or an all-zero row of A.
    void validate(int state_dim) const;
};

/// Row weights beta (sum 1) and per-row, per-step side probabilities.
struct ConeDecompositionParams {
    VectorXd beta;   ///< p
    MatrixXd eps1;   ///< p x N, column k-1
    MatrixXd eps2;   ///< p x N

    /// Throws DomainError unless eps1 + eps2 >= 2 - beta_i delta_k everywhere.
    void validate(const VectorXd& step_risks) const;
};

/// beta_i = 1/p and eps1 = eps2 = 1 - beta_i delta_k / 2.
ConeDecompositionParams default_params(const SecondOrderConeSet& cone, const VectorXd& step_risks);

/// Back-off multiplier of one side: sqrt(eps / (1 - eps)) (dr) or Phi^{-1}(eps)
/// (gaussian, with 1 - eps floored at kRiskFloor).
double side_coefficient(double eps, RiskMode mode);

struct ConeRowBlock {
    int f_offset = -1;  ///< first of the p*N bound variables f_{i,k}, index i + p(k-1)
    int soc_rows = 0;   ///< second-order cones added
};

/// Adds the f_{i,k} variables, both one-sided rows per (i, k), the coupling
/// ||f_k|| <= c'E_k(Acat mu_0 + Bcat V) + d per step, and f >= 0. Returns the
/// f offset and the number of second-order cones, N(2p + 1).
ConeRowBlock emit_cone_rows(const SecondOrderConeSet& cone, const ConeDecompositionParams& params,
                            const ConcatenatedSystem& cs, const VectorXd& mu0, const DecisionLayout& layout,
                            ConicProgram& program, const VectorXd& step_risks, RiskMode mode);

/// ||A x + b|| <= c'x + d (closed set).
bool cone_membership(const SecondOrderConeSet& cone, const VectorXd& x);

/// Mean row values psi_i = a_i'xbar_k + b_i, their standard deviations and
/// kappa_k at one step of a fixed solution.
struct ConeStepMoments {
    VectorXd psi;
    VectorXd stddev;
    double kappa = 0.0;
};

ConeStepMoments cone_step_moments(const SecondOrderConeSet& cone, const ConcatenatedSystem& cs,
                                  const VectorXd& mean_traj, const MatrixXd& factor, int k);

/// Whether some f satisfies all rows of one step at risk delta, i.e.
/// ||(|psi_i| + coeff_i stddev_i)_i|| <= kappa with default parameters.
bool cone_step_feasible(const ConeStepMoments& mom, double delta, RiskMode mode, double tol = 0.0);

/// Smallest delta in [kRiskFloor, allocated] keeping the step feasible at the
/// fixed moments, by bisection; the proxy for the true risk of a cone step.
double cone_true_risk(const ConeStepMoments& mom, double allocated, RiskMode mode);

}  // namespace drcs
