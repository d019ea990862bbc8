/**
 * @file policy_rows.hpp
 * @brief Decision-variable layout of the steering program and the affine
 *        row builders shared by every constraint family.
 *
 * The feedback gain enters through L = K Sigma_Y^{1/2}, so the closed-loop
 * square-root factor (I + Bcat K) Sigma_Y^{1/2} = F + Bcat L is affine in the
 * decision variables. L is stored column-major.
 */
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "drcs/conic_program.hpp"
#include "drcs/dynamics.hpp"

namespace drcs {

struct DecisionLayout {
    int v_offset = 0;
    int l_offset = 0;
    int input_rows = 0;  ///< Nm
    int state_cols = 0;  ///< (N+1)n

    [[nodiscard]] int v(int i) const { return v_offset + i; }
    [[nodiscard]] int l(int row, int col) const { return l_offset + col * input_rows + row; }
};

/// constant + scale * c'(Acat mu_0 + Bcat V), with c a stacked-state vector.
AffineExpr mean_projection(const ConcatenatedSystem& cs, const VectorXd& mu0, const DecisionLayout& layout,
                           const VectorXd& c, double scale, double constant);

/// scale * (F c + L'(Bcat' c)), the entries of (F + Bcat L)' c.
std::vector<AffineExpr> deviation_rows(const ConcatenatedSystem& cs, const DecisionLayout& layout,
                                       const VectorXd& c, double scale);

/// E_k' a as a stacked-state vector.
VectorXd lift_to_step(const ConcatenatedSystem& cs, const VectorXd& a, int k);

}  // namespace drcs
