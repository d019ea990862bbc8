/**
 * @file dynamics.hpp
 * @brief Time-varying linear stochastic systems in stacked (horizon-long) form.
 *
 * x_{k+1} = A_k x_k + B_k u_k + D_k w_k, k = 0..N-1, with w_k zero-mean,
 * covariance Sigma_w, independent across steps. The stacked form is
 *   X = Acat x_0 + Bcat U + Dcat W,
 * with X = [x_0; ...; x_N], U = [u_0; ...; u_{N-1}], W = [w_0; ...; w_{N-1}].
 */
#pragma once

#include <vector>

#include <Eigen/Dense>

namespace drcs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Per-step system matrices and the disturbance covariance.
struct LinearSystemSpec {
    int horizon = 0;
    std::vector<MatrixXd> A;  ///< n x n, one per step
    std::vector<MatrixXd> B;  ///< n x m
    std::vector<MatrixXd> D;  ///< n x r
    MatrixXd noise_cov;       ///< r x r

    /// Replicates one (A, B, D) triple over the horizon.
    static LinearSystemSpec time_invariant(const MatrixXd& A, const MatrixXd& B, const MatrixXd& D,
                                           const MatrixXd& noise_cov, int horizon);

    [[nodiscard]] int state_dim() const { return A.empty() ? 0 : static_cast<int>(A.front().rows()); }
    [[nodiscard]] int input_dim() const { return B.empty() ? 0 : static_cast<int>(B.front().cols()); }
    [[nodiscard]] int noise_dim() const { return static_cast<int>(noise_cov.rows()); }

    /// Throws DimensionError (naming the step) or NotPsdError.
    void validate() const;
};

/// Mean and covariance of a random vector.
struct MomentPair {
    VectorXd mean;
    MatrixXd cov;
};

/// Stacked system matrices and the covariance of the feedback signal
/// Y = Acat (x_0 - mu_0) + Dcat W.
struct ConcatenatedSystem {
    int horizon = 0;
    int n = 0;
    int m = 0;
    int r = 0;
    MatrixXd A_cat;       ///< (N+1)n x n
    MatrixXd B_cat;       ///< (N+1)n x Nm
    MatrixXd D_cat;       ///< (N+1)n x Nr
    MatrixXd noise_cov_stacked;  ///< Nr x Nr, blockdiag(Sigma_w)
    MatrixXd sigma_y;     ///< (N+1)n x (N+1)n
    MatrixXd sigma_y_sqrt;  ///< symmetric PSD square root of sigma_y

    [[nodiscard]] int stacked_state_dim() const { return (horizon + 1) * n; }
    [[nodiscard]] int stacked_input_dim() const { return horizon * m; }

    /// E_k, the n x (N+1)n selector of x_k from X.
    [[nodiscard]] MatrixXd selector(int k) const;

    /// Rows of a stacked matrix belonging to step k (equivalent to E_k * M).
    [[nodiscard]] auto step_rows(const MatrixXd& stacked, int k) const {
        return stacked.middleRows(static_cast<Eigen::Index>(k) * n, n);
    }
    [[nodiscard]] VectorXd step(const VectorXd& stacked, int k) const {
        return stacked.segment(static_cast<Eigen::Index>(k) * n, n);
    }
};

/// Builds the stacked matrices and Sigma_Y = Acat Sigma_0 Acat' + Dcat Sigma_W Dcat'.
ConcatenatedSystem build_concatenation(const LinearSystemSpec& spec, const MomentPair& init);

/// Mean trajectory Xbar = Acat mu_0 + Bcat V.
VectorXd propagate_mean(const ConcatenatedSystem& cs, const VectorXd& mu0, const VectorXd& V);

/// State covariance Sigma_X = (I + Bcat K) Sigma_Y (I + Bcat K)'.
MatrixXd propagate_covariance(const ConcatenatedSystem& cs, const MatrixXd& K);

/// (I + Bcat K) Sigma_Y^{1/2}, the square-root factor of Sigma_X.
MatrixXd closed_loop_factor(const ConcatenatedSystem& cs, const MatrixXd& K);

/// Symmetric PSD square root by eigendecomposition. Symmetrizes first and
/// clamps eigenvalues in [-1e-10, 0) to zero; throws NotPsdError below that.
MatrixXd psd_sqrt(const MatrixXd& M);

/// Moore-Penrose inverse of a symmetric PSD matrix (relative cutoff).
MatrixXd psd_pseudo_inverse(const MatrixXd& M, double rel_cutoff = 1e-12);

/// Minimum eigenvalue of the symmetric part of M.
double min_eigenvalue(const MatrixXd& M);

/// Throws NotPsdError when M is not symmetric PSD within `tol`.
void require_psd(const MatrixXd& M, const char* what, double tol = 1e-10);

}  // namespace drcs
