#include "drcs/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "drcs/errors.hpp"

namespace drcs {

namespace {

constexpr double kPsdTol = 1e-10;

MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

LinearSystemSpec LinearSystemSpec::time_invariant(const MatrixXd& A, const MatrixXd& B,
                                                  const MatrixXd& D, const MatrixXd& noise_cov,
                                                  int horizon) {
    LinearSystemSpec spec;
    spec.horizon = horizon;
    spec.A.assign(static_cast<std::size_t>(std::max(horizon, 0)), A);
    spec.B.assign(static_cast<std::size_t>(std::max(horizon, 0)), B);
    spec.D.assign(static_cast<std::size_t>(std::max(horizon, 0)), D);
    spec.noise_cov = noise_cov;
    return spec;
}

void LinearSystemSpec::validate() const {
    if (horizon < 1) {
        throw DimensionError("horizon must be at least 1, got " + std::to_string(horizon));
    }
    const auto N = static_cast<std::size_t>(horizon);
    if (A.size() != N || B.size() != N || D.size() != N) {
        throw DimensionError("per-step matrix lists must have length N = " + std::to_string(horizon));
    }
    const Eigen::Index n = A.front().rows();
    const Eigen::Index m = B.front().cols();
    const Eigen::Index r = D.front().cols();
    if (n == 0) {
        throw DimensionError("state dimension is zero", 0);
    }
    for (int k = 0; k < horizon; ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (A[i].rows() != n || A[i].cols() != n) {
            throw DimensionError("A_k must be n x n", k);
        }
        if (B[i].rows() != n || B[i].cols() != m) {
            throw DimensionError("B_k must be n x m", k);
        }
        if (D[i].rows() != n || D[i].cols() != r) {
            throw DimensionError("D_k must be n x r", k);
        }
    }
    if (noise_cov.rows() != r || noise_cov.cols() != r) {
        throw DimensionError("noise covariance must be r x r");
    }
    require_psd(noise_cov, "noise covariance");
}

MatrixXd ConcatenatedSystem::selector(int k) const {
    MatrixXd E = MatrixXd::Zero(n, stacked_state_dim());
    E.middleCols(static_cast<Eigen::Index>(k) * n, n).setIdentity();
    return E;
}

ConcatenatedSystem build_concatenation(const LinearSystemSpec& spec, const MomentPair& init) {
    spec.validate();
    ConcatenatedSystem cs;
    cs.horizon = spec.horizon;
    cs.n = spec.state_dim();
    cs.m = spec.input_dim();
    cs.r = spec.noise_dim();
    const int N = cs.horizon;
    const int n = cs.n;
    const int m = cs.m;
    const int r = cs.r;

    if (init.mean.size() != n || init.cov.rows() != n || init.cov.cols() != n) {
        throw DimensionError("initial moments must have dimension n = " + std::to_string(n), 0);
    }
    require_psd(init.cov, "initial covariance");

    const Eigen::Index rows = static_cast<Eigen::Index>(N + 1) * n;
    cs.A_cat = MatrixXd::Zero(rows, n);
    cs.B_cat = MatrixXd::Zero(rows, static_cast<Eigen::Index>(N) * m);
    cs.D_cat = MatrixXd::Zero(rows, static_cast<Eigen::Index>(N) * r);
    cs.A_cat.topRows(n).setIdentity();
    // Block row k+1 = A_k * (block row k) plus the fresh input/noise column.
    for (int k = 0; k < N; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const Eigen::Index prev = static_cast<Eigen::Index>(k) * n;
        const Eigen::Index next = prev + n;
        cs.A_cat.middleRows(next, n) = spec.A[i] * cs.A_cat.middleRows(prev, n);
        cs.B_cat.middleRows(next, n) = spec.A[i] * cs.B_cat.middleRows(prev, n);
        cs.D_cat.middleRows(next, n) = spec.A[i] * cs.D_cat.middleRows(prev, n);
        cs.B_cat.block(next, static_cast<Eigen::Index>(k) * m, n, m) = spec.B[i];
        cs.D_cat.block(next, static_cast<Eigen::Index>(k) * r, n, r) = spec.D[i];
    }

    cs.noise_cov_stacked = MatrixXd::Zero(static_cast<Eigen::Index>(N) * r, static_cast<Eigen::Index>(N) * r);
    for (int k = 0; k < N; ++k) {
        cs.noise_cov_stacked.block(static_cast<Eigen::Index>(k) * r, static_cast<Eigen::Index>(k) * r, r, r) =
            spec.noise_cov;
    }
    cs.sigma_y = symmetrize(cs.A_cat * init.cov * cs.A_cat.transpose() +
                            cs.D_cat * cs.noise_cov_stacked * cs.D_cat.transpose());
    cs.sigma_y_sqrt = psd_sqrt(cs.sigma_y);
    return cs;
}

VectorXd propagate_mean(const ConcatenatedSystem& cs, const VectorXd& mu0, const VectorXd& V) {
    if (mu0.size() != cs.n) {
        throw DimensionError("initial mean has length " + std::to_string(mu0.size()) + ", expected " +
                             std::to_string(cs.n));
    }
    if (V.size() != cs.stacked_input_dim()) {
        throw DimensionError("feedforward V has length " + std::to_string(V.size()) + ", expected " +
                             std::to_string(cs.stacked_input_dim()));
    }
    return cs.A_cat * mu0 + cs.B_cat * V;
}

namespace {

void check_gain_shape(const ConcatenatedSystem& cs, const MatrixXd& K) {
    if (K.rows() != cs.stacked_input_dim() || K.cols() != cs.stacked_state_dim()) {
        throw DimensionError("feedback K is " + std::to_string(K.rows()) + "x" + std::to_string(K.cols()) +
                             ", expected " + std::to_string(cs.stacked_input_dim()) + "x" +
                             std::to_string(cs.stacked_state_dim()));
    }
}

}  // namespace

MatrixXd closed_loop_factor(const ConcatenatedSystem& cs, const MatrixXd& K) {
    check_gain_shape(cs, K);
    return cs.sigma_y_sqrt + cs.B_cat * (K * cs.sigma_y_sqrt);
}

MatrixXd propagate_covariance(const ConcatenatedSystem& cs, const MatrixXd& K) {
    const MatrixXd F = closed_loop_factor(cs, K);
    return symmetrize(F * F.transpose());
}

MatrixXd psd_sqrt(const MatrixXd& M) {
    if (M.rows() != M.cols()) {
        throw DimensionError("psd_sqrt needs a square matrix");
    }
    if (M.size() == 0) {
        return M;
    }
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > kPsdTol * scale) {
        throw NotPsdError("psd_sqrt: matrix is not symmetric", 0.0);
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(M));
    const VectorXd& w = eig.eigenvalues();
    if (w.minCoeff() < -kPsdTol * scale) {
        throw NotPsdError("psd_sqrt: matrix is not positive semidefinite", w.minCoeff());
    }
    const VectorXd root = w.cwiseMax(0.0).cwiseSqrt();
    const MatrixXd& U = eig.eigenvectors();
    return symmetrize(U * root.asDiagonal() * U.transpose());
}

MatrixXd psd_pseudo_inverse(const MatrixXd& M, double rel_cutoff) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(M));
    const VectorXd& w = eig.eigenvalues();
    const double cutoff = rel_cutoff * std::max(w.cwiseAbs().maxCoeff(), 0.0);
    VectorXd inv(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        inv(i) = w(i) > cutoff ? 1.0 / w(i) : 0.0;
    }
    const MatrixXd& U = eig.eigenvectors();
    return symmetrize(U * inv.asDiagonal() * U.transpose());
}

double min_eigenvalue(const MatrixXd& M) {
    if (M.size() == 0) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(M), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

void require_psd(const MatrixXd& M, const char* what, double tol) {
    if (M.rows() != M.cols()) {
        throw DimensionError(std::string(what) + " must be square");
    }
    const double scale = std::max(1.0, M.size() ? M.cwiseAbs().maxCoeff() : 0.0);
    if (M.size() && (M - M.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw NotPsdError(std::string(what) + " is not symmetric", 0.0);
    }
    const double lo = min_eigenvalue(M);
    if (lo < -tol) {
        throw NotPsdError(std::string(what) + " is not positive semidefinite", lo);
    }
}

}  // namespace drcs
