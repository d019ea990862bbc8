#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "drcs/dynamics.hpp"
#include "drcs/steering_program.hpp"

namespace drcs::testing {

inline MatrixXd random_matrix(std::mt19937_64& gen, int rows, int cols, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    MatrixXd M(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            M(i, j) = nd(gen);
        }
    }
    return M;
}

inline MatrixXd random_spd(std::mt19937_64& gen, int n, double ridge = 0.1) {
    const MatrixXd G = random_matrix(gen, n, n);
    return G * G.transpose() / n + ridge * MatrixXd::Identity(n, n);
}

/// Time-varying random system with n states, m inputs, r noise channels.
inline LinearSystemSpec random_system(std::mt19937_64& gen, int n, int m, int r, int N) {
    LinearSystemSpec s;
    s.horizon = N;
    for (int k = 0; k < N; ++k) {
        s.A.push_back(MatrixXd::Identity(n, n) + random_matrix(gen, n, n, 0.3));
        s.B.push_back(random_matrix(gen, n, m));
        s.D.push_back(random_matrix(gen, n, r, 0.2));
    }
    s.noise_cov = random_spd(gen, r);
    return s;
}

/// Planar double integrator, shortened horizon and start close to the corridor.
inline SteeringProblem small_double_integrator(int N = 6, double budget = 0.1) {
    const double dt = 0.2;
    MatrixXd A = MatrixXd::Identity(4, 4);
    A.topRightCorner(2, 2) = dt * MatrixXd::Identity(2, 2);
    MatrixXd B(4, 2);
    B << dt * dt * MatrixXd::Identity(2, 2), dt * MatrixXd::Identity(2, 2);
    SteeringProblem p;
    p.system = LinearSystemSpec::time_invariant(A, B, 1e-3 * MatrixXd::Identity(4, 4), MatrixXd::Identity(4, 4), N);
    p.initial.mean = (VectorXd(4) << -2.0, 0.3, 0.0, 0.0).finished();
    p.initial.cov = VectorXd((VectorXd(4) << 0.01, 0.01, 0.001, 0.001).finished()).asDiagonal();
    p.terminal.mean = VectorXd::Zero(4);
    p.terminal.cov = 0.5 * p.initial.cov;
    p.Q.assign(N, MatrixXd(VectorXd((VectorXd(4) << 10.0, 10.0, 1.0, 1.0).finished()).asDiagonal()));
    p.R.assign(N, 10.0 * MatrixXd::Identity(2, 2));
    p.halfspaces = {{(VectorXd(4) << 0.2, -1.0, 0.0, 0.0).finished(), 0.2},
                    {(VectorXd(4) << 0.2, 1.0, 0.0, 0.0).finished(), 0.2}};
    p.risk_budget = budget;
    return p;
}

/// Step-wise simulation of x_{k+1} = A_k x_k + B_k u_k + D_k w_k, stacked.
inline VectorXd simulate(const LinearSystemSpec& s, const VectorXd& x0, const VectorXd& U, const VectorXd& W) {
    const int n = s.state_dim();
    const int m = s.input_dim();
    const int r = s.noise_dim();
    VectorXd X((s.horizon + 1) * n);
    X.head(n) = x0;
    for (int k = 0; k < s.horizon; ++k) {
        const auto i = static_cast<std::size_t>(k);
        X.segment((k + 1) * n, n) = s.A[i] * X.segment(k * n, n) + s.B[i] * U.segment(k * m, m) +
                                    s.D[i] * W.segment(k * r, r);
    }
    return X;
}

}  // namespace drcs::testing
