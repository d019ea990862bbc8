#include <random>

#include <gtest/gtest.h>

#include "drcs/dynamics.hpp"
#include "drcs/errors.hpp"
#include "test_support.hpp"

using namespace drcs;
using drcs::testing::random_matrix;
using drcs::testing::random_spd;
using drcs::testing::random_system;
using drcs::testing::simulate;

namespace {

MomentPair moments(const VectorXd& mean, const MatrixXd& cov) { return {mean, cov}; }

}  // namespace

TEST(Concatenation, SingleStepStacking) {
    std::mt19937_64 gen(1);
    const MatrixXd A = random_matrix(gen, 3, 3), B = random_matrix(gen, 3, 2), D = random_matrix(gen, 3, 1);
    const auto spec = LinearSystemSpec::time_invariant(A, B, D, MatrixXd::Identity(1, 1), 1);
    const auto cs = build_concatenation(spec, moments(VectorXd::Zero(3), MatrixXd::Identity(3, 3)));
    EXPECT_TRUE(cs.A_cat.topRows(3).isIdentity());
    EXPECT_TRUE(cs.A_cat.bottomRows(3).isApprox(A));
    EXPECT_TRUE(cs.B_cat.topRows(3).isZero());
    EXPECT_TRUE(cs.B_cat.bottomRows(3).isApprox(B));
    EXPECT_TRUE(cs.D_cat.topRows(3).isZero());
    EXPECT_TRUE(cs.D_cat.bottomRows(3).isApprox(D));
}

TEST(Concatenation, TwoStepTimeInvariant) {
    std::mt19937_64 gen(2);
    const MatrixXd A = random_matrix(gen, 2, 2), B = random_matrix(gen, 2, 1);
    const auto spec = LinearSystemSpec::time_invariant(A, B, MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2), 2);
    const auto cs = build_concatenation(spec, moments(VectorXd::Zero(2), MatrixXd::Identity(2, 2)));
    EXPECT_TRUE(cs.A_cat.middleRows(4, 2).isApprox(A * A));
    EXPECT_TRUE(cs.B_cat.block(2, 0, 2, 1).isApprox(B));
    EXPECT_TRUE(cs.B_cat.block(2, 1, 2, 1).isZero());
    EXPECT_TRUE(cs.B_cat.block(4, 0, 2, 1).isApprox(A * B));
    EXPECT_TRUE(cs.B_cat.block(4, 1, 2, 1).isApprox(B));
}

TEST(Concatenation, ScalarSigmaY) {
    const MatrixXd one = MatrixXd::Identity(1, 1);
    const auto spec = LinearSystemSpec::time_invariant(one, one, one, one, 1);
    const auto cs = build_concatenation(spec, moments(VectorXd::Zero(1), one));
    // Y = [x0; x0 + w0]: Var = [[1, 1], [1, 2]].
    MatrixXd expected(2, 2);
    expected << 1, 1, 1, 2;
    EXPECT_LT((cs.sigma_y - expected).norm(), 1e-14);
    EXPECT_LT((cs.sigma_y_sqrt * cs.sigma_y_sqrt - expected).norm(), 1e-12);
}

TEST(Concatenation, SigmaYMatchesDenseProduct) {
    std::mt19937_64 gen(3);
    const auto spec = random_system(gen, 3, 2, 2, 4);
    const MatrixXd S0 = random_spd(gen, 3);
    const auto cs = build_concatenation(spec, moments(VectorXd::Zero(3), S0));
    // Oracle: explicit block-diagonal noise covariance and dense products.
    MatrixXd Sw = MatrixXd::Zero(8, 8);
    for (int k = 0; k < 4; ++k) {
        Sw.block(2 * k, 2 * k, 2, 2) = spec.noise_cov;
    }
    const MatrixXd expected = cs.A_cat * S0 * cs.A_cat.transpose() + cs.D_cat * Sw * cs.D_cat.transpose();
    EXPECT_LT((cs.sigma_y - expected).norm(), 1e-12 * expected.norm());
}

TEST(Concatenation, RejectsBadShapes) {
    std::mt19937_64 gen(4);
    auto spec = random_system(gen, 2, 1, 1, 3);
    spec.B[1] = MatrixXd::Zero(3, 1);
    try {
        build_concatenation(spec, moments(VectorXd::Zero(2), MatrixXd::Identity(2, 2)));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        ASSERT_TRUE(e.step().has_value());
        EXPECT_EQ(*e.step(), 1);
    }
    auto ok = random_system(gen, 2, 1, 1, 3);
    EXPECT_THROW(build_concatenation(ok, moments(VectorXd::Zero(3), MatrixXd::Identity(2, 2))), DimensionError);
    EXPECT_THROW(build_concatenation(ok, moments(VectorXd::Zero(2), -MatrixXd::Identity(2, 2))), NotPsdError);
}

TEST(PropagateMean, ZeroAndFreeResponse) {
    std::mt19937_64 gen(5);
    const auto spec = random_system(gen, 2, 1, 1, 3);
    const auto cs = build_concatenation(spec, moments(VectorXd::Zero(2), MatrixXd::Identity(2, 2)));
    EXPECT_TRUE(propagate_mean(cs, VectorXd::Zero(2), VectorXd::Zero(3)).isZero());
    const VectorXd mu0 = random_matrix(gen, 2, 1);
    EXPECT_LT((propagate_mean(cs, mu0, VectorXd::Zero(3)) - cs.A_cat * mu0).norm(), 1e-14);
}

TEST(PropagateMean, MatchesStepwiseRecursion) {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto spec = random_system(gen, 3, 2, 2, 3);
        const VectorXd mu0 = random_matrix(gen, 3, 1), V = random_matrix(gen, 6, 1);
        const auto cs = build_concatenation(spec, moments(mu0, MatrixXd::Identity(3, 3)));
        const VectorXd X = simulate(spec, mu0, V, VectorXd::Zero(6));
        EXPECT_LT((propagate_mean(cs, mu0, V) - X).norm(), 1e-12 * (1.0 + X.norm()));
    }
}

TEST(PropagateCovariance, TrivialCases) {
    std::mt19937_64 gen(7);
    const auto spec = random_system(gen, 2, 1, 2, 2);
    const auto cs = build_concatenation(spec, moments(VectorXd::Zero(2), random_spd(gen, 2)));
    EXPECT_LT((propagate_covariance(cs, MatrixXd::Zero(2, 6)) - cs.sigma_y).norm(), 1e-13);

    auto quiet = spec;
    quiet.noise_cov.setZero();
    const auto zero = build_concatenation(quiet, moments(VectorXd::Zero(2), MatrixXd::Zero(2, 2)));
    EXPECT_TRUE(propagate_covariance(zero, random_matrix(gen, 2, 6)).isZero());
}

TEST(PropagateCovariance, MatchesMonteCarlo) {
    std::mt19937_64 gen(8);
    const auto spec = random_system(gen, 2, 1, 2, 2);
    const MatrixXd S0 = random_spd(gen, 2);
    const VectorXd mu0 = random_matrix(gen, 2, 1);
    const auto cs = build_concatenation(spec, moments(mu0, S0));
    const MatrixXd K = random_matrix(gen, 2, 6, 0.5);
    const MatrixXd closed = propagate_covariance(cs, K);

    // Oracle: step-wise rollouts with U = K Y.
    const int trials = 100000;
    const Eigen::LLT<MatrixXd> l0(S0), lw(spec.noise_cov);
    std::normal_distribution<double> nd;
    const int dim = 6;
    MatrixXd samples(dim, trials);
    for (int t = 0; t < trials; ++t) {
        VectorXd z0(2), W(4);
        for (int i = 0; i < 2; ++i) z0(i) = nd(gen);
        for (int i = 0; i < 4; ++i) W(i) = nd(gen);
        const VectorXd x0 = mu0 + l0.matrixL() * z0;
        for (int k = 0; k < 2; ++k) W.segment(2 * k, 2) = lw.matrixL() * VectorXd(W.segment(2 * k, 2));
        const VectorXd Y = simulate(spec, x0 - mu0, VectorXd::Zero(2), W);
        samples.col(t) = simulate(spec, x0, K * Y, W);
    }
    const VectorXd mean = samples.rowwise().mean();
    const MatrixXd centered = samples.colwise() - mean;
    const MatrixXd emp = centered * centered.transpose() / (trials - 1);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            const double se = std::sqrt((closed(i, i) * closed(j, j) + closed(i, j) * closed(i, j)) / trials);
            EXPECT_LE(std::abs(emp(i, j) - closed(i, j)), 5.0 * se + 1e-12) << i << "," << j;
        }
    }
}

TEST(PsdSqrt, KnownAndReconstruction) {
    EXPECT_TRUE(psd_sqrt(MatrixXd::Identity(3, 3)).isApprox(MatrixXd::Identity(3, 3)));
    const MatrixXd D = VectorXd((VectorXd(2) << 4.0, 9.0).finished()).asDiagonal();
    const MatrixXd S = psd_sqrt(D);
    EXPECT_NEAR(S(0, 0), 2.0, 1e-14);
    EXPECT_NEAR(S(1, 1), 3.0, 1e-14);
    EXPECT_NEAR(S(0, 1), 0.0, 1e-14);

    std::mt19937_64 gen(9);
    for (int t = 0; t < 10; ++t) {
        const MatrixXd G = random_matrix(gen, 5, 5);
        const MatrixXd M = G.transpose() * G;
        const MatrixXd R = psd_sqrt(M);
        EXPECT_LT((R * R - M).norm() / M.norm(), 1e-8);
        EXPECT_LT((R - R.transpose()).norm(), 1e-12);
    }
    EXPECT_THROW(psd_sqrt(-MatrixXd::Identity(2, 2)), NotPsdError);
}

TEST(PsdPseudoInverse, RankDeficient) {
    std::mt19937_64 gen(10);
    const MatrixXd G = random_matrix(gen, 4, 2);
    const MatrixXd M = G * G.transpose();
    const MatrixXd P = psd_pseudo_inverse(M);
    EXPECT_LT((M * P * M - M).norm(), 1e-10 * M.norm());
    EXPECT_LT((P * M * P - P).norm(), 1e-10 * P.norm());
}
