/**
 * @file montecarlo.hpp
 * @brief Closed-loop rollouts of a steering controller under moment-matched noise.
 *
 * Laplacian draws are the Gaussian scale mixture mu + sqrt(E) L z with
 * E ~ Exp(1): same mean and covariance as the Gaussian family, heavier tails.
 * Trial t always draws from its own generator seeded by (seed, t), so results
 * do not depend on how trials are scheduled.
 */
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drcs/dynamics.hpp"
#include "drcs/steering_program.hpp"

namespace drcs {

enum class NoiseFamily { gaussian, laplacian };

const char* to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(const std::string& text);

struct NoiseModel {
    NoiseFamily family = NoiseFamily::gaussian;
    VectorXd mean;
    MatrixXd cov;
    std::uint64_t seed = 0;
};

/// Generator for trial `index` of a run seeded with `seed`.
std::mt19937_64 trial_generator(std::uint64_t seed, std::uint64_t index);

/// Moment-matched sampler over a fixed covariance factor.
class MomentSampler {
public:
    MomentSampler(NoiseFamily family, VectorXd mean, const MatrixXd& cov);

    VectorXd draw(std::mt19937_64& gen) const;
    [[nodiscard]] int dim() const { return static_cast<int>(mean_.size()); }

private:
    NoiseFamily family_;
    VectorXd mean_;
    MatrixXd root_;
};

/// `count` samples as columns, drawn from the model's seeded generator.
MatrixXd sample(const NoiseModel& model, int count);

struct TrialResult {
    MatrixXd states;  ///< n x (N+1)
    MatrixXd inputs;  ///< m x N
    double cost = 0.0;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> violations;  ///< allocation grid shape
    bool joint = false;
};

/// U = V + K Y with Y = Acat (x0 - mu0) + Dcat W, X = Acat x0 + Bcat U + Dcat W.
TrialResult rollout(const SteeringProblem& problem, const ConcatenatedSystem& cs, const ControllerSolution& sol,
                    const VectorXd& x0, const VectorXd& W);

struct MonteCarloConfig {
    NoiseFamily family = NoiseFamily::laplacian;
    int trials = 500;
    std::uint64_t seed = 1;
    bool keep_trajectories = false;
};

struct MonteCarloSummary {
    int trials = 0;
    int joint_violations = 0;
    double joint_rate = 0.0;
    std::pair<double, double> joint_interval;  ///< Wilson 95%
    MatrixXd cell_rates;  ///< allocation grid shape
    MatrixXd cell_counts;
    double mean_cost = 0.0;
    double cost_stderr = 0.0;
    VectorXd mean_state;  ///< stacked
    MatrixXd state_cov;   ///< stacked sample covariance
    std::vector<TrialResult> kept;  ///< filled when keep_trajectories is set
};

/// Wilson score interval at 95% for `hits` out of `n`.
std::pair<double, double> wilson_interval(int hits, int n);

/// Single-pass aggregation of trial results.
class MonteCarloAccumulator {
public:
    MonteCarloAccumulator(int rows, int steps, int stacked_dim);
    void add(const TrialResult& trial);
    [[nodiscard]] MonteCarloSummary summary() const;

private:
    int count_ = 0;
    int joint_ = 0;
    MatrixXd cells_;
    double cost_mean_ = 0.0;
    double cost_m2_ = 0.0;
    VectorXd mean_;
    MatrixXd m2_;
};

MonteCarloSummary estimate(const std::vector<TrialResult>& results);

/// Samples x0 from the initial moments and W from the noise covariance (zero
/// mean) in the configured family, and rolls the controller out.
MonteCarloSummary run_monte_carlo(const SteeringProblem& problem, const ConcatenatedSystem& cs,
                                  const ControllerSolution& sol, const MonteCarloConfig& cfg);

}  // namespace drcs
