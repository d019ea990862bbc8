#include "drcs/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drcs/cone_constraints.hpp"
#include "drcs/errors.hpp"

namespace drcs {

const char* to_string(NoiseFamily family) { return family == NoiseFamily::gaussian ? "gaussian" : "laplacian"; }

NoiseFamily noise_family_from_string(const std::string& text) {
    if (text == "gaussian") {
        return NoiseFamily::gaussian;
    }
    if (text == "laplacian") {
        return NoiseFamily::laplacian;
    }
    throw DomainError("unknown noise family '" + text + "' (expected gaussian or laplacian)");
}

std::mt19937_64 trial_generator(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

MomentSampler::MomentSampler(NoiseFamily family, VectorXd mean, const MatrixXd& cov)
    : family_(family), mean_(std::move(mean)) {
    if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) {
        throw DimensionError("sampler covariance must match the mean length");
    }
    root_ = psd_sqrt(cov);
}

VectorXd MomentSampler::draw(std::mt19937_64& gen) const {
    std::normal_distribution<double> gauss;
    VectorXd z(mean_.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z(i) = gauss(gen);
    }
    if (family_ == NoiseFamily::laplacian) {
        std::exponential_distribution<double> mix(1.0);
        z *= std::sqrt(mix(gen));
    }
    return mean_ + root_ * z;
}

MatrixXd sample(const NoiseModel& model, int count) {
    if (count < 1) {
        throw DomainError("sample count must be at least 1");
    }
    const MomentSampler sampler(model.family, model.mean, model.cov);
    std::mt19937_64 gen = trial_generator(model.seed, 0);
    MatrixXd out(model.mean.size(), count);
    for (int i = 0; i < count; ++i) {
        out.col(i) = sampler.draw(gen);
    }
    return out;
}

TrialResult rollout(const SteeringProblem& problem, const ConcatenatedSystem& cs, const ControllerSolution& sol,
                    const VectorXd& x0, const VectorXd& W) {
    if (x0.size() != cs.n || W.size() != static_cast<Eigen::Index>(cs.horizon) * cs.r) {
        throw DimensionError("rollout needs x0 of length n and W of length N r");
    }
    if (sol.V.size() != cs.stacked_input_dim() || sol.K.rows() != cs.stacked_input_dim() ||
        sol.K.cols() != cs.stacked_state_dim()) {
        throw DimensionError("controller does not match the system dimensions");
    }
    const VectorXd Y = cs.A_cat * (x0 - problem.initial.mean) + cs.D_cat * W;
    const VectorXd U = sol.V + sol.K * Y;
    const VectorXd X = cs.A_cat * x0 + cs.B_cat * U + cs.D_cat * W;

    const int N = cs.horizon;
    TrialResult out;
    out.states = Eigen::Map<const MatrixXd>(X.data(), cs.n, N + 1);
    out.inputs = Eigen::Map<const MatrixXd>(U.data(), cs.m, N);
    for (int k = 0; k < N; ++k) {
        const auto i = static_cast<std::size_t>(k);
        out.cost += out.states.col(k).dot(problem.Q[i] * out.states.col(k)) +
                    out.inputs.col(k).dot(problem.R[i] * out.inputs.col(k));
    }
    const int rows = problem.allocation_rows();
    out.violations.setConstant(rows, N, false);
    for (int k = 1; k <= N; ++k) {
        const VectorXd xk = out.states.col(k);
        if (problem.cone) {
            out.violations(0, k - 1) = !cone_membership(*problem.cone, xk);
        } else {
            for (int h = 0; h < rows; ++h) {
                const HalfSpace& hs = problem.halfspaces[static_cast<std::size_t>(h)];
                out.violations(h, k - 1) = hs.normal.dot(xk) > hs.offset;
            }
        }
    }
    out.joint = out.violations.any();
    return out;
}

std::pair<double, double> wilson_interval(int hits, int n) {
    if (n <= 0) {
        throw DomainError("Wilson interval needs at least one trial");
    }
    constexpr double z = 1.959963984540054;
    const double p = static_cast<double>(hits) / n;
    const double z2n = z * z / n;
    const double center = (p + 0.5 * z2n) / (1.0 + z2n);
    const double half = z / (1.0 + z2n) * std::sqrt(p * (1.0 - p) / n + 0.25 * z2n / n);
    const double lo = hits == 0 ? 0.0 : std::max(0.0, center - half);
    const double hi = hits == n ? 1.0 : std::min(1.0, center + half);
    return {lo, hi};
}

MonteCarloAccumulator::MonteCarloAccumulator(int rows, int steps, int stacked_dim)
    : cells_(MatrixXd::Zero(rows, steps)),
      mean_(VectorXd::Zero(stacked_dim)),
      m2_(MatrixXd::Zero(stacked_dim, stacked_dim)) {}

void MonteCarloAccumulator::add(const TrialResult& trial) {
    if (trial.violations.rows() != cells_.rows() || trial.violations.cols() != cells_.cols()) {
        throw DimensionError("trial violation grid does not match the accumulator");
    }
    ++count_;
    joint_ += trial.joint ? 1 : 0;
    cells_ += trial.violations.cast<double>().matrix();
    const double dc = trial.cost - cost_mean_;
    cost_mean_ += dc / count_;
    cost_m2_ += dc * (trial.cost - cost_mean_);
    const Eigen::Map<const VectorXd> x(trial.states.data(), trial.states.size());
    const VectorXd dx = x - mean_;
    mean_ += dx / count_;
    m2_.noalias() += dx * (x - mean_).transpose();
}

MonteCarloSummary MonteCarloAccumulator::summary() const {
    if (count_ == 0) {
        throw DomainError("Monte Carlo summary needs at least one trial");
    }
    MonteCarloSummary s;
    s.trials = count_;
    s.joint_violations = joint_;
    s.joint_rate = static_cast<double>(joint_) / count_;
    s.joint_interval = wilson_interval(joint_, count_);
    s.cell_counts = cells_;
    s.cell_rates = cells_ / count_;
    s.mean_cost = cost_mean_;
    s.cost_stderr = count_ > 1 ? std::sqrt(cost_m2_ / (count_ - 1) / count_) : 0.0;
    s.mean_state = mean_;
    s.state_cov = count_ > 1 ? MatrixXd(0.5 * (m2_ + m2_.transpose()) / (count_ - 1))
                             : MatrixXd::Zero(m2_.rows(), m2_.cols());
    return s;
}

MonteCarloSummary estimate(const std::vector<TrialResult>& results) {
    if (results.empty()) {
        throw DomainError("estimate needs at least one trial");
    }
    const TrialResult& first = results.front();
    MonteCarloAccumulator acc(static_cast<int>(first.violations.rows()), static_cast<int>(first.violations.cols()),
                              static_cast<int>(first.states.size()));
    for (const TrialResult& r : results) {
        acc.add(r);
    }
    return acc.summary();
}

MonteCarloSummary run_monte_carlo(const SteeringProblem& problem, const ConcatenatedSystem& cs,
                                  const ControllerSolution& sol, const MonteCarloConfig& cfg) {
    if (cfg.trials < 1) {
        throw DomainError("Monte Carlo needs at least one trial");
    }
    const MomentSampler init(cfg.family, problem.initial.mean, problem.initial.cov);
    const MomentSampler noise(cfg.family, VectorXd::Zero(cs.r), problem.system.noise_cov);
    MonteCarloAccumulator acc(problem.allocation_rows(), cs.horizon, cs.stacked_state_dim());
    std::vector<TrialResult> kept;
    VectorXd W(static_cast<Eigen::Index>(cs.horizon) * cs.r);
    for (int t = 0; t < cfg.trials; ++t) {
        std::mt19937_64 gen = trial_generator(cfg.seed, static_cast<std::uint64_t>(t));
        const VectorXd x0 = init.draw(gen);
        for (int k = 0; k < cs.horizon; ++k) {
            W.segment(static_cast<Eigen::Index>(k) * cs.r, cs.r) = noise.draw(gen);
        }
        TrialResult trial = rollout(problem, cs, sol, x0, W);
        acc.add(trial);
        if (cfg.keep_trajectories) {
            kept.push_back(std::move(trial));
        }
    }
    MonteCarloSummary s = acc.summary();
    s.kept = std::move(kept);
    return s;
}

}  // namespace drcs
