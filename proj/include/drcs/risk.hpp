#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcs/dynamics.hpp"

namespace drcs {

/// Smallest per-constraint risk ever allocated; quantiles grow without bound
/// as the risk goes to zero.
inline constexpr double kRiskFloor = 1e-6;

enum class RiskMode { dr, gaussian };

const char* to_string(RiskMode mode);
RiskMode risk_mode_from_string(const std::string& text);

/// {x : a'x <= b}
struct HalfSpace {
    VectorXd normal;
    double offset = 0.0;
};

/// Per-constraint, per-step risk bounds delta(i, k) for i in [0, M), k in
/// [1, N] (column k-1), together with the total budget they share.
class RiskAllocation {
public:
    RiskAllocation() = default;
    RiskAllocation(Eigen::MatrixXd grid, double budget);

    [[nodiscard]] int constraints() const { return static_cast<int>(grid_.rows()); }
    [[nodiscard]] int steps() const { return static_cast<int>(grid_.cols()); }
    [[nodiscard]] double budget() const { return budget_; }
    [[nodiscard]] double total() const { return grid_.sum(); }

    /// Risk of constraint i at time step k (k is 1-based).
    [[nodiscard]] double at(int i, int k) const { return grid_(i, k - 1); }
    double& at(int i, int k) { return grid_(i, k - 1); }

    [[nodiscard]] const Eigen::MatrixXd& grid() const { return grid_; }
    Eigen::MatrixXd& grid() { return grid_; }

    /// Throws DomainError unless every cell is in [kRiskFloor, 0.5] and the
    /// sum stays within the budget (1e-12 slack).
    void validate() const;

private:
    Eigen::MatrixXd grid_;
    double budget_ = 0.0;
};

/// Cantelli quantile sqrt(p / (1 - p)) for p = 1 - delta in [0.5, 1 - kRiskFloor].
double dr_quantile(double one_minus_delta);

/// Standard normal inverse CDF for p in [kRiskFloor, 1 - kRiskFloor].
double gaussian_quantile(double p);

/// Standard normal CDF.
double gaussian_cdf(double x);

/// Tightening constant for a risk delta in [kRiskFloor, 0.5].
double tightening_quantile(double delta, RiskMode mode);

/// ||Sigma_Y^{1/2} (I + Bcat K)' E_k' a||, the standard deviation of a'x_k.
double constraint_stddev(const HalfSpace& hs, const ConcatenatedSystem& cs, const MatrixXd& K, int k);

/// Same quantity from a precomputed closed_loop_factor (saves a product per call).
double constraint_stddev_from_factor(const HalfSpace& hs, const ConcatenatedSystem& cs,
                                     const MatrixXd& factor, int k);

/// q(delta) * constraint_stddev, with q the DR or Gaussian quantile.
double tightening_offset(const HalfSpace& hs, const ConcatenatedSystem& cs, const MatrixXd& K, int k,
                         double delta, RiskMode mode);

/// Every cell Delta / (M N).
RiskAllocation uniform_allocation(double budget, int constraints, int steps);

/// Worst-case violation probability implied by the achieved slack:
/// (1 + (slack / stddev)^2)^{-1}, floored at kRiskFloor. Returns kRiskFloor
/// when stddev is zero; throws InfeasibleMeanError on negative slack.
double true_risk(const HalfSpace& hs, const ConcatenatedSystem& cs, const VectorXd& mean_traj,
                 const MatrixXd& K, int k);

/// true_risk from an explicit slack and standard deviation.
double true_risk_from_slack(double slack, double stddev);

/// Mode-aware inversion: the Cantelli form above for dr, 1 - Phi(slack / stddev)
/// for gaussian (floored at kRiskFloor).
double true_risk_from_slack(double slack, double stddev, RiskMode mode);

}  // namespace drcs
