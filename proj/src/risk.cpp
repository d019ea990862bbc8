#include "drcs/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "drcs/errors.hpp"

namespace drcs {

const char* to_string(RiskMode mode) { return mode == RiskMode::dr ? "dr" : "gaussian"; }

RiskMode risk_mode_from_string(const std::string& text) {
    if (text == "dr") {
        return RiskMode::dr;
    }
    if (text == "gaussian") {
        return RiskMode::gaussian;
    }
    throw DomainError("unknown risk mode '" + text + "' (expected dr or gaussian)");
}

RiskAllocation::RiskAllocation(Eigen::MatrixXd grid, double budget) : grid_(std::move(grid)), budget_(budget) {}

void RiskAllocation::validate() const {
    if (!(budget_ > 0.0 && budget_ <= 0.5)) {
        throw DomainError("risk budget must lie in (0, 0.5], got " + std::to_string(budget_));
    }
    if (grid_.size() == 0) {
        return;
    }
    if (grid_.minCoeff() < kRiskFloor || grid_.maxCoeff() > 0.5) {
        throw DomainError("allocated risks must lie in [1e-6, 0.5]");
    }
    if (grid_.sum() > budget_ + 1e-12) {
        throw DomainError("allocated risks sum to " + std::to_string(grid_.sum()) + " > budget " +
                          std::to_string(budget_));
    }
}

double dr_quantile(double one_minus_delta) {
    if (!(one_minus_delta >= 0.5 && one_minus_delta <= 1.0 - kRiskFloor)) {
        throw DomainError("dr_quantile argument must lie in [0.5, 1 - 1e-6], got " + std::to_string(one_minus_delta));
    }
    const double delta = 1.0 - one_minus_delta;
    return std::sqrt(one_minus_delta / delta);
}

double gaussian_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gaussian_quantile(double p) {
    if (!(p >= kRiskFloor && p <= 1.0 - kRiskFloor)) {
        throw DomainError("gaussian_quantile argument must lie in [1e-6, 1 - 1e-6], got " + std::to_string(p));
    }
    // Acklam's rational approximation (relative error ~1e-9) ...
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x = 0.0;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // ... refined by one Halley step on the erfc-based CDF.
    const double e = gaussian_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double tightening_quantile(double delta, RiskMode mode) {
    if (!(delta >= kRiskFloor && delta <= 0.5)) {
        throw DomainError("risk must lie in [1e-6, 0.5], got " + std::to_string(delta));
    }
    return mode == RiskMode::dr ? dr_quantile(1.0 - delta) : gaussian_quantile(1.0 - delta);
}

double constraint_stddev_from_factor(const HalfSpace& hs, const ConcatenatedSystem& cs, const MatrixXd& factor,
                                     int k) {
    if (hs.normal.size() != cs.n) {
        throw DimensionError("half-space normal has wrong length");
    }
    if (k < 0 || k > cs.horizon) {
        throw DimensionError("step out of range", k);
    }
    // factor' E_k' a = (E_k factor)' a
    return (cs.step_rows(factor, k).transpose() * hs.normal).norm();
}

double constraint_stddev(const HalfSpace& hs, const ConcatenatedSystem& cs, const MatrixXd& K, int k) {
    return constraint_stddev_from_factor(hs, cs, closed_loop_factor(cs, K), k);
}

double tightening_offset(const HalfSpace& hs, const ConcatenatedSystem& cs, const MatrixXd& K, int k, double delta,
                         RiskMode mode) {
    const double q = tightening_quantile(delta, mode);
    return q * constraint_stddev(hs, cs, K, k);
}

RiskAllocation uniform_allocation(double budget, int constraints, int steps) {
    if (!(budget > 0.0 && budget <= 0.5)) {
        throw DomainError("risk budget must lie in (0, 0.5], got " + std::to_string(budget));
    }
    if (constraints < 0 || steps < 1) {
        throw DomainError("allocation needs M >= 0 constraints and N >= 1 steps");
    }
    if (constraints == 0) {
        return RiskAllocation(Eigen::MatrixXd(0, steps), budget);
    }
    const double cell = budget / (static_cast<double>(constraints) * steps);
    return RiskAllocation(Eigen::MatrixXd::Constant(constraints, steps, cell), budget);
}

double true_risk_from_slack(double slack, double stddev) {
    if (stddev <= 0.0) {
        return kRiskFloor;
    }
    if (slack < 0.0) {
        throw InfeasibleMeanError("mean trajectory violates the constraint", slack);
    }
    const double ratio = slack / stddev;
    return std::max(kRiskFloor, 1.0 / (1.0 + ratio * ratio));
}

double true_risk_from_slack(double slack, double stddev, RiskMode mode) {
    if (mode == RiskMode::dr) {
        return true_risk_from_slack(slack, stddev);
    }
    if (stddev <= 0.0) {
        return kRiskFloor;
    }
    if (slack < 0.0) {
        throw InfeasibleMeanError("mean trajectory violates the constraint", slack);
    }
    return std::max(kRiskFloor, gaussian_cdf(-slack / stddev));
}

double true_risk(const HalfSpace& hs, const ConcatenatedSystem& cs, const VectorXd& mean_traj, const MatrixXd& K,
                 int k) {
    if (mean_traj.size() != cs.stacked_state_dim()) {
        throw DimensionError("mean trajectory has wrong length");
    }
    const double slack = hs.offset - hs.normal.dot(cs.step(mean_traj, k));
    return true_risk_from_slack(slack, constraint_stddev(hs, cs, K, k));
}

}  // namespace drcs
