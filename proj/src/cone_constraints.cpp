#include "drcs/cone_constraints.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drcs/errors.hpp"

namespace drcs {

void SecondOrderConeSet::validate(int state_dim) const {
    if (A.rows() < 1) {
        throw DimensionError("cone set needs at least one row in A");
    }
    if (A.cols() != state_dim || c.size() != state_dim) {
        throw DimensionError("cone set A and c must have " + std::to_string(state_dim) + " columns");
    }
    if (b.size() != A.rows()) {
        throw DimensionError("cone set b must have one entry per row of A");
    }
    for (int i = 0; i < A.rows(); ++i) {
        if (A.row(i).norm() == 0.0) {
            throw DimensionError("cone set row " + std::to_string(i) + " of A is zero");
        }
    }
}

void ConeDecompositionParams::validate(const VectorXd& step_risks) const {
    const auto p = beta.size();
    if (eps1.rows() != p || eps2.rows() != p || eps1.cols() != step_risks.size() ||
        eps2.cols() != step_risks.size()) {
        throw DimensionError("cone parameters do not match (rows, steps)");
    }
    if (beta.minCoeff() <= 0.0 || std::abs(beta.sum() - 1.0) > 1e-12) {
        throw DomainError("cone row weights must be positive and sum to 1");
    }
    for (Eigen::Index k = 0; k < step_risks.size(); ++k) {
        for (Eigen::Index i = 0; i < p; ++i) {
            const double e1 = eps1(i, k);
            const double e2 = eps2(i, k);
            if (!(e1 > 0.5 && e1 < 1.0 && e2 > 0.5 && e2 < 1.0)) {
                throw DomainError("side probabilities must lie in (0.5, 1)");
            }
            if (e1 + e2 < 2.0 - beta(i) * step_risks(k) - 1e-15) {
                throw DomainError("side probabilities too small for the step risk at step " +
                                  std::to_string(k + 1));
            }
        }
    }
}

ConeDecompositionParams default_params(const SecondOrderConeSet& cone, const VectorXd& step_risks) {
    const int p = cone.rows();
    if (p < 1) {
        throw DimensionError("cone set needs at least one row in A");
    }
    for (Eigen::Index k = 0; k < step_risks.size(); ++k) {
        if (!(step_risks(k) >= kRiskFloor && step_risks(k) <= 0.5)) {
            throw DomainError("step risk must lie in [1e-6, 0.5], got " + std::to_string(step_risks(k)));
        }
    }
    ConeDecompositionParams params;
    params.beta = VectorXd::Constant(p, 1.0 / p);
    params.eps1.resize(p, step_risks.size());
    for (Eigen::Index k = 0; k < step_risks.size(); ++k) {
        params.eps1.col(k) = (VectorXd::Ones(p) - 0.5 * step_risks(k) * params.beta);
    }
    params.eps2 = params.eps1;
    return params;
}

double side_coefficient(double eps, RiskMode mode) {
    if (!(eps >= 0.5 && eps < 1.0)) {
        throw DomainError("side probability must lie in [0.5, 1), got " + std::to_string(eps));
    }
    if (mode == RiskMode::dr) {
        return std::sqrt(eps / (1.0 - eps));
    }
    return gaussian_quantile(std::min(eps, 1.0 - kRiskFloor));
}

ConeRowBlock emit_cone_rows(const SecondOrderConeSet& cone, const ConeDecompositionParams& params,
                            const ConcatenatedSystem& cs, const VectorXd& mu0, const DecisionLayout& layout,
                            ConicProgram& program, const VectorXd& step_risks, RiskMode mode) {
    cone.validate(cs.n);
    if (step_risks.size() != cs.horizon) {
        throw DimensionError("cone constraints need one risk per step");
    }
    for (Eigen::Index k = 0; k < step_risks.size(); ++k) {
        if (!(step_risks(k) >= kRiskFloor && step_risks(k) <= 0.5)) {
            throw DomainError("step risk below the floor or above 0.5 at step " + std::to_string(k + 1));
        }
    }
    params.validate(step_risks);

    const int p = cone.rows();
    const int N = cs.horizon;
    ConeRowBlock out;
    out.f_offset = program.add_variables(p * N, "f");
    std::vector<AffineExpr> nonneg;
    for (int k = 1; k <= N; ++k) {
        for (int i = 0; i < p; ++i) {
            const int f = out.f_offset + i + p * (k - 1);
            const VectorXd a = lift_to_step(cs, cone.A.row(i).transpose(), k);
            const double c1 = side_coefficient(params.eps1(i, k - 1), mode);
            const double c2 = side_coefficient(params.eps2(i, k - 1), mode);

            // f - b_i - a_i'E_k Xbar >= c1 ||(F + Bcat L)' E_k' a_i||
            std::vector<AffineExpr> upper{mean_projection(cs, mu0, layout, a, -1.0, -cone.b(i))};
            upper.front().add(f, 1.0);
            const auto dev1 = deviation_rows(cs, layout, a, c1);
            upper.insert(upper.end(), dev1.begin(), dev1.end());
            program.add_soc(upper, "cone row " + std::to_string(i) + " upper, step " + std::to_string(k));

            // f + b_i + a_i'E_k Xbar >= c2 ||(F + Bcat L)' E_k' a_i||
            std::vector<AffineExpr> lower{mean_projection(cs, mu0, layout, a, 1.0, cone.b(i))};
            lower.front().add(f, 1.0);
            const auto dev2 = deviation_rows(cs, layout, a, c2);
            lower.insert(lower.end(), dev2.begin(), dev2.end());
            program.add_soc(lower, "cone row " + std::to_string(i) + " lower, step " + std::to_string(k));
            out.soc_rows += 2;

            AffineExpr fe;
            fe.add(f, 1.0);
            nonneg.push_back(fe);
        }
        // ||f_k|| <= c'E_k(Acat mu_0 + Bcat V) + d
        std::vector<AffineExpr> coupling{mean_projection(cs, mu0, layout, lift_to_step(cs, cone.c, k), 1.0, cone.d)};
        for (int i = 0; i < p; ++i) {
            AffineExpr fe;
            fe.add(out.f_offset + i + p * (k - 1), 1.0);
            coupling.push_back(fe);
        }
        program.add_soc(coupling, "cone coupling, step " + std::to_string(k));
        out.soc_rows += 1;
    }
    program.add_nonneg(nonneg, "cone bounds f >= 0");
    return out;
}

bool cone_membership(const SecondOrderConeSet& cone, const VectorXd& x) {
    return (cone.A * x + cone.b).norm() <= cone.c.dot(x) + cone.d;
}

ConeStepMoments cone_step_moments(const SecondOrderConeSet& cone, const ConcatenatedSystem& cs,
                                  const VectorXd& mean_traj, const MatrixXd& factor, int k) {
    ConeStepMoments mom;
    const VectorXd xk = cs.step(mean_traj, k);
    mom.psi = cone.A * xk + cone.b;
    mom.kappa = cone.c.dot(xk) + cone.d;
    const MatrixXd rows = cone.A * cs.step_rows(factor, k);
    mom.stddev = rows.rowwise().norm();
    return mom;
}

bool cone_step_feasible(const ConeStepMoments& mom, double delta, RiskMode mode, double tol) {
    const auto p = mom.psi.size();
    const double eps = 1.0 - 0.5 * delta / static_cast<double>(p);
    const double coeff = side_coefficient(eps, mode);
    const VectorXd f = mom.psi.cwiseAbs() + coeff * mom.stddev;
    return f.norm() <= mom.kappa + tol;
}

double cone_true_risk(const ConeStepMoments& mom, double allocated, RiskMode mode) {
    if (cone_step_feasible(mom, kRiskFloor, mode)) {
        return kRiskFloor;
    }
    const double tol = 1e-7 * (1.0 + std::abs(mom.kappa));
    if (!cone_step_feasible(mom, allocated, mode, tol)) {
        return allocated;
    }
    // Feasibility is monotone in delta: larger risk, smaller back-off.
    double lo = kRiskFloor;
    double hi = allocated;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        if (cone_step_feasible(mom, mid, mode, tol)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

}  // namespace drcs
