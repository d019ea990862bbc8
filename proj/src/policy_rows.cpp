#include "drcs/policy_rows.hpp"

namespace drcs {

AffineExpr mean_projection(const ConcatenatedSystem& cs, const VectorXd& mu0, const DecisionLayout& layout,
                           const VectorXd& c, double scale, double constant) {
    AffineExpr e(constant + scale * c.dot(cs.A_cat * mu0));
    const VectorXd w = cs.B_cat.transpose() * c;
    for (int i = 0; i < w.size(); ++i) {
        e.add(layout.v(i), scale * w(i));
    }
    return e;
}

std::vector<AffineExpr> deviation_rows(const ConcatenatedSystem& cs, const DecisionLayout& layout,
                                       const VectorXd& c, double scale) {
    const VectorXd base = cs.sigma_y_sqrt * c;
    const VectorXd w = cs.B_cat.transpose() * c;
    std::vector<AffineExpr> rows(static_cast<std::size_t>(layout.state_cols));
    for (int j = 0; j < layout.state_cols; ++j) {
        AffineExpr& e = rows[static_cast<std::size_t>(j)];
        e.constant = scale * base(j);
        for (int i = 0; i < layout.input_rows; ++i) {
            e.add(layout.l(i, j), scale * w(i));
        }
    }
    return rows;
}

VectorXd lift_to_step(const ConcatenatedSystem& cs, const VectorXd& a, int k) {
    VectorXd c = VectorXd::Zero(cs.stacked_state_dim());
    c.segment(static_cast<Eigen::Index>(k) * cs.n, cs.n) = a;
    return c;
}

}  // namespace drcs
