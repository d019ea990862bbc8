#include "drcs/conic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseCore>

#include "drcs/errors.hpp"

namespace drcs {

const char* to_string(SolverStatus status) {
    switch (status) {
        case SolverStatus::optimal:
            return "optimal";
        case SolverStatus::optimal_inaccurate:
            return "optimal_inaccurate";
        case SolverStatus::infeasible:
            return "infeasible";
        case SolverStatus::max_iterations:
            return "max_iterations";
        case SolverStatus::numerical_error:
            return "numerical_error";
    }
    return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// One cone block: static row data plus the current Nesterov-Todd scaling.
struct Block {
    ConeKind kind = ConeKind::nonneg;
    int offset = 0;
    int rows = 0;
    int order = 0;

    SpMat G;    // rows x nx
    SpMat GtG;  // soc only

    // psd: rows of G that carry variables, and their (row, col) positions
    SpMat G_touched;
    std::vector<std::pair<int, int>> touched_ij;

    // scaling state
    VectorXd d;  // nonneg: sqrt(s / z)
    double eta = 1.0;
    VectorXd u;  // soc: W = eta (u u' - J)
    MatrixXd R;
    MatrixXd Rinv;
    VectorXd lam_eig;  // psd: diagonal of lambda
    VectorXd lambda;   // scaled point, in the block's vector coordinates
};

std::vector<std::pair<int, int>> svec_positions(int order) {
    std::vector<std::pair<int, int>> pos;
    pos.reserve(static_cast<std::size_t>(order * (order + 1) / 2));
    for (int j = 0; j < order; ++j) {
        for (int i = j; i < order; ++i) {
            pos.emplace_back(i, j);
        }
    }
    return pos;
}

VectorXd identity(const Block& b) {
    VectorXd e = VectorXd::Zero(b.rows);
    switch (b.kind) {
        case ConeKind::nonneg:
            e.setOnes();
            break;
        case ConeKind::soc:
            e(0) = 1.0;
            break;
        case ConeKind::psd:
            for (int i = 0; i < b.order; ++i) {
                e(svec_index(b.order, i, i)) = 1.0;
            }
            break;
    }
    return e;
}

double soc_det(const VectorXd& v) { return v(0) * v(0) - v.tail(v.size() - 1).squaredNorm(); }

VectorXd apply_J(const VectorXd& v) {
    VectorXd out = -v;
    out(0) = v(0);
    return out;
}

/// Smallest t with v + t e in the cone boundary (t <= 0 means strictly interior).
double boundary_shift(const Block& b, const VectorXd& v) {
    switch (b.kind) {
        case ConeKind::nonneg:
            return b.rows ? -v.minCoeff() : -kInf;
        case ConeKind::soc:
            return v.tail(v.size() - 1).norm() - v(0);
        case ConeKind::psd: {
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(smat(v, b.order), Eigen::EigenvaluesOnly);
            return -eig.eigenvalues().minCoeff();
        }
    }
    return 0.0;
}

/// Largest alpha >= 0 with lambda + alpha d in the cone.
double max_step(const Block& b, const VectorXd& d) {
    switch (b.kind) {
        case ConeKind::nonneg: {
            double alpha = kInf;
            for (int i = 0; i < b.rows; ++i) {
                if (d(i) < 0.0) {
                    alpha = std::min(alpha, -b.lambda(i) / d(i));
                }
            }
            return alpha;
        }
        case ConeKind::soc: {
            // f(a) = (l0 + a d0)^2 - ||l1 + a d1||^2 = qa a^2 + 2 qb a + qc, qc > 0
            const VectorXd& l = b.lambda;
            const double qa = soc_det(d);
            const double qb = l(0) * d(0) - l.tail(l.size() - 1).dot(d.tail(d.size() - 1));
            const double qc = soc_det(l);
            double alpha = kInf;
            if (std::abs(qa) < 1e-300) {
                if (qb < 0.0) {
                    alpha = -qc / (2.0 * qb);
                }
            } else {
                const double disc = qb * qb - qa * qc;
                if (disc >= 0.0) {
                    const double root = std::sqrt(disc);
                    const double qv = -(qb + std::copysign(root, qb));
                    for (double cand : {qv / qa, qv != 0.0 ? qc / qv : kInf}) {
                        if (cand > 0.0) {
                            alpha = std::min(alpha, cand);
                        }
                    }
                }
            }
            if (d(0) < 0.0) {
                alpha = std::min(alpha, -l(0) / d(0));
            }
            return alpha;
        }
        case ConeKind::psd: {
            const VectorXd inv_sqrt = b.lam_eig.cwiseSqrt().cwiseInverse();
            const MatrixXd M = inv_sqrt.asDiagonal() * smat(d, b.order) * inv_sqrt.asDiagonal();
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M, Eigen::EigenvaluesOnly);
            const double lo = eig.eigenvalues().minCoeff();
            return lo < 0.0 ? -1.0 / lo : kInf;
        }
    }
    return kInf;
}

enum class Op { W, Wt, Winv, Winvt };

VectorXd apply(const Block& b, Op op, const VectorXd& v) {
    switch (b.kind) {
        case ConeKind::nonneg:
            return (op == Op::W || op == Op::Wt) ? VectorXd(b.d.cwiseProduct(v)) : VectorXd(v.cwiseQuotient(b.d));
        case ConeKind::soc:
            // W is symmetric: W = eta (u u' - J), W^{-1} = (J u u' J - J) / eta.
            if (op == Op::W || op == Op::Wt) {
                return b.eta * (b.u * b.u.dot(v) - apply_J(v));
            } else {
                const VectorXd Ju = apply_J(b.u);
                return (Ju * Ju.dot(v) - apply_J(v)) / b.eta;
            }
        case ConeKind::psd: {
            const MatrixXd X = smat(v, b.order);
            switch (op) {
                case Op::W:
                    return svec(b.R.transpose() * X * b.R);
                case Op::Wt:
                    return svec(b.R * X * b.R.transpose());
                case Op::Winv:
                    return svec(b.Rinv.transpose() * X * b.Rinv);
                case Op::Winvt:
                    return svec(b.Rinv * X * b.Rinv.transpose());
            }
        }
    }
    return v;
}

VectorXd jordan_product(const Block& b, const VectorXd& x, const VectorXd& y) {
    switch (b.kind) {
        case ConeKind::nonneg:
            return x.cwiseProduct(y);
        case ConeKind::soc: {
            VectorXd out(x.size());
            out(0) = x.dot(y);
            out.tail(x.size() - 1) = x(0) * y.tail(y.size() - 1) + y(0) * x.tail(x.size() - 1);
            return out;
        }
        case ConeKind::psd: {
            const MatrixXd X = smat(x, b.order);
            const MatrixXd Y = smat(y, b.order);
            return svec(0.5 * (X * Y + Y * X));
        }
    }
    return x;
}

/// Solves lambda o x = r for x.
VectorXd jordan_divide(const Block& b, const VectorXd& r) {
    switch (b.kind) {
        case ConeKind::nonneg:
            return r.cwiseQuotient(b.lambda);
        case ConeKind::soc: {
            const VectorXd& l = b.lambda;
            const Eigen::Index k = l.size() - 1;
            const double det = soc_det(l);
            VectorXd x(l.size());
            x(0) = (l(0) * r(0) - l.tail(k).dot(r.tail(k))) / det;
            x.tail(k) = (r.tail(k) - x(0) * l.tail(k)) / l(0);
            return x;
        }
        case ConeKind::psd: {
            VectorXd x(r.size());
            int idx = 0;
            for (int j = 0; j < b.order; ++j) {
                for (int i = j; i < b.order; ++i) {
                    x(idx) = 2.0 * r(idx) / (b.lam_eig(i) + b.lam_eig(j));
                    ++idx;
                }
            }
            return x;
        }
    }
    return r;
}

/// Nesterov-Todd scaling for the block from strictly interior s and z.
bool compute_scaling(Block& b, const VectorXd& s, const VectorXd& z) {
    switch (b.kind) {
        case ConeKind::nonneg:
            if (b.rows && (s.minCoeff() <= 0.0 || z.minCoeff() <= 0.0)) {
                return false;
            }
            b.d = s.cwiseQuotient(z).cwiseSqrt();
            b.lambda = s.cwiseProduct(z).cwiseSqrt();
            return true;
        case ConeKind::soc: {
            const double sdet = soc_det(s);
            const double zdet = soc_det(z);
            if (!(sdet > 0.0 && zdet > 0.0 && s(0) > 0.0 && z(0) > 0.0)) {
                return false;
            }
            const VectorXd sn = s / std::sqrt(sdet);
            const VectorXd zn = z / std::sqrt(zdet);
            const double gamma = std::sqrt(0.5 * (1.0 + sn.dot(zn)));
            const VectorXd w = (sn + apply_J(zn)) / (2.0 * gamma);
            b.eta = std::pow(sdet / zdet, 0.25);
            b.u = w;
            b.u(0) += 1.0;
            b.u /= std::sqrt(1.0 + w(0));
            b.lambda = apply(b, Op::W, z);
            return true;
        }
        case ConeKind::psd: {
            Eigen::LLT<MatrixXd> ls(smat(s, b.order));
            Eigen::LLT<MatrixXd> lz(smat(z, b.order));
            if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) {
                return false;
            }
            const MatrixXd Ls = ls.matrixL();
            const MatrixXd Lz = lz.matrixL();
            Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const VectorXd& sig = svd.singularValues();
            if (sig.minCoeff() <= 0.0) {
                return false;
            }
            const VectorXd inv_sqrt = sig.cwiseSqrt().cwiseInverse();
            b.R = Ls * svd.matrixV() * inv_sqrt.asDiagonal();
            b.Rinv = inv_sqrt.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
            b.lam_eig = sig;
            b.lambda = svec(sig.asDiagonal().toDenseMatrix());
            return true;
        }
    }
    return false;
}

void set_identity_scaling(Block& b) {
    switch (b.kind) {
        case ConeKind::nonneg:
            b.d = VectorXd::Ones(b.rows);
            b.lambda = VectorXd::Ones(b.rows);
            break;
        case ConeKind::soc:
            b.eta = 1.0;
            b.u = VectorXd::Zero(b.rows);
            b.u(0) = std::numbers::sqrt2;
            b.lambda = identity(b);
            break;
        case ConeKind::psd:
            b.R = MatrixXd::Identity(b.order, b.order);
            b.Rinv = b.R;
            b.lam_eig = VectorXd::Ones(b.order);
            b.lambda = identity(b);
            break;
    }
}

void add_sparse(MatrixXd& H, const SpMat& S, double alpha) {
    for (int col = 0; col < S.outerSize(); ++col) {
        for (SpMat::InnerIterator it(S, col); it; ++it) {
            H(it.row(), it.col()) += alpha * it.value();
        }
    }
}

class InteriorPoint {
public:
    InteriorPoint(const ConicProgram& program, const SolverOptions& options)
        : opt_(options),
          P_(program.P()),
          q_(program.q()),
          constant_(program.constant()),
          A_(program.A()),
          b_(program.b()),
          G_(program.G()),
          h_(program.h()) {
        nx_ = program.num_variables();
        // Objective normalization: duals and the gap are reported unscaled.
        double magnitude = q_.size() ? q_.cwiseAbs().maxCoeff() : 0.0;
        for (int col = 0; col < P_.outerSize(); ++col) {
            for (SpMat::InnerIterator it(P_, col); it; ++it) {
                magnitude = std::max(magnitude, std::abs(it.value()));
            }
        }
        obj_scale_ = 1.0 / std::max(1.0, magnitude);
        P_ *= obj_scale_;
        q_ *= obj_scale_;
        constant_ *= obj_scale_;
        neq_ = program.num_equalities();
        ncone_ = program.num_cone_rows();
        Gt_ = G_.transpose();
        At_dense_ = MatrixXd(A_.transpose());
        const Eigen::SparseMatrix<double, Eigen::RowMajor> G_rows(G_);
        for (const ConeBlock& cb : program.cones()) {
            Block b;
            b.kind = cb.kind;
            b.offset = cb.offset;
            b.rows = cb.rows;
            b.order = cb.order;
            b.G = SpMat(G_rows.middleRows(cb.offset, cb.rows));
            if (b.kind == ConeKind::soc) {
                b.GtG = SpMat(b.G.transpose() * b.G);
            } else if (b.kind == ConeKind::psd) {
                const auto pos = svec_positions(b.order);
                const Eigen::SparseMatrix<double, Eigen::RowMajor> Gb(b.G);
                std::vector<Eigen::Triplet<double>> trips;
                int used = 0;
                for (int r = 0; r < b.rows; ++r) {
                    if (Gb.outerIndexPtr()[r + 1] == Gb.outerIndexPtr()[r]) {
                        continue;
                    }
                    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Gb, r); it; ++it) {
                        trips.emplace_back(used, static_cast<int>(it.col()), it.value());
                    }
                    b.touched_ij.push_back(pos[static_cast<std::size_t>(r)]);
                    ++used;
                }
                b.G_touched = SpMat(used, nx_);
                b.G_touched.setFromTriplets(trips.begin(), trips.end());
            }
            degree_ += b.kind == ConeKind::nonneg ? b.rows : (b.kind == ConeKind::soc ? 1 : b.order);
            blocks_.push_back(std::move(b));
        }
    }

    ConicSolution run();

private:
    [[nodiscard]] VectorXd seg(const VectorXd& v, const Block& b) const { return v.segment(b.offset, b.rows); }

    VectorXd apply_all(Op op, const VectorXd& v) const {
        VectorXd out(v.size());
        for (const Block& b : blocks_) {
            out.segment(b.offset, b.rows) = apply(b, op, seg(v, b));
        }
        return out;
    }

    bool factor();
    void solve_kkt(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, const VectorXd& t, VectorXd& dx,
                   VectorXd& dy, VectorXd& dz, VectorXd& ds_scaled, VectorXd& dz_scaled) const;
    void solve_reduced(const VectorXd& rhs_x, const VectorXd& rhs_y, VectorXd& dx, VectorXd& dy) const;

    SolverOptions opt_;
    SpMat P_;
    VectorXd q_;
    double constant_;
    double obj_scale_ = 1.0;
    SpMat A_;
    VectorXd b_;
    SpMat G_;
    SpMat Gt_;
    VectorXd h_;
    MatrixXd At_dense_;
    int nx_ = 0;
    int neq_ = 0;
    int ncone_ = 0;
    int degree_ = 0;
    std::vector<Block> blocks_;

    MatrixXd H_;  // lower triangle valid
    Eigen::LLT<MatrixXd> H_llt_;
    MatrixXd HinvAt_;
    Eigen::LLT<MatrixXd> S_llt_;
};

bool InteriorPoint::factor() {
    H_ = MatrixXd(P_);
    std::vector<VectorXd> plus;
    std::vector<VectorXd> minus;
    for (const Block& b : blocks_) {
        switch (b.kind) {
            case ConeKind::nonneg: {
                const VectorXd w = b.d.cwiseAbs2().cwiseInverse();
                const SpMat term = SpMat(b.G.transpose() * w.asDiagonal() * b.G);
                add_sparse(H_, term, 1.0);
                break;
            }
            case ConeKind::soc: {
                // G'W^{-2}G = (G'G + c g g' - g h' - h g') / eta^2 with g = G'Ju, h = G'u, c = u'u.
                const double inv_eta2 = 1.0 / (b.eta * b.eta);
                add_sparse(H_, b.GtG, inv_eta2);
                const VectorXd g = b.G.transpose() * apply_J(b.u);
                const VectorXd hv = b.G.transpose() * b.u;
                const double c = b.u.squaredNorm();
                const double rc = std::sqrt(c);
                plus.push_back((rc * g - hv / rc) / b.eta);
                minus.push_back(hv / (rc * b.eta));
                break;
            }
            case ConeKind::psd: {
                if (b.touched_ij.empty()) {
                    break;
                }
                const MatrixXd V = b.Rinv.transpose() * b.Rinv;
                const auto nt = static_cast<Eigen::Index>(b.touched_ij.size());
                MatrixXd Kmat(nt, nt);
                for (Eigen::Index p = 0; p < nt; ++p) {
                    const auto [a, bb] = b.touched_ij[static_cast<std::size_t>(p)];
                    const double cp = a == bb ? 0.5 : 1.0 / std::numbers::sqrt2;
                    for (Eigen::Index r = 0; r <= p; ++r) {
                        const auto [c, d] = b.touched_ij[static_cast<std::size_t>(r)];
                        const double cr = c == d ? 0.5 : 1.0 / std::numbers::sqrt2;
                        const double value = 2.0 * cp * cr * (V(a, c) * V(bb, d) + V(a, d) * V(bb, c));
                        Kmat(p, r) = value;
                        Kmat(r, p) = value;
                    }
                }
                const MatrixXd KG = Kmat * b.G_touched;
                H_.noalias() += b.G_touched.transpose() * KG;
                break;
            }
        }
    }
    if (!plus.empty()) {
        MatrixXd Pp(nx_, static_cast<Eigen::Index>(plus.size()));
        MatrixXd Pm(nx_, static_cast<Eigen::Index>(minus.size()));
        for (std::size_t i = 0; i < plus.size(); ++i) {
            Pp.col(static_cast<Eigen::Index>(i)) = plus[i];
            Pm.col(static_cast<Eigen::Index>(i)) = minus[i];
        }
        H_.selfadjointView<Eigen::Lower>().rankUpdate(Pp, 1.0);
        H_.selfadjointView<Eigen::Lower>().rankUpdate(Pm, -1.0);
    }

    const double scale = std::max(1.0, H_.diagonal().cwiseAbs().maxCoeff());
    double reg = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        MatrixXd Hr = H_;
        if (reg > 0.0) {
            Hr.diagonal().array() += reg;
        }
        H_llt_.compute(Hr);
        if (H_llt_.info() == Eigen::Success) {
            break;
        }
        reg = reg == 0.0 ? 1e-14 * scale : reg * 100.0;
    }
    if (H_llt_.info() != Eigen::Success) {
        return false;
    }
    if (neq_ > 0) {
        HinvAt_ = H_llt_.solve(At_dense_);
        const MatrixXd S = A_ * HinvAt_;
        S_llt_.compute(0.5 * (S + S.transpose()));
        if (S_llt_.info() != Eigen::Success) {
            return false;
        }
    }
    return true;
}

void InteriorPoint::solve_reduced(const VectorXd& rhs_x, const VectorXd& rhs_y, VectorXd& dx, VectorXd& dy) const {
    // [H A'; A 0] [dx; dy] = [rhs_x; rhs_y], refined against the unregularized H.
    auto base = [&](const VectorXd& rx, const VectorXd& ry, VectorXd& x, VectorXd& y) {
        const VectorXd Hr = H_llt_.solve(rx);
        if (neq_ > 0) {
            y = S_llt_.solve(A_ * Hr - ry);
            x = Hr - HinvAt_ * y;
        } else {
            y = VectorXd(0);
            x = Hr;
        }
    };
    base(rhs_x, rhs_y, dx, dy);
    for (int it = 0; it < 2; ++it) {
        VectorXd res_x = rhs_x - H_.selfadjointView<Eigen::Lower>() * dx;
        if (neq_ > 0) {
            res_x -= A_.transpose() * dy;
        }
        const VectorXd res_y = neq_ > 0 ? VectorXd(rhs_y - A_ * dx) : VectorXd(0);
        VectorXd cx;
        VectorXd cy;
        base(res_x, res_y, cx, cy);
        dx += cx;
        if (neq_ > 0) {
            dy += cy;
        }
    }
}

void InteriorPoint::solve_kkt(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, const VectorXd& t,
                              VectorXd& dx, VectorXd& dy, VectorXd& dz, VectorXd& ds_scaled,
                              VectorXd& dz_scaled) const {
    // P dx + A'dy + G'dz = rx, A dx = ry, G dx + ds = rz, W dz + W^{-T} ds = t.
    const VectorXd inner = apply_all(Op::Winv, apply_all(Op::Winvt, rz) - t);
    const VectorXd rhs_x = rx + Gt_ * inner;
    solve_reduced(rhs_x, ry, dx, dy);
    dz = apply_all(Op::Winv, apply_all(Op::Winvt, VectorXd(G_ * dx - rz)) + t);
    dz_scaled = apply_all(Op::W, dz);
    ds_scaled = t - dz_scaled;
}

ConicSolution InteriorPoint::run() {
    ConicSolution out;
    VectorXd x = VectorXd::Zero(nx_);
    VectorXd y = VectorXd::Zero(neq_);
    VectorXd z = VectorXd::Zero(ncone_);
    VectorXd s = VectorXd::Zero(ncone_);

    for (Block& b : blocks_) {
        set_identity_scaling(b);
    }
    if (!factor()) {
        out.status = SolverStatus::numerical_error;
        return out;
    }
    {
        VectorXd dsc;
        VectorXd dzc;
        solve_kkt(-q_, b_, h_, VectorXd::Zero(ncone_), x, y, z, dsc, dzc);
        s = -z;
        auto shift = [this](VectorXd& v) {
            double t = -kInf;
            for (const Block& b : blocks_) {
                t = std::max(t, boundary_shift(b, seg(v, b)));
            }
            if (t >= -1e-8 * std::max(1.0, v.norm())) {
                for (const Block& b : blocks_) {
                    v.segment(b.offset, b.rows) += (1.0 + t) * identity(b);
                }
            }
        };
        if (ncone_ > 0) {
            shift(s);
            shift(z);
        }
    }

    const double resx0 = std::max(1.0, q_.norm());
    const double resy0 = std::max(1.0, b_.norm());
    const double resz0 = std::max(1.0, h_.norm());

    struct Snapshot {
        double merit = kInf;
        VectorXd x, y, z, s;
        double pcost = 0, dcost = 0, gap = 0, relgap = 0, pres = 0, dres = 0;
        int iteration = 0;
    } best;

    bool converged = false;
    int iteration = 0;
    for (; iteration <= opt_.max_iterations; ++iteration) {
        const VectorXd Px = P_ * x;
        VectorXd rx = Px + q_ + Gt_ * z;
        if (neq_ > 0) {
            rx += A_.transpose() * y;
        }
        const VectorXd ry = neq_ > 0 ? VectorXd(A_ * x - b_) : VectorXd(0);
        const VectorXd rz = G_ * x + s - h_;
        const double gap = s.dot(z);
        const double pcost = 0.5 * x.dot(Px) + q_.dot(x) + constant_;
        const double dcost = pcost + (neq_ > 0 ? y.dot(ry) : 0.0) + z.dot(rz) - gap;
        double relgap = kInf;
        if (pcost < 0.0) {
            relgap = gap / -pcost;
        } else if (dcost > 0.0) {
            relgap = gap / dcost;
        }
        const double pres = std::max(neq_ > 0 ? ry.norm() / resy0 : 0.0, ncone_ > 0 ? rz.norm() / resz0 : 0.0);
        const double dres = rx.norm() / resx0;

        const double merit = std::max({pres, dres, std::min(gap, relgap)});
        if (merit < best.merit) {
            best = {merit, x, y, z, s, pcost, dcost, gap, relgap, pres, dres, iteration};
        }
        if (opt_.verbose) {
            std::cerr << "ipm " << iteration << " pcost " << pcost / obj_scale_ << " dcost " << dcost / obj_scale_
                      << " gap " << gap / obj_scale_ << " pres "
                      << pres << " dres " << dres << "\n";
        }
        if (pres <= opt_.feastol && dres <= opt_.feastol &&
            (ncone_ == 0 || gap <= opt_.abstol || relgap <= opt_.reltol)) {
            converged = true;
            break;
        }
        if (iteration == opt_.max_iterations) {
            break;
        }

        bool ok = true;
        for (Block& b : blocks_) {
            ok = ok && compute_scaling(b, seg(s, b), seg(z, b));
        }
        if (!ok || !factor()) {
            break;
        }

        VectorXd lambda(ncone_);
        VectorXd lambda_sq(ncone_);
        for (const Block& b : blocks_) {
            lambda.segment(b.offset, b.rows) = b.lambda;
            lambda_sq.segment(b.offset, b.rows) = jordan_product(b, b.lambda, b.lambda);
        }
        const double mu = ncone_ > 0 ? lambda.squaredNorm() / degree_ : 0.0;

        auto step_to_boundary = [this](const VectorXd& ds_sc, const VectorXd& dz_sc) {
            double alpha = kInf;
            for (const Block& b : blocks_) {
                alpha = std::min({alpha, max_step(b, seg(ds_sc, b)), max_step(b, seg(dz_sc, b))});
            }
            return alpha;
        };

        // Predictor (affine scaling) direction.
        VectorXd dx, dy, dz, ds_sc, dz_sc;
        solve_kkt(-rx, -ry, -rz, -lambda, dx, dy, dz, ds_sc, dz_sc);
        const double alpha_aff = std::min(1.0, step_to_boundary(ds_sc, dz_sc));
        const double sigma = std::pow(1.0 - alpha_aff, 3);

        // Combined predictor-corrector direction.
        VectorXd t(ncone_);
        for (const Block& b : blocks_) {
            const VectorXd rs = -seg(lambda_sq, b) - jordan_product(b, seg(ds_sc, b), seg(dz_sc, b)) +
                                sigma * mu * identity(b);
            t.segment(b.offset, b.rows) = jordan_divide(b, rs);
        }
        solve_kkt(-rx, -ry, -rz, t, dx, dy, dz, ds_sc, dz_sc);
        const double alpha = std::min(1.0, opt_.step_fraction * step_to_boundary(ds_sc, dz_sc));
        if (!(alpha > 1e-14) || !dx.allFinite()) {
            break;
        }
        const VectorXd ds = apply_all(Op::Wt, ds_sc);
        x += alpha * dx;
        if (neq_ > 0) {
            y += alpha * dy;
        }
        z += alpha * dz;
        s += alpha * ds;
    }

    out.iterations = iteration;
    if (converged) {
        out.status = SolverStatus::optimal;
    } else {
        const bool acceptable = best.pres <= opt_.accept_tol && best.dres <= opt_.accept_tol &&
                                (ncone_ == 0 || best.gap <= opt_.accept_tol || best.relgap <= opt_.accept_tol);
        if (acceptable) {
            out.status = SolverStatus::optimal_inaccurate;
        } else if (best.pres > opt_.accept_tol) {
            out.status = SolverStatus::infeasible;
        } else if (iteration >= opt_.max_iterations) {
            out.status = SolverStatus::max_iterations;
        } else {
            out.status = SolverStatus::numerical_error;
        }
    }
    const bool use_best = !converged;
    out.x = use_best ? best.x : x;
    out.y = use_best ? best.y : y;
    out.z = use_best ? best.z : z;
    out.s = use_best ? best.s : s;
    const VectorXd ry = neq_ > 0 ? VectorXd(A_ * out.x - b_) : VectorXd(0);
    const VectorXd rz = G_ * out.x + out.s - h_;
    VectorXd rx = P_ * out.x + q_ + Gt_ * out.z;
    if (neq_ > 0) {
        rx += A_.transpose() * out.y;
    }
    const double pcost = 0.5 * out.x.dot(P_ * out.x) + q_.dot(out.x) + constant_;
    const double gap = out.s.dot(out.z);
    const double dcost = pcost + (neq_ > 0 ? out.y.dot(ry) : 0.0) + out.z.dot(rz) - gap;
    out.primal_residual = std::max(neq_ > 0 ? ry.norm() / resy0 : 0.0, ncone_ > 0 ? rz.norm() / resz0 : 0.0);
    out.dual_residual = rx.norm() / resx0;
    out.relative_gap = dcost > 0.0 ? gap / dcost : (pcost < 0.0 ? gap / -pcost : kInf);
    out.primal_objective = pcost / obj_scale_;
    out.dual_objective = dcost / obj_scale_;
    out.gap = gap / obj_scale_;
    out.y /= obj_scale_;
    out.z /= obj_scale_;
    return out;
}

}  // namespace

ConicSolution solve_conic(const ConicProgram& program, const SolverOptions& options) {
    program.validate();
    InteriorPoint ipm(program, options);
    return ipm.run();
}

}  // namespace drcs
