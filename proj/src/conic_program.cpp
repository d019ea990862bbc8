#include "drcs/conic_program.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "drcs/errors.hpp"

namespace drcs {

const char* to_string(ConeKind kind) {
    switch (kind) {
        case ConeKind::nonneg:
            return "nonneg";
        case ConeKind::soc:
            return "soc";
        case ConeKind::psd:
            return "psd";
    }
    return "?";
}

int svec_index(int order, int row, int col) {
    // Column j starts after sum_{c<j} (order - c) entries.
    return col * order - col * (col - 1) / 2 + (row - col);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& X) {
    const int n = static_cast<int>(X.rows());
    Eigen::VectorXd v(n * (n + 1) / 2);
    int idx = 0;
    for (int j = 0; j < n; ++j) {
        for (int i = j; i < n; ++i) {
            v(idx++) = i == j ? X(i, j) : std::numbers::sqrt2 * 0.5 * (X(i, j) + X(j, i));
        }
    }
    return v;
}

Eigen::MatrixXd smat(const Eigen::VectorXd& v, int order) {
    Eigen::MatrixXd X(order, order);
    int idx = 0;
    for (int j = 0; j < order; ++j) {
        for (int i = j; i < order; ++i) {
            const double value = i == j ? v(idx) : v(idx) / std::numbers::sqrt2;
            X(i, j) = value;
            X(j, i) = value;
            ++idx;
        }
    }
    return X;
}

int ConicProgram::add_variables(int count, std::string name) {
    const int first = num_vars_;
    var_blocks_.push_back({std::move(name), first, count});
    num_vars_ += count;
    return first;
}

void ConicProgram::add_quadratic(int i, int j, double value) {
    if (value == 0.0) {
        return;
    }
    p_.emplace_back(i, j, value);
    if (i != j) {
        p_.emplace_back(j, i, value);
    }
}

void ConicProgram::add_linear(int i, double value) {
    if (value != 0.0) {
        q_.emplace_back(i, value);
    }
}

int ConicProgram::add_equality(const AffineExpr& expr, std::string label) {
    const int row = static_cast<int>(b_.size());
    for (const auto& [var, coeff] : expr.terms) {
        a_.emplace_back(row, var, coeff);
    }
    b_.push_back(-expr.constant);
    eq_labels_.push_back(std::move(label));
    return row;
}

int ConicProgram::append_cone(ConeKind kind, int order, const std::vector<AffineExpr>& rows, std::string label) {
    ConeBlock block;
    block.kind = kind;
    block.order = order;
    block.offset = static_cast<int>(h_.size());
    block.rows = static_cast<int>(rows.size());
    block.label = std::move(label);
    for (int r = 0; r < block.rows; ++r) {
        const AffineExpr& e = rows[static_cast<std::size_t>(r)];
        h_.push_back(e.constant);
        for (const auto& [var, coeff] : e.terms) {
            g_.emplace_back(block.offset + r, var, -coeff);
        }
    }
    cones_.push_back(std::move(block));
    return static_cast<int>(cones_.size()) - 1;
}

int ConicProgram::add_nonneg(const std::vector<AffineExpr>& exprs, std::string label) {
    return append_cone(ConeKind::nonneg, static_cast<int>(exprs.size()), exprs, std::move(label));
}

int ConicProgram::add_soc(const std::vector<AffineExpr>& exprs, std::string label) {
    if (exprs.empty()) {
        throw DimensionError("second-order cone needs at least one row");
    }
    return append_cone(ConeKind::soc, static_cast<int>(exprs.size()), exprs, std::move(label));
}

int ConicProgram::add_psd(const Eigen::MatrixXd& constant, const std::vector<PsdTerm>& terms, std::string label) {
    const int order = static_cast<int>(constant.rows());
    if (constant.cols() != order || order == 0) {
        throw DimensionError("PSD block constant must be square and nonempty");
    }
    std::vector<AffineExpr> rows(static_cast<std::size_t>(order * (order + 1) / 2));
    const Eigen::VectorXd c = svec(constant);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].constant = c(static_cast<Eigen::Index>(i));
    }
    for (const PsdTerm& t : terms) {
        if (t.row < t.col || t.row >= order || t.col < 0) {
            throw DimensionError("PSD term must address the lower triangle");
        }
        const double scale = t.row == t.col ? 1.0 : std::numbers::sqrt2;
        rows[static_cast<std::size_t>(svec_index(order, t.row, t.col))].add(t.var, scale * t.coeff);
    }
    return append_cone(ConeKind::psd, order, rows, std::move(label));
}

int ConicProgram::count_cones(ConeKind kind) const {
    int count = 0;
    for (const ConeBlock& c : cones_) {
        count += c.kind == kind ? 1 : 0;
    }
    return count;
}

ConicProgram::SparseMatrix ConicProgram::P() const {
    SparseMatrix M(num_vars_, num_vars_);
    M.setFromTriplets(p_.begin(), p_.end());
    return M;
}

Eigen::VectorXd ConicProgram::q() const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(num_vars_);
    for (const auto& [i, value] : q_) {
        v(i) += value;
    }
    return v;
}

ConicProgram::SparseMatrix ConicProgram::A() const {
    SparseMatrix M(num_equalities(), num_vars_);
    M.setFromTriplets(a_.begin(), a_.end());
    return M;
}

Eigen::VectorXd ConicProgram::b() const {
    return Eigen::Map<const Eigen::VectorXd>(b_.data(), static_cast<Eigen::Index>(b_.size()));
}

ConicProgram::SparseMatrix ConicProgram::G() const {
    SparseMatrix M(num_cone_rows(), num_vars_);
    M.setFromTriplets(g_.begin(), g_.end());
    return M;
}

Eigen::VectorXd ConicProgram::h() const {
    return Eigen::Map<const Eigen::VectorXd>(h_.data(), static_cast<Eigen::Index>(h_.size()));
}

double ConicProgram::objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(P() * x) + q().dot(x) + constant_;
}

Eigen::VectorXd ConicProgram::slack(const Eigen::VectorXd& x) const { return h() - G() * x; }

void ConicProgram::validate() const {
    auto check = [this](const std::vector<Triplet>& ts, const char* what) {
        for (const Triplet& t : ts) {
            if (t.col() < 0 || t.col() >= num_vars_) {
                throw DimensionError(std::string(what) + " references variable " + std::to_string(t.col()) +
                                     " outside [0, " + std::to_string(num_vars_) + ")");
            }
        }
    };
    check(p_, "objective");
    check(a_, "equality row");
    check(g_, "cone row");
    for (const auto& [i, value] : q_) {
        if (i < 0 || i >= num_vars_) {
            throw DimensionError("linear objective references a missing variable");
        }
    }
    for (const ConeBlock& c : cones_) {
        const int expected = c.kind == ConeKind::psd ? c.order * (c.order + 1) / 2 : c.order;
        if (c.rows != expected || (c.kind == ConeKind::soc && c.order < 1)) {
            throw DimensionError("cone block '" + c.label + "' has inconsistent size");
        }
    }
}

std::string ConicProgram::var_name(int index) const {
    for (const VariableBlock& vb : var_blocks_) {
        if (index >= vb.offset && index < vb.offset + vb.count) {
            return vb.name + "[" + std::to_string(index - vb.offset) + "]";
        }
    }
    return "x[" + std::to_string(index) + "]";
}

void ConicProgram::dump(std::ostream& os) const {
    os << "# conic program: " << num_vars_ << " variables, " << num_equalities() << " equalities, "
       << cones_.size() << " cone blocks (" << count_cones(ConeKind::nonneg) << " nonneg, "
       << count_cones(ConeKind::soc) << " soc, " << count_cones(ConeKind::psd) << " psd)\n";
    for (const VariableBlock& vb : var_blocks_) {
        os << "var " << vb.name << " [" << vb.offset << ", " << vb.offset + vb.count << ")\n";
    }
    os << "objective constant " << constant_ << "\n";
    os << "objective quadratic nnz " << p_.size() << "\n";
    for (const auto& [i, value] : q_) {
        os << "  linear " << value << " * " << var_name(i) << "\n";
    }

    const SparseMatrix Ar = A();
    const Eigen::SparseMatrix<double, Eigen::RowMajor> A_rows(Ar);
    for (int r = 0; r < num_equalities(); ++r) {
        os << "eq " << r << " (" << eq_labels_[static_cast<std::size_t>(r)] << "):";
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A_rows, r); it; ++it) {
            os << " " << (it.value() >= 0 ? "+" : "") << it.value() << "*" << var_name(static_cast<int>(it.col()));
        }
        os << " = " << b_[static_cast<std::size_t>(r)] << "\n";
    }

    const Eigen::SparseMatrix<double, Eigen::RowMajor> G_rows(G());
    for (const ConeBlock& c : cones_) {
        os << "cone " << to_string(c.kind) << " order " << c.order << " (" << c.label << ")\n";
        for (int r = c.offset; r < c.offset + c.rows; ++r) {
            os << "  s" << r - c.offset << " = " << h_[static_cast<std::size_t>(r)];
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(G_rows, r); it; ++it) {
                const double coeff = -it.value();
                os << " " << (coeff >= 0 ? "+" : "") << coeff << "*" << var_name(static_cast<int>(it.col()));
            }
            os << "\n";
        }
    }
}

}  // namespace drcs
