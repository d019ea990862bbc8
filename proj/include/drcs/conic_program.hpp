/**
 * @file conic_program.hpp
 * @brief Solver-neutral container for quadratic cone programs.
 *
 *   minimize    0.5 x'Px + q'x + constant
 *   subject to  A x = b
 *               s = h - G x  in  K = R+^l x Q^{q_1} x ... x S+^{s_1} x ...
 *
 * Cone rows are added as affine expressions of x (the slack s itself), which
 * keeps the builders free of sign bookkeeping. PSD blocks use the scaled
 * lower-triangle vectorization: column-major over the lower triangle, with
 * off-diagonal entries multiplied by sqrt(2).
 */
#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace drcs {

enum class ConeKind { nonneg, soc, psd };

const char* to_string(ConeKind kind);

/// Sparse affine function constant + sum(coeff * x[var]).
struct AffineExpr {
    double constant = 0.0;
    std::vector<std::pair<int, double>> terms;

    AffineExpr() = default;
    explicit AffineExpr(double c) : constant(c) {}
    AffineExpr& add(int var, double coeff) {
        if (coeff != 0.0) {
            terms.emplace_back(var, coeff);
        }
        return *this;
    }
};

/// X(row, col) += coeff * x[var] inside a PSD block (row >= col; mirrored).
struct PsdTerm {
    int row = 0;
    int col = 0;
    int var = 0;
    double coeff = 0.0;
};

struct ConeBlock {
    ConeKind kind = ConeKind::nonneg;
    int order = 0;    ///< nonneg: rows; soc: cone dimension; psd: matrix order
    int offset = 0;   ///< first row in the stacked (G, h)
    int rows = 0;     ///< rows used in the stacked (G, h)
    std::string label;
};

struct VariableBlock {
    std::string name;
    int offset = 0;
    int count = 0;
};

class ConicProgram {
public:
    using SparseMatrix = Eigen::SparseMatrix<double>;
    using Triplet = Eigen::Triplet<double>;

    /// Appends `count` variables and returns the index of the first.
    int add_variables(int count, std::string name);
    [[nodiscard]] int num_variables() const { return num_vars_; }
    [[nodiscard]] const std::vector<VariableBlock>& variable_blocks() const { return var_blocks_; }

    /// Adds value to P(i, j) and P(j, i) (once if i == j).
    void add_quadratic(int i, int j, double value);
    void add_linear(int i, double value);
    void add_constant(double value) { constant_ += value; }

    /// expr == 0
    int add_equality(const AffineExpr& expr, std::string label);

    /// Each expr >= 0. Returns the block index.
    int add_nonneg(const std::vector<AffineExpr>& exprs, std::string label);

    /// exprs[0] >= ||exprs[1:]||. Returns the block index.
    int add_soc(const std::vector<AffineExpr>& exprs, std::string label);

    /// constant + sum(terms) is PSD. Returns the block index.
    int add_psd(const Eigen::MatrixXd& constant, const std::vector<PsdTerm>& terms, std::string label);

    [[nodiscard]] const std::vector<ConeBlock>& cones() const { return cones_; }
    [[nodiscard]] const std::vector<std::string>& equality_labels() const { return eq_labels_; }
    [[nodiscard]] int num_equalities() const { return static_cast<int>(b_.size()); }
    [[nodiscard]] int num_cone_rows() const { return static_cast<int>(h_.size()); }
    [[nodiscard]] int count_cones(ConeKind kind) const;

    [[nodiscard]] SparseMatrix P() const;
    [[nodiscard]] Eigen::VectorXd q() const;
    [[nodiscard]] double constant() const { return constant_; }
    [[nodiscard]] SparseMatrix A() const;
    [[nodiscard]] Eigen::VectorXd b() const;
    [[nodiscard]] SparseMatrix G() const;
    [[nodiscard]] Eigen::VectorXd h() const;

    /// Objective value at x.
    [[nodiscard]] double objective(const Eigen::VectorXd& x) const;

    /// Value of the stacked cone slack h - Gx.
    [[nodiscard]] Eigen::VectorXd slack(const Eigen::VectorXd& x) const;

    /// Human-readable listing of variables, objective and every row.
    void dump(std::ostream& os) const;

    /// Throws DimensionError when a row references a missing variable or a
    /// cone block has an impossible size.
    void validate() const;

private:
    int append_cone(ConeKind kind, int order, const std::vector<AffineExpr>& rows, std::string label);
    [[nodiscard]] std::string var_name(int index) const;

    int num_vars_ = 0;
    std::vector<VariableBlock> var_blocks_;
    std::vector<Triplet> p_;
    std::vector<std::pair<int, double>> q_;
    double constant_ = 0.0;
    std::vector<Triplet> a_;
    std::vector<double> b_;
    std::vector<std::string> eq_labels_;
    std::vector<Triplet> g_;
    std::vector<double> h_;
    std::vector<ConeBlock> cones_;
};

/// Index of entry (row, col), row >= col, in the scaled lower-triangle vector.
int svec_index(int order, int row, int col);

/// Scaled lower-triangle vectorization of a symmetric matrix.
Eigen::VectorXd svec(const Eigen::MatrixXd& X);

/// Inverse of svec.
Eigen::MatrixXd smat(const Eigen::VectorXd& v, int order);

}  // namespace drcs
