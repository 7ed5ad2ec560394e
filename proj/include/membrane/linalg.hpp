#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace membrane {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;  // compressed row storage

/// Sparse operator in compressed row form plus a symmetry tag set by the
/// assembly routines.
struct SparseMatrix {
    SpMat csr;
    bool symmetric = false;

    Eigen::Index dim() const { return csr.rows(); }
    std::span<const SpMat::StorageIndex> row_offsets() const {
        return {csr.outerIndexPtr(), static_cast<size_t>(csr.outerSize() + 1)};
    }
    std::span<const SpMat::StorageIndex> col_indices() const {
        return {csr.innerIndexPtr(), static_cast<size_t>(csr.nonZeros())};
    }
    std::span<const double> values() const {
        return {csr.valuePtr(), static_cast<size_t>(csr.nonZeros())};
    }
};

/// Largest |a_ij - a_ji| relative to the largest entry magnitude.
double symmetry_defect(const SpMat& m);

/// Matrix-free operator callback: y = A x. Both Krylov solvers accept these
/// alongside explicit matrices.
using LinOp = std::function<void(const Vec&, Vec&)>;

struct SolveReport {
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Thrown when a Krylov or Newton solve fails to converge.
struct SolveFailure : std::runtime_error {
    SolveReport report;
    explicit SolveFailure(const std::string& what, SolveReport r = {})
        : std::runtime_error(what), report(r) {}
};

/// Declares the known null space of the operator passed to cg_solve. With
/// `constants` the right-hand side must have zero mean and all iterates are
/// kept mean-free.
enum class NullSpace { none, constants };

struct CgOptions {
    double tol = 1e-10;           // relative to ||b||_2, true residual
    int max_iter = 1000;
    const LinOp* preconditioner = nullptr;  // must be SPD; nullptr = default
    NullSpace null_space = NullSpace::none;
};

/// Preconditioned conjugate gradients. The default preconditioner is Jacobi
/// when an explicit matrix is given, identity for matrix-free operators.
/// Convergence is judged on the true residual, recomputed every 50 iterations
/// to guard against recurrence drift. A zero right-hand side returns the zero
/// vector with 0 iterations. Non-convergence is reported, not thrown.
std::pair<Vec, SolveReport> cg_solve(const SparseMatrix& A, const Vec& b, const CgOptions& opt = {});
std::pair<Vec, SolveReport> cg_solve(const LinOp& A, const Vec& b, const CgOptions& opt = {});

/// Symmetric block system [[A, B], [B^T, -C]] with A, C symmetric positive
/// definite; the assembled operator is symmetric and nonsingular.
struct BlockSaddleMatrix {
    const SpMat* A = nullptr;
    const SpMat* B = nullptr;
    const SpMat* C = nullptr;

    Eigen::Index block_dim() const { return A->rows(); }
    Eigen::Index dim() const { return 2 * A->rows(); }
    void apply(const Vec& x, Vec& y) const;
};

struct MinresOptions {
    double tol = 1e-10;           // relative to ||rhs||_2, true residual
    int max_iter = 2000;
    const LinOp* preconditioner = nullptr;  // must be SPD; nullptr = default
};

/// Preconditioned MINRES for symmetric (possibly indefinite) systems. The
/// default preconditioner for a BlockSaddleMatrix is the block-diagonal
/// [diag(A), diag(C)]; for matrix-free operators it is the identity.
std::pair<Vec, SolveReport> minres_solve(const BlockSaddleMatrix& S, const Vec& rhs,
                                         const MinresOptions& opt = {});
std::pair<Vec, SolveReport> minres_solve(const LinOp& S, const Vec& rhs, const MinresOptions& opt = {});

/// Dense LU with partial pivoting; test oracle and small-system fallback.
/// Throws std::invalid_argument above dimension 4096 and SolveFailure when a
/// pivot falls below 1e-12 times the largest entry.
Eigen::VectorXd dense_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

/// Subtracts the arithmetic mean in place.
void remove_mean(Vec& v);

}  // namespace membrane
