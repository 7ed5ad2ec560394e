#include "membrane/linalg.hpp"

#include <cmath>

namespace membrane {

double symmetry_defect(const SpMat& m) {
    double max_entry = 0.0;
    for (int k = 0; k < m.nonZeros(); ++k) {
        max_entry = std::max(max_entry, std::abs(m.valuePtr()[k]));
    }
    if (max_entry == 0.0) return 0.0;
    SpMat diff = SpMat(m.transpose()) - m;
    double defect = 0.0;
    for (int k = 0; k < diff.nonZeros(); ++k) {
        defect = std::max(defect, std::abs(diff.valuePtr()[k]));
    }
    return defect / max_entry;
}

void remove_mean(Vec& v) {
    v.array() -= v.mean();
}

namespace {

constexpr int kTrueResidualEvery = 50;

double mean_magnitude(const Vec& b) {
    return std::abs(b.sum()) / std::sqrt(static_cast<double>(b.size()));
}

std::pair<Vec, SolveReport> cg_impl(const LinOp& apply, const Vec& b, const CgOptions& opt,
                                    const LinOp* default_precond) {
    const Eigen::Index n = b.size();
    Vec x = Vec::Zero(n);
    SolveReport report;

    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        report.converged = true;
        return {x, report};
    }

    const bool projected = opt.null_space == NullSpace::constants;
    if (projected && mean_magnitude(b) > 1e-8 * bnorm) {
        throw std::invalid_argument(
            "cg_solve: right-hand side has nonzero mean for a singular system with constant "
            "null space (|sum b| / sqrt(n) = " +
            std::to_string(mean_magnitude(b)) + ", ||b|| = " + std::to_string(bnorm) + ")");
    }

    const LinOp* precond = opt.preconditioner ? opt.preconditioner : default_precond;

    Vec r = b;
    if (projected) remove_mean(r);
    Vec z(n), Ap(n), p(n);
    if (precond) {
        (*precond)(r, z);
    } else {
        z = r;
    }
    if (projected) remove_mean(z);
    p = z;
    double rz = r.dot(z);

    const double tol_abs = opt.tol * bnorm;
    for (int it = 1; it <= opt.max_iter; ++it) {
        apply(p, Ap);
        if (projected) remove_mean(Ap);
        const double pAp = p.dot(Ap);
        if (pAp <= 0.0) {
            // Operator is not positive definite along p; report and stop.
            report.iterations = it;
            report.residual = r.norm() / bnorm;
            report.converged = false;
            return {x, report};
        }
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;

        double rnorm = r.norm();
        if (rnorm <= tol_abs || it % kTrueResidualEvery == 0) {
            // True residual (the recurrence drifts over long solves).
            apply(x, Ap);
            r = b - Ap;
            if (projected) remove_mean(r);
            rnorm = r.norm();
            if (rnorm <= tol_abs) {
                report.iterations = it;
                report.residual = rnorm / bnorm;
                report.converged = true;
                return {x, report};
            }
        }

        if (precond) {
            (*precond)(r, z);
        } else {
            z = r;
        }
        if (projected) remove_mean(z);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
        report.iterations = it;
        report.residual = rnorm / bnorm;
    }
    report.converged = false;
    return {x, report};
}

}  // namespace

std::pair<Vec, SolveReport> cg_solve(const SparseMatrix& A, const Vec& b, const CgOptions& opt) {
    if (A.csr.rows() != b.size()) {
        throw std::invalid_argument("cg_solve: dimension mismatch");
    }
    Vec inv_diag = A.csr.diagonal().cwiseInverse();
    LinOp jacobi = [&inv_diag](const Vec& in, Vec& out) { out = inv_diag.asDiagonal() * in; };
    LinOp apply = [&A](const Vec& in, Vec& out) { out.noalias() = A.csr * in; };
    return cg_impl(apply, b, opt, &jacobi);
}

std::pair<Vec, SolveReport> cg_solve(const LinOp& A, const Vec& b, const CgOptions& opt) {
    return cg_impl(A, b, opt, nullptr);
}

void BlockSaddleMatrix::apply(const Vec& x, Vec& y) const {
    const Eigen::Index n = block_dim();
    y.resize(2 * n);
    y.head(n).noalias() = (*A) * x.head(n);
    y.head(n).noalias() += (*B) * x.tail(n);
    y.tail(n).noalias() = B->transpose() * x.head(n);
    y.tail(n).noalias() -= (*C) * x.tail(n);
}

namespace {

// Preconditioned MINRES (Paige--Saunders). The preconditioner must be SPD;
// the Lanczos recurrence minimizes the P^{-1}-norm of the residual, and the
// reported residual is the true 2-norm, recomputed every 50 iterations and at
// the end.
std::pair<Vec, SolveReport> minres_impl(const LinOp& apply, const Vec& rhs,
                                        const MinresOptions& opt, const LinOp* default_precond) {
    const Eigen::Index n = rhs.size();
    Vec x = Vec::Zero(n);
    SolveReport report;

    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        report.converged = true;
        return {x, report};
    }
    const LinOp* precond = opt.preconditioner ? opt.preconditioner : default_precond;
    auto apply_precond = [&](const Vec& in, Vec& out) {
        if (precond) {
            (*precond)(in, out);
        } else {
            out = in;
        }
    };

    Vec r1 = rhs;           // v_{k-1} scaled
    Vec r2 = rhs;           // v_k scaled
    Vec z(n);
    apply_precond(r2, z);   // z_k
    double beta1 = r2.dot(z);
    if (beta1 < 0.0) {
        throw std::invalid_argument("minres_solve: preconditioner is not positive definite");
    }
    beta1 = std::sqrt(beta1);
    if (beta1 == 0.0) {
        report.converged = true;
        return {x, report};
    }

    double eta = beta1;
    double oldb = 0.0, beta = beta1;
    double dbar = 0.0, epsln = 0.0, oldeps = 0.0;
    double cs = -1.0, sn = 0.0;
    Vec w = Vec::Zero(n), w1 = Vec::Zero(n), w2 = Vec::Zero(n);
    Vec y(n), v(n);

    const double tol_abs = opt.tol * rhs_norm;
    double phibar = beta1;

    for (int it = 1; it <= opt.max_iter; ++it) {
        v = z / beta;
        apply(v, y);
        if (it >= 2) y -= (beta / oldb) * r1;
        const double alfa = v.dot(y);
        y -= (alfa / beta) * r2;
        r1 = r2;
        r2 = y;
        apply_precond(r2, z);
        oldb = beta;
        double beta_sq = r2.dot(z);
        if (beta_sq < 0.0) {
            throw std::invalid_argument("minres_solve: preconditioner is not positive definite");
        }
        beta = std::sqrt(beta_sq);

        // Apply previous rotations and compute the new one.
        oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        const double gamma = std::max(std::hypot(gbar, beta), 1e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        w1 = w2;
        w2 = w;
        w = (v - oldeps * w1 - delta * w2) / gamma;
        x += phi * w;

        eta = phibar;  // P^{-1}-norm residual estimate
        report.iterations = it;

        if (eta <= tol_abs || it % kTrueResidualEvery == 0 || it == opt.max_iter) {
            apply(x, y);
            const double true_res = (rhs - y).norm();
            report.residual = true_res / rhs_norm;
            if (true_res <= tol_abs) {
                report.converged = true;
                return {x, report};
            }
        }
    }
    report.converged = false;
    return {x, report};
}

}  // namespace

std::pair<Vec, SolveReport> minres_solve(const BlockSaddleMatrix& S, const Vec& rhs,
                                         const MinresOptions& opt) {
    if (rhs.size() != S.dim()) {
        throw std::invalid_argument("minres_solve: dimension mismatch");
    }
    const Eigen::Index n = S.block_dim();
    Vec inv_diag(2 * n);
    inv_diag.head(n) = S.A->diagonal().cwiseInverse();
    inv_diag.tail(n) = S.C->diagonal().cwiseInverse();
    LinOp block_jacobi = [&inv_diag](const Vec& in, Vec& out) {
        out = inv_diag.asDiagonal() * in;
    };
    LinOp apply = [&S](const Vec& in, Vec& out) { S.apply(in, out); };
    return minres_impl(apply, rhs, opt, &block_jacobi);
}

std::pair<Vec, SolveReport> minres_solve(const LinOp& S, const Vec& rhs, const MinresOptions& opt) {
    return minres_impl(S, rhs, opt, nullptr);
}

Eigen::VectorXd dense_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    if (A.rows() != A.cols() || A.rows() != b.size()) {
        throw std::invalid_argument("dense_solve: dimension mismatch");
    }
    if (A.rows() > 4096) {
        throw std::invalid_argument("dense_solve: dimension exceeds 4096");
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    const double max_entry = A.cwiseAbs().maxCoeff();
    const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (min_pivot <= 1e-12 * max_entry) {
        throw SolveFailure("dense_solve: matrix is singular to the pivot threshold");
    }
    return lu.solve(b);
}

}  // namespace membrane
