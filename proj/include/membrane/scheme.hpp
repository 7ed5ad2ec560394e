#pragma once

#include <memory>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "membrane/linalg.hpp"
#include "membrane/mesh.hpp"
#include "membrane/potential.hpp"

namespace membrane {

/// Model parameters. G must be symmetric positive definite; L is symmetric
/// positive semidefinite (the zero matrix switches the coupling off, which
/// the stability screens rely on); a nonzero L must be definite.
struct ModelParams {
    double eps = 0.01;
    double kappa = 0.01;
    double tau = 1e-4;
    Eigen::Matrix2d G = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d L = Eigen::Matrix2d::Identity();
    PotentialSpec potential;

    static ModelParams isotropic(double eps, double kappa, double sigma, double lambda,
                                 double tau, PotentialSpec potential);

    bool coupling_is_zero() const { return L.isZero(0.0); }
    /// Throws std::invalid_argument on any violated constraint.
    void validate() const;
};

struct SolverSettings {
    double newton_tol = 1e-9;    // absolute 2-norm of the stacked weak-form residuals
    double minres_tol = 1e-10;   // relative
    int max_newton = 50;
    double outer_cg_tol = 1e-4;  // relative; Newton step solves
    int max_outer_cg = 400;
    int max_inner_cg = 200;      // (-Delta_k)^{-1} solves; inner tol = 0.01 * outer
    int max_minres = 4000;
};

struct SimState {
    Vec u, mu, h, g;
    long step = 0;
    double t = 0.0;
};

struct StepStats {
    int newton_iterations = 0;
    int outer_cg_iterations = 0;
    int inner_cg_iterations = 0;
    int minres_iterations = 0;
    double newton_residual = 0.0;
    double minres_residual = 0.0;
    double energy_before = 0.0;
    double energy_after = 0.0;
};

/// Matrices and factorizations assembled once per (mesh, params) pair. All
/// members are immutable after construction and safe to share across threads.
struct SchemeMatrices {
    TorusMesh mesh;
    SparseMatrix M;    // consistent mass
    SparseMatrix K;    // identity-coefficient stiffness
    SparseMatrix K_G;  // surface-tension stiffness
    SparseMatrix K_L;  // coupling stiffness (zero matrix when L = 0)
    Vec lumped_mass;   // row-sum lumped mass diagonal

    // Saddle system blocks for the height subsystem, scaled as in the scheme:
    // [[(1/tau) M + K_G, kappa K], [kappa K, -kappa M]].
    SpMat A_height;
    SpMat B_height;
    SpMat C_height;

    // Factorizations backing the solver preconditioners and the warm start
    // of the height solve (the saddle matrix is constant over the run).
    std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> poisson;   // grounded K
    std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> height_A;  // A_height
    std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> height_S;  // Schur proxy
    // Factorization of the full saddle matrix (symmetric quasi-definite, so
    // the pivot-free LDLT exists); warm-starts the height solve.
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> saddle_lu;

    /// Solves K y = b for the zero-mean y, via CG preconditioned with the
    /// grounded factorization. b must have zero sum. Returns iteration count
    /// through `iters` when non-null.
    Vec poisson_solve(const Vec& b, double rel_tol, int max_iter, int* iters = nullptr) const;
};

SchemeMatrices assemble_scheme_matrices(const TorusMesh& mesh, const ModelParams& params);

struct HeightStepResult {
    Vec h;
    Vec g;
    SolveReport report;
};

/// Linear height/auxiliary subsystem: solves the symmetric saddle system
/// [[(1/tau) M + K_G, kappa K], [kappa K, -kappa M]] (h, g) =
/// ((1/tau) M h_n + K_L u_n, 0) with MINRES. The mean of h is handled
/// separately (it is conserved exactly by the scheme), so mass conservation
/// of h holds to rounding rather than to solver tolerance.
/// Throws SolveFailure on MINRES non-convergence.
HeightStepResult height_step(const SimState& state, const ModelParams& params,
                             const SchemeMatrices& mats, const SolverSettings& settings = {});

struct ChStepResult {
    Vec u;
    Vec mu;
    int newton_iterations = 0;
    int outer_cg_iterations = 0;
    int inner_cg_iterations = 0;
    double residual = 0.0;
};

/// Nonlinear Cahn-Hilliard subsystem: Newton's method on the strictly convex
/// reduced functional over the mean-constrained affine space, with implicit
/// convex and explicit concave potential derivatives and lumped quadrature on
/// all potential terms. The chemical potential is recovered from the Lagrange
/// multiplier. `initial_guess` defaults to u_n; the minimizer is unique, so
/// the guess only affects iteration counts.
/// Throws SolveFailure when Newton or its line search fails.
ChStepResult ch_step(const SimState& state, const Vec& h_next, const ModelParams& params,
                     const SchemeMatrices& mats, const SolverSettings& settings = {},
                     const std::optional<Vec>& initial_guess = std::nullopt);

/// One full time step: height subsystem first, then Cahn-Hilliard.
/// `energy_before` skips recomputing the incoming energy when the caller
/// already holds it from the previous step.
std::pair<SimState, StepStats> advance(const SimState& state, const ModelParams& params,
                                       const SchemeMatrices& mats,
                                       const SolverSettings& settings = {},
                                       const std::optional<Vec>& ch_initial_guess = std::nullopt,
                                       const double* energy_before = nullptr);

/// Weak-form residuals of the Cahn-Hilliard pair against all nodal test
/// functions, with lumped quadrature on the potential terms:
///   r1 = (1/tau) M (u_next - u_n) + K mu_next
///   r2 = -M mu_next + eps K u_next + (1/eps) Ml .* (W1'(u_next) + W2'(u_n))
///        - K_L h_next
std::pair<Vec, Vec> residual_weak_form(const Vec& u_next, const Vec& mu_next, const Vec& h_next,
                                       const SimState& state, const ModelParams& params,
                                       const SchemeMatrices& mats);

/// Value of the reduced Cahn-Hilliard functional J at u (same quadrature as
/// ch_step); exposed for tests and finite-difference checks. The mean
/// deviation of u - u_n is projected out before the H^{-1} term so J extends
/// smoothly off the constraint set.
double reduced_functional(const Vec& u, const Vec& u_n, const Vec& h_next,
                          const ModelParams& params, const SchemeMatrices& mats,
                          double inner_rel_tol = 1e-12);

}  // namespace membrane
