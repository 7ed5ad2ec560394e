#pragma once

#include <Eigen/Dense>

#include "membrane/mesh.hpp"
#include "membrane/scheme.hpp"

// Slow reference computations used to validate the production solvers on tiny
// meshes. Everything here runs on dense matrices with first-order descent and
// shares no code with the Newton/Krylov path it cross-checks.

namespace membrane::oracle {

struct OracleConfig {
    double tol = 1e-10;       // tangent gradient norm
    long max_iterations = 2'000'000;
};

/// Dense P1 mass/stiffness matrices assembled triangle by triangle from the
/// vertex coordinates (independent of the production scatter path).
Eigen::MatrixXd dense_mass(const TorusMesh& mesh);
Eigen::MatrixXd dense_stiffness(const TorusMesh& mesh, const Eigen::Matrix2d& A);

/// Armijo projected-gradient minimizer of the reduced Cahn-Hilliard
/// functional over {<u,1>_h = <u_prev,1>_h}. Requires mesh.n <= 16.
/// Throws SolveFailure when the iteration cap is reached.
Vec minimize_reduced_functional(const Vec& u_prev, const Vec& h_next, const ModelParams& params,
                                const TorusMesh& mesh, const OracleConfig& config = {});

struct CoupledMinimum {
    Vec u;
    Vec h;
    double value = 0.0;        // J_n at the returned point
    double gradient_norm = 0.0;
};

/// Alternating projected descent on the fully coupled minimizing-movement
/// functional J_n(u, h) = (1/2tau)||u - u_n||_{-1}^2 + (1/2tau)||h - h_n||^2
/// + F(u, h), without convex splitting or decoupling. Requires mesh.n <= 16
/// and tau <= 1e-2. The result is a stationary point for comparison reports;
/// the decoupled scheme is not expected to match it exactly.
CoupledMinimum minimize_coupled_functional(const Vec& u_prev, const Vec& h_prev,
                                           const ModelParams& params, const TorusMesh& mesh,
                                           const OracleConfig& config = {});

/// Assembles the dense 2N x 2N height saddle system and solves it by dense
/// LU. Requires mesh.n <= 16.
std::pair<Vec, Vec> dense_height_solve(const SimState& state, const ModelParams& params,
                                       const TorusMesh& mesh);

}  // namespace membrane::oracle
