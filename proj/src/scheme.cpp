#include "membrane/scheme.hpp"

#include <cmath>

#include "membrane/diagnostics.hpp"

namespace membrane {

ModelParams ModelParams::isotropic(double eps, double kappa, double sigma, double lambda,
                                   double tau, PotentialSpec potential) {
    ModelParams p;
    p.eps = eps;
    p.kappa = kappa;
    p.tau = tau;
    p.G = sigma * Eigen::Matrix2d::Identity();
    p.L = lambda * Eigen::Matrix2d::Identity();
    p.potential = std::move(potential);
    return p;
}

void ModelParams::validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("params: eps must be positive");
    if (!(kappa > 0.0)) throw std::invalid_argument("params: kappa must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("params: tau must be positive");
    auto check_spd = [](const Eigen::Matrix2d& m, const char* name, bool allow_zero) {
        const double scale = m.cwiseAbs().maxCoeff();
        if (allow_zero && scale == 0.0) return;
        if (std::abs(m(0, 1) - m(1, 0)) > 1e-12 * std::max(scale, 1e-300)) {
            throw std::invalid_argument(std::string("params: ") + name + " must be symmetric");
        }
        if (m(0, 0) <= 0.0 || m.determinant() <= 0.0) {
            throw std::invalid_argument(std::string("params: ") + name +
                                        " must be positive definite");
        }
    };
    check_spd(G, "G", false);
    check_spd(L, "L", true);  // L = 0 switches the coupling off
}

namespace {

Eigen::SparseMatrix<double> grounded_copy(const SpMat& K) {
    // Same operator with row/column 0 replaced by the unit vector; solving the
    // grounded system with a zero-sum right-hand side reproduces the exact
    // solution fixed at node 0.
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(K.nonZeros() + 1);
    for (int row = 0; row < K.outerSize(); ++row) {
        for (SpMat::InnerIterator it(K, row); it; ++it) {
            if (it.row() == 0 || it.col() == 0) continue;
            triplets.emplace_back(it.row(), it.col(), it.value());
        }
    }
    triplets.emplace_back(0, 0, 1.0);
    Eigen::SparseMatrix<double> out(K.rows(), K.cols());
    out.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

}  // namespace

SchemeMatrices assemble_scheme_matrices(const TorusMesh& mesh, const ModelParams& params) {
    params.validate();
    SchemeMatrices mats;
    mats.mesh = mesh;
    mats.M = assemble_mass(mesh, MassLumping::consistent);
    mats.K = assemble_stiffness(mesh, Eigen::Matrix2d::Identity());
    mats.K_G = assemble_stiffness(mesh, params.G);
    mats.lumped_mass = assemble_mass(mesh, MassLumping::lumped).csr.diagonal();
    if (params.coupling_is_zero()) {
        mats.K_L.csr.resize(mesh.vertex_count(), mesh.vertex_count());
        mats.K_L.csr.setZero();
        mats.K_L.symmetric = true;
    } else {
        mats.K_L = assemble_stiffness(mesh, params.L);
    }

    mats.A_height = mats.M.csr / params.tau + mats.K_G.csr;
    mats.B_height = params.kappa * mats.K.csr;
    mats.C_height = params.kappa * mats.M.csr;

    using Factor = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>;
    mats.poisson = std::make_shared<Factor>();
    mats.poisson->compute(grounded_copy(mats.K.csr));
    if (mats.poisson->info() != Eigen::Success) {
        throw SolveFailure("scheme: stiffness factorization failed");
    }
    mats.height_A = std::make_shared<Factor>();
    mats.height_A->compute(Eigen::SparseMatrix<double>(mats.A_height));
    if (mats.height_A->info() != Eigen::Success) {
        throw SolveFailure("scheme: height block factorization failed");
    }
    // Schur-complement proxy kappa M + B diag(A)^{-1} B for the MINRES block
    // preconditioner.
    Vec dinv = mats.A_height.diagonal().cwiseInverse();
    SpMat schur = mats.C_height + SpMat(mats.B_height * dinv.asDiagonal() * mats.B_height);
    mats.height_S = std::make_shared<Factor>();
    mats.height_S->compute(Eigen::SparseMatrix<double>(schur));
    if (mats.height_S->info() != Eigen::Success) {
        throw SolveFailure("scheme: Schur proxy factorization failed");
    }

    // Direct factorization of the full saddle matrix; it warm-starts the
    // per-step MINRES solve, which then only has to certify (and rarely
    // improve) the residual.
    const Eigen::Index nv = mesh.vertex_count();
    std::vector<Eigen::Triplet<double>> saddle;
    saddle.reserve(2 * (mats.A_height.nonZeros() + mats.B_height.nonZeros()) +
                   mats.C_height.nonZeros());
    auto scatter = [&saddle](const SpMat& m, Eigen::Index row0, Eigen::Index col0, double scale) {
        for (int row = 0; row < m.outerSize(); ++row) {
            for (SpMat::InnerIterator it(m, row); it; ++it) {
                saddle.emplace_back(row0 + it.row(), col0 + it.col(), scale * it.value());
            }
        }
    };
    scatter(mats.A_height, 0, 0, 1.0);
    scatter(mats.B_height, 0, nv, 1.0);
    scatter(mats.B_height, nv, 0, 1.0);
    scatter(mats.C_height, nv, nv, -1.0);
    Eigen::SparseMatrix<double> saddle_mat(2 * nv, 2 * nv);
    saddle_mat.setFromTriplets(saddle.begin(), saddle.end());
    mats.saddle_lu = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    mats.saddle_lu->compute(saddle_mat);
    if (mats.saddle_lu->info() != Eigen::Success) {
        throw SolveFailure("scheme: saddle factorization failed");
    }
    return mats;
}

Vec SchemeMatrices::poisson_solve(const Vec& b, double rel_tol, int max_iter, int* iters) const {
    LinOp precond = [this](const Vec& in, Vec& out) {
        Vec rhs = in;
        rhs[0] = 0.0;
        out = poisson->solve(rhs);
        out.array() -= out.mean();
    };
    CgOptions opt;
    opt.tol = rel_tol;
    opt.max_iter = max_iter;
    opt.preconditioner = &precond;
    opt.null_space = NullSpace::constants;
    // Callers pass right-hand sides that are zero-sum exactly in exact
    // arithmetic; project out the rounding-level mean so the compatibility
    // check never trips on cancellation noise.
    Vec projected = b;
    remove_mean(projected);
    auto [y, report] = cg_solve(K, projected, opt);
    if (!report.converged) {
        throw SolveFailure("poisson solve: CG did not converge", report);
    }
    if (iters) *iters += report.iterations;
    return y;
}

HeightStepResult height_step(const SimState& state, const ModelParams& params,
                             const SchemeMatrices& mats, const SolverSettings& settings) {
    const Eigen::Index n = mats.mesh.vertex_count();
    const double mean_h = state.h.mean();

    // The mean of h is conserved exactly by the scheme, so solve for the
    // mean-free part only; the MINRES iterates then stay in the zero-mean
    // subspace and mass conservation holds to rounding.
    Vec h_fluct = state.h.array() - mean_h;
    Vec rhs(2 * n);
    rhs.head(n) = (mats.M.csr * h_fluct) / params.tau;
    if (!params.coupling_is_zero()) {
        rhs.head(n) += mats.K_L.csr * state.u;
    }
    rhs.tail(n).setZero();

    BlockSaddleMatrix S{&mats.A_height, &mats.B_height, &mats.C_height};
    LinOp precond = [&mats, n](const Vec& in, Vec& out) {
        out.resize(2 * n);
        Vec z1 = mats.height_A->solve(in.head(n));
        z1.array() -= z1.mean();
        Vec z2 = mats.height_S->solve(in.tail(n));
        z2.array() -= z2.mean();
        out.head(n) = z1;
        out.tail(n) = z2;
    };

    // Warm start from the direct factorization, then let MINRES certify the
    // residual and polish the correction if rounding left anything behind.
    Vec x = mats.saddle_lu->solve(rhs);
    x.head(n).array() -= x.head(n).mean();
    x.tail(n).array() -= x.tail(n).mean();
    Vec residual(2 * n);
    S.apply(x, residual);
    residual = rhs - residual;
    const double rhs_norm = rhs.norm();
    const double target = settings.minres_tol * rhs_norm;

    SolveReport report;
    if (residual.norm() <= target || rhs_norm == 0.0) {
        report.converged = true;
        report.residual = rhs_norm == 0.0 ? 0.0 : residual.norm() / rhs_norm;
    } else {
        MinresOptions opt;
        opt.tol = target / residual.norm();
        opt.max_iter = settings.max_minres;
        opt.preconditioner = &precond;
        auto [dx, correction_report] = minres_solve(S, residual, opt);
        x += dx;
        x.head(n).array() -= x.head(n).mean();
        x.tail(n).array() -= x.tail(n).mean();
        report = correction_report;
        S.apply(x, residual);
        report.residual = (rhs - residual).norm() / rhs_norm;
        report.converged = report.residual <= settings.minres_tol;
        if (!report.converged) {
            throw SolveFailure("height step: MINRES did not converge", report);
        }
    }

    HeightStepResult out;
    out.h = x.head(n);
    out.h.array() -= out.h.mean();  // rounding guard; the subsystem is mean-free
    out.h.array() += mean_h;
    out.g = x.tail(n);
    out.g.array() -= out.g.mean();
    out.report = report;
    return out;
}

double reduced_functional(const Vec& u, const Vec& u_n, const Vec& h_next,
                          const ModelParams& params, const SchemeMatrices& mats,
                          double inner_rel_tol) {
    Vec v = u - u_n;
    v.array() -= v.mean();
    const Vec Mv = mats.M.csr * v;
    double quad = 0.0;
    if (Mv.norm() > 0.0) {
        const Vec y = mats.poisson_solve(Mv, inner_rel_tol, 10000);
        quad = 0.5 / params.tau * v.dot(mats.M.csr * y);
    }
    Vec w1;
    eval_split_fields(params.potential, u, &w1, nullptr, nullptr);
    Vec dw2_n;
    eval_split_fields(params.potential, u_n, nullptr, nullptr, nullptr, nullptr, &dw2_n);
    double value = quad + 0.5 * params.eps * u.dot(mats.K.csr * u) +
                   (mats.lumped_mass.array() * w1.array()).sum() / params.eps +
                   (mats.lumped_mass.array() * dw2_n.array() * u.array()).sum() / params.eps;
    if (!params.coupling_is_zero()) {
        value -= u.dot(mats.K_L.csr * h_next);
    }
    return value;
}

ChStepResult ch_step(const SimState& state, const Vec& h_next, const ModelParams& params,
                     const SchemeMatrices& mats, const SolverSettings& settings,
                     const std::optional<Vec>& initial_guess) {
    const Eigen::Index n = mats.mesh.vertex_count();
    const Vec& u_n = state.u;
    const double target_mean = u_n.mean();
    const double inv_tau = 1.0 / params.tau;
    const double inv_eps = 1.0 / params.eps;
    const double inner_tol = 0.01 * settings.outer_cg_tol;

    // Explicit (concave) derivative and coupling load are frozen over the step.
    Vec dw2_n;
    eval_split_fields(params.potential, u_n, nullptr, nullptr, nullptr, nullptr, &dw2_n);
    Vec coupling_load = Vec::Zero(n);
    if (!params.coupling_is_zero()) {
        coupling_load = mats.K_L.csr * h_next;
    }

    Vec u = initial_guess.value_or(u_n);
    u.array() += target_mean - u.mean();

    ChStepResult result;
    Vec dw1, ddw1;

    // Local potential + coupling part of J; the H^{-1} term is tracked through
    // the accumulated solve y = (-Delta_k)^{-1} M (u - u_n), which updates
    // linearly along Newton steps so the line search needs no extra solves.
    Vec w1_buf;
    auto local_with_Ku = [&](const Vec& cand, const Vec& Ku) {
        eval_split_fields(params.potential, cand, &w1_buf, nullptr, nullptr);
        const double pot =
            (mats.lumped_mass.array() * (w1_buf.array() + dw2_n.array() * cand.array())).sum();
        return 0.5 * params.eps * cand.dot(Ku) + inv_eps * pot - cand.dot(coupling_load);
    };
    auto local_part = [&](const Vec& cand) { return local_with_Ku(cand, mats.K.csr * cand); };

    Vec v = u - u_n;
    Vec y = mats.poisson_solve(mats.M.csr * v, 1e-10, settings.max_inner_cg,
                               &result.inner_cg_iterations);
    for (int newton_it = 0;; ++newton_it) {
        const Vec Mv = mats.M.csr * v;
        const Vec My = mats.M.csr * y;

        eval_split_fields(params.potential, u, nullptr, &dw1, nullptr);
        const Vec Ku = mats.K.csr * u;
        Vec grad = inv_tau * My + params.eps * Ku +
                   inv_eps * (mats.lumped_mass.array() * (dw1 + dw2_n).array()).matrix() -
                   coupling_load;
        const double lambda_mult = grad.sum() / mats.lumped_mass.sum();
        Vec r2 = grad - lambda_mult * mats.lumped_mass;
        remove_mean(r2);  // zero-sum exactly by the multiplier identity
        Vec r1 = inv_tau * (Mv - mats.K.csr * y);
        const double res = std::sqrt(r1.squaredNorm() + r2.squaredNorm());
        result.residual = res;
        result.newton_iterations = newton_it;

        if (res <= settings.newton_tol) {
            result.u = u;
            result.mu = Vec::Constant(n, lambda_mult) - inv_tau * y;
            return result;
        }
        if (newton_it >= settings.max_newton) {
            throw SolveFailure("ch step: Newton did not converge within max iterations");
        }

        // Newton direction from the reduced Hessian on the zero-mean subspace.
        eval_split_fields(params.potential, u, nullptr, nullptr, &ddw1);
        LinOp hessian = [&](const Vec& d, Vec& out) {
            const Vec Md = mats.M.csr * d;
            const Vec yd = mats.poisson_solve(Md, inner_tol, settings.max_inner_cg,
                                              &result.inner_cg_iterations);
            out = inv_tau * (mats.M.csr * yd) + params.eps * (mats.K.csr * d) +
                  inv_eps * (mats.lumped_mass.array() * ddw1.array() * d.array()).matrix();
        };
        Vec jacobi_diag = params.eps * mats.K.csr.diagonal() +
                          inv_eps * (mats.lumped_mass.array() * ddw1.array()).matrix();
        LinOp jacobi = [&jacobi_diag](const Vec& in, Vec& out) {
            out = in.cwiseQuotient(jacobi_diag);
        };
        CgOptions cg_opt;
        cg_opt.tol = settings.outer_cg_tol;
        cg_opt.max_iter = settings.max_outer_cg;
        cg_opt.preconditioner = &jacobi;
        cg_opt.null_space = NullSpace::constants;
        auto [d, cg_report] = cg_solve(hessian, -r2, cg_opt);
        result.outer_cg_iterations += cg_report.iterations;
        if (cg_report.iterations == 0) {
            throw SolveFailure("ch step: Hessian solve produced no direction", cg_report);
        }

        const Vec y_d = mats.poisson_solve(mats.M.csr * d, 1e-10, settings.max_inner_cg,
                                           &result.inner_cg_iterations);
        double t = 1.0;
        const double slope = r2.dot(d);
        const double j0_local = local_with_Ku(u, Ku);
        if (-slope > 1e-12 * (1.0 + std::abs(j0_local))) {
            // Armijo backtracking on J; the quadratic H^{-1} term expands
            // exactly in t through the accumulated solves.
            const Vec My_d = mats.M.csr * y_d;
            const double q0 = v.dot(My);
            const double q1 = v.dot(My_d) + d.dot(My);
            const double q2 = d.dot(My_d);
            const double j0 = 0.5 * inv_tau * q0 + j0_local;
            bool accepted = false;
            while (t >= 1e-6) {
                const double quad = 0.5 * inv_tau * (q0 + t * q1 + t * t * q2);
                if (quad + local_part(u + t * d) <= j0 + 1e-4 * t * slope) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) {
                throw SolveFailure("ch step: line search failed below the step floor");
            }
        }
        u += t * d;
        u.array() += target_mean - u.mean();  // keep the constraint exact
        v = u - u_n;
        y += t * y_d;
    }
}

std::pair<SimState, StepStats> advance(const SimState& state, const ModelParams& params,
                                       const SchemeMatrices& mats, const SolverSettings& settings,
                                       const std::optional<Vec>& ch_initial_guess,
                                       const double* energy_before) {
    StepStats stats;
    stats.energy_before =
        energy_before ? *energy_before : discrete_energy(state, params, mats).total;

    HeightStepResult height = height_step(state, params, mats, settings);
    stats.minres_iterations = height.report.iterations;
    stats.minres_residual = height.report.residual;

    ChStepResult ch = ch_step(state, height.h, params, mats, settings, ch_initial_guess);
    stats.newton_iterations = ch.newton_iterations;
    stats.outer_cg_iterations = ch.outer_cg_iterations;
    stats.inner_cg_iterations = ch.inner_cg_iterations;
    stats.newton_residual = ch.residual;

    SimState next;
    next.u = std::move(ch.u);
    next.mu = std::move(ch.mu);
    next.h = std::move(height.h);
    next.g = std::move(height.g);
    next.step = state.step + 1;
    next.t = params.tau * static_cast<double>(next.step);

    stats.energy_after = discrete_energy(next, params, mats).total;
    return {std::move(next), stats};
}

std::pair<Vec, Vec> residual_weak_form(const Vec& u_next, const Vec& mu_next, const Vec& h_next,
                                       const SimState& state, const ModelParams& params,
                                       const SchemeMatrices& mats) {
    Vec dw1, dw2_n;
    eval_split_fields(params.potential, u_next, nullptr, &dw1, nullptr);
    eval_split_fields(params.potential, state.u, nullptr, nullptr, nullptr, nullptr, &dw2_n);
    Vec r1 = (mats.M.csr * (u_next - state.u)) / params.tau + mats.K.csr * mu_next;
    Vec r2 = -(mats.M.csr * mu_next) + params.eps * (mats.K.csr * u_next) +
             (mats.lumped_mass.array() * (dw1 + dw2_n).array()).matrix() / params.eps;
    if (!params.coupling_is_zero()) {
        r2 -= mats.K_L.csr * h_next;
    }
    return {std::move(r1), std::move(r2)};
}

}  // namespace membrane
