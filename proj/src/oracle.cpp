#include "membrane/oracle.hpp"

#include <cmath>

namespace membrane::oracle {

namespace {

void require_small(const TorusMesh& mesh) {
    if (mesh.n > 16) {
        throw std::invalid_argument("oracle: mesh size limited to n <= 16");
    }
}

// Straight per-triangle quadrature from the vertex coordinates. Triangles
// crossing the periodic boundary are unwrapped so that geometry, not index
// arithmetic, drives the element matrices.
struct TriangleGeometry {
    Eigen::Vector2d p[3];
};

TriangleGeometry unwrapped_triangle(const TorusMesh& mesh, size_t t) {
    const auto& tri = mesh.triangles[t];
    TriangleGeometry geo;
    for (int k = 0; k < 3; ++k) {
        geo.p[k] = {mesh.x_of(tri[k]), mesh.y_of(tri[k])};
    }
    // Unwrap relative to the first vertex: each coordinate differs by less
    // than half the period within one simplex.
    for (int k = 1; k < 3; ++k) {
        for (int c = 0; c < 2; ++c) {
            double d = geo.p[k][c] - geo.p[0][c];
            if (d > 0.5) geo.p[k][c] -= 1.0;
            if (d < -0.5) geo.p[k][c] += 1.0;
        }
    }
    return geo;
}

}  // namespace

Eigen::MatrixXd dense_mass(const TorusMesh& mesh) {
    const int nv = mesh.vertex_count();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nv, nv);
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto geo = unwrapped_triangle(mesh, t);
        const double twice_area = std::abs((geo.p[1] - geo.p[0]).x() * (geo.p[2] - geo.p[0]).y() -
                                           (geo.p[1] - geo.p[0]).y() * (geo.p[2] - geo.p[0]).x());
        const double area = 0.5 * twice_area;
        const auto& tri = mesh.triangles[t];
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                M(tri[r], tri[c]) += (r == c ? 2.0 : 1.0) * area / 12.0;
            }
        }
    }
    return M;
}

Eigen::MatrixXd dense_stiffness(const TorusMesh& mesh, const Eigen::Matrix2d& A) {
    const int nv = mesh.vertex_count();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv, nv);
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto geo = unwrapped_triangle(mesh, t);
        const Eigen::Vector2d e1 = geo.p[1] - geo.p[0];
        const Eigen::Vector2d e2 = geo.p[2] - geo.p[0];
        const double twice_area = e1.x() * e2.y() - e1.y() * e2.x();
        const double area = 0.5 * std::abs(twice_area);
        // grad phi_k = rot90(p_{k+2} - p_{k+1}) / (2 |T|), rot90(x, y) = (-y, x).
        Eigen::Vector2d grads[3];
        for (int k = 0; k < 3; ++k) {
            const Eigen::Vector2d edge = geo.p[(k + 2) % 3] - geo.p[(k + 1) % 3];
            grads[k] = Eigen::Vector2d(-edge.y(), edge.x()) / twice_area;
        }
        const auto& tri = mesh.triangles[t];
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                K(tri[r], tri[c]) += area * grads[c].dot(A * grads[r]);
            }
        }
    }
    return K;
}

namespace {

// Dense workspace for the descent oracles: matrices, the pseudo-inverse of
// the stiffness on the mean-free subspace, and the lumped mass diagonal.
struct DenseWorkspace {
    Eigen::MatrixXd M, K, K_G, K_L, K_pinv, MKpM;
    Eigen::VectorXd lumped;

    static DenseWorkspace build(const TorusMesh& mesh, const ModelParams& params) {
        DenseWorkspace w;
        const int nv = mesh.vertex_count();
        w.M = dense_mass(mesh);
        w.K = dense_stiffness(mesh, Eigen::Matrix2d::Identity());
        w.K_G = dense_stiffness(mesh, params.G);
        w.K_L = params.coupling_is_zero() ? Eigen::MatrixXd::Zero(nv, nv)
                                          : dense_stiffness(mesh, params.L);
        w.lumped = w.M.rowwise().sum();
        // Pseudo-inverse of K via the grounded system plus mean projection.
        Eigen::MatrixXd grounded = w.K;
        grounded.row(0).setZero();
        grounded.col(0).setZero();
        grounded(0, 0) = 1.0;
        Eigen::MatrixXd inv = grounded.inverse();
        Eigen::MatrixXd projector =
            Eigen::MatrixXd::Identity(nv, nv) - Eigen::MatrixXd::Constant(nv, nv, 1.0 / nv);
        Eigen::MatrixXd zero_row = Eigen::MatrixXd::Identity(nv, nv);
        zero_row(0, 0) = 0.0;
        w.K_pinv = projector * inv * zero_row * projector;
        w.MKpM = w.M * w.K_pinv * w.M;
        return w;
    }

    double lumped_potential(const PotentialSpec& spec, const Eigen::VectorXd& u,
                            bool total) const {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const SplitEval e = eval_split(spec, u[i]);
            sum += lumped[i] * (total ? e.total() : e.w1);
        }
        return sum;
    }
};

Eigen::VectorXd tangent_project(const Eigen::VectorXd& v) {
    return v.array() - v.mean();
}

// Largest eigenvalue estimate by power iteration (deterministic start).
double spectral_bound(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                      Eigen::Index n) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    v[0] = 2.0;  // avoid starting orthogonal to the top eigenvector
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 40; ++it) {
        Eigen::VectorXd w = apply(v);
        lambda = std::abs(v.dot(w));
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
    }
    return lambda;
}

}  // namespace

Vec minimize_reduced_functional(const Vec& u_prev, const Vec& h_next, const ModelParams& params,
                                const TorusMesh& mesh, const OracleConfig& config) {
    require_small(mesh);
    const DenseWorkspace w = DenseWorkspace::build(mesh, params);
    const double inv_tau = 1.0 / params.tau;
    const double inv_eps = 1.0 / params.eps;

    Eigen::VectorXd dw2_prev(u_prev.size());
    for (Eigen::Index i = 0; i < u_prev.size(); ++i) {
        dw2_prev[i] = eval_split(params.potential, u_prev[i]).dw2;
    }
    const Eigen::VectorXd coupling = w.K_L * h_next;

    auto value = [&](const Eigen::VectorXd& u) {
        const Eigen::VectorXd v = u - u_prev;
        double j = 0.5 * inv_tau * v.dot(w.MKpM * v) + 0.5 * params.eps * u.dot(w.K * u) +
                   inv_eps * w.lumped_potential(params.potential, u, false) +
                   inv_eps * (w.lumped.array() * dw2_prev.array() * u.array()).sum() -
                   u.dot(coupling);
        return j;
    };
    auto gradient = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd dw1(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            dw1[i] = eval_split(params.potential, u[i]).dw1;
        }
        Eigen::VectorXd g = inv_tau * (w.MKpM * (u - u_prev)) + params.eps * (w.K * u) +
                            inv_eps * (w.lumped.array() * (dw1 + dw2_prev).array()).matrix() -
                            coupling;
        return g;
    };

    // Curvature bound for the blind-step regime: the quadratic part is
    // u-independent, the potential part is bounded by the largest nodal
    // curvature along the way.
    const double quad_bound = spectral_bound(
        [&](const Eigen::VectorXd& x) {
            return Eigen::VectorXd(inv_tau * (w.MKpM * x) + params.eps * (w.K * x));
        },
        u_prev.size());

    Eigen::VectorXd u = u_prev;
    double step = 1.0;
    for (long it = 0; it < config.max_iterations; ++it) {
        const Eigen::VectorXd g = tangent_project(gradient(u));
        const double gnorm = g.norm();
        if (gnorm <= config.tol) return u;

        const double j0 = value(u);
        if (1e-4 * step * gnorm * gnorm <= 1e-13 * (1.0 + std::abs(j0))) {
            // The Armijo comparison is vacuous at this scale. A gradient step
            // bounded by the inverse curvature still decreases the strictly
            // convex J in exact arithmetic, so take it unconditionally.
            double curv_max = 0.0;
            for (Eigen::Index i = 0; i < u.size(); ++i) {
                curv_max = std::max(curv_max,
                                    w.lumped[i] * convex_curvature(params.potential, u[i]));
            }
            const double safe = 1.0 / (quad_bound + inv_eps * curv_max);
            Eigen::VectorXd trial = u - std::min(step, safe) * g;
            u = trial.array() + (u.mean() - trial.mean());
            continue;
        }
        bool accepted = false;
        for (int back = 0; back < 60; ++back) {
            Eigen::VectorXd trial = u - step * g;
            trial = trial.array() + (u.mean() - trial.mean());
            if (value(trial) <= j0 - 1e-4 * step * gnorm * gnorm) {
                u = std::move(trial);
                step *= 2.0;  // allow growth again after a success
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            throw SolveFailure("oracle: descent line search stalled");
        }
    }
    throw SolveFailure("oracle: iteration cap reached before the gradient tolerance");
}

CoupledMinimum minimize_coupled_functional(const Vec& u_prev, const Vec& h_prev,
                                           const ModelParams& params, const TorusMesh& mesh,
                                           const OracleConfig& config) {
    require_small(mesh);
    if (params.tau > 1e-2) {
        throw std::invalid_argument("oracle: coupled functional requires tau <= 1e-2");
    }
    const DenseWorkspace w = DenseWorkspace::build(mesh, params);
    const double inv_tau = 1.0 / params.tau;
    const double inv_eps = 1.0 / params.eps;
    const Eigen::MatrixXd Minv = w.M.inverse();
    const Eigen::MatrixXd bending = w.K * Minv * w.K;  // |Delta_h|^2 realized through g = M^{-1} K h

    auto energy = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& h) {
        return inv_eps * w.lumped_potential(params.potential, u, true) +
               0.5 * params.eps * u.dot(w.K * u) + 0.5 * h.dot(w.K_G * h) +
               0.5 * params.kappa * h.dot(bending * h) - u.dot(w.K_L * h);
    };
    auto jn = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& h) {
        const Eigen::VectorXd v = u - u_prev;
        const Eigen::VectorXd dh = h - h_prev;
        return 0.5 * inv_tau * v.dot(w.MKpM * v) + 0.5 * inv_tau * dh.dot(w.M * dh) +
               energy(u, h);
    };
    auto grad_u = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& h) {
        Eigen::VectorXd dw(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            dw[i] = eval_split(params.potential, u[i]).dtotal();
        }
        Eigen::VectorXd g = inv_tau * (w.MKpM * (u - u_prev)) + params.eps * (w.K * u) +
                            inv_eps * (w.lumped.array() * dw.array()).matrix() - w.K_L * h;
        return g;
    };
    auto grad_h = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& h) {
        Eigen::VectorXd g = inv_tau * (w.M * (h - h_prev)) + w.K_G * h +
                            params.kappa * (bending * h) - w.K_L * u;
        return g;
    };

    const double quad_bound_u = spectral_bound(
        [&](const Eigen::VectorXd& x) {
            return Eigen::VectorXd(inv_tau * (w.MKpM * x) + params.eps * (w.K * x));
        },
        u_prev.size());
    const double bound_h = spectral_bound(
        [&](const Eigen::VectorXd& x) {
            return Eigen::VectorXd(inv_tau * (w.M * x) + w.K_G * x +
                                   params.kappa * (bending * x));
        },
        h_prev.size());

    Eigen::VectorXd u = u_prev;
    Eigen::VectorXd h = h_prev;
    double step_u = 1.0, step_h = 1.0;
    for (long it = 0; it < config.max_iterations; ++it) {
        const Eigen::VectorXd gu = tangent_project(grad_u(u, h));
        const Eigen::VectorXd gh = grad_h(u, h);
        const double gnorm = std::sqrt(gu.squaredNorm() + gh.squaredNorm());
        if (gnorm <= config.tol) {
            CoupledMinimum result;
            result.u = u;
            result.h = h;
            result.value = jn(u, h);
            result.gradient_norm = gnorm;
            return result;
        }

        // Alternate descent in u (mean-constrained) and h: Armijo while the
        // decrease is measurable, curvature-bounded steps below that floor.
        double j0 = jn(u, h);
        if (1e-4 * step_u * gu.squaredNorm() <= 1e-13 * (1.0 + std::abs(j0))) {
            double curv_max = 0.0;
            for (Eigen::Index i = 0; i < u.size(); ++i) {
                curv_max = std::max(curv_max,
                                    w.lumped[i] * convex_curvature(params.potential, u[i]));
            }
            const double safe = 1.0 / (quad_bound_u + inv_eps * curv_max);
            Eigen::VectorXd trial = u - std::min(step_u, safe) * gu;
            u = trial.array() + (u.mean() - trial.mean());
        } else {
            for (int back = 0; back < 60; ++back) {
                Eigen::VectorXd trial = u - step_u * gu;
                trial = trial.array() + (u.mean() - trial.mean());
                if (jn(trial, h) <= j0 - 1e-4 * step_u * gu.squaredNorm()) {
                    u = std::move(trial);
                    step_u *= 2.0;
                    break;
                }
                step_u *= 0.5;
                if (back == 59) throw SolveFailure("oracle: coupled u-descent stalled");
            }
        }
        j0 = jn(u, h);
        if (1e-4 * step_h * gh.squaredNorm() <= 1e-13 * (1.0 + std::abs(j0))) {
            h -= std::min(step_h, 1.0 / bound_h) * gh;
        } else {
            for (int back = 0; back < 60; ++back) {
                Eigen::VectorXd trial = h - step_h * gh;
                if (jn(u, trial) <= j0 - 1e-4 * step_h * gh.squaredNorm()) {
                    h = std::move(trial);
                    step_h *= 2.0;
                    break;
                }
                step_h *= 0.5;
                if (back == 59) throw SolveFailure("oracle: coupled h-descent stalled");
            }
        }
    }
    throw SolveFailure("oracle: coupled iteration cap reached");
}

std::pair<Vec, Vec> dense_height_solve(const SimState& state, const ModelParams& params,
                                       const TorusMesh& mesh) {
    require_small(mesh);
    const DenseWorkspace w = DenseWorkspace::build(mesh, params);
    const int nv = mesh.vertex_count();
    Eigen::MatrixXd S(2 * nv, 2 * nv);
    S.topLeftCorner(nv, nv) = w.M / params.tau + w.K_G;
    S.topRightCorner(nv, nv) = params.kappa * w.K;
    S.bottomLeftCorner(nv, nv) = params.kappa * w.K;
    S.bottomRightCorner(nv, nv) = -params.kappa * w.M;

    Eigen::VectorXd rhs(2 * nv);
    rhs.head(nv) = w.M * state.h / params.tau + w.K_L * state.u;
    rhs.tail(nv).setZero();

    const Eigen::VectorXd x = dense_solve(S, rhs);
    return {x.head(nv), x.tail(nv)};
}

}  // namespace membrane::oracle
