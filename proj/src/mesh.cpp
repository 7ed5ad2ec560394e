#include "membrane/mesh.hpp"

#include <stdexcept>

namespace membrane {

TorusMesh build_torus_mesh(int n) {
    if (n < 4) {
        throw std::invalid_argument("torus mesh requires n >= 4, got n = " + std::to_string(n));
    }
    TorusMesh mesh;
    mesh.n = n;
    mesh.hx = 1.0 / n;
    mesh.triangles.reserve(static_cast<size_t>(2) * n * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int a = mesh.vertex_index(i, j);
            const int b = mesh.vertex_index(i + 1, j);
            const int c = mesh.vertex_index(i + 1, j + 1);
            const int d = mesh.vertex_index(i, j + 1);
            // Cell diagonal runs lower-left to upper-right (a-c).
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }
    return mesh;
}

namespace {

// Constant P1 gradients on the two congruence classes of triangles, scaled by
// the grid spacing outside. Lower triangle (0,0)-(h,0)-(h,h); upper triangle
// (0,0)-(h,h)-(0,h).
constexpr double kLowerGrad[3][2] = {{-1.0, 0.0}, {1.0, -1.0}, {0.0, 1.0}};
constexpr double kUpperGrad[3][2] = {{0.0, -1.0}, {1.0, 0.0}, {-1.0, 1.0}};

}  // namespace

SparseMatrix assemble_mass(const TorusMesh& mesh, MassLumping lumping) {
    const int nv = mesh.vertex_count();
    const double area = 0.5 * mesh.hx * mesh.hx;

    std::vector<Eigen::Triplet<double>> triplets;
    if (lumping == MassLumping::lumped) {
        // Row-sum lumping: each triangle contributes area/3 per vertex.
        Vec diag = Vec::Zero(nv);
        for (const auto& tri : mesh.triangles) {
            for (int v : tri) diag[v] += area / 3.0;
        }
        triplets.reserve(nv);
        for (int i = 0; i < nv; ++i) triplets.emplace_back(i, i, diag[i]);
    } else {
        triplets.reserve(mesh.triangles.size() * 9);
        for (const auto& tri : mesh.triangles) {
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    const double value = (r == c ? 2.0 : 1.0) * area / 12.0;
                    triplets.emplace_back(tri[r], tri[c], value);
                }
            }
        }
    }

    SparseMatrix out;
    out.csr.resize(nv, nv);
    out.csr.setFromTriplets(triplets.begin(), triplets.end());
    out.csr.makeCompressed();
    out.symmetric = true;
    return out;
}

SparseMatrix assemble_stiffness(const TorusMesh& mesh, const Eigen::Matrix2d& A) {
    const double scale = std::max({std::abs(A(0, 0)), std::abs(A(0, 1)), std::abs(A(1, 0)),
                                   std::abs(A(1, 1)), 1e-300});
    if (std::abs(A(0, 1) - A(1, 0)) > 1e-12 * scale) {
        throw std::invalid_argument("stiffness coefficient matrix must be symmetric");
    }
    if (A(0, 0) <= 0.0 || A.determinant() <= 0.0) {
        throw std::invalid_argument("stiffness coefficient matrix must be positive definite");
    }

    const int nv = mesh.vertex_count();
    const double area = 0.5 * mesh.hx * mesh.hx;
    const double inv_h = 1.0 / mesh.hx;

    // Element matrices for the two triangle shapes: area * (A grad_i) . grad_j.
    double lower[3][3], upper[3][3];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            Eigen::Vector2d gl_r(kLowerGrad[r][0] * inv_h, kLowerGrad[r][1] * inv_h);
            Eigen::Vector2d gl_c(kLowerGrad[c][0] * inv_h, kLowerGrad[c][1] * inv_h);
            Eigen::Vector2d gu_r(kUpperGrad[r][0] * inv_h, kUpperGrad[r][1] * inv_h);
            Eigen::Vector2d gu_c(kUpperGrad[c][0] * inv_h, kUpperGrad[c][1] * inv_h);
            lower[r][c] = area * gl_c.dot(A * gl_r);
            upper[r][c] = area * gu_c.dot(A * gu_r);
        }
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.triangles.size() * 9);
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double(*elem)[3] = (t % 2 == 0) ? lower : upper;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                triplets.emplace_back(tri[r], tri[c], elem[r][c]);
            }
        }
    }

    SparseMatrix out;
    out.csr.resize(nv, nv);
    out.csr.setFromTriplets(triplets.begin(), triplets.end());
    out.csr.makeCompressed();
    out.symmetric = true;
    return out;
}

}  // namespace membrane
