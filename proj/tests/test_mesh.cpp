#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <random>

#include "membrane/mesh.hpp"

using namespace membrane;

namespace {

// Brute-force dense assembly over one vertex patch / the whole mesh, built
// from nothing but the element formulas on explicit coordinates. Kept local
// so the production scatter path is checked against an independent route.
Eigen::MatrixXd brute_force_stiffness(const TorusMesh& mesh, const Eigen::Matrix2d& A) {
    const int nv = mesh.vertex_count();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv, nv);
    for (const auto& tri : mesh.triangles) {
        Eigen::Vector2d p[3];
        for (int k = 0; k < 3; ++k) p[k] = {mesh.x_of(tri[k]), mesh.y_of(tri[k])};
        for (int k = 1; k < 3; ++k) {  // unwrap periodic images
            for (int c = 0; c < 2; ++c) {
                if (p[k][c] - p[0][c] > 0.5) p[k][c] -= 1.0;
                if (p[k][c] - p[0][c] < -0.5) p[k][c] += 1.0;
            }
        }
        const double twice_area =
            (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
        Eigen::Vector2d grads[3];
        for (int k = 0; k < 3; ++k) {
            const Eigen::Vector2d e = p[(k + 2) % 3] - p[(k + 1) % 3];
            grads[k] = Eigen::Vector2d(-e.y(), e.x()) / twice_area;
        }
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                K(tri[r], tri[c]) += 0.5 * std::abs(twice_area) * grads[c].dot(A * grads[r]);
            }
        }
    }
    return K;
}

}  // namespace

TEST_CASE("torus mesh construction") {
    SUBCASE("paper-scale mesh has the documented counts") {
        const TorusMesh mesh = build_torus_mesh(160);
        CHECK(mesh.vertex_count() == 25600);
        CHECK(mesh.triangle_count() == 51200);
    }

    SUBCASE("smallest admissible mesh") {
        const TorusMesh mesh = build_torus_mesh(4);
        CHECK(mesh.vertex_count() == 16);
        CHECK(mesh.triangle_count() == 32);
        std::vector<int> uses(16, 0);
        for (const auto& tri : mesh.triangles) {
            for (int v : tri) ++uses[v];
        }
        for (int v = 0; v < 16; ++v) CHECK(uses[v] == 6);
    }

    SUBCASE("below the precondition") {
        CHECK_THROWS_AS(build_torus_mesh(3), std::invalid_argument);
    }

    SUBCASE("every vertex belongs to exactly six triangles, every edge to two") {
        const TorusMesh mesh = build_torus_mesh(8);
        std::vector<int> uses(mesh.vertex_count(), 0);
        std::map<std::pair<int, int>, int> edge_uses;
        for (const auto& tri : mesh.triangles) {
            for (int k = 0; k < 3; ++k) {
                ++uses[tri[k]];
                const int a = tri[k], b = tri[(k + 1) % 3];
                ++edge_uses[{std::min(a, b), std::max(a, b)}];
            }
        }
        for (int v : uses) CHECK(v == 6);
        for (const auto& [edge, count] : edge_uses) CHECK(count == 2);
    }

    SUBCASE("vertex coordinates are (i/n, j/n)") {
        const TorusMesh mesh = build_torus_mesh(5);
        CHECK(mesh.x_of(mesh.vertex_index(2, 3)) == doctest::Approx(2.0 / 5).epsilon(1e-15));
        CHECK(mesh.y_of(mesh.vertex_index(2, 3)) == doctest::Approx(3.0 / 5).epsilon(1e-15));
    }
}

TEST_CASE("mass matrix") {
    const TorusMesh mesh = build_torus_mesh(8);
    const double hx2 = mesh.hx * mesh.hx;

    SUBCASE("entries sum to the domain area") {
        for (auto lumping : {MassLumping::consistent, MassLumping::lumped}) {
            const SparseMatrix M = assemble_mass(mesh, lumping);
            double sum = 0.0;
            for (double v : M.values()) sum += v;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
        }
    }

    SUBCASE("lumped diagonal equals hx^2") {
        const SparseMatrix M = assemble_mass(mesh, MassLumping::lumped);
        CHECK(M.csr.nonZeros() == mesh.vertex_count());
        for (double v : M.values()) CHECK(v == doctest::Approx(hx2).epsilon(1e-14));
    }

    SUBCASE("consistent stencil: diagonal hx^2/2, six neighbors hx^2/12") {
        // One-patch element assembly oracle: vertex 0 sits in six triangles,
        // each contributing 2*area/12 on the diagonal and area/12 per edge.
        const SparseMatrix M = assemble_mass(mesh, MassLumping::consistent);
        for (int row = 0; row < mesh.vertex_count(); ++row) {
            int neighbors = 0;
            for (SpMat::InnerIterator it(M.csr, row); it; ++it) {
                if (it.col() == row) {
                    CHECK(it.value() == doctest::Approx(hx2 / 2).epsilon(1e-14));
                } else {
                    CHECK(it.value() == doctest::Approx(hx2 / 12).epsilon(1e-14));
                    ++neighbors;
                }
            }
            CHECK(neighbors == 6);
        }
    }

    SUBCASE("quadratic form matches per-triangle exact quadrature") {
        const SparseMatrix M = assemble_mass(mesh, MassLumping::consistent);
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (int probe = 0; probe < 20; ++probe) {
            Vec u(mesh.vertex_count());
            for (auto& x : u) x = dist(rng);
            // Exact integral of the squared P1 interpolant, triangle by
            // triangle: |T|/6 * (a^2+b^2+c^2+ab+ac+bc).
            double exact = 0.0;
            const double area = 0.5 * hx2;
            for (const auto& tri : mesh.triangles) {
                const double a = u[tri[0]], b = u[tri[1]], c = u[tri[2]];
                exact += area / 6.0 * (a * a + b * b + c * c + a * b + a * c + b * c);
            }
            const double quad = u.dot(M.csr * u);
            CHECK(quad == doctest::Approx(exact).epsilon(1e-13));
        }
    }
}

TEST_CASE("stiffness matrix") {
    const TorusMesh mesh = build_torus_mesh(4);

    SUBCASE("identity coefficients give the five-point stencil") {
        const SparseMatrix K = assemble_stiffness(mesh, Eigen::Matrix2d::Identity());
        const Eigen::MatrixXd dense = brute_force_stiffness(mesh, Eigen::Matrix2d::Identity());
        const Eigen::MatrixXd prod(K.csr);
        CHECK((prod - dense).cwiseAbs().maxCoeff() < 1e-13);

        for (int j = 0; j < mesh.n; ++j) {
            for (int i = 0; i < mesh.n; ++i) {
                const int id = mesh.vertex_index(i, j);
                CHECK(dense(id, id) == doctest::Approx(4.0).epsilon(1e-13));
                CHECK(dense(id, mesh.vertex_index(i + 1, j)) == doctest::Approx(-1.0));
                CHECK(dense(id, mesh.vertex_index(i, j + 1)) == doctest::Approx(-1.0));
                CHECK(std::abs(dense(id, mesh.vertex_index(i + 1, j + 1))) < 1e-14);
                CHECK(std::abs(dense(id, mesh.vertex_index(i - 1, j + 1))) < 1e-14);
            }
        }
    }

    SUBCASE("row sums vanish") {
        const SparseMatrix K = assemble_stiffness(mesh, Eigen::Matrix2d::Identity());
        const Vec row_sums = K.csr * Vec::Ones(mesh.vertex_count());
        CHECK(row_sums.cwiseAbs().maxCoeff() < 1e-14);
    }

    SUBCASE("linear in the coefficient matrix") {
        const SparseMatrix K1 = assemble_stiffness(mesh, Eigen::Matrix2d::Identity());
        for (double a : {0.01, 1.0, 10.0}) {
            const SparseMatrix Ka = assemble_stiffness(mesh, a * Eigen::Matrix2d::Identity());
            REQUIRE(Ka.csr.nonZeros() == K1.csr.nonZeros());
            for (int k = 0; k < Ka.csr.nonZeros(); ++k) {
                CHECK(Ka.csr.valuePtr()[k] ==
                      doctest::Approx(a * K1.csr.valuePtr()[k]).epsilon(1e-14));
            }
        }
    }

    SUBCASE("anisotropic coefficients match the brute-force route") {
        Eigen::Matrix2d A;
        A << 2.0, 0.3, 0.3, 1.4;
        const SparseMatrix K = assemble_stiffness(mesh, A);
        const Eigen::MatrixXd dense = brute_force_stiffness(mesh, A);
        CHECK((Eigen::MatrixXd(K.csr) - dense).cwiseAbs().maxCoeff() < 1e-13);
    }

    SUBCASE("invalid coefficient matrices are rejected") {
        Eigen::Matrix2d asym;
        asym << 1.0, 0.5, -0.5, 1.0;
        CHECK_THROWS_AS(assemble_stiffness(mesh, asym), std::invalid_argument);
        Eigen::Matrix2d indefinite;
        indefinite << 1.0, 0.0, 0.0, -1.0;
        CHECK_THROWS_AS(assemble_stiffness(mesh, indefinite), std::invalid_argument);
        CHECK_THROWS_AS(assemble_stiffness(mesh, Eigen::Matrix2d::Zero()), std::invalid_argument);
    }
}

TEST_CASE("assembled operators are symmetric positive semidefinite") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int n : {4, 8, 16}) {
        const TorusMesh mesh = build_torus_mesh(n);
        const SparseMatrix K = assemble_stiffness(mesh, Eigen::Matrix2d::Identity());
        const SparseMatrix M = assemble_mass(mesh, MassLumping::consistent);
        CHECK(symmetry_defect(K.csr) < 1e-14);
        CHECK(symmetry_defect(M.csr) < 1e-14);
        CHECK(K.symmetric);
        CHECK(M.symmetric);

        for (int probe = 0; probe < 100; ++probe) {
            Vec u(mesh.vertex_count());
            for (auto& x : u) x = dist(rng);
            const double quad = u.dot(K.csr * u);
            CHECK(quad >= -1e-12 * u.squaredNorm());
        }
        const Vec constant = Vec::Constant(mesh.vertex_count(), 3.7);
        CHECK(std::abs(constant.dot(K.csr * constant)) < 1e-12 * constant.squaredNorm());
        Vec nonconstant = constant;
        nonconstant[0] += 1.0;
        CHECK(nonconstant.dot(K.csr * nonconstant) > 1e-12);
    }
}
