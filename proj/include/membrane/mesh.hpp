#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "membrane/linalg.hpp"

namespace membrane {

/// Uniform Friedrichs-Keller triangulation of the flat torus, represented by
/// the unit square with periodic identification. Vertices live on an n-by-n
/// grid with spacing 1/n; vertex (i,j) sits at (i/n, j/n) and carries the
/// row-major index j*n + i. Every square cell is split along its lower-left
/// to upper-right diagonal, so each vertex belongs to exactly six triangles.
struct TorusMesh {
    int n = 0;
    double hx = 0.0;
    std::vector<std::array<int, 3>> triangles;

    int vertex_count() const { return n * n; }
    int triangle_count() const { return static_cast<int>(triangles.size()); }

    int vertex_index(int i, int j) const {
        i = ((i % n) + n) % n;
        j = ((j % n) + n) % n;
        return j * n + i;
    }
    /// Inverse of vertex_index: id -> (i, j).
    std::pair<int, int> vertex_coords(int id) const { return {id % n, id / n}; }

    double x_of(int id) const { return (id % n) * hx; }
    double y_of(int id) const { return (id / n) * hx; }
};

enum class MassLumping { consistent, lumped };

/// Builds the periodic triangulation. Throws std::invalid_argument for n < 4,
/// where the periodic identification degenerates.
TorusMesh build_torus_mesh(int n);

/// P1 mass matrix; row-sum lumped diagonal variant when requested.
SparseMatrix assemble_mass(const TorusMesh& mesh, MassLumping lumping);

/// Stiffness matrix of the form (A grad u, grad v) for a symmetric positive
/// definite 2x2 matrix A. A = identity yields the plain Laplacian stencil.
/// Throws std::invalid_argument when A is not symmetric positive definite.
SparseMatrix assemble_stiffness(const TorusMesh& mesh, const Eigen::Matrix2d& A);

}  // namespace membrane
