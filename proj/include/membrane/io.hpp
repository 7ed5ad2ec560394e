#pragma once

#include <string>

#include "membrane/linalg.hpp"

namespace membrane {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Binary PGM (magic P5, maxval 255) of a nodal field on the n x n vertex
/// grid, top row j = n-1. Pixel = clamp(round(255 (u+1)/2), 0, 255) with
/// round half away from zero.
void write_pgm(const Vec& u, int n, const std::string& path);

/// Row-major little-endian 64-bit floats plus a one-line sidecar header
/// `<path>.hdr` of the form `n=<n> field=<name> step=<k> time=<t>`.
void write_raw(const Vec& u, int n, const std::string& field, long step, double time,
               const std::string& path);

struct RawField {
    Vec data;
    int n = 0;
    std::string field;
    long step = 0;
    double time = 0.0;
};

RawField read_raw(const std::string& path);

/// Legacy-ASCII VTK STRUCTURED_POINTS file carrying u and h as separate
/// scalar point fields on the vertex grid.
void write_vtk(const Vec& u, const Vec& h, int n, double spacing, const std::string& path);

/// Shortest decimal round-trip formatting ("%.17g") used by every text
/// artifact so reruns are byte-identical.
std::string format_double(double v);

}  // namespace membrane
