#include "membrane/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace membrane {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_pgm(const Vec& u, int n, const std::string& path) {
    if (u.size() != static_cast<Eigen::Index>(n) * n) {
        throw std::invalid_argument("write_pgm: field size does not match n^2");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open `" + path + "` for writing");
    out << "P5\n" << n << " " << n << "\n255\n";
    std::vector<unsigned char> row(n);
    for (int j = n - 1; j >= 0; --j) {  // top row is j = n-1
        for (int i = 0; i < n; ++i) {
            const double scaled = std::round(255.0 * (u[j * n + i] + 1.0) / 2.0);
            row[i] = static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), n);
    }
    if (!out) throw IoError("write failed for `" + path + "`");
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "raw field files are little-endian; byte swapping is not implemented");

}  // namespace

void write_raw(const Vec& u, int n, const std::string& field, long step, double time,
               const std::string& path) {
    if (u.size() != static_cast<Eigen::Index>(n) * n) {
        throw std::invalid_argument("write_raw: field size does not match n^2");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open `" + path + "` for writing");
    out.write(reinterpret_cast<const char*>(u.data()),
              static_cast<std::streamsize>(sizeof(double)) * u.size());
    if (!out) throw IoError("write failed for `" + path + "`");
    std::ofstream hdr(path + ".hdr");
    if (!hdr) throw IoError("cannot open `" + path + ".hdr` for writing");
    hdr << "n=" << n << " field=" << field << " step=" << step
        << " time=" << format_double(time) << "\n";
    if (!hdr) throw IoError("write failed for `" + path + ".hdr`");
}

RawField read_raw(const std::string& path) {
    RawField out;
    std::ifstream hdr(path + ".hdr");
    if (!hdr) throw IoError("cannot open `" + path + ".hdr`");
    std::string line;
    std::getline(hdr, line);
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw IoError("malformed raw header in `" + path + ".hdr`");
        const std::string key = tok.substr(0, eq);
        const std::string value = tok.substr(eq + 1);
        if (key == "n") {
            out.n = std::stoi(value);
        } else if (key == "field") {
            out.field = value;
        } else if (key == "step") {
            out.step = std::stol(value);
        } else if (key == "time") {
            out.time = std::stod(value);
        }
    }
    if (out.n <= 0) throw IoError("raw header missing grid size in `" + path + ".hdr`");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open `" + path + "`");
    out.data.resize(static_cast<Eigen::Index>(out.n) * out.n);
    in.read(reinterpret_cast<char*>(out.data.data()),
            static_cast<std::streamsize>(sizeof(double)) * out.data.size());
    if (!in) throw IoError("short read from `" + path + "`");
    return out;
}

void write_vtk(const Vec& u, const Vec& h, int n, double spacing, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open `" + path + "` for writing");
    out << "# vtk DataFile Version 2.0\n";
    out << "membrane fields\n";
    out << "ASCII\n";
    out << "DATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << n << " " << n << " 1\n";
    out << "ORIGIN 0 0 0\n";
    out << "SPACING " << format_double(spacing) << " " << format_double(spacing) << " 1\n";
    out << "POINT_DATA " << static_cast<long>(n) * n << "\n";
    out << "SCALARS u double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < u.size(); ++i) out << format_double(u[i]) << "\n";
    out << "SCALARS h double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < h.size(); ++i) out << format_double(h[i]) << "\n";
    if (!out) throw IoError("write failed for `" + path + "`");
}

}  // namespace membrane
