#include "membrane/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace membrane {

EnergyBreakdown discrete_energy(const SimState& state, const ModelParams& params,
                                const SchemeMatrices& mats) {
    EnergyBreakdown e;
    Vec w1, w2;
    eval_split_fields(params.potential, state.u, &w1, nullptr, nullptr, &w2, nullptr);
    e.potential = (mats.lumped_mass.array() * (w1 + w2).array()).sum() / params.eps;
    e.grad_u = 0.5 * params.eps * state.u.dot(mats.K.csr * state.u);
    e.surface = 0.5 * state.h.dot(mats.K_G.csr * state.h);
    e.bending = 0.5 * params.kappa * state.g.dot(mats.M.csr * state.g);
    e.coupling = params.coupling_is_zero() ? 0.0 : -state.u.dot(mats.K_L.csr * state.h);
    e.total = e.potential + e.grad_u + e.surface + e.bending + e.coupling;
    return e;
}

double h_minus_one_norm(const Vec& v, const SchemeMatrices& mats, double tol) {
    const double lumped_mean = mats.lumped_mass.dot(v);
    if (std::abs(lumped_mean) > 1e-10) {
        throw std::invalid_argument("h_minus_one_norm: field must have zero discrete mean");
    }
    const Vec Mv = mats.M.csr * v;
    if (Mv.norm() == 0.0) return 0.0;
    const Vec y = mats.poisson_solve(Mv, tol, 20000);
    return std::sqrt(std::abs(v.dot(mats.M.csr * y)));
}

double lumped_l2_norm(const Vec& v, const SchemeMatrices& mats) {
    return std::sqrt((mats.lumped_mass.array() * v.array().square()).sum());
}

const char* to_string(PatternLabel label) {
    switch (label) {
        case PatternLabel::homogeneous: return "homogeneous";
        case PatternLabel::dots: return "dots";
        case PatternLabel::stripes: return "stripes";
        case PatternLabel::mixed: return "mixed";
    }
    return "?";
}

namespace {

// Convex hull (Andrew monotone chain) of integer grid points.
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
    if (pts.size() <= 2) return pts;
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    std::vector<Eigen::Vector2d> hull(2 * pts.size());
    size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    const size_t lower = k + 1;
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
        hull[k++] = *it;
    }
    hull.resize(k > 1 ? k - 1 : k);
    return hull;
}

// Max and min Feret diameters of a point set: hull diameter and the minimal
// width over hull-edge normals (rotating calipers).
std::pair<double, double> feret_diameters(const std::vector<Eigen::Vector2d>& pts) {
    if (pts.size() <= 1) return {0.0, 0.0};
    const auto hull = convex_hull(pts);
    double d_max = 0.0;
    for (size_t i = 0; i < hull.size(); ++i) {
        for (size_t j = i + 1; j < hull.size(); ++j) {
            d_max = std::max(d_max, (hull[i] - hull[j]).norm());
        }
    }
    if (hull.size() <= 2) return {d_max, 0.0};
    double d_min = d_max;
    for (size_t i = 0; i < hull.size(); ++i) {
        const Eigen::Vector2d a = hull[i];
        const Eigen::Vector2d b = hull[(i + 1) % hull.size()];
        Eigen::Vector2d edge = b - a;
        const double len = edge.norm();
        if (len == 0.0) continue;
        const Eigen::Vector2d normal(-edge.y() / len, edge.x() / len);
        double width = 0.0;
        for (const auto& p : hull) {
            width = std::max(width, std::abs(normal.dot(p - a)));
        }
        d_min = std::min(d_min, width);
    }
    return {d_max, d_min};
}

}  // namespace

PatternMetrics pattern_metrics(const Vec& u, int n, double threshold,
                               const PatternThresholds& th) {
    PatternMetrics out;
    const int nv = n * n;
    std::vector<uint8_t> above(nv);
    int above_count = 0;
    for (int i = 0; i < nv; ++i) {
        above[i] = u[i] > threshold;
        above_count += above[i];
    }
    out.area_fraction = static_cast<double>(above_count) / nv;

    // The structure lives in the minority phase: a majority super-level set
    // is one wrapping component regardless of whether the pattern is dotted
    // or striped, so classify the nonempty complement instead when
    // {u > threshold} covers more than half the domain. The reported area
    // fraction stays that of {u > threshold}.
    if (2 * above_count > nv && above_count < nv) {
        for (int i = 0; i < nv; ++i) above[i] = !above[i];
        above_count = nv - above_count;
    }

    std::vector<int> label(nv, -1);
    std::vector<std::array<int, 2>> lift(nv);
    std::vector<double> elongations;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};

    for (int start = 0; start < nv; ++start) {
        if (!above[start] || label[start] >= 0) continue;
        const int comp = out.component_count++;
        // BFS with unwrapped coordinates: first arrival fixes the lift; a
        // revisit with a different lift means the component wraps the torus.
        std::vector<Eigen::Vector2d> unwrapped;
        std::queue<int> frontier;
        label[start] = comp;
        lift[start] = {start % n, start / n};
        frontier.push(start);
        bool wraps = false;
        while (!frontier.empty()) {
            const int id = frontier.front();
            frontier.pop();
            const auto [ux, uy] = lift[id];
            unwrapped.emplace_back(ux, uy);
            const int ix = id % n, iy = id / n;
            for (int d = 0; d < 4; ++d) {
                const int jx = (ix + dx[d] + n) % n;
                const int jy = (iy + dy[d] + n) % n;
                const int jd = jy * n + jx;
                if (!above[jd]) continue;
                const std::array<int, 2> jlift = {ux + dx[d], uy + dy[d]};
                if (label[jd] < 0) {
                    label[jd] = comp;
                    lift[jd] = jlift;
                    frontier.push(jd);
                } else if (lift[jd] != jlift) {
                    wraps = true;
                }
            }
        }
        if (wraps) {
            elongations.push_back(th.elongation_cap);
        } else {
            const auto [d_max, d_min] = feret_diameters(unwrapped);
            elongations.push_back(std::min((d_max + 1.0) / (d_min + 1.0), th.elongation_cap));
        }
    }

    if (!elongations.empty()) {
        out.mean_elongation = 0.0;
        for (double e : elongations) out.mean_elongation += e;
        out.mean_elongation /= static_cast<double>(elongations.size());
    }

    if (out.component_count == 0 ||
        (out.component_count == 1 && out.area_fraction > th.area_high) ||
        out.area_fraction < th.area_low) {
        out.label = PatternLabel::homogeneous;
    } else if (out.component_count >= th.min_dot_components &&
               out.mean_elongation < th.dot_elongation) {
        out.label = PatternLabel::dots;
    } else if (out.mean_elongation >= th.stripe_elongation) {
        out.label = PatternLabel::stripes;
    } else {
        out.label = PatternLabel::mixed;
    }
    return out;
}

}  // namespace membrane
