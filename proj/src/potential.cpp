#include "membrane/potential.hpp"

#include <cmath>
#include <stdexcept>

#include "membrane/linalg.hpp"

namespace membrane {

namespace {

// Logarithmic convex part on (-1, 1): W1(s) = (theta/2)((1+s)ln(1+s) + (1-s)ln(1-s)),
// with the convention 0 ln 0 = 0.
double log_w1(double theta, double s) {
    const double a = (1.0 + s) <= 0.0 ? 0.0 : (1.0 + s) * std::log1p(s);
    const double b = (1.0 - s) <= 0.0 ? 0.0 : (1.0 - s) * std::log1p(-s);
    return 0.5 * theta * (a + b);
}

double log_dw1(double theta, double s) {
    return 0.5 * theta * (std::log1p(s) - std::log1p(-s));
}

double log_ddw1(double theta, double s) {
    return theta / ((1.0 + s) * (1.0 - s));
}

struct TaylorSeam {
    double s0, value, slope, curvature;
    double eval(double s) const {
        const double d = s - s0;
        return value + slope * d + 0.5 * curvature * d * d;
    }
    double deval(double s) const { return slope + curvature * (s - s0); }
};

TaylorSeam seam_at(const LogExtendedPotential& p, double s0) {
    return {s0, log_w1(p.theta, s0), log_dw1(p.theta, s0), log_ddw1(p.theta, s0)};
}

SplitEval eval_log_extended(const LogExtendedPotential& p, double s) {
    SplitEval out;
    const double seam = 1.0 - p.delta;
    if (s <= -seam) {
        const TaylorSeam t = seam_at(p, -seam);
        out.w1 = t.eval(s);
        out.dw1 = t.deval(s);
    } else if (s >= seam) {
        const TaylorSeam t = seam_at(p, seam);
        out.w1 = t.eval(s);
        out.dw1 = t.deval(s);
    } else {
        out.w1 = log_w1(p.theta, s);
        out.dw1 = log_dw1(p.theta, s);
    }
    out.w2 = -0.5 * p.theta_c * s * s - p.mu0 * s;
    out.dw2 = -p.theta_c * s - p.mu0;
    return out;
}

}  // namespace

SplitEval eval_split(const PotentialSpec& spec, double s) {
    return std::visit(
        [s](const auto& p) -> SplitEval {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PolynomialPotential>) {
                SplitEval out;
                out.w1 = p.a4 * s * s * s * s + p.a0;
                out.dw1 = 4.0 * p.a4 * s * s * s;
                out.w2 = -p.a2 * s * s - p.mu0 * s;
                out.dw2 = -2.0 * p.a2 * s - p.mu0;
                return out;
            } else if constexpr (std::is_same_v<T, LogExtendedPotential>) {
                return eval_log_extended(p, s);
            } else {
                SplitEval out;
                const MoreauYosidaEval my = moreau_yosida_eval(p.base, p.lambda, s);
                out.w1 = my.value;
                out.dw1 = my.derivative;
                out.w2 = -0.5 * p.base.theta_c * s * s - p.base.mu0 * s;
                out.dw2 = -p.base.theta_c * s - p.base.mu0;
                return out;
            }
        },
        spec.variant);
}

double convex_curvature(const PotentialSpec& spec, double s) {
    return std::visit(
        [s](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PolynomialPotential>) {
                return 12.0 * p.a4 * s * s;
            } else if constexpr (std::is_same_v<T, LogExtendedPotential>) {
                const double seam = 1.0 - p.delta;
                return log_ddw1(p.theta, std::clamp(s, -seam, seam));
            } else {
                // d/dr w_{1,lambda}(r) = W1''(s*) / (1 + lambda W1''(s*)).
                const double root = resolvent(p.base, p.lambda, s);
                const double curv = log_ddw1(p.base.theta, root);
                return curv / (1.0 + p.lambda * curv);
            }
        },
        spec.variant);
}

double resolvent(const LogExtendedPotential& base, double lambda, double r) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("resolvent: lambda must be positive");
    }
    // f(s) = s + lambda W1'(s) - r is strictly increasing on (-1, 1) with
    // range all of R; bracket then run Newton with bisection safeguard. When
    // the root sits so close to +-1 that no double meets the residual target
    // (the slope 1 + lambda W1'' blows up faster than the float spacing
    // shrinks), the bracket collapses to adjacent floats and the better
    // endpoint is returned.
    auto f = [&](double s) { return s + lambda * log_dw1(base.theta, s) - r; };
    double lo = -1.0, hi = 1.0;
    double s = std::clamp(r, -0.9, 0.9);
    for (int it = 0; it < 200; ++it) {
        const double fs = f(s);
        if (std::abs(fs) <= 1e-12) return s;
        if (fs > 0.0) {
            hi = s;
        } else {
            lo = s;
        }
        if (lo > -1.0 && hi < 1.0 && std::nextafter(lo, 1.0) >= hi) {
            return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
        }
        const double df = 1.0 + lambda * log_ddw1(base.theta, s);
        double next = s - fs / df;
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        s = next;
    }
    throw SolveFailure("resolvent: no convergence after 200 iterations");
}

MoreauYosidaEval moreau_yosida_eval(const LogExtendedPotential& base, double lambda, double r) {
    const double root = resolvent(base, lambda, r);
    MoreauYosidaEval out;
    out.value = 0.5 / lambda * (r - root) * (r - root) + log_w1(base.theta, root);
    out.derivative = (r - root) / lambda;
    return out;
}

void eval_split_fields(const PotentialSpec& spec, const Eigen::VectorXd& s, Eigen::VectorXd* w1,
                       Eigen::VectorXd* dw1, Eigen::VectorXd* ddw1, Eigen::VectorXd* w2,
                       Eigen::VectorXd* dw2) {
    const auto a = s.array();
    if (const auto* p = std::get_if<PolynomialPotential>(&spec.variant)) {
        if (w1) *w1 = p->a4 * a.square().square() + p->a0;
        if (dw1) *dw1 = 4.0 * p->a4 * a.cube();
        if (ddw1) *ddw1 = 12.0 * p->a4 * a.square();
        if (w2) *w2 = -p->a2 * a.square() - p->mu0 * a;
        if (dw2) *dw2 = -2.0 * p->a2 * a - p->mu0;
        return;
    }
    if (const auto* p = std::get_if<LogExtendedPotential>(&spec.variant)) {
        // Clamping to the seam folds the Taylor branches into one expression:
        // the convex part and its derivatives at the clamped point extended
        // quadratically by the distance to it.
        const double seam = 1.0 - p->delta;
        Eigen::ArrayXd c = a.max(-seam).min(seam);
        Eigen::ArrayXd lp = c.log1p();
        Eigen::ArrayXd lm = (-c).log1p();
        Eigen::ArrayXd d = a - c;
        Eigen::ArrayXd curv = p->theta / ((1.0 + c) * (1.0 - c));
        Eigen::ArrayXd slope = 0.5 * p->theta * (lp - lm);
        if (w1) {
            *w1 = 0.5 * p->theta * ((1.0 + c) * lp + (1.0 - c) * lm) + slope * d +
                  0.5 * curv * d.square();
        }
        if (dw1) *dw1 = slope + curv * d;
        if (ddw1) *ddw1 = curv;
        if (w2) *w2 = -0.5 * p->theta_c * a.square() - p->mu0 * a;
        if (dw2) *dw2 = -p->theta_c * a - p->mu0;
        return;
    }
    for (auto* out : {w1, dw1, ddw1, w2, dw2}) {
        if (out) out->resize(s.size());
    }
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const SplitEval e = eval_split(spec, s[i]);
        if (w1) (*w1)[i] = e.w1;
        if (dw1) (*dw1)[i] = e.dw1;
        if (ddw1) (*ddw1)[i] = convex_curvature(spec, s[i]);
        if (w2) (*w2)[i] = e.w2;
        if (dw2) (*dw2)[i] = e.dw2;
    }
}

}  // namespace membrane
