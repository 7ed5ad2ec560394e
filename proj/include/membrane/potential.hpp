#pragma once

#include <variant>

#include <Eigen/Dense>

namespace membrane {

/// W(s) = a4 s^4 - a2 s^2 - mu0 s + a0 with a4, a2 > 0. The convex part is
/// a4 s^4 + a0, the concave part -a2 s^2 - mu0 s.
struct PolynomialPotential {
    double a4 = 1.0;
    double a2 = 1.0;
    double a0 = 0.0;
    double mu0 = 0.0;
    bool operator==(const PolynomialPotential&) const = default;
};

/// Flory-Huggins potential with the convex logarithmic part replaced by its
/// second-order Taylor expansion outside [-1+delta, 1-delta], which extends
/// the potential to all of R while keeping the seams C^2 for the convex part.
/// The concave part -(theta_c/2) s^2 - mu0 s applies everywhere.
struct LogExtendedPotential {
    double theta = 4.0;
    double theta_c = 5.0;
    double mu0 = 0.0;
    double delta = 0.02;
    bool operator==(const LogExtendedPotential&) const = default;
};

/// Moreau-Yosida regularization of the singular logarithmic convex part,
/// paired with the same concave part as the base potential. `delta` of the
/// base spec is ignored; the regularization is globally defined on its own.
struct MoreauYosidaPotential {
    LogExtendedPotential base;
    double lambda = 0.1;
    bool operator==(const MoreauYosidaPotential&) const = default;
};

struct PotentialSpec {
    std::variant<PolynomialPotential, LogExtendedPotential, MoreauYosidaPotential> variant;
    bool operator==(const PotentialSpec&) const = default;
};

struct SplitEval {
    double w1 = 0.0;   // convex part value
    double w2 = 0.0;   // concave part value
    double dw1 = 0.0;  // convex part derivative
    double dw2 = 0.0;  // concave part derivative

    double total() const { return w1 + w2; }
    double dtotal() const { return dw1 + dw2; }
};

/// Values and first derivatives of the convex/concave split at s.
SplitEval eval_split(const PotentialSpec& spec, double s);

/// Second derivative of the convex part, used by the Newton Hessian.
double convex_curvature(const PotentialSpec& spec, double s);

/// Solves s + lambda * W1'(s) = r for the logarithmic convex part
/// W1'(s) = (theta/2) ln((1+s)/(1-s)) by safeguarded Newton/bisection to
/// |residual| <= 1e-12; the root lies in (-1, 1). Throws SolveFailure after
/// 200 iterations (unreachable for a strictly increasing surjective map).
double resolvent(const LogExtendedPotential& base, double lambda, double r);

struct MoreauYosidaEval {
    double value = 0.0;       // W_{1,lambda}(r)
    double derivative = 0.0;  // w_{1,lambda}(r) = (r - s*) / lambda
};

/// Moreau-Yosida regularization of the logarithmic convex part:
/// W_{1,lambda}(r) = (1/2lambda)(r - s*)^2 + W1(s*) with s* the resolvent.
MoreauYosidaEval moreau_yosida_eval(const LogExtendedPotential& base, double lambda, double r);

/// Batch evaluation over a nodal field; any output may be null. Matches the
/// scalar eval_split / convex_curvature values up to a few ulp (the
/// polynomial and log families use vectorized expressions, Moreau-Yosida
/// falls back to the scalar path).
void eval_split_fields(const PotentialSpec& spec, const Eigen::VectorXd& s, Eigen::VectorXd* w1,
                       Eigen::VectorXd* dw1, Eigen::VectorXd* ddw1, Eigen::VectorXd* w2 = nullptr,
                       Eigen::VectorXd* dw2 = nullptr);

}  // namespace membrane
