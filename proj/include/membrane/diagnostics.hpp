#pragma once

#include <string>
#include <vector>

#include "membrane/scheme.hpp"

namespace membrane {

struct EnergyBreakdown {
    double potential = 0.0;  // (1/eps) sum_i Ml_ii W(u_i)
    double grad_u = 0.0;     // (eps/2) u.K.u
    double surface = 0.0;    // (1/2) h.K_G.h
    double bending = 0.0;    // (kappa/2) g.M.g
    double coupling = 0.0;   // -u.K_L.h
    double total = 0.0;
};

/// Discrete energy ledger, with the same quadrature as the stepping scheme.
EnergyBreakdown discrete_energy(const SimState& state, const ModelParams& params,
                                const SchemeMatrices& mats);

/// Discrete H^{-1} seminorm sqrt(v.M.(K^+ M v)) of a zero-mean nodal field.
/// Throws std::invalid_argument when |<v,1>_h| > 1e-10.
double h_minus_one_norm(const Vec& v, const SchemeMatrices& mats, double tol = 1e-12);

/// Lumped L2 norm sqrt(sum_i Ml_ii v_i^2).
double lumped_l2_norm(const Vec& v, const SchemeMatrices& mats);

enum class PatternLabel { homogeneous, dots, stripes, mixed };

const char* to_string(PatternLabel label);

struct PatternThresholds {
    double area_high = 0.95;     // single component covering more -> homogeneous
    double area_low = 0.05;      // total area below -> homogeneous
    double dot_elongation = 2.0;
    double stripe_elongation = 3.0;
    // Compact isolated domains count as dots regardless of how few there
    // are; at desk scale the weak-coupling regime arrests at one or two
    // large dots per cell, so the calibrated default is 1.
    int min_dot_components = 1;
    double elongation_cap = 10.0;  // periodic wrap counts as this
};

struct PatternMetrics {
    int component_count = 0;
    double area_fraction = 0.0;
    double mean_elongation = 1.0;  // Feret diameter ratio, grid-cell units
    PatternLabel label = PatternLabel::homogeneous;
};

/// Classifies the super-level set {u > threshold} on the periodic vertex
/// grid: 4-connected components, Feret elongation of each unwrapped
/// component, and a coarse stripes/dots/mixed/homogeneous label. When the
/// super-level set covers the majority of the domain the component metrics
/// describe its complement, since the pattern is carried by the minority
/// phase; area_fraction always reports the {u > threshold} share.
PatternMetrics pattern_metrics(const Vec& u, int n, double threshold,
                               const PatternThresholds& thresholds = {});

}  // namespace membrane
