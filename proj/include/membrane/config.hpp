#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "membrane/diagnostics.hpp"
#include "membrane/scheme.hpp"

namespace membrane {

struct ConfigError : std::runtime_error {
    std::string key;
    ConfigError(const std::string& key_, const std::string& message)
        : std::runtime_error(key_.empty() ? message : key_ + ": " + message), key(key_) {}
};

enum class OutputFormat { csv, pgm, vtk, raw };

struct RunConfig {
    int mesh_n = 0;
    double tau = 0.0;
    double t_end = 0.0;

    double eps = 0.0;
    double kappa = 0.0;
    // Either the isotropic pair or explicit symmetric 2x2 entries.
    std::optional<double> sigma;
    std::optional<double> lambda;
    Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d L = Eigen::Matrix2d::Zero();

    PotentialSpec potential;

    double mean_u = 0.0;
    double amplitude = 0.2;
    uint64_t seed = 1;
    double h0_const = 0.0;

    SolverSettings solver;

    std::string output_dir = "out";
    long every_steps = 100;
    std::vector<OutputFormat> formats = {OutputFormat::csv};

    double pattern_threshold = 0.0;
    PatternThresholds pattern;

    ModelParams model_params() const;
    long step_count() const;  // ceil(t_end / tau)

    bool operator==(const RunConfig&) const;
};

struct SweepAxis {
    std::string path;             // dotted key, e.g. "params.lambda"
    std::vector<double> values;
};

struct SweepConfig {
    RunConfig base;
    std::vector<SweepAxis> axes;  // up to 2
    int workers = 1;
    int max_cells = 64;
};

/// Parses the line-oriented `key.path = value` format (UTF-8, `#` comments,
/// no quoting). Unknown keys and constraint violations raise ConfigError
/// naming the offending key.
RunConfig parse_config(const std::string& text);

/// Canonical serialization; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Parses a sweep file: `sweep.*` keys define the axes and worker count, all
/// remaining keys form the base RunConfig.
SweepConfig parse_sweep_config(const std::string& text);

/// Applies `path = value` to a config (sweep axes, --seed-override).
void apply_override(RunConfig& config, const std::string& path, double value);

RunConfig load_config_file(const std::string& path);
SweepConfig load_sweep_config_file(const std::string& path);

struct PhysicalUnits {
    double energy_scale_J = 0.0;     // E_c = 5e-19 J / eps
    double lambda_J_per_m = 0.0;     // Lambda E_c / x_c
    double sigma_J_per_m2 = 0.0;     // sigma E_c / x_c^2
    double kappa_J = 0.0;            // kappa E_c
};

/// Converts the nondimensional parameters to physical units with the
/// characteristic length x_c = 1e-6 m and energy scale E_c = 5e-19 J / eps.
/// The anisotropic magnitudes are spectral norms |G|, |L|.
PhysicalUnits physical_units(const ModelParams& params);

}  // namespace membrane
