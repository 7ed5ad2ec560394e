#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "membrane/config.hpp"
#include "membrane/io.hpp"
#include "membrane/run.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitIo = 3;

struct CommonFlags {
    std::string output_dir;
    int workers = 0;
    long seed_override = -1;

    void apply(membrane::RunConfig& config) const {
        if (!output_dir.empty()) config.output_dir = output_dir;
        if (seed_override >= 0) config.seed = static_cast<uint64_t>(seed_override);
    }
};

int run_simulate(const std::string& config_path, const CommonFlags& flags) {
    membrane::RunConfig config = membrane::load_config_file(config_path);
    flags.apply(config);
    const membrane::RunResult result = membrane::run_simulation(config);
    switch (result.status) {
        case membrane::RunStatus::ok:
            std::cout << "completed " << result.steps_completed << " steps, final energy "
                      << membrane::format_double(result.final_energy.total) << ", pattern "
                      << membrane::to_string(result.final_pattern.label) << " ("
                      << result.final_pattern.component_count << " components)\n";
            return kExitOk;
        case membrane::RunStatus::solver_failure:
            std::cerr << "solver failure: " << result.failure_message << "\n";
            return kExitSolver;
        case membrane::RunStatus::io_failure:
            std::cerr << "io failure: " << result.failure_message << "\n";
            return kExitIo;
    }
    return kExitOk;
}

int run_sweep_cmd(const std::string& config_path, const CommonFlags& flags) {
    membrane::SweepConfig sweep = membrane::load_sweep_config_file(config_path);
    flags.apply(sweep.base);
    if (flags.workers > 0) sweep.workers = flags.workers;
    const membrane::SweepResult result = membrane::run_sweep(sweep);
    std::cout << result.cells.size() - result.failures << "/" << result.cells.size()
              << " cells completed\n";
    return result.failures == 0 ? kExitOk : kExitSolver;
}

int run_units(const std::string& config_path) {
    const membrane::RunConfig config = membrane::load_config_file(config_path);
    const membrane::PhysicalUnits units = membrane::physical_units(config.model_params());
    std::printf("quantity        value\n");
    std::printf("E_c [J]         %.6g\n", units.energy_scale_J);
    std::printf("Lambda [J/m]    %.6g\n", units.lambda_J_per_m);
    std::printf("sigma [J/m^2]   %.6g\n", units.sigma_J_per_m2);
    std::printf("kappa [J]       %.6g\n", units.kappa_J);
    return kExitOk;
}

int run_probe(const std::string& config_path, const std::vector<double>& deltas,
              const CommonFlags& flags) {
    membrane::RunConfig config = membrane::load_config_file(config_path);
    flags.apply(config);
    const auto rows = membrane::continuous_dependence_probe(config, deltas);
    std::printf("%-12s %-16s %-16s\n", "delta", "D(delta)", "D/delta^2");
    for (const auto& row : rows) {
        std::printf("%-12g %-16.8g %-16.8g\n", row.delta, row.distance, row.ratio);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-element simulator for curvature-coupled phase separation on a periodic membrane"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string config_path;
    std::vector<double> deltas;

    auto add_common = [&](CLI::App* cmd, bool with_workers) {
        cmd->add_option("config", config_path, "configuration file")->required();
        cmd->add_option("--output-dir", flags.output_dir, "override output.dir");
        cmd->add_option("--seed-override", flags.seed_override, "override init.seed");
        if (with_workers) {
            cmd->add_option("--workers", flags.workers, "parallel sweep workers");
        }
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run one simulation");
    add_common(simulate, false);
    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    add_common(sweep, true);
    CLI::App* units = app.add_subcommand("units", "print physical-unit conversions");
    units->add_option("config", config_path, "configuration file")->required();
    CLI::App* probe = app.add_subcommand("probe-dependence",
                                         "paired-run continuous dependence probe");
    add_common(probe, false);
    probe->add_option("--deltas", deltas, "perturbation magnitudes")
        ->required()
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return run_simulate(config_path, flags);
        if (sweep->parsed()) return run_sweep_cmd(config_path, flags);
        if (units->parsed()) return run_units(config_path);
        if (probe->parsed()) return run_probe(config_path, deltas, flags);
    } catch (const membrane::ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const membrane::IoError& err) {
        std::cerr << "io error: " << err.what() << "\n";
        return kExitIo;
    } catch (const membrane::SolveFailure& err) {
        std::cerr << "solver failure: " << err.what() << "\n";
        return kExitSolver;
    } catch (const std::invalid_argument& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
