#include "membrane/run.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "membrane/io.hpp"

namespace membrane {

uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SimState init_fields(const RunConfig& config, const TorusMesh& mesh) {
    const int nv = mesh.vertex_count();
    SimState state;
    state.u.resize(nv);
    if (config.amplitude == 0.0) {
        state.u.setConstant(config.mean_u);
    } else {
        uint64_t rng = config.seed;
        for (int i = 0; i < nv; ++i) {  // row-major vertex order, one draw per vertex
            const double u01 = static_cast<double>(splitmix64_next(rng) >> 11) * 0x1.0p-53;
            state.u[i] = config.mean_u + config.amplitude * (2.0 * u01 - 1.0);
        }
        state.u.array() += config.mean_u - state.u.mean();
    }
    state.mu = Vec::Zero(nv);
    state.h = Vec::Constant(nv, config.h0_const);
    state.g = Vec::Zero(nv);
    state.step = 0;
    state.t = 0.0;
    return state;
}

namespace {

namespace fs = std::filesystem;

struct CsvWriter {
    std::ofstream out;

    explicit CsvWriter(const std::string& path) : out(path) {
        if (!out) throw IoError("cannot open `" + path + "` for writing");
        out << "step,time,mass_u,mass_h,e_potential,e_grad_u,e_surface,e_bend,e_coupling,"
               "e_total,newton_iters,krylov_iters\n";
    }

    void row(const SimState& state, const SchemeMatrices& mats, const EnergyBreakdown& e,
             long newton_iters, long krylov_iters) {
        out << state.step << "," << format_double(state.t) << ","
            << format_double(mats.lumped_mass.dot(state.u)) << ","
            << format_double(mats.lumped_mass.dot(state.h)) << "," << format_double(e.potential)
            << "," << format_double(e.grad_u) << "," << format_double(e.surface) << ","
            << format_double(e.bending) << "," << format_double(e.coupling) << ","
            << format_double(e.total) << "," << newton_iters << "," << krylov_iters << "\n";
        if (!out) throw IoError("diagnostics CSV write failed");
    }
};

std::string step_tag(long step) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08ld", step);
    return buf;
}

void write_snapshots(const RunConfig& config, const SimState& state, const fs::path& dir) {
    const int n = config.mesh_n;
    const std::string tag = step_tag(state.step);
    for (const auto format : config.formats) {
        switch (format) {
            case OutputFormat::csv:
                break;  // the diagnostics CSV covers it
            case OutputFormat::pgm:
                write_pgm(state.u, n, (dir / ("u_" + tag + ".pgm")).string());
                break;
            case OutputFormat::raw:
                write_raw(state.u, n, "u", state.step, state.t,
                          (dir / ("u_" + tag + ".raw")).string());
                write_raw(state.h, n, "h", state.step, state.t,
                          (dir / ("h_" + tag + ".raw")).string());
                break;
            case OutputFormat::vtk:
                write_vtk(state.u, state.h, n, 1.0 / n,
                          (dir / ("fields_" + tag + ".vtk")).string());
                break;
        }
    }
}

}  // namespace

SimState run_in_memory(const RunConfig& config,
                       const std::function<void(SimState&)>& tweak_initial) {
    const TorusMesh mesh = build_torus_mesh(config.mesh_n);
    const ModelParams params = config.model_params();
    const SchemeMatrices mats = assemble_scheme_matrices(mesh, params);

    SimState state = init_fields(config, mesh);
    if (tweak_initial) tweak_initial(state);

    const long steps = config.step_count();
    Vec u_prev = state.u;
    double energy = discrete_energy(state, params, mats).total;
    for (long s = 0; s < steps; ++s) {
        std::optional<Vec> guess;
        if (s > 0) guess = 2.0 * state.u - u_prev;  // secant predictor for Newton
        u_prev = state.u;
        auto [next, stats] = advance(state, params, mats, config.solver, guess, &energy);
        state = std::move(next);
        energy = stats.energy_after;
    }
    return state;
}

RunResult run_simulation(const RunConfig& config) {
    RunResult result;
    try {
        const TorusMesh mesh = build_torus_mesh(config.mesh_n);
        const ModelParams params = config.model_params();
        const SchemeMatrices mats = assemble_scheme_matrices(mesh, params);

        fs::path dir(config.output_dir);
        fs::create_directories(dir);

        SimState state = init_fields(config, mesh);
        CsvWriter csv((dir / "diagnostics.csv").string());
        csv.row(state, mats, discrete_energy(state, params, mats), 0, 0);
        write_snapshots(config, state, dir);

        const long steps = config.step_count();
        long newton_acc = 0, krylov_acc = 0;
        Vec u_prev = state.u;
        double energy = discrete_energy(state, params, mats).total;
        for (long s = 0; s < steps; ++s) {
            std::optional<Vec> guess;
            if (s > 0) guess = 2.0 * state.u - u_prev;
            u_prev = state.u;
            try {
                auto [next, stats] = advance(state, params, mats, config.solver, guess, &energy);
                state = std::move(next);
                energy = stats.energy_after;
                newton_acc += stats.newton_iterations;
                krylov_acc += stats.outer_cg_iterations + stats.inner_cg_iterations +
                              stats.minres_iterations;
            } catch (const SolveFailure& failure) {
                // Keep partial artifacts, dump the last good state, record why.
                write_raw(state.u, config.mesh_n, "u", state.step, state.t,
                          (dir / "last_good_u.raw").string());
                write_raw(state.h, config.mesh_n, "h", state.step, state.t,
                          (dir / "last_good_h.raw").string());
                std::ofstream record(dir / "failure.txt");
                record << "step " << state.step + 1 << " failed: " << failure.what() << "\n";
                result.status = RunStatus::solver_failure;
                result.failure_message = failure.what();
                result.final_state = std::move(state);
                result.steps_completed = s;
                return result;
            }
            if (state.step % config.every_steps == 0 || s + 1 == steps) {
                csv.row(state, mats, discrete_energy(state, params, mats), newton_acc, krylov_acc);
                newton_acc = 0;
                krylov_acc = 0;
                write_snapshots(config, state, dir);
            }
        }

        result.final_energy = discrete_energy(state, params, mats);
        result.final_pattern =
            pattern_metrics(state.u, config.mesh_n, config.pattern_threshold, config.pattern);
        result.final_state = std::move(state);
        result.steps_completed = steps;
    } catch (const IoError& io) {
        result.status = RunStatus::io_failure;
        result.failure_message = io.what();
    }
    return result;
}

SweepResult run_sweep(const SweepConfig& sweep) {
    // Cell list in row-major axis order; cell index is authoritative for all
    // output so results do not depend on the worker count.
    std::vector<std::vector<double>> cells;
    if (sweep.axes.empty()) {
        cells.push_back({});
    } else if (sweep.axes.size() == 1) {
        for (double v : sweep.axes[0].values) cells.push_back({v});
    } else {
        for (double v0 : sweep.axes[0].values) {
            for (double v1 : sweep.axes[1].values) cells.push_back({v0, v1});
        }
    }

    const fs::path root(sweep.base.output_dir);
    fs::create_directories(root);

    SweepResult result;
    result.cells.resize(cells.size());

    std::atomic<size_t> next_cell{0};
    std::mutex failures_mutex;
    auto worker = [&]() {
        for (;;) {
            const size_t index = next_cell.fetch_add(1);
            if (index >= cells.size()) return;
            RunConfig config = sweep.base;
            for (size_t a = 0; a < sweep.axes.size(); ++a) {
                apply_override(config, sweep.axes[a].path, cells[index][a]);
            }
            config.output_dir = (root / ("cell_" + step_tag(static_cast<long>(index)))).string();
            const RunResult run = run_simulation(config);

            SweepCellResult& cell = result.cells[index];
            cell.index = static_cast<int>(index);
            cell.values = cells[index];
            cell.status = run.status;
            cell.energy = run.final_energy;
            cell.pattern = run.final_pattern;
            if (run.status != RunStatus::ok) {
                std::lock_guard<std::mutex> lock(failures_mutex);
                ++result.failures;
            }
        }
    };

    const int workers = std::max(1, sweep.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::ofstream summary(root / "summary.csv");
    if (!summary) throw IoError("cannot open sweep summary for writing");
    summary << "cell";
    for (size_t a = 0; a < sweep.axes.size(); ++a) summary << "," << sweep.axes[a].path;
    summary << ",status,e_potential,e_grad_u,e_surface,e_bend,e_coupling,e_total,"
               "components,area_fraction,mean_elongation,label\n";
    for (const auto& cell : result.cells) {
        summary << cell.index;
        for (double v : cell.values) summary << "," << format_double(v);
        summary << "," << (cell.status == RunStatus::ok ? "ok" : "failed") << ","
                << format_double(cell.energy.potential) << ","
                << format_double(cell.energy.grad_u) << "," << format_double(cell.energy.surface)
                << "," << format_double(cell.energy.bending) << ","
                << format_double(cell.energy.coupling) << "," << format_double(cell.energy.total)
                << "," << cell.pattern.component_count << ","
                << format_double(cell.pattern.area_fraction) << ","
                << format_double(cell.pattern.mean_elongation) << ","
                << to_string(cell.pattern.label) << "\n";
    }
    return result;
}

std::vector<DependenceProbeRow> continuous_dependence_probe(const RunConfig& config,
                                                            const std::vector<double>& deltas) {
    const TorusMesh mesh = build_torus_mesh(config.mesh_n);
    const ModelParams params = config.model_params();
    const SchemeMatrices mats = assemble_scheme_matrices(mesh, params);

    // Fixed zero-mean perturbation profile.
    Vec profile(mesh.vertex_count());
    for (int j = 0; j < mesh.n; ++j) {
        for (int i = 0; i < mesh.n; ++i) {
            profile[j * mesh.n + i] =
                std::sin(2.0 * M_PI * i / mesh.n) * std::cos(2.0 * M_PI * j / mesh.n);
        }
    }
    profile.array() -= profile.mean();

    const SimState base = run_in_memory(config);

    std::vector<DependenceProbeRow> rows;
    rows.reserve(deltas.size());
    for (const double delta : deltas) {
        DependenceProbeRow row;
        row.delta = delta;
        if (delta == 0.0) {
            const SimState again = run_in_memory(config);
            Vec du = again.u - base.u;
            row.distance = (du.array() == 0.0).all() && ((again.h - base.h).array() == 0.0).all()
                               ? 0.0
                               : std::pow(h_minus_one_norm(du, mats), 2) +
                                     std::pow(lumped_l2_norm(again.h - base.h, mats), 2);
            row.ratio = 0.0;
        } else {
            const SimState perturbed = run_in_memory(config, [&](SimState& s) {
                s.u += delta * profile;
                s.u.array() += config.mean_u - s.u.mean();
            });
            Vec du = perturbed.u - base.u;
            du.array() -= du.mean();  // both runs conserve the same mean
            Vec dh = perturbed.h - base.h;
            const double d1 = h_minus_one_norm(du, mats);
            const double d2 = lumped_l2_norm(dh, mats);
            row.distance = d1 * d1 + d2 * d2;
            row.ratio = row.distance / (delta * delta);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace membrane
