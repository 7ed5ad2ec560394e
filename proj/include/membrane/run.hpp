#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "membrane/config.hpp"
#include "membrane/diagnostics.hpp"

namespace membrane {

/// Deterministic initial state: h = h0_const, g = 0, mu = 0, and u drawn per
/// vertex in row-major order from splitmix64, uniform on [-amplitude,
/// +amplitude] around mean_u, then shifted so the discrete mean matches
/// mean_u exactly.
SimState init_fields(const RunConfig& config, const TorusMesh& mesh);

/// Raw splitmix64 stream (one value per call).
uint64_t splitmix64_next(uint64_t& state);

enum class RunStatus { ok, solver_failure, io_failure };

struct RunResult {
    RunStatus status = RunStatus::ok;
    SimState final_state;
    EnergyBreakdown final_energy;
    PatternMetrics final_pattern;
    long steps_completed = 0;
    std::string failure_message;
};

/// Runs ceil(t_end / tau) steps, emitting the diagnostics CSV and the
/// requested field snapshots every `every_steps` steps into output_dir.
/// On a step failure the artifacts produced so far are kept, the last good
/// state is dumped in raw format and a failure record is written.
RunResult run_simulation(const RunConfig& config);

/// In-memory variant without artifacts; `tweak_initial` may adjust the
/// initial state (used by the continuous-dependence probe). Throws
/// SolveFailure on step failure.
SimState run_in_memory(const RunConfig& config,
                       const std::function<void(SimState&)>& tweak_initial = {});

struct SweepCellResult {
    int index = 0;
    std::vector<double> values;     // one per axis
    RunStatus status = RunStatus::ok;
    EnergyBreakdown energy;
    PatternMetrics pattern;
};

struct SweepResult {
    std::vector<SweepCellResult> cells;
    int failures = 0;
};

/// Runs every cell of the cartesian sweep grid (one subdirectory per cell),
/// in parallel over `workers` threads; results and the summary CSV are
/// ordered by cell index, so the artifacts do not depend on the worker
/// count. Individual cell failures are recorded and the sweep continues.
SweepResult run_sweep(const SweepConfig& sweep);

struct DependenceProbeRow {
    double delta = 0.0;
    double distance = 0.0;        // ||u2-u1||_{-1}^2 + ||h2-h1||_{L2,h}^2 at t_end
    double ratio = 0.0;           // distance / delta^2 (0 for delta = 0)
};

/// Paired runs from u0 and u0 + delta * (fixed zero-mean profile) for each
/// delta; reports the squared H^{-1} x L2 distance and its delta^2 ratio.
std::vector<DependenceProbeRow> continuous_dependence_probe(const RunConfig& config,
                                                            const std::vector<double>& deltas);

}  // namespace membrane
