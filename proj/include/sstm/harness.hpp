// Monte Carlo experiment runner, RMSE traces, timing studies and exports.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sstm/filters.hpp"
#include "sstm/sim.hpp"

namespace sstm {

/// Per-node, per-step root mean square error against the truth labels,
/// taken over the Monte Carlo runs.
class RmseTrace {
public:
    RmseTrace() = default;
    RmseTrace(std::size_t steps, std::size_t nodes) : steps_(steps), nodes_(nodes), values_(steps * nodes, 0.0) {}

    std::size_t steps() const noexcept { return steps_; }
    std::size_t nodes() const noexcept { return nodes_; }
    double at(std::size_t k, std::size_t j) const { return values_[k * nodes_ + j]; }
    double& at(std::size_t k, std::size_t j) { return values_[k * nodes_ + j]; }

    /// Mean RMSE of node j over frames [first, last] (0-based, inclusive).
    double time_average(std::size_t j, std::size_t first, std::size_t last) const;
    double time_average(std::size_t j) const { return time_average(j, 0, steps_ - 1); }

private:
    std::size_t steps_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> values_;
};

/// RMSE_kj = sqrt(sum_m (xhat^m_kj - x_kj)^2 / M) over the M runs.
/// All trajectories must match the truth shape.
RmseTrace compute_rmse(std::span<const std::vector<TrustState>> estimates,
                       std::span<const std::vector<TrustState>> truths);

/// Signature of a complete filter execution; swappable for test doubles.
using FilterRunner = std::function<std::vector<FilterOutput>(
    std::span<const ReadingFrame>, const ModelConfig&, const TrustState& init, Rng&)>;

FilterRunner default_runner(FilterKind kind);

/// Builds a scenario realization from a seed.
using ScenarioFactory = std::function<Scenario(std::uint64_t seed)>;

struct ExperimentConfig {
    ModelConfig model = ModelConfig::defaults(10);
    FilterKind kind = FilterKind::Ipf;
    std::size_t runs = 100;
    std::uint64_t base_seed = 1;
    std::uint64_t scenario_seed = 1;
    /// When false all runs share one scenario realization drawn from
    /// scenario_seed; when true run m redraws with derive_seed(scenario_seed, m).
    bool redraw_scenario = false;
    std::size_t jobs = 1;
    double init_trust = 0.5;
    /// Overrides the filter selected by `kind` when set.
    FilterRunner runner;

    void validate() const;
};

struct RunResult {
    std::size_t run = 0;  ///< 1-based
    std::uint64_t seed = 0;
    std::vector<TrustState> estimates;
    std::vector<TrustState> truth;
    std::vector<std::size_t> iterations;
    std::vector<bool> converged;
    double seconds = 0.0;
    std::optional<std::string> error;
    std::size_t failed_step = 0;

    bool ok() const noexcept { return !error.has_value(); }
};

struct TimingSummary {
    double mean_seconds = 0.0;
    double min_seconds = 0.0;
    double max_seconds = 0.0;
};

struct ExperimentResult {
    FilterKind kind = FilterKind::Ipf;
    Scenario scenario;  ///< the shared realization (first run's when redrawing)
    std::vector<RunResult> runs;
    RmseTrace rmse;     ///< over successful runs
    TimingSummary timing;

    std::size_t failed_runs() const;
    /// Steps (over all runs) where the IPF inner loop hit its cap.
    std::size_t non_converged_steps() const;
    /// Mean estimate per step and node over successful runs.
    std::vector<TrustState> mean_estimates() const;
};

/// Runs cfg.runs independent filter executions with seeds
/// derive_seed(base_seed, m), m = 1..M, on up to cfg.jobs threads. Results
/// are ordered by run and do not depend on scheduling. A failing run is
/// recorded with its seed and step; the other runs are kept.
ExperimentResult monte_carlo(const ExperimentConfig& cfg, const ScenarioFactory& make_scenario);

struct ScalingRow {
    std::size_t d = 0;
    double mean_seconds = 0.0;
    double ratio = 1.0;  ///< relative to the first row
};

/// One single-threaded experiment per node count, ratios against the first.
std::vector<ScalingRow> scaling_study(std::span<const std::size_t> d_values, const ExperimentConfig& base,
                                      const PaperScenarioOptions& scenario_opts);

struct AlphaResult {
    double alpha = 0.0;
    ExperimentResult result;
};

/// One experiment per aging parameter on a shared scenario.
std::vector<AlphaResult> alpha_sweep(std::span<const double> alphas, const ExperimentConfig& base,
                                     const ScenarioFactory& make_scenario);

struct TrajectoryRow {
    std::size_t run = 0;
    std::size_t step = 0;
    std::size_t node = 0;  ///< 1-based
    double estimate = 0.0;
    double truth = 0.0;

    bool operator==(const TrajectoryRow&) const = default;
};

inline constexpr int kOutputSchemaVersion = 1;

void write_trajectories_csv(const std::filesystem::path& path, const ExperimentResult& result);
std::vector<TrajectoryRow> read_trajectories_csv(const std::filesystem::path& path);
void write_rmse_csv(const std::filesystem::path& path, const RmseTrace& rmse);
RmseTrace read_rmse_csv(const std::filesystem::path& path);
void write_iterations_csv(const std::filesystem::path& path, const ExperimentResult& result);
void write_timing_json(const std::filesystem::path& path, std::span<const ScalingRow> rows);

/// Writes trajectories.csv, rmse.csv and iterations.csv into `dir`.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result);

}  // namespace sstm
