// Synthetic sensor network scenarios and fault injection.
//
// Time indices in this module are 0-based frame positions; frame k carries
// time_step k+1.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sstm/model.hpp"

namespace sstm {

enum class FaultKind { Sleeper, StuckAt, VarianceDegradation, Offset, Ramp, Uniform };

std::string_view to_string(FaultKind kind);
FaultKind parse_fault_kind(std::string_view name);

/// A fault applied to one node over the inclusive frame interval [start, end].
///
/// Parameter use by kind:
///   StuckAt             value = constant reading
///   VarianceDegradation value = noise standard deviation
///   Offset              value = added offset, probability = per-step chance
///   Ramp                value = peak, base = start/end level; linear rise to
///                       the midpoint of the interval, then linear fall
///   Uniform             low/high = support of replacement readings
struct FaultSpec {
    FaultKind kind = FaultKind::Sleeper;
    std::size_t node = 0;  ///< 0-based node index
    std::size_t start = 0;
    std::size_t end = 0;
    double value = 0.0;
    double probability = 1.0;
    double base = 20.0;
    double low = 0.0;
    double high = 100.0;

    /// Throws ConfigError unless start <= end < frame_count, node < d and the
    /// kind-specific parameters are usable.
    void validate(std::size_t frame_count, std::size_t d) const;
};

/// Role of a node in a generated scenario.
struct NodeSpec {
    std::string label;     ///< "A", "B", "C", "D", ... or "honest"
    std::string behavior;  ///< human-readable description
};

struct Scenario {
    std::vector<ReadingFrame> frames;
    std::vector<TrustState> truth;  ///< binary labels, same shape as frames
    std::vector<NodeSpec> node_specs;
    std::vector<FaultSpec> faults;
    std::uint64_t seed = 0;

    std::size_t steps() const noexcept { return frames.size(); }
    std::size_t nodes() const noexcept { return frames.empty() ? node_specs.size() : frames.front().size(); }

    /// Equal lengths, equal widths, labels in {0,1}.
    void validate() const;
};

/// i.i.d. Normal(mean, std^2) readings for every node and step. std == 0
/// produces the constant `mean`.
std::vector<ReadingFrame> generate_baseline(std::size_t d, std::size_t steps, double mean,
                                            double std, Rng& rng);

/// Same distribution, but node j draws from its own stream
/// derive_seed(seed, j), so a larger network extends a smaller one with the
/// same seed instead of redrawing it.
std::vector<ReadingFrame> generate_baseline(std::size_t d, std::size_t steps, double mean,
                                            double std, std::uint64_t seed);

/// Returns a copy of `frames` with the fault applied. Only the faulty node
/// inside [start, end] changes.
std::vector<ReadingFrame> apply_fault(std::vector<ReadingFrame> frames, const FaultSpec& spec, Rng& rng);

/// Deterministic value of a ramp fault at frame k (inside its interval).
double ramp_value(const FaultSpec& spec, std::size_t k);

struct PaperScenarioOptions {
    std::size_t d = 10;
    std::size_t steps = 100;
    double reading_mean = 20.0;
    double reading_std = 0.2;
};

/// The three-faulty-node scenario:
///   node 1 (A): ramp 20 -> 40 -> 20 over steps 30..70, untrusted on 31..70
///   node 2 (B): Uniform[0,100] readings at every step, never trusted
///   node 3 (C): stops reporting from step 51, untrusted on 51..100
///   nodes 4..d: honest Normal(mean, std^2)
/// Requires d >= 4.
Scenario paper_scenario(const PaperScenarioOptions& opts, std::uint64_t seed);

/// Honest baseline plus a list of faults; truth is 0 inside fault intervals.
/// Readings use the per-node streams of generate_baseline and every fault
/// has a stream of its own, so the first nodes do not change with d.
Scenario fault_scenario(std::size_t d, std::size_t steps, double mean, double std,
                        const std::vector<FaultSpec>& faults, std::uint64_t seed);

/// Applies `faults` to existing frames (for example synchronized field data)
/// with the same per-fault streams as fault_scenario. Truth is 0 inside the
/// fault intervals and 1 elsewhere.
Scenario inject_faults(std::vector<ReadingFrame> frames, const std::vector<FaultSpec>& faults,
                       std::uint64_t seed);

/// The four lab faults on the first min(d, 4) nodes:
///   node 1 sleeper on epochs 500..700
///   node 2 stuck at 100 on epochs 300..400
///   node 3 noise std 20 on epochs 200..250
///   node 4 +100 offset with probability 0.5 on epochs 100..150
/// Epochs are 1-based grid positions, stored as 0-based frame indices.
std::vector<FaultSpec> lab_faults(std::size_t d);

/// Binary labels: 1 everywhere except inside the intervals of `faults`.
/// Ramp faults are labelled 0 from start+1 so the first ramp frame, whose
/// value still equals the base, counts as trustworthy.
std::vector<TrustState> truth_from_faults(std::size_t d, std::size_t steps,
                                          const std::vector<FaultSpec>& faults);

nlohmann::json to_json(const FaultSpec& spec);
FaultSpec fault_from_json(const nlohmann::json& j);

/// Full scenario document: metadata, node specs, faults, frames and truth.
nlohmann::json to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

/// Writes scenario.json, frames.csv and truth.csv into `dir`.
void write_scenario(const Scenario& scenario, const std::filesystem::path& dir);
/// Reads scenario.json from `dir`.
Scenario read_scenario(const std::filesystem::path& dir);

}  // namespace sstm
