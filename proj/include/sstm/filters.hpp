// Particle filters over the trust model: multinomial resampling, a joint
// bootstrap filter, the iterative component-wise filter (IPF) and the BDMPF
// baseline that treats nodes independently with unweighted votes.
#pragma once

#include <chrono>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sstm/model.hpp"

namespace sstm {

/// Raised when a filter step cannot continue, typically because every
/// importance weight underflowed to zero.
class FilterError : public std::runtime_error {
public:
    FilterError(const std::string& what, std::size_t time_step)
        : std::runtime_error(what), time_step_(time_step) {}

    std::size_t time_step() const noexcept { return time_step_; }

private:
    std::size_t time_step_;
};

/// Empirical distribution stored per component. particles[j][i] is the i-th
/// sample of node j. For the joint bootstrap filter column i across all j is
/// one joint particle and the weight rows are identical.
struct ParticleCloud {
    std::vector<std::vector<double>> particles;
    std::vector<std::vector<double>> weights;

    std::size_t dimension() const noexcept { return particles.size(); }
    std::size_t size() const noexcept { return particles.empty() ? 0 : particles.front().size(); }

    /// All N particles of every component at `value`, uniform weights.
    static ParticleCloud dirac(const TrustState& at, std::size_t n_particles);

    std::vector<double> means() const;
};

struct FilterOutput {
    TrustState estimate;
    ParticleCloud posterior;
    std::size_t iterations_used = 1;
    bool converged = true;
    /// IPF only: sqrt(sum_j (x_j - x_prev_j)^2 / d) after each sweep beyond the first.
    std::vector<double> residuals;
    std::chrono::duration<double> wall_time{0.0};
};

enum class FilterKind { Bootstrap, Ipf, Bdmpf };

std::string_view to_string(FilterKind kind);
/// Accepts "bootstrap", "ipf", "bdmpf"; throws ConfigError otherwise.
FilterKind parse_filter_kind(std::string_view name);

/// Draws N indices i.i.d. with Pr{index = l} = weights[l] / sum(weights).
/// Throws FilterError when the weights are empty, negative, or sum to zero.
std::vector<std::size_t> resample_indices(std::span<const double> weights, std::size_t n, Rng& rng);

/// Multinomial resampling of a single particle set; output weights are 1/N.
std::vector<double> resample(std::span<const double> particles, std::span<const double> weights, Rng& rng);

/// Joint bootstrap particle filter step: draw from the prior cloud, age every
/// component, weight by the joint likelihood, resample.
FilterOutput bootstrap_pf_step(const ParticleCloud& prior, const ReadingFrame& frame,
                               const ModelConfig& cfg, Rng& rng);

/// Iterative component-wise inference at one time step.
///
/// The estimate starts at `prev_estimate`. Each sweep visits j = 1..d in
/// order: draw N samples from the prior component cloud, age them, weight by
/// the component likelihood using the current estimates of the other nodes,
/// resample, and overwrite estimate j with the resampled mean. Sweeps repeat
/// until the RMS change between consecutive sweeps is at most t_x, or until
/// max_iterations sweeps have run (converged = false).
FilterOutput ipf_step(const ParticleCloud& prior, const TrustState& prev_estimate,
                      const ReadingFrame& frame, const ModelConfig& cfg, Rng& rng);

/// BDMPF baseline: one independent bootstrap filter per node with the
/// unweighted vote mean as voting metric. Single pass.
FilterOutput bdmpf_step(const ParticleCloud& prior, const ReadingFrame& frame,
                        const ModelConfig& cfg, Rng& rng);

/// Runs a filter over all frames starting from a Dirac prior at `init`.
/// Step errors are rethrown as FilterError carrying the failing time index.
std::vector<FilterOutput> run_filter(FilterKind kind, std::span<const ReadingFrame> frames,
                                     const ModelConfig& cfg, const TrustState& init, Rng& rng);

}  // namespace sstm
