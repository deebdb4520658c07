#include "sstm/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sstm/seed.hpp"

namespace sstm {

namespace {

using Clock = std::chrono::steady_clock;

void check_inputs(const ParticleCloud& prior, const ReadingFrame& frame, const ModelConfig& cfg) {
    cfg.check_shape();
    if (prior.dimension() != cfg.d) {
        throw ConfigError("prior cloud has " + std::to_string(prior.dimension()) +
                          " components, expected d=" + std::to_string(cfg.d));
    }
    if (prior.size() == 0) throw ConfigError("prior cloud is empty");
    if (frame.size() != cfg.d) {
        throw ConfigError("reading frame has " + std::to_string(frame.size()) +
                          " entries, expected d=" + std::to_string(cfg.d));
    }
}

double mean_of(std::span<const double> xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Normalizes in place; throws when the total is zero or not finite.
void normalize(std::vector<double>& w, std::size_t time_step) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw FilterError("importance weights sum to " + std::to_string(total) +
                          " (likelihood underflow)", time_step);
    }
    for (double& x : w) x /= total;
}

/// One component of the IPF/BDMPF update: sample from the prior component,
/// age, weight against a fixed voting metric, resample.
struct ComponentUpdate {
    std::vector<double> particles;
    double mean = 0.0;
};

ComponentUpdate update_component(std::span<const double> prior_particles,
                                 std::span<const double> prior_weights, double voting,
                                 const ModelConfig& cfg, std::size_t j,
                                 std::size_t time_step, Rng& rng) {
    const std::size_t n = cfg.n_particles;
    const auto draws = resample_indices(prior_weights, n, rng);
    std::vector<double> predicted(n);
    for (std::size_t i = 0; i < n; ++i) {
        predicted[i] = transition_component(prior_particles[draws[i]], cfg.alpha, cfg.q_diag[j], rng);
    }
    // The predicted particles are exchangeable, so ordering them changes no
    // distribution. Value order makes the inverse-CDF draw in resample()
    // move to a neighbouring value when the weights shift slightly.
    std::sort(predicted.begin(), predicted.end());
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = residual_likelihood(predicted[i], voting, cfg.beta);
    normalize(w, time_step);

    ComponentUpdate out;
    out.particles = resample(predicted, w, rng);
    out.mean = mean_of(out.particles);
    return out;
}

double rms_difference(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(acc / static_cast<double>(a.size()));
}

}  // namespace

ParticleCloud ParticleCloud::dirac(const TrustState& at, std::size_t n_particles) {
    ParticleCloud cloud;
    const double w = 1.0 / static_cast<double>(n_particles);
    for (double v : at.values) {
        cloud.particles.emplace_back(n_particles, v);
        cloud.weights.emplace_back(n_particles, w);
    }
    return cloud;
}

std::vector<double> ParticleCloud::means() const {
    std::vector<double> out(dimension());
    for (std::size_t j = 0; j < dimension(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < particles[j].size(); ++i) acc += particles[j][i] * weights[j][i];
        out[j] = acc;
    }
    return out;
}

std::string_view to_string(FilterKind kind) {
    switch (kind) {
        case FilterKind::Bootstrap: return "bootstrap";
        case FilterKind::Ipf: return "ipf";
        case FilterKind::Bdmpf: return "bdmpf";
    }
    return "unknown";
}

FilterKind parse_filter_kind(std::string_view name) {
    if (name == "bootstrap") return FilterKind::Bootstrap;
    if (name == "ipf") return FilterKind::Ipf;
    if (name == "bdmpf") return FilterKind::Bdmpf;
    throw ConfigError("unknown filter kind '" + std::string(name) + "' (expected ipf, bdmpf or bootstrap)");
}

std::vector<std::size_t> resample_indices(std::span<const double> weights, std::size_t n, Rng& rng) {
    if (weights.empty()) throw FilterError("resample: empty weight vector", 0);
    std::vector<double> cumulative(weights.size());
    double running = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!(weights[l] >= 0.0)) throw FilterError("resample: negative or NaN weight", 0);
        running += weights[l];
        cumulative[l] = running;
    }
    const double total = cumulative.back();
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw FilterError("resample: weights sum to zero (likelihood underflow upstream)", 0);
    }

    std::uniform_real_distribution<double> pick(0.0, total);
    std::vector<std::size_t> out(n);
    for (auto& idx : out) {
        const double u = pick(rng);
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        idx = it == cumulative.end() ? weights.size() - 1
                                     : static_cast<std::size_t>(it - cumulative.begin());
    }
    return out;
}

std::vector<double> resample(std::span<const double> particles, std::span<const double> weights, Rng& rng) {
    if (particles.size() != weights.size()) throw ConfigError("resample: particle and weight counts differ");
    const auto idx = resample_indices(weights, particles.size(), rng);
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = particles[idx[i]];
    return out;
}

FilterOutput bootstrap_pf_step(const ParticleCloud& prior, const ReadingFrame& frame,
                               const ModelConfig& cfg, Rng& rng) {
    const auto started = Clock::now();
    check_inputs(prior, frame, cfg);
    const std::size_t n = cfg.n_particles;
    const std::size_t d = cfg.d;

    const auto draws = resample_indices(prior.weights.front(), n, rng);
    std::vector<TrustState> predicted(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        TrustState x;
        x.time_step = frame.time_step;
        x.values.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            x.values[j] = transition_component(prior.particles[j][draws[i]], cfg.alpha, cfg.q_diag[j], rng);
        }
        w[i] = joint_likelihood(x, frame, cfg);
        predicted[i] = std::move(x);
    }
    normalize(w, frame.time_step);
    const auto keep = resample_indices(w, n, rng);

    FilterOutput out;
    out.posterior.particles.assign(d, std::vector<double>(n));
    out.posterior.weights.assign(d, std::vector<double>(n, 1.0 / static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) out.posterior.particles[j][i] = predicted[keep[i]].values[j];
    }
    out.estimate.time_step = frame.time_step;
    out.estimate.values.resize(d);
    for (std::size_t j = 0; j < d; ++j) out.estimate.values[j] = mean_of(out.posterior.particles[j]);
    out.wall_time = Clock::now() - started;
    return out;
}

FilterOutput ipf_step(const ParticleCloud& prior, const TrustState& prev_estimate,
                      const ReadingFrame& frame, const ModelConfig& cfg, Rng& rng) {
    const auto started = Clock::now();
    check_inputs(prior, frame, cfg);
    if (prev_estimate.size() != cfg.d) throw ConfigError("previous estimate width differs from d");
    const std::size_t n = cfg.n_particles;
    const std::size_t d = cfg.d;

    // Every sweep re-executes the sampling lines. Component streams are keyed
    // by (step, j) and, with independent_sweep_draws, also by the sweep index.
    const std::uint64_t step_key = rng();

    FilterOutput out;
    out.estimate.time_step = frame.time_step;
    out.estimate.values = prev_estimate.values;
    out.posterior.particles.assign(d, std::vector<double>(n));
    out.posterior.weights.assign(d, std::vector<double>(n, 1.0 / static_cast<double>(n)));

    std::vector<double> previous(d, 0.0);
    std::size_t sweep = 0;
    out.converged = false;
    while (true) {
        if (sweep > 0) previous = out.estimate.values;
        for (std::size_t j = 0; j < d; ++j) {
            const std::uint64_t stream = cfg.independent_sweep_draws
                                             ? derive_seed(derive_seed(step_key, sweep), j)
                                             : derive_seed(step_key, j);
            Rng local(stream);
            const double voting = voting_metric(out.estimate.values, frame, j, cfg.r);
            auto update = update_component(prior.particles[j], prior.weights[j], voting, cfg, j,
                                           frame.time_step, local);
            out.posterior.particles[j] = std::move(update.particles);
            out.estimate.values[j] = update.mean;
        }
        ++sweep;
        const double residual = rms_difference(out.estimate.values, previous);
        if (sweep > 1) out.residuals.push_back(residual);
        if (residual <= cfg.t_x) {
            out.converged = true;
            break;
        }
        if (sweep >= cfg.max_iterations) break;
    }
    out.iterations_used = sweep;
    out.wall_time = Clock::now() - started;
    return out;
}

FilterOutput bdmpf_step(const ParticleCloud& prior, const ReadingFrame& frame,
                        const ModelConfig& cfg, Rng& rng) {
    const auto started = Clock::now();
    check_inputs(prior, frame, cfg);
    const std::size_t n = cfg.n_particles;
    const std::size_t d = cfg.d;

    FilterOutput out;
    out.estimate.time_step = frame.time_step;
    out.estimate.values.resize(d);
    out.posterior.weights.assign(d, std::vector<double>(n, 1.0 / static_cast<double>(n)));
    out.posterior.particles.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double voting = unweighted_voting_metric(frame, j, cfg.r);
        auto update = update_component(prior.particles[j], prior.weights[j], voting, cfg, j,
                                       frame.time_step, rng);
        out.posterior.particles[j] = std::move(update.particles);
        out.estimate.values[j] = update.mean;
    }
    out.wall_time = Clock::now() - started;
    return out;
}

std::vector<FilterOutput> run_filter(FilterKind kind, std::span<const ReadingFrame> frames,
                                     const ModelConfig& cfg, const TrustState& init, Rng& rng) {
    std::vector<FilterOutput> trajectory;
    if (frames.empty()) return trajectory;
    cfg.check_shape();
    init.validate(cfg.d);

    trajectory.reserve(frames.size());
    ParticleCloud cloud = ParticleCloud::dirac(init, cfg.n_particles);
    TrustState estimate = init;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        try {
            FilterOutput step;
            switch (kind) {
                case FilterKind::Bootstrap: step = bootstrap_pf_step(cloud, frames[k], cfg, rng); break;
                case FilterKind::Ipf: step = ipf_step(cloud, estimate, frames[k], cfg, rng); break;
                case FilterKind::Bdmpf: step = bdmpf_step(cloud, frames[k], cfg, rng); break;
            }
            cloud = step.posterior;
            estimate = step.estimate;
            trajectory.push_back(std::move(step));
        } catch (const FilterError& e) {
            throw FilterError(std::string(to_string(kind)) + " failed at step " + std::to_string(k + 1) +
                                  ": " + e.what(),
                              k + 1);
        } catch (const std::runtime_error& e) {
            throw FilterError(std::string(to_string(kind)) + " failed at step " + std::to_string(k + 1) +
                                  ": " + e.what(),
                              k + 1);
        }
    }
    return trajectory;
}

}  // namespace sstm
