#include "sstm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sstm {

namespace {

constexpr std::size_t kMaxRedraws = 1'000'000;

}  // namespace

void TrustState::validate(std::size_t d) const {
    if (values.size() != d) {
        throw ConfigError("trust state has " + std::to_string(values.size()) +
                          " components, expected " + std::to_string(d));
    }
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (!(values[j] >= 0.0 && values[j] <= 1.0)) {
            throw ConfigError("trust value of node " + std::to_string(j + 1) + " outside [0,1]");
        }
    }
}

TrustState TrustState::uniform(std::size_t d, double value, std::size_t time_step) {
    return TrustState{std::vector<double>(d, value), time_step};
}

ModelConfig ModelConfig::defaults(std::size_t d) {
    ModelConfig cfg;
    cfg.d = d;
    cfg.q_diag.assign(d, 0.01);
    return cfg;
}

void ModelConfig::check_shape() const {
    if (d < 1) throw ConfigError("node count d must be positive");
    if (q_diag.size() != d) {
        throw ConfigError("q_diag has " + std::to_string(q_diag.size()) +
                          " entries, expected d=" + std::to_string(d));
    }
    for (double q : q_diag) {
        if (!(q >= 0.0) || !std::isfinite(q)) throw ConfigError("q_diag entries must be finite and non-negative");
    }
    if (n_particles < 1) throw ConfigError("n_particles must be at least 1");
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
}

void ModelConfig::validate() const {
    check_shape();
    if (d < 2) throw ConfigError("node count d must be at least 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0,1)");
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("vote threshold r must be positive");
    if (!(t_x > 0.0) || !std::isfinite(t_x)) throw ConfigError("convergence threshold t_x must be positive");
    for (double q : q_diag) {
        if (!(q > 0.0)) throw ConfigError("q_diag entries must be strictly positive");
    }
}

double transition_component(double x, double alpha, double q_jj, Rng& rng) {
    const double mean = alpha * x;
    if (q_jj == 0.0) return std::clamp(mean, 0.0, 1.0);

    std::normal_distribution<double> noise(0.0, std::sqrt(q_jj));
    for (std::size_t attempt = 0; attempt < kMaxRedraws; ++attempt) {
        const double candidate = mean + noise(rng);
        if (candidate >= 0.0 && candidate <= 1.0) return candidate;
    }
    throw std::runtime_error("transition_component: no draw inside [0,1] after 1e6 attempts");
}

TrustState transition_state(const TrustState& x, const ModelConfig& cfg, Rng& rng) {
    if (x.size() != cfg.d || cfg.q_diag.size() != cfg.d) {
        throw ConfigError("transition_state: state has " + std::to_string(x.size()) +
                          " components but config expects d=" + std::to_string(cfg.d));
    }
    TrustState next;
    next.time_step = x.time_step + 1;
    next.values.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        next.values[j] = transition_component(x.values[j], cfg.alpha, cfg.q_diag[j], rng);
    }
    return next;
}

Vote vote(const std::optional<double>& y_n, const std::optional<double>& y_j, double r) {
    if (!y_j) return Vote::Disagree;
    if (!y_n) return Vote::Abstain;
    return std::abs(*y_n - *y_j) < r ? Vote::Agree : Vote::Disagree;
}

double voting_metric(std::span<const double> trusts, const ReadingFrame& frame,
                     std::size_t j, double r) {
    double weighted = 0.0;
    double mass = 0.0;
    std::size_t voters = 0;
    std::size_t agreeing = 0;
    const auto& y = frame.readings;
    for (std::size_t n = 0; n < y.size(); ++n) {
        if (n == j) continue;
        const Vote u = vote(y[n], y[j], r);
        if (u == Vote::Abstain) continue;
        ++voters;
        const double agree = u == Vote::Agree ? 1.0 : 0.0;
        agreeing += u == Vote::Agree;
        weighted += trusts[n] * agree;
        mass += trusts[n];
    }
    if (mass > 0.0) return weighted / mass;
    if (voters == 0) return 0.0;
    return static_cast<double>(agreeing) / static_cast<double>(voters);
}

double unweighted_voting_metric(const ReadingFrame& frame, std::size_t j, double r) {
    std::size_t voters = 0;
    std::size_t agreeing = 0;
    const auto& y = frame.readings;
    for (std::size_t n = 0; n < y.size(); ++n) {
        if (n == j) continue;
        const Vote u = vote(y[n], y[j], r);
        if (u == Vote::Abstain) continue;
        ++voters;
        agreeing += u == Vote::Agree;
    }
    if (voters == 0) return 0.0;
    return static_cast<double>(agreeing) / static_cast<double>(voters);
}

namespace {

// Extended precision keeps exp's amplification of the rounding in its
// argument below one double ulp.
long double residual_factor(double x_j, double v_j, double beta) {
    return std::exp(-std::abs(static_cast<long double>(x_j) - v_j) / beta);
}

}  // namespace

double residual_likelihood(double x_j, double v_j, double beta) {
    return static_cast<double>(residual_factor(x_j, v_j, beta));
}

double joint_likelihood(const TrustState& x, const ReadingFrame& frame, const ModelConfig& cfg) {
    if (x.size() != frame.size()) throw ConfigError("joint_likelihood: state and frame widths differ");
    long double total = 0.0L;
    for (std::size_t j = 0; j < x.size(); ++j) {
        total += std::abs(static_cast<long double>(x.values[j]) - voting_metric(x.values, frame, j, cfg.r));
    }
    return static_cast<double>(std::exp(-total / cfg.beta));
}

double factorized_likelihood(const TrustState& x, const ReadingFrame& frame, const ModelConfig& cfg) {
    if (x.size() != frame.size()) throw ConfigError("factorized_likelihood: state and frame widths differ");
    long double product = 1.0L;
    for (std::size_t j = 0; j < x.size(); ++j) {
        product *= residual_factor(x.values[j], voting_metric(x.values, frame, j, cfg.r), cfg.beta);
    }
    return static_cast<double>(product);
}

double component_likelihood(double x_j, std::span<const double> others,
                            const ReadingFrame& frame, std::size_t j,
                            const ModelConfig& cfg) {
    if (others.size() != frame.size()) throw ConfigError("component_likelihood: trust and frame widths differ");
    return residual_likelihood(x_j, voting_metric(others, frame, j, cfg.r), cfg.beta);
}

}  // namespace sstm
