// State space trust model: domain types and model math.
//
// Each of d sensor nodes carries a scalar trust value in [0,1]. Trust ages
// toward zero through a truncated Gaussian random walk and is corrected by a
// likelihood built from peer votes: node n votes for node j when their
// readings agree within a threshold r, and the votes are weighted by the
// voters' own trust.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sstm {

using Rng = std::mt19937_64;

/// Raised for invalid or inconsistent configuration (bad dimensions, out of
/// range parameters, unknown enum names).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Per-node trust values at one time step.
struct TrustState {
    std::vector<double> values;
    std::size_t time_step = 0;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t j) const { return values[j]; }

    /// Throws ConfigError if the length differs from d or any value leaves [0,1].
    void validate(std::size_t d) const;

    static TrustState uniform(std::size_t d, double value, std::size_t time_step = 0);
};

/// Per-node readings at one time step. A node that did not report holds
/// std::nullopt; no numeric sentinel is ever used for absence.
struct ReadingFrame {
    std::vector<std::optional<double>> readings;
    std::size_t time_step = 0;

    std::size_t size() const noexcept { return readings.size(); }
    bool present(std::size_t j) const { return readings[j].has_value(); }
};

struct ModelConfig {
    double alpha = 0.85;
    std::vector<double> q_diag;  ///< process noise variance per node
    double beta = 0.1;
    double r = 0.6;
    double t_x = 1e-5;
    std::size_t n_particles = 100;
    std::size_t d = 10;
    std::size_t max_iterations = 100;
    /// IPF only. When true every sweep of the component-wise inference uses
    /// a fresh random stream; by default each (step, component) pair replays
    /// one stream so successive sweeps differ only through the coupling.
    bool independent_sweep_draws = false;

    /// Defaults for d nodes: N=100, alpha=0.85, Q=diag(0.01), beta=0.1,
    /// r=0.6, T_x=1e-5, max_iterations=100.
    static ModelConfig defaults(std::size_t d);

    /// Checks the strict invariants: 0<alpha<1, 0<beta<1, r>0, t_x>0,
    /// q_diag.size()==d with positive entries, N>=1, d>=2, max_iterations>=1.
    void validate() const;

    /// Structural checks only (lengths, N>=1). Accepts q_jj == 0, which the
    /// transition treats as the deterministic limit.
    void check_shape() const;
};

enum class Vote { Disagree, Agree, Abstain };

/// One aging step for a single component: alpha*x + v, v ~ N(0, q_jj),
/// redrawn until the result lies in [0,1]. q_jj == 0 gives alpha*x exactly.
/// Throws std::runtime_error if 10^6 redraws fail.
double transition_component(double x, double alpha, double q_jj, Rng& rng);

/// Applies transition_component to every node and advances time_step.
TrustState transition_state(const TrustState& x, const ModelConfig& cfg, Rng& rng);

/// Vote of voter n on candidate j. An absent candidate earns Disagree; an
/// absent voter abstains. Agreement is the strict test |y_n - y_j| < r.
Vote vote(const std::optional<double>& y_n, const std::optional<double>& y_j, double r);

/// Trust-weighted fraction of agreeing voters for candidate j.
///
/// `trusts` has one entry per node; entry j is ignored. Abstaining voters are
/// dropped from numerator and denominator. If the remaining trust mass is
/// zero the unweighted mean of the available votes is returned, and if no
/// vote is available at all the result is 0.
double voting_metric(std::span<const double> trusts, const ReadingFrame& frame,
                     std::size_t j, double r);

/// Unweighted vote mean used by the BDMPF baseline (every voter trusted fully).
/// Abstaining voters are dropped; no votes gives 0.
double unweighted_voting_metric(const ReadingFrame& frame, std::size_t j, double r);

/// exp(-|x_j - v_j| / beta).
double residual_likelihood(double x_j, double v_j, double beta);

/// exp(-sum_j |x_j - V_j(x)| / beta) with each V_j computed from the other
/// components of the same state.
double joint_likelihood(const TrustState& x, const ReadingFrame& frame, const ModelConfig& cfg);

/// prod_j exp(-|x_j - V_j(x)| / beta); equal to joint_likelihood up to
/// rounding. Both are evaluated in extended precision and rounded once.
double factorized_likelihood(const TrustState& x, const ReadingFrame& frame, const ModelConfig& cfg);

/// Likelihood of candidate value x_j given fixed trust values of the other
/// nodes (`others`, entry j ignored).
double component_likelihood(double x_j, std::span<const double> others,
                            const ReadingFrame& frame, std::size_t j,
                            const ModelConfig& cfg);

}  // namespace sstm
