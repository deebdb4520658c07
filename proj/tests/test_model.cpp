#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sstm/model.hpp"
#include "test_util.hpp"

using namespace sstm;

namespace {

ReadingFrame frame_of(std::initializer_list<std::optional<double>> ys) {
    ReadingFrame f;
    f.readings.assign(ys.begin(), ys.end());
    f.time_step = 1;
    return f;
}

}  // namespace

TEST(ModelConfig, DefaultsAreValid) {
    const auto cfg = ModelConfig::defaults(10);
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.n_particles, 100u);
    EXPECT_DOUBLE_EQ(cfg.alpha, 0.85);
    EXPECT_DOUBLE_EQ(cfg.beta, 0.1);
    EXPECT_DOUBLE_EQ(cfg.r, 0.6);
    EXPECT_DOUBLE_EQ(cfg.t_x, 1e-5);
    ASSERT_EQ(cfg.q_diag.size(), 10u);
    for (double q : cfg.q_diag) EXPECT_DOUBLE_EQ(q, 0.01);
    EXPECT_EQ(cfg.max_iterations, 100u);
}

TEST(ModelConfig, RejectsOutOfRangeParameters) {
    auto cfg = ModelConfig::defaults(3);
    cfg.alpha = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = ModelConfig::defaults(3);
    cfg.beta = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = ModelConfig::defaults(3);
    cfg.q_diag[1] = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_NO_THROW(cfg.check_shape());
    cfg = ModelConfig::defaults(3);
    cfg.n_particles = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(ModelConfig::defaults(1).validate(), ConfigError);
    cfg = ModelConfig::defaults(3);
    cfg.q_diag.pop_back();
    EXPECT_THROW(cfg.check_shape(), ConfigError);
}

TEST(TrustState, ValidateChecksRangeAndWidth) {
    EXPECT_NO_THROW(TrustState::uniform(3, 1.0, 1).validate(3));
    EXPECT_THROW(TrustState::uniform(3, 1.0, 1).validate(4), ConfigError);
    TrustState x{{0.2, 1.5}, 1};
    EXPECT_THROW(x.validate(2), ConfigError);
}

TEST(Transition, NoiselessLimit) {
    Rng rng(1);
    EXPECT_DOUBLE_EQ(transition_component(1.0, 0.85, 0.0, rng), 0.85);
    EXPECT_DOUBLE_EQ(transition_component(0.0, 0.85, 0.0, rng), 0.0);

    auto cfg = ModelConfig::defaults(3);
    cfg.q_diag.assign(3, 0.0);
    const auto x = transition_state(TrustState::uniform(3, 1.0, 1), cfg, rng);
    for (double v : x.values) EXPECT_DOUBLE_EQ(v, 0.85);
    cfg = ModelConfig::defaults(2);
    cfg.q_diag.assign(2, 0.0);
    cfg.alpha = 0.3;
    const auto z = transition_state(TrustState::uniform(2, 0.0, 1), cfg, rng);
    EXPECT_EQ(z.values, (std::vector<double>{0.0, 0.0}));
}

TEST(Transition, SampleMeanMatchesAgedValue) {
    Rng rng(42);
    constexpr int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += transition_component(0.5, 0.85, 0.01, rng);
    EXPECT_NEAR(sum / n, 0.425, 0.001);
}

TEST(Transition, StateMeansMatchComponentOracle) {
    // Per-component means of transition_state against independent draws of
    // transition_component with the same parameters.
    auto cfg = ModelConfig::defaults(3);
    cfg.q_diag = {0.01, 0.04, 0.09};
    const TrustState x{{0.1, 0.5, 0.95}, 1};
    constexpr int n = 40000;
    Rng rng_state(3);
    Rng rng_comp(4);
    for (std::size_t j = 0; j < 3; ++j) {
        double a = 0.0;
        double b = 0.0;
        double b2 = 0.0;
        for (int i = 0; i < n; ++i) {
            a += transition_state(x, cfg, rng_state).values[j];
            const double v = transition_component(x.values[j], cfg.alpha, cfg.q_diag[j], rng_comp);
            b += v;
            b2 += v * v;
        }
        const double var = b2 / n - (b / n) * (b / n);
        EXPECT_NEAR(a / n, b / n, 3.0 * std::sqrt(2.0 * var / n)) << "component " << j;
    }
}

TEST(Transition, StaysInsideUnitInterval) {
    Rng rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> q(0.001, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double y = transition_component(u(rng), u(rng) * 0.98 + 0.01, q(rng), rng);
        ASSERT_GE(y, 0.0);
        ASSERT_LE(y, 1.0);
    }
}

TEST(Transition, TruncationRedrawsInsteadOfClipping) {
    // Clipping would put an atom at 0; redrawing never returns the boundary.
    Rng rng(9);
    int at_zero = 0;
    for (int i = 0; i < 20000; ++i) at_zero += transition_component(0.0, 0.85, 0.01, rng) == 0.0;
    EXPECT_EQ(at_zero, 0);
}

TEST(Vote, StrictThreshold) {
    EXPECT_EQ(vote(20.3, 20.1, 0.6), Vote::Agree);
    EXPECT_EQ(vote(20.0, 20.6, 0.6), Vote::Disagree);
    EXPECT_EQ(vote(std::nullopt, 20.0, 0.6), Vote::Abstain);
    EXPECT_EQ(vote(20.0, std::nullopt, 0.6), Vote::Disagree);
}

TEST(Vote, SymmetricWhenBothPresent) {
    Rng rng(11);
    std::uniform_real_distribution<double> y(19.0, 21.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = y(rng);
        const double b = y(rng);
        EXPECT_EQ(vote(a, b, 0.6), vote(b, a, 0.6));
    }
}

TEST(VotingMetric, HandValues) {
    // Node 1 is the candidate; node 2 agrees, node 3 does not.
    const auto f = frame_of({20.0, 20.1, 25.0});
    const std::vector<double> even{0.0, 0.5, 0.5};
    const std::vector<double> skewed{0.0, 0.9, 0.1};
    const std::vector<double> zero{0.0, 0.0, 0.0};
    EXPECT_DOUBLE_EQ(voting_metric(even, f, 0, 0.6), 0.5);
    EXPECT_DOUBLE_EQ(voting_metric(skewed, f, 0, 0.6), 0.9);
    EXPECT_DOUBLE_EQ(voting_metric(zero, f, 0, 0.6), 0.5);
}

TEST(VotingMetric, MissingReadings) {
    const std::vector<double> trusts{1.0, 1.0, 1.0};
    // Silent voter abstains.
    EXPECT_DOUBLE_EQ(voting_metric(trusts, frame_of({20.0, std::nullopt, 20.1}), 0, 0.6), 1.0);
    // Silent candidate gets no support.
    EXPECT_DOUBLE_EQ(voting_metric(trusts, frame_of({std::nullopt, 20.0, 20.1}), 0, 0.6), 0.0);
    // No voter left.
    EXPECT_DOUBLE_EQ(voting_metric(trusts, frame_of({20.0, std::nullopt, std::nullopt}), 0, 0.6), 0.0);
    EXPECT_DOUBLE_EQ(unweighted_voting_metric(frame_of({20.0, std::nullopt, 25.0}), 0, 0.6), 0.0);
    EXPECT_DOUBLE_EQ(unweighted_voting_metric(frame_of({20.0, std::nullopt, 20.0}), 0, 0.6), 1.0);
}

TEST(VotingMetric, ScaleInvariant) {
    Rng rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> y(20.0, 0.5);
    std::uniform_real_distribution<double> c(0.01, 100.0);
    for (int t = 0; t < 2000; ++t) {
        constexpr std::size_t d = 6;
        ReadingFrame f;
        std::vector<double> x(d);
        for (std::size_t j = 0; j < d; ++j) {
            f.readings.push_back(u(rng) < 0.1 ? std::nullopt : std::optional<double>(y(rng)));
            x[j] = u(rng);
        }
        const double s = c(rng);
        std::vector<double> scaled(d);
        for (std::size_t j = 0; j < d; ++j) scaled[j] = s * x[j];
        for (std::size_t j = 0; j < d; ++j) {
            EXPECT_NEAR(voting_metric(scaled, f, j, 0.6), voting_metric(x, f, j, 0.6), 1e-12);
        }
    }
}

TEST(VotingMetric, EqualsUnweightedMeanWhenOthersFullyTrusted) {
    Rng rng(17);
    std::normal_distribution<double> y(20.0, 0.5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
        constexpr std::size_t d = 7;
        ReadingFrame f;
        for (std::size_t j = 0; j < d; ++j) {
            f.readings.push_back(u(rng) < 0.15 ? std::nullopt : std::optional<double>(y(rng)));
        }
        for (std::size_t j = 0; j < d; ++j) {
            std::vector<double> x(d, 1.0);
            x[j] = u(rng);  // own entry is ignored
            EXPECT_NEAR(voting_metric(x, f, j, 0.6), unweighted_voting_metric(f, j, 0.6), 1e-15);
        }
    }
}

TEST(Likelihood, HandValues) {
    auto cfg = ModelConfig::defaults(2);
    const TrustState x{{0.5, 1.0}, 1};
    const auto f = frame_of({20.0, 30.0});
    EXPECT_NEAR(joint_likelihood(x, f, cfg), std::exp(-15.0), 1e-20);
    EXPECT_NEAR(joint_likelihood(x, f, cfg), 3.059e-7, 1e-10);
    EXPECT_NEAR(residual_likelihood(1.0, 0.0, 0.1), 4.54e-5, 1e-7);
    EXPECT_DOUBLE_EQ(residual_likelihood(0.3, 0.3, 0.1), 1.0);
}

TEST(Likelihood, OneWhenEveryResidualVanishes) {
    // Identical readings give V_j = 1, so x = 1 everywhere has zero residual.
    auto cfg = ModelConfig::defaults(4);
    const auto f = frame_of({20.0, 20.0, 20.0, 20.0});
    EXPECT_DOUBLE_EQ(joint_likelihood(TrustState::uniform(4, 1.0, 1), f, cfg), 1.0);
    EXPECT_LT(joint_likelihood(TrustState::uniform(4, 0.9, 1), f, cfg), 1.0);
}

TEST(Likelihood, StrictlyDecreasingInResidual) {
    double prev = residual_likelihood(0.4, 0.4, 0.1);
    for (double x = 0.41; x <= 1.0; x += 0.01) {
        const double l = residual_likelihood(x, 0.4, 0.1);
        EXPECT_LT(l, prev);
        prev = l;
    }
    prev = residual_likelihood(0.4, 0.4, 0.1);
    for (double x = 0.39; x >= 0.0; x -= 0.01) {
        const double l = residual_likelihood(x, 0.4, 0.1);
        EXPECT_LT(l, prev);
        prev = l;
    }
}

TEST(Likelihood, JointInUnitIntervalAndFactorizes) {
    Rng rng(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> y(20.0, 0.5);
    for (int t = 0; t < 2000; ++t) {
        const std::size_t d = 2 + t % 9;
        auto cfg = ModelConfig::defaults(d);
        TrustState x;
        ReadingFrame f;
        for (std::size_t j = 0; j < d; ++j) {
            x.values.push_back(u(rng));
            f.readings.push_back(y(rng));
        }
        const double joint = joint_likelihood(x, f, cfg);
        EXPECT_GT(joint, 0.0);
        EXPECT_LE(joint, 1.0);
        EXPECT_LE(test::ulp_distance(joint, factorized_likelihood(x, f, cfg)), 8);
        double product = 1.0;
        for (std::size_t j = 0; j < d; ++j) product *= component_likelihood(x.values[j], x.values, f, j, cfg);
        EXPECT_NEAR(product / joint, 1.0, 1e-12);
    }
}

TEST(Likelihood, WidthMismatchThrows) {
    auto cfg = ModelConfig::defaults(3);
    EXPECT_THROW(joint_likelihood(TrustState::uniform(3, 1.0, 1), frame_of({1.0, 2.0}), cfg), ConfigError);
}
