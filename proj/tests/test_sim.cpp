#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sstm/frame_io.hpp"
#include "sstm/sim.hpp"
#include "test_util.hpp"

using namespace sstm;

namespace {

/// P(K > x) for the Kolmogorov distribution, by its alternating series.
double kolmogorov_tail(double x) {
    double sum = 0.0;
    for (int k = 1; k < 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return sum;
}

/// Critical value of sqrt(n) * D_n at the given significance (large n).
double kolmogorov_critical(double significance) {
    double lo = 0.5;
    double hi = 3.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (kolmogorov_tail(mid) > significance ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Baseline, GrandMeanWithinCltBand) {
    Rng rng(1);
    const auto frames = generate_baseline(10, 100, 20.0, 0.2, rng);
    double sum = 0.0;
    for (const auto& f : frames) {
        for (const auto& y : f.readings) sum += *y;
    }
    EXPECT_NEAR(sum / 1000.0, 20.0, 3.0 * 0.2 / std::sqrt(1000.0));
}

TEST(Baseline, PerNodeStreamsGrandMean) {
    const auto frames = generate_baseline(10, 100, 20.0, 0.2, std::uint64_t{5});
    double sum = 0.0;
    for (const auto& f : frames) {
        for (const auto& y : f.readings) sum += *y;
    }
    EXPECT_NEAR(sum / 1000.0, 20.0, 3.0 * 0.2 / std::sqrt(1000.0));
}

TEST(Baseline, ZeroStdIsConstant) {
    Rng rng(2);
    for (const auto& f : generate_baseline(4, 30, 20.0, 0.0, rng)) {
        for (const auto& y : f.readings) EXPECT_EQ(*y, 20.0);
    }
    for (const auto& f : generate_baseline(4, 30, 20.0, 0.0, std::uint64_t{3})) {
        for (const auto& y : f.readings) EXPECT_EQ(*y, 20.0);
    }
}

TEST(Baseline, HonestPairsMostlyAgree) {
    // P(|N(0, 2 * 0.2^2)| < 0.6) = erf(0.6 / (0.2 * 2)) ~ 0.966.
    EXPECT_NEAR(std::erf(0.6 / (0.2 * 2.0)), 0.966, 5e-4);
    Rng rng(3);
    const auto frames = generate_baseline(10, 100, 20.0, 0.2, rng);
    std::size_t agree = 0;
    std::size_t pairs = 0;
    for (const auto& f : frames) {
        for (std::size_t a = 0; a < 10; ++a) {
            for (std::size_t b = a + 1; b < 10; ++b) {
                ++pairs;
                agree += vote(f.readings[a], f.readings[b], 0.6) == Vote::Agree;
            }
        }
    }
    EXPECT_GE(static_cast<double>(agree) / static_cast<double>(pairs), 0.95);
}

TEST(Baseline, LargerNetworkExtendsSmallerOne) {
    const auto small = generate_baseline(5, 50, 20.0, 0.2, std::uint64_t{9});
    const auto large = generate_baseline(20, 50, 20.0, 0.2, std::uint64_t{9});
    for (std::size_t k = 0; k < 50; ++k) {
        for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(small[k].readings[j], large[k].readings[j]);
    }
}

TEST(Baseline, RejectsBadArguments) {
    Rng rng(4);
    EXPECT_THROW(generate_baseline(1, 10, 20.0, 0.2, rng), ConfigError);
    EXPECT_THROW(generate_baseline(3, 10, 20.0, -1.0, rng), ConfigError);
}

TEST(Faults, RampMidpoint) {
    FaultSpec ramp;
    ramp.kind = FaultKind::Ramp;
    ramp.start = 29;
    ramp.end = 69;
    ramp.value = 40.0;
    ramp.base = 20.0;
    EXPECT_DOUBLE_EQ(ramp_value(ramp, 29), 20.0);
    EXPECT_DOUBLE_EQ(ramp_value(ramp, 39), 30.0);
    EXPECT_DOUBLE_EQ(ramp_value(ramp, 49), 40.0);
    EXPECT_DOUBLE_EQ(ramp_value(ramp, 59), 30.0);
    EXPECT_DOUBLE_EQ(ramp_value(ramp, 69), 20.0);
}

TEST(Faults, SleeperSilencesExactlyItsWindow) {
    Rng rng(5);
    auto frames = generate_baseline(4, 100, 20.0, 0.2, rng);
    FaultSpec sleeper;
    sleeper.kind = FaultKind::Sleeper;
    sleeper.node = 2;
    sleeper.start = 50;
    sleeper.end = 99;
    frames = apply_fault(std::move(frames), sleeper, rng);
    for (std::size_t k = 0; k < 100; ++k) EXPECT_EQ(frames[k].readings[2].has_value(), k < 50) << k;
}

TEST(Faults, StuckAtIsExact) {
    Rng rng(6);
    auto frames = generate_baseline(5, 500, 20.0, 0.2, rng);
    FaultSpec stuck;
    stuck.kind = FaultKind::StuckAt;
    stuck.node = 1;
    stuck.start = 300;
    stuck.end = 400;
    stuck.value = 100.0;
    frames = apply_fault(std::move(frames), stuck, rng);
    for (std::size_t k = 300; k <= 400; ++k) EXPECT_EQ(*frames[k].readings[1], 100.0);
    EXPECT_NE(*frames[299].readings[1], 100.0);
    EXPECT_NE(*frames[401].readings[1], 100.0);
}

TEST(Faults, TouchOnlyTargetNodeAndWindow) {
    for (auto kind : {FaultKind::Sleeper, FaultKind::StuckAt, FaultKind::VarianceDegradation, FaultKind::Offset,
                      FaultKind::Ramp, FaultKind::Uniform}) {
        Rng rng(7);
        const auto before = generate_baseline(6, 60, 20.0, 0.2, rng);
        FaultSpec f;
        f.kind = kind;
        f.node = 3;
        f.start = 10;
        f.end = 40;
        f.value = kind == FaultKind::VarianceDegradation ? 20.0 : 100.0;
        f.probability = 0.5;
        const auto after = apply_fault(before, f, rng);
        for (std::size_t k = 0; k < 60; ++k) {
            for (std::size_t j = 0; j < 6; ++j) {
                if (j == 3 && k >= 10 && k <= 40) continue;
                ASSERT_EQ(after[k].readings[j], before[k].readings[j]) << to_string(kind) << " " << k << "," << j;
            }
        }
    }
}

TEST(Faults, OffsetProbabilityAndVariance) {
    Rng rng(8);
    const auto before = generate_baseline(3, 4000, 20.0, 0.0, rng);
    FaultSpec off;
    off.kind = FaultKind::Offset;
    off.node = 0;
    off.start = 0;
    off.end = 3999;
    off.value = 100.0;
    off.probability = 0.5;
    const auto shifted = apply_fault(before, off, rng);
    const auto hits = std::count_if(shifted.begin(), shifted.end(), [](const ReadingFrame& f) {
        return *f.readings[0] == 120.0;
    });
    EXPECT_NEAR(static_cast<double>(hits) / 4000.0, 0.5, 3.0 * std::sqrt(0.25 / 4000.0));

    FaultSpec var;
    var.kind = FaultKind::VarianceDegradation;
    var.node = 1;
    var.start = 0;
    var.end = 3999;
    var.value = 20.0;
    const auto noisy = apply_fault(before, var, rng);
    double ss = 0.0;
    for (const auto& f : noisy) ss += (*f.readings[1] - 20.0) * (*f.readings[1] - 20.0);
    // Sample variance of 4000 normals: sd of s^2 / sigma^2 is sqrt(2 / n).
    EXPECT_NEAR(ss / 4000.0 / 400.0, 1.0, 3.0 * std::sqrt(2.0 / 4000.0));
}

TEST(Faults, UniformPassesKolmogorovSmirnov) {
    Rng rng(9);
    constexpr std::size_t steps = 10000;
    auto frames = generate_baseline(2, steps, 20.0, 0.2, rng);
    FaultSpec u;
    u.kind = FaultKind::Uniform;
    u.node = 1;
    u.start = 0;
    u.end = steps - 1;
    frames = apply_fault(std::move(frames), u, rng);
    std::vector<double> xs;
    for (const auto& f : frames) xs.push_back(*f.readings[1]);
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
        const double cdf = xs[i] / 100.0;
        d = std::max({d, cdf - static_cast<double>(i) / steps, static_cast<double>(i + 1) / steps - cdf});
    }
    EXPECT_NEAR(kolmogorov_critical(0.01), 1.628, 1e-3);
    EXPECT_LT(std::sqrt(static_cast<double>(steps)) * d, kolmogorov_critical(0.01));
}

TEST(Faults, InvalidSpecsRejected) {
    Rng rng(10);
    const auto frames = generate_baseline(3, 20, 20.0, 0.2, rng);
    FaultSpec f;
    f.kind = FaultKind::StuckAt;
    f.node = 3;
    EXPECT_THROW(apply_fault(frames, f, rng), ConfigError);
    f.node = 0;
    f.start = 10;
    f.end = 5;
    EXPECT_THROW(apply_fault(frames, f, rng), ConfigError);
    f.start = 0;
    f.end = 20;
    EXPECT_THROW(apply_fault(frames, f, rng), ConfigError);
    f.end = 5;
    f.kind = FaultKind::Offset;
    f.probability = 1.5;
    EXPECT_THROW(apply_fault(frames, f, rng), ConfigError);
    EXPECT_THROW(parse_fault_kind("gremlin"), ConfigError);
}

TEST(ReferenceScenario, TruthLabels) {
    const auto s = paper_scenario({}, 1);
    ASSERT_EQ(s.steps(), 100u);
    ASSERT_EQ(s.nodes(), 10u);
    for (std::size_t k = 0; k < 100; ++k) {
        const std::size_t step = k + 1;
        EXPECT_EQ(s.truth[k].values[0], step >= 31 && step <= 70 ? 0.0 : 1.0) << step;
        EXPECT_EQ(s.truth[k].values[1], 0.0);
        EXPECT_EQ(s.truth[k].values[2], step <= 50 ? 1.0 : 0.0) << step;
        for (std::size_t j = 3; j < 10; ++j) EXPECT_EQ(s.truth[k].values[j], 1.0);
    }
}

TEST(ReferenceScenario, Readings) {
    const auto s = paper_scenario({}, 2);
    EXPECT_DOUBLE_EQ(*s.frames[39].readings[0], 30.0);
    EXPECT_DOUBLE_EQ(*s.frames[49].readings[0], 40.0);
    for (std::size_t k = 0; k < 100; ++k) {
        EXPECT_EQ(s.frames[k].readings[2].has_value(), k < 50);
        EXPECT_GE(*s.frames[k].readings[1], 0.0);
        EXPECT_LE(*s.frames[k].readings[1], 100.0);
        EXPECT_EQ(s.frames[k].time_step, k + 1);
    }
    EXPECT_EQ(s.node_specs[3].label, "D");
}

TEST(ReferenceScenario, RequiresFourNodes) {
    PaperScenarioOptions o;
    o.d = 3;
    EXPECT_THROW(paper_scenario(o, 1), ConfigError);
}

TEST(ReferenceScenario, SeedDeterministicAndExtendsWithD) {
    const auto a = paper_scenario({}, 11);
    const auto b = paper_scenario({}, 11);
    EXPECT_EQ(to_json(a), to_json(b));
    PaperScenarioOptions big;
    big.d = 20;
    const auto c = paper_scenario(big, 11);
    for (std::size_t k = 0; k < 100; ++k) {
        for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(a.frames[k].readings[j], c.frames[k].readings[j]);
    }
    EXPECT_NE(to_json(paper_scenario({}, 12)), to_json(a));
}

TEST(ScenarioIo, JsonRoundTrip) {
    const auto s = paper_scenario({}, 3);
    const auto back = scenario_from_json(nlohmann::json::parse(to_json(s).dump()));
    EXPECT_EQ(to_json(back), to_json(s));
    for (std::size_t k = 0; k < s.steps(); ++k) {
        EXPECT_EQ(back.frames[k].readings, s.frames[k].readings);
        EXPECT_EQ(back.truth[k].values, s.truth[k].values);
    }
}

TEST(ScenarioIo, FilesRoundTripAndAreReproducible) {
    test::TempDir a;
    test::TempDir b("second");
    const auto s = paper_scenario({}, 4);
    write_scenario(s, a.path());
    write_scenario(paper_scenario({}, 4), b.path());
    for (const char* name : {"scenario.json", "frames.csv", "truth.csv"}) {
        EXPECT_EQ(slurp(a.path() / name), slurp(b.path() / name)) << name;
    }
    const auto back = read_scenario(a.path());
    for (std::size_t k = 0; k < s.steps(); ++k) EXPECT_EQ(back.frames[k].readings, s.frames[k].readings);

    const auto frames = read_frames_csv(a.path() / "frames.csv");
    ASSERT_EQ(frames.size(), s.steps());
    for (std::size_t k = 0; k < s.steps(); ++k) EXPECT_EQ(frames[k].readings, s.frames[k].readings);
    std::ifstream truth(a.path() / "truth.csv");
    const auto t = read_truth_csv(truth);
    for (std::size_t k = 0; k < s.steps(); ++k) EXPECT_EQ(t[k].values, s.truth[k].values);
}

TEST(ScenarioIo, RejectsUnknownSchema) {
    auto doc = to_json(paper_scenario({}, 5));
    doc["schema_version"] = 99;
    EXPECT_THROW(scenario_from_json(doc), ConfigError);
}

TEST(FrameIo, AbsentCellsAndFullPrecision) {
    std::vector<ReadingFrame> frames(2);
    frames[0].readings = {0.1, std::nullopt, 1e-300};
    frames[1].readings = {std::nullopt, 20.000000000000004, -3.5};
    frames[0].time_step = 1;
    frames[1].time_step = 2;
    std::stringstream ss;
    write_frames_csv(ss, frames);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "step,node_1,node_2,node_3");
    const auto back = read_frames_csv(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].readings, frames[0].readings);
    EXPECT_EQ(back[1].readings, frames[1].readings);
}

TEST(LabFaults, WindowsAndTruncation) {
    const auto all = lab_faults(5);
    ASSERT_EQ(all.size(), 4u);
    EXPECT_EQ(all[0].kind, FaultKind::Sleeper);
    EXPECT_EQ(all[0].start, 499u);
    EXPECT_EQ(all[0].end, 699u);
    EXPECT_EQ(all[1].kind, FaultKind::StuckAt);
    EXPECT_EQ(all[1].value, 100.0);
    EXPECT_EQ(all[2].start, 199u);
    EXPECT_EQ(all[3].probability, 0.5);
    EXPECT_EQ(all[3].end, 149u);
    EXPECT_EQ(lab_faults(3).size(), 3u);
}

TEST(InjectFaults, OnlyFaultWindowsChange) {
    const auto base = generate_baseline(5, 800, 20.0, 0.3, std::uint64_t{11});
    const auto s = inject_faults(base, lab_faults(5), 5);
    ASSERT_EQ(s.steps(), 800u);
    for (std::size_t k = 0; k < 800; ++k) {
        for (std::size_t j = 0; j < 5; ++j) {
            bool inside = false;
            for (const auto& f : s.faults) inside = inside || (f.node == j && k >= f.start && k <= f.end);
            EXPECT_EQ(s.truth[k].values[j], inside ? 0.0 : 1.0);
            if (!inside) EXPECT_EQ(s.frames[k].readings[j], base[k].readings[j]);
        }
    }
    EXPECT_FALSE(s.frames[499].readings[0]);
    EXPECT_EQ(*s.frames[350].readings[1], 100.0);
    const auto again = inject_faults(base, lab_faults(5), 5);
    for (std::size_t k = 0; k < 800; ++k) EXPECT_EQ(again.frames[k].readings, s.frames[k].readings);
}
