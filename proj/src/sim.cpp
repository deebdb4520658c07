#include "sstm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sstm/frame_io.hpp"
#include "sstm/seed.hpp"

namespace sstm {

namespace {

constexpr int kScenarioSchemaVersion = 1;
// Fault streams sit above any plausible node index.
constexpr std::uint64_t kFaultStreamOffset = std::uint64_t{1} << 32;

std::vector<TrustState> all_trusted(std::size_t d, std::size_t steps) {
    std::vector<TrustState> truth(steps);
    for (std::size_t k = 0; k < steps; ++k) truth[k] = TrustState::uniform(d, 1.0, k + 1);
    return truth;
}

void check_baseline_args(std::size_t d, double std) {
    if (d < 2) throw ConfigError("generate_baseline: d must be at least 2");
    if (!(std >= 0.0)) throw ConfigError("generate_baseline: std must be non-negative");
}

std::vector<ReadingFrame> constant_frames(std::size_t d, std::size_t steps, double mean) {
    std::vector<ReadingFrame> frames(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        frames[k].time_step = k + 1;
        frames[k].readings.assign(d, mean);
    }
    return frames;
}

}  // namespace

std::string_view to_string(FaultKind kind) {
    switch (kind) {
        case FaultKind::Sleeper: return "sleeper";
        case FaultKind::StuckAt: return "stuck_at";
        case FaultKind::VarianceDegradation: return "variance_degradation";
        case FaultKind::Offset: return "offset";
        case FaultKind::Ramp: return "ramp";
        case FaultKind::Uniform: return "uniform";
    }
    return "unknown";
}

FaultKind parse_fault_kind(std::string_view name) {
    if (name == "sleeper") return FaultKind::Sleeper;
    if (name == "stuck_at") return FaultKind::StuckAt;
    if (name == "variance_degradation") return FaultKind::VarianceDegradation;
    if (name == "offset") return FaultKind::Offset;
    if (name == "ramp") return FaultKind::Ramp;
    if (name == "uniform") return FaultKind::Uniform;
    throw ConfigError("unknown fault kind '" + std::string(name) + "'");
}

void FaultSpec::validate(std::size_t frame_count, std::size_t d) const {
    if (node >= d) {
        throw ConfigError("fault node " + std::to_string(node + 1) + " outside 1.." + std::to_string(d));
    }
    if (start > end || end >= frame_count) {
        throw ConfigError("fault interval [" + std::to_string(start) + "," + std::to_string(end) +
                          "] not inside [0," + std::to_string(frame_count) + ")");
    }
    if (!std::isfinite(value)) throw ConfigError("fault value must be finite");
    switch (kind) {
        case FaultKind::VarianceDegradation:
            if (!(value >= 0.0)) throw ConfigError("variance_degradation needs a non-negative noise std");
            break;
        case FaultKind::Offset:
            if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("offset probability must lie in [0,1]");
            break;
        case FaultKind::Uniform:
            if (!(low < high)) throw ConfigError("uniform fault needs low < high");
            break;
        default: break;
    }
}

void Scenario::validate() const {
    if (frames.size() != truth.size()) throw ConfigError("scenario frames and truth differ in length");
    const std::size_t d = nodes();
    for (std::size_t k = 0; k < frames.size(); ++k) {
        if (frames[k].size() != d || truth[k].size() != d) {
            throw ConfigError("scenario row " + std::to_string(k + 1) + " has inconsistent width");
        }
        for (double v : truth[k].values) {
            if (v != 0.0 && v != 1.0) throw ConfigError("scenario truth labels must be 0 or 1");
        }
    }
}

std::vector<ReadingFrame> generate_baseline(std::size_t d, std::size_t steps, double mean,
                                            double std, Rng& rng) {
    check_baseline_args(d, std);
    auto frames = constant_frames(d, steps, mean);
    if (std == 0.0) return frames;
    std::normal_distribution<double> noise(0.0, std);
    for (auto& f : frames) {
        for (auto& y : f.readings) *y += noise(rng);
    }
    return frames;
}

std::vector<ReadingFrame> generate_baseline(std::size_t d, std::size_t steps, double mean,
                                            double std, std::uint64_t seed) {
    check_baseline_args(d, std);
    auto frames = constant_frames(d, steps, mean);
    if (std == 0.0) return frames;
    std::normal_distribution<double> noise(0.0, std);
    for (std::size_t j = 0; j < d; ++j) {
        Rng rng(derive_seed(seed, j));
        for (std::size_t k = 0; k < steps; ++k) *frames[k].readings[j] += noise(rng);
    }
    return frames;
}

double ramp_value(const FaultSpec& spec, std::size_t k) {
    if (spec.end == spec.start) return spec.value;
    const double start = static_cast<double>(spec.start);
    const double end = static_cast<double>(spec.end);
    const double mid = 0.5 * (start + end);
    const double t = static_cast<double>(k);
    const double frac = t <= mid ? (t - start) / (mid - start) : (end - t) / (end - mid);
    return spec.base + (spec.value - spec.base) * frac;
}

std::vector<ReadingFrame> apply_fault(std::vector<ReadingFrame> frames, const FaultSpec& spec, Rng& rng) {
    spec.validate(frames.size(), frames.empty() ? 0 : frames.front().size());
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(spec.low, spec.high);
    for (std::size_t k = spec.start; k <= spec.end; ++k) {
        auto& y = frames[k].readings[spec.node];
        switch (spec.kind) {
            case FaultKind::Sleeper: y.reset(); break;
            case FaultKind::StuckAt: y = spec.value; break;
            case FaultKind::VarianceDegradation:
                if (y) *y += spec.value * gauss(rng);
                break;
            case FaultKind::Offset:
                if (unit(rng) < spec.probability && y) *y += spec.value;
                break;
            case FaultKind::Ramp: y = ramp_value(spec, k); break;
            case FaultKind::Uniform: y = uniform(rng); break;
        }
    }
    return frames;
}

std::vector<TrustState> truth_from_faults(std::size_t d, std::size_t steps,
                                          const std::vector<FaultSpec>& faults) {
    auto truth = all_trusted(d, steps);
    for (const auto& f : faults) {
        const std::size_t first = f.kind == FaultKind::Ramp && f.end > f.start ? f.start + 1 : f.start;
        for (std::size_t k = first; k <= f.end && k < steps; ++k) truth[k].values[f.node] = 0.0;
    }
    return truth;
}

Scenario fault_scenario(std::size_t d, std::size_t steps, double mean, double std,
                        const std::vector<FaultSpec>& faults, std::uint64_t seed) {
    Scenario s = inject_faults(generate_baseline(d, steps, mean, std, seed), faults, seed);
    for (std::size_t j = 0; j < d; ++j) {
        if (s.node_specs[j].label == "honest") s.node_specs[j].behavior = "Normal readings";
    }
    return s;
}

Scenario inject_faults(std::vector<ReadingFrame> frames, const std::vector<FaultSpec>& faults,
                       std::uint64_t seed) {
    if (frames.empty()) throw ConfigError("inject_faults: no frames");
    const std::size_t d = frames.front().size();
    Scenario s;
    s.seed = seed;
    s.truth = truth_from_faults(d, frames.size(), faults);
    for (std::size_t i = 0; i < faults.size(); ++i) {
        Rng rng(derive_seed(seed, kFaultStreamOffset + i));
        frames = apply_fault(std::move(frames), faults[i], rng);
    }
    s.frames = std::move(frames);
    s.faults = faults;
    s.node_specs.assign(d, NodeSpec{"honest", "unmodified readings"});
    for (const auto& f : faults) {
        s.node_specs[f.node] = NodeSpec{"faulty", std::string(to_string(f.kind))};
    }
    return s;
}

std::vector<FaultSpec> lab_faults(std::size_t d) {
    // Windows are 1-based grid epochs; frame index = epoch - 1.
    auto window = [](FaultKind kind, std::size_t node, std::size_t first, std::size_t last) {
        FaultSpec f;
        f.kind = kind;
        f.node = node;
        f.start = first - 1;
        f.end = last - 1;
        return f;
    };
    std::vector<FaultSpec> faults{window(FaultKind::Sleeper, 0, 500, 700),
                                  window(FaultKind::StuckAt, 1, 300, 400),
                                  window(FaultKind::VarianceDegradation, 2, 200, 250),
                                  window(FaultKind::Offset, 3, 100, 150)};
    faults[1].value = 100.0;
    faults[2].value = 20.0;
    faults[3].value = 100.0;
    faults[3].probability = 0.5;
    faults.resize(std::min(d, faults.size()));
    return faults;
}

Scenario paper_scenario(const PaperScenarioOptions& opts, std::uint64_t seed) {
    if (opts.d < 4) throw ConfigError("reference scenario needs d >= 4 (got " + std::to_string(opts.d) + ")");
    if (opts.steps < 70) throw ConfigError("reference scenario needs at least 70 steps");
    const std::size_t last = opts.steps - 1;

    FaultSpec ramp;
    ramp.kind = FaultKind::Ramp;
    ramp.node = 0;
    ramp.start = 29;  // steps 30..70, peak at step 50
    ramp.end = 69;
    ramp.value = 40.0;
    ramp.base = opts.reading_mean;

    FaultSpec uniform;
    uniform.kind = FaultKind::Uniform;
    uniform.node = 1;
    uniform.start = 0;
    uniform.end = last;
    uniform.low = 0.0;
    uniform.high = 100.0;

    FaultSpec sleeper;
    sleeper.kind = FaultKind::Sleeper;
    sleeper.node = 2;
    sleeper.start = 50;  // silent from step 51
    sleeper.end = last;

    Scenario s = fault_scenario(opts.d, opts.steps, opts.reading_mean, opts.reading_std,
                                {ramp, uniform, sleeper}, seed);
    s.node_specs[0] = NodeSpec{"A", "ramp 20->40->20 over steps 30-70"};
    s.node_specs[1] = NodeSpec{"B", "Uniform[0,100] every step"};
    s.node_specs[2] = NodeSpec{"C", "silent from step 51"};
    for (std::size_t j = 3; j < opts.d; ++j) {
        s.node_specs[j] = NodeSpec{j == 3 ? "D" : "honest", "Normal readings"};
    }
    return s;
}

nlohmann::json to_json(const FaultSpec& spec) {
    return {{"kind", to_string(spec.kind)}, {"node", spec.node + 1},
            {"start", spec.start},          {"end", spec.end},
            {"value", spec.value},          {"probability", spec.probability},
            {"base", spec.base},            {"low", spec.low},
            {"high", spec.high}};
}

FaultSpec fault_from_json(const nlohmann::json& j) {
    FaultSpec f;
    f.kind = parse_fault_kind(j.at("kind").get<std::string>());
    const auto node = j.at("node").get<std::size_t>();
    if (node < 1) throw ConfigError("fault node numbers start at 1");
    f.node = node - 1;
    f.start = j.at("start").get<std::size_t>();
    f.end = j.at("end").get<std::size_t>();
    f.value = j.value("value", f.value);
    f.probability = j.value("probability", f.probability);
    f.base = j.value("base", f.base);
    f.low = j.value("low", f.low);
    f.high = j.value("high", f.high);
    return f;
}

nlohmann::json to_json(const Scenario& scenario) {
    nlohmann::json doc;
    doc["schema_version"] = kScenarioSchemaVersion;
    doc["seed"] = scenario.seed;
    doc["d"] = scenario.nodes();
    doc["steps"] = scenario.steps();
    auto& specs = doc["node_specs"] = nlohmann::json::array();
    for (const auto& n : scenario.node_specs) specs.push_back({{"label", n.label}, {"behavior", n.behavior}});
    auto& faults = doc["faults"] = nlohmann::json::array();
    for (const auto& f : scenario.faults) faults.push_back(to_json(f));
    auto& frames = doc["frames"] = nlohmann::json::array();
    for (const auto& f : scenario.frames) {
        auto row = nlohmann::json::array();
        for (const auto& y : f.readings) row.push_back(y ? nlohmann::json(*y) : nlohmann::json(nullptr));
        frames.push_back(std::move(row));
    }
    auto& truth = doc["truth"] = nlohmann::json::array();
    for (const auto& t : scenario.truth) truth.push_back(t.values);
    return doc;
}

Scenario scenario_from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != kScenarioSchemaVersion) {
        throw ConfigError("unsupported scenario schema_version");
    }
    Scenario s;
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& n : j.at("node_specs")) {
        s.node_specs.push_back(NodeSpec{n.at("label").get<std::string>(), n.at("behavior").get<std::string>()});
    }
    for (const auto& f : j.at("faults")) s.faults.push_back(fault_from_json(f));
    std::size_t k = 0;
    for (const auto& row : j.at("frames")) {
        ReadingFrame f;
        f.time_step = ++k;
        for (const auto& y : row) {
            if (y.is_null()) f.readings.emplace_back(std::nullopt);
            else f.readings.emplace_back(y.get<double>());
        }
        s.frames.push_back(std::move(f));
    }
    k = 0;
    for (const auto& row : j.at("truth")) s.truth.push_back(TrustState{row.get<std::vector<double>>(), ++k});
    s.validate();
    return s;
}

void write_scenario(const Scenario& scenario, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "scenario.json");
        if (!out) throw std::runtime_error("cannot write " + (dir / "scenario.json").string());
        out << to_json(scenario).dump(2) << '\n';
    }
    write_frames_csv(dir / "frames.csv", scenario.frames);
    std::ofstream truth(dir / "truth.csv");
    if (!truth) throw std::runtime_error("cannot write " + (dir / "truth.csv").string());
    write_truth_csv(truth, scenario.truth);
}

Scenario read_scenario(const std::filesystem::path& dir) {
    std::ifstream in(dir / "scenario.json");
    if (!in) throw std::runtime_error("cannot open " + (dir / "scenario.json").string());
    return scenario_from_json(nlohmann::json::parse(in));
}

}  // namespace sstm
