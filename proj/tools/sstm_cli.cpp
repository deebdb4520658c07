// sstm: command-line front end for scenario generation, filter experiments
// and the lab-data fault experiment.
//
// Settings resolve in three layers: built-in defaults, then a JSON file given
// with --config, then explicit flags.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sstm/filters.hpp"
#include "sstm/frame_io.hpp"
#include "sstm/harness.hpp"
#include "sstm/ingest.hpp"
#include "sstm/sim.hpp"

namespace fs = std::filesystem;
using namespace sstm;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kDatasetUrl = "http://db.csail.mit.edu/labdata/data.txt.gz";

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;

struct CliConfig {
    // model
    std::size_t d = 10;
    std::size_t steps = 100;
    double alpha = 0.85;
    double q = 0.01;
    double beta = 0.1;
    double r = 0.6;
    double t_x = 1e-5;
    std::size_t particles = 100;
    std::size_t max_iterations = 100;
    bool independent_sweep_draws = false;
    double init_trust = 0.5;
    // experiment
    std::size_t runs = 100;
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    std::optional<std::uint64_t> seed;
    std::vector<std::string> filters{"ipf"};
    bool redraw = false;
    std::vector<std::size_t> scaling;
    std::vector<double> alphas;
    // scenarios
    bool paper = false;
    std::vector<std::string> faults;
    std::string scenario_dir;
    // ingestion
    std::string data;
    std::vector<int> nodes{9, 10, 11, 12, 13};
    std::string attribute = "temperature";
    std::string day;
    std::int64_t max_gap = 20;
    std::size_t max_frames = 1000;
    // output
    std::string output;
};

template <class T>
std::string show(const T& v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

std::string show(const std::string& v) { return v.empty() ? "none" : v; }

template <class T>
std::string show(const std::vector<T>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + show(x);
    return s.empty() ? "none" : s;
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

/// Merges a JSON config document into `cfg`. Unknown keys are rejected.
void apply_json(CliConfig& cfg, const nlohmann::json& j) {
    static const std::vector<std::string> known{
        "d", "steps", "alpha", "q", "beta", "r", "t_x", "particles", "max_iterations",
        "independent_sweep_draws", "init_trust", "runs", "jobs", "seed", "filters", "redraw",
        "scaling", "alphas", "paper", "faults", "scenario", "data", "nodes", "attribute", "day",
        "max_gap", "max_frames", "output"};
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("config: unknown key \"" + key + "\"");
        }
    }
    try {
        read_key(j, "d", cfg.d);
        read_key(j, "steps", cfg.steps);
        read_key(j, "alpha", cfg.alpha);
        read_key(j, "q", cfg.q);
        read_key(j, "beta", cfg.beta);
        read_key(j, "r", cfg.r);
        read_key(j, "t_x", cfg.t_x);
        read_key(j, "particles", cfg.particles);
        read_key(j, "max_iterations", cfg.max_iterations);
        read_key(j, "independent_sweep_draws", cfg.independent_sweep_draws);
        read_key(j, "init_trust", cfg.init_trust);
        read_key(j, "runs", cfg.runs);
        read_key(j, "jobs", cfg.jobs);
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        read_key(j, "filters", cfg.filters);
        read_key(j, "redraw", cfg.redraw);
        read_key(j, "scaling", cfg.scaling);
        read_key(j, "alphas", cfg.alphas);
        read_key(j, "paper", cfg.paper);
        read_key(j, "faults", cfg.faults);
        read_key(j, "scenario", cfg.scenario_dir);
        read_key(j, "data", cfg.data);
        read_key(j, "nodes", cfg.nodes);
        read_key(j, "attribute", cfg.attribute);
        read_key(j, "day", cfg.day);
        read_key(j, "max_gap", cfg.max_gap);
        read_key(j, "max_frames", cfg.max_frames);
        read_key(j, "output", cfg.output);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

/// Flags registered on one subcommand. Each flag writes into its own slot and
/// is copied into the resolved config only when it was given.
class Flags {
public:
    Flags(CLI::App& app, CliConfig defaults) : app_(app), defaults_(std::move(defaults)) {}

    template <class T>
    void add(const std::string& name, T CliConfig::*field, const std::string& help) {
        auto slot = std::make_shared<T>();
        const bool documented = help.find("[default") != std::string::npos;
        auto* opt = app_.add_option(name, *slot, documented ? help : help + " [default: " + show(defaults_.*field) + "]");
        if constexpr (requires { typename T::value_type; } && !std::is_same_v<T, std::string>) {
            opt->delimiter(',');
        }
        setters_.push_back({opt, [slot, field](CliConfig& c) { c.*field = *slot; }});
    }

    void flag(const std::string& name, bool CliConfig::*field, const std::string& help) {
        auto* opt = app_.add_flag(name, help);
        setters_.push_back({opt, [field](CliConfig& c) { c.*field = true; }});
    }

    void seed() {
        auto slot = std::make_shared<std::uint64_t>();
        auto* opt = app_.add_option("--seed", *slot, "master seed [default: random, logged]");
        setters_.push_back({opt, [slot](CliConfig& c) { c.seed = *slot; }});
    }

    void config() { app_.add_option("--config", config_path_, "JSON config file; flags override its values"); }

    CliConfig resolve() const {
        CliConfig cfg = defaults_;
        if (!config_path_.empty()) {
            std::ifstream in(config_path_);
            if (!in) throw ConfigError("cannot open config file " + config_path_);
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("config " + config_path_ + ": " + e.what());
            }
            apply_json(cfg, j);
        }
        for (const auto& s : setters_) {
            if (s.opt->count() > 0) s.set(cfg);
        }
        return cfg;
    }

private:
    struct Setter {
        CLI::Option* opt;
        std::function<void(CliConfig&)> set;
    };
    CLI::App& app_;
    CliConfig defaults_;
    std::vector<Setter> setters_;
    std::string config_path_;
};

void add_model_flags(Flags& f) {
    f.add("--alpha", &CliConfig::alpha, "aging factor");
    f.add("--q", &CliConfig::q, "process noise variance, every node");
    f.add("--beta", &CliConfig::beta, "likelihood scale");
    f.add("--t-x", &CliConfig::t_x, "IPF convergence threshold");
    f.add("--particles", &CliConfig::particles, "particles per component");
    f.add("--max-iterations", &CliConfig::max_iterations, "IPF sweep cap per step");
    f.add("--init-trust", &CliConfig::init_trust, "initial trust of every node");
    f.flag("--independent-sweep-draws", &CliConfig::independent_sweep_draws,
           "fresh random draws on every IPF sweep");
    f.add("--runs", &CliConfig::runs, "Monte Carlo runs");
    f.add("--jobs", &CliConfig::jobs, "worker threads");
    f.add("--out", &CliConfig::output, "output directory [default: $SSTM_OUTPUT_DIR, else ./sstm_out]");
    f.seed();
    f.config();
}

std::uint64_t resolve_seed(CliConfig& cfg) {
    if (!cfg.seed) {
        cfg.seed = std::random_device{}() | (std::uint64_t{std::random_device{}()} << 32);
        std::cerr << "sstm: no --seed given, using " << *cfg.seed << "\n";
    } else {
        std::cerr << "sstm: seed " << *cfg.seed << "\n";
    }
    return *cfg.seed;
}

fs::path output_dir(const CliConfig& cfg) {
    fs::path dir = cfg.output;
    if (dir.empty()) {
        const char* env = std::getenv("SSTM_OUTPUT_DIR");
        dir = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("sstm_out");
    }
    fs::create_directories(dir);
    return dir;
}

ModelConfig model_config(const CliConfig& cfg, std::size_t d) {
    auto m = ModelConfig::defaults(d);
    m.alpha = cfg.alpha;
    m.q_diag.assign(d, cfg.q);
    m.beta = cfg.beta;
    m.r = cfg.r;
    m.t_x = cfg.t_x;
    m.n_particles = cfg.particles;
    m.max_iterations = cfg.max_iterations;
    m.independent_sweep_draws = cfg.independent_sweep_draws;
    m.validate();
    return m;
}

ExperimentConfig experiment_config(const CliConfig& cfg, std::size_t d, FilterKind kind) {
    ExperimentConfig e;
    e.model = model_config(cfg, d);
    e.kind = kind;
    e.runs = cfg.runs;
    e.jobs = cfg.jobs;
    e.base_seed = *cfg.seed;
    e.scenario_seed = *cfg.seed;
    e.redraw_scenario = cfg.redraw;
    e.init_trust = cfg.init_trust;
    e.validate();
    return e;
}

/// "kind:node:start:end[:value[:probability]]" with a 1-based node and
/// 0-based frame indices.
FaultSpec parse_fault(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    for (std::string p; std::getline(in, p, ':');) parts.push_back(p);
    if (parts.size() < 4 || parts.size() > 6) {
        throw ConfigError("fault \"" + text + "\": expected kind:node:start:end[:value[:probability]]");
    }
    try {
        FaultSpec f;
        f.kind = parse_fault_kind(parts[0]);
        const auto node = std::stoul(parts[1]);
        if (node == 0) throw ConfigError("fault \"" + text + "\": nodes are numbered from 1");
        f.node = node - 1;
        f.start = std::stoul(parts[2]);
        f.end = std::stoul(parts[3]);
        if (parts.size() > 4) {
            f.value = parse_double(parts[4]);
            if (f.kind == FaultKind::Uniform) {
                f.low = 0.0;
                f.high = f.value;
            }
        }
        if (parts.size() > 5) f.probability = parse_double(parts[5]);
        return f;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::logic_error& e) {
        throw ConfigError("fault \"" + text + "\": " + e.what());
    }
}

Scenario build_scenario(const CliConfig& cfg, std::uint64_t seed) {
    if (!cfg.scenario_dir.empty()) return read_scenario(cfg.scenario_dir);
    if (cfg.paper || cfg.faults.empty()) {
        if (!cfg.faults.empty()) throw ConfigError("--paper and --fault cannot be combined");
        PaperScenarioOptions o;
        o.d = cfg.d;
        o.steps = cfg.steps;
        return paper_scenario(o, seed);
    }
    std::vector<FaultSpec> faults;
    for (const auto& text : cfg.faults) {
        faults.push_back(parse_fault(text));
        faults.back().validate(cfg.steps, cfg.d);
    }
    return fault_scenario(cfg.d, cfg.steps, 20.0, 0.2, faults, seed);
}

double mean_iterations(const ExperimentResult& r) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& run : r.runs) {
        if (!run.ok()) continue;
        for (auto it : run.iterations) sum += static_cast<double>(it);
        n += run.iterations.size();
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

void print_summary(const std::string& label, const ExperimentResult& r) {
    const auto mean = r.mean_estimates();
    std::printf("%-14s %5s %12s %10s\n", label.c_str(), "node", "final_trust", "mean_rmse");
    for (std::size_t j = 0; j < r.rmse.nodes(); ++j) {
        std::printf("%-14s %5zu %12.4f %10.4f\n", "", j + 1, mean.empty() ? 0.0 : mean.back().values[j],
                    r.rmse.time_average(j));
    }
    std::printf("%-14s runs %zu, failed %zu, mean iterations %.2f, capped steps %zu\n\n", "",
                r.runs.size(), r.failed_runs(), mean_iterations(r), r.non_converged_steps());
}

/// Writes results plus failures.json when some runs failed; returns the
/// exit status contribution of this experiment.
int record(const fs::path& dir, const std::string& label, const ExperimentResult& r) {
    write_experiment(dir, r);
    print_summary(label, r);
    if (r.failed_runs() > 0) {
        nlohmann::json failures = nlohmann::json::array();
        for (const auto& run : r.runs) {
            if (run.ok()) continue;
            failures.push_back({{"run", run.run}, {"seed", run.seed}, {"step", run.failed_step}, {"error", *run.error}});
        }
        std::ofstream(dir / "failures.json") << failures.dump(2) << "\n";
        std::cerr << "sstm: " << label << ": " << r.failed_runs() << " failed runs, outputs in " << dir.string()
                  << " are partial (see failures.json)\n";
        return kExitError;
    }
    if (r.non_converged_steps() > 0) {
        std::cerr << "sstm: " << label << ": " << r.non_converged_steps() << " steps hit the sweep cap\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

int worst(int a, int b) {
    if (a == kExitError || b == kExitError) return kExitError;
    return std::max(a, b);
}

int cmd_simulate(CliConfig& cfg) {
    const auto seed = resolve_seed(cfg);
    const auto scenario = build_scenario(cfg, seed);
    const auto dir = output_dir(cfg);
    write_scenario(scenario, dir);
    std::printf("wrote scenario with %zu nodes and %zu steps to %s\n", scenario.nodes(), scenario.steps(),
                dir.string().c_str());
    return kExitOk;
}

int cmd_run(CliConfig& cfg) {
    const auto seed = resolve_seed(cfg);
    const auto dir = output_dir(cfg);
    int status = kExitOk;

    if (!cfg.scaling.empty()) {
        if (cfg.filters.size() != 1) throw ConfigError("--scaling times a single filter; pass one --filters value");
        auto base = experiment_config(cfg, cfg.scaling.front(), parse_filter_kind(cfg.filters.front()));
        PaperScenarioOptions opts;
        opts.steps = cfg.steps;
        const auto rows = scaling_study(cfg.scaling, base, opts);
        write_timing_json(dir / "timing.json", rows);
        std::printf("%6s %14s %8s\n", "d", "seconds/run", "ratio");
        for (const auto& row : rows) std::printf("%6zu %14.4f %8.3f\n", row.d, row.mean_seconds, row.ratio);
        return status;
    }

    const auto scenario = build_scenario(cfg, seed);
    write_scenario(scenario, dir / "scenario");
    auto factory = [&](std::uint64_t s) { return cfg.redraw ? build_scenario(cfg, s) : scenario; };
    if (cfg.redraw && !cfg.scenario_dir.empty()) throw ConfigError("--redraw needs a generated scenario, not --scenario");

    for (const auto& name : cfg.filters) {
        const auto kind = parse_filter_kind(name);
        auto exp = experiment_config(cfg, scenario.nodes(), kind);
        if (!cfg.alphas.empty()) {
            for (const auto& a : alpha_sweep(cfg.alphas, exp, factory)) {
                const std::string label = name + " alpha=" + show(a.alpha);
                status = worst(status, record(dir / (name + "_alpha_" + show(a.alpha)), label, a.result));
            }
            continue;
        }
        status = worst(status, record(dir / name, name, monte_carlo(exp, factory)));
    }
    return status;
}

int cmd_intel(CliConfig& cfg) {
    const auto seed = resolve_seed(cfg);
    if (cfg.data.empty()) {
        if (const char* env = std::getenv("SSTM_INTEL_DATA"); env != nullptr) cfg.data = env;
    }
    if (cfg.data.empty() || !fs::exists(cfg.data)) {
        std::cerr << "sstm: dataset " << (cfg.data.empty() ? "(none given)" : cfg.data) << " not found.\n"
                  << "  Download it with: curl -O " << kDatasetUrl << "\n"
                  << "  then pass --data data.txt.gz (plain or gzip), or use the bundled excerpt\n"
                  << "  data/intel_lab_excerpt.txt.\n";
        return kExitError;
    }

    const auto parsed = load_dataset(cfg.data);
    std::cerr << "sstm: parsed " << parsed.records.size() << " records, skipped " << parsed.report.skipped
              << " malformed lines\n";
    SyncConfig sync_cfg;
    sync_cfg.node_ids = cfg.nodes;
    sync_cfg.attribute = parse_attribute(cfg.attribute);
    sync_cfg.max_gap = cfg.max_gap;
    if (!cfg.day.empty()) sync_cfg.day = parse_date(cfg.day);
    auto sync = synchronize(parsed.records, sync_cfg);
    for (const auto& w : sync.warnings) std::cerr << "sstm: " << w << "\n";
    if (cfg.max_frames > 0 && sync.frames.size() > cfg.max_frames) sync.frames.resize(cfg.max_frames);

    const std::size_t d = cfg.nodes.size();
    std::vector<FaultSpec> faults;
    for (const auto& f : lab_faults(d)) {
        if (f.end < sync.frames.size()) {
            faults.push_back(f);
        } else {
            std::cerr << "sstm: skipping " << to_string(f.kind) << " fault on node " << f.node + 1 << ": only "
                      << sync.frames.size() << " frames\n";
        }
    }
    const auto scenario = inject_faults(std::move(sync.frames), faults, seed);
    const auto dir = output_dir(cfg);
    write_scenario(scenario, dir / "scenario");

    auto exp = experiment_config(cfg, d, FilterKind::Ipf);
    const auto result = monte_carlo(exp, [&](std::uint64_t) { return scenario; });
    return record(dir / "ipf", "ipf", result);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trust estimation for sensor networks with particle filters"};
    app.require_subcommand(1);

    auto* simulate = app.add_subcommand("simulate", "generate a scenario (scenario.json, frames.csv, truth.csv)");
    Flags sim_flags(*simulate, CliConfig{});
    sim_flags.flag("--paper", &CliConfig::paper, "three-faulty-node reference scenario");
    sim_flags.add("--d", &CliConfig::d, "number of nodes");
    sim_flags.add("--steps", &CliConfig::steps, "number of time steps");
    sim_flags.add("--fault", &CliConfig::faults,
                  "kind:node:start:end[:value[:probability]], node 1-based, 0-based frames; kinds sleeper, "
                  "stuck_at, variance_degradation, offset, ramp, uniform; repeatable");
    sim_flags.add("--out", &CliConfig::output, "output directory [default: $SSTM_OUTPUT_DIR, else ./sstm_out]");
    sim_flags.seed();
    sim_flags.config();

    auto* run = app.add_subcommand("run", "run filters over a scenario and write trajectories, RMSE and timing");
    Flags run_flags(*run, CliConfig{});
    run_flags.add("--filters", &CliConfig::filters, "comma list of ipf, bdmpf, bootstrap");
    run_flags.add("--scenario", &CliConfig::scenario_dir, "scenario directory written by simulate");
    run_flags.flag("--paper", &CliConfig::paper, "generate the reference scenario (the default)");
    run_flags.add("--d", &CliConfig::d, "nodes of a generated scenario");
    run_flags.add("--steps", &CliConfig::steps, "steps of a generated scenario");
    run_flags.add("--fault", &CliConfig::faults, "fault of a generated scenario, as for simulate; repeatable");
    run_flags.flag("--redraw", &CliConfig::redraw, "draw a new scenario realization for every run");
    run_flags.add("--scaling", &CliConfig::scaling, "comma list of node counts; writes timing.json");
    run_flags.add("--alphas", &CliConfig::alphas, "comma list of aging factors to sweep");
    run_flags.add("--r", &CliConfig::r, "vote agreement threshold");
    add_model_flags(run_flags);

    auto* intel = app.add_subcommand("intel", "inject the four lab faults into Intel Lab data and run IPF");
    CliConfig intel_defaults;
    intel_defaults.r = 2.0;
    intel_defaults.runs = 10;
    Flags intel_flags(*intel, intel_defaults);
    intel_flags.add("--data", &CliConfig::data, "dataset path, plain or gzip [default: $SSTM_INTEL_DATA]");
    intel_flags.add("--nodes", &CliConfig::nodes, "comma list of mote ids");
    intel_flags.add("--attribute", &CliConfig::attribute, "temperature, humidity, light or voltage");
    intel_flags.add("--day", &CliConfig::day, "restrict to one day, YYYY-MM-DD");
    intel_flags.add("--max-gap", &CliConfig::max_gap, "widest gap in epochs bridged by interpolation");
    intel_flags.add("--max-frames", &CliConfig::max_frames, "truncate the grid to this many frames, 0 keeps all");
    intel_flags.add("--r", &CliConfig::r, "vote agreement threshold");
    add_model_flags(intel_flags);

    auto* version = app.add_subcommand("version", "print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (version->parsed()) {
            std::printf("sstm %s (output schema %d)\n", kVersion, kOutputSchemaVersion);
            return kExitOk;
        }
        if (simulate->parsed()) {
            auto cfg = sim_flags.resolve();
            return cmd_simulate(cfg);
        }
        if (run->parsed()) {
            auto cfg = run_flags.resolve();
            return cmd_run(cfg);
        }
        auto cfg = intel_flags.resolve();
        return cmd_intel(cfg);
    } catch (const std::exception& e) {
        std::cerr << "sstm: error: " << e.what() << "\n";
        return kExitError;
    }
}
