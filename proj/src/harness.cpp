#include "sstm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "sstm/frame_io.hpp"
#include "sstm/seed.hpp"

namespace sstm {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::size_t parse_index(std::string_view s) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("bad integer '" + std::string(s) + "'");
    }
    return v;
}

RunResult execute_run(const ExperimentConfig& cfg, const FilterRunner& runner, const Scenario& scenario,
                      std::size_t m) {
    RunResult run;
    run.run = m;
    run.seed = derive_seed(cfg.base_seed, m);
    run.truth = scenario.truth;
    Rng rng(run.seed);
    const auto init = TrustState::uniform(cfg.model.d, cfg.init_trust);
    try {
        const auto started = std::chrono::steady_clock::now();
        auto outputs = runner(scenario.frames, cfg.model, init, rng);
        run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        run.estimates.reserve(outputs.size());
        for (auto& o : outputs) {
            run.iterations.push_back(o.iterations_used);
            run.converged.push_back(o.converged);
            run.estimates.push_back(std::move(o.estimate));
        }
    } catch (const FilterError& e) {
        run.error = e.what();
        run.failed_step = e.time_step();
    } catch (const std::exception& e) {
        run.error = e.what();
    }
    return run;
}

}  // namespace

double RmseTrace::time_average(std::size_t j, std::size_t first, std::size_t last) const {
    if (first > last || last >= steps_) throw ConfigError("time_average: bad step range");
    double acc = 0.0;
    for (std::size_t k = first; k <= last; ++k) acc += at(k, j);
    return acc / static_cast<double>(last - first + 1);
}

RmseTrace compute_rmse(std::span<const std::vector<TrustState>> estimates,
                       std::span<const std::vector<TrustState>> truths) {
    if (estimates.size() != truths.size()) throw ConfigError("compute_rmse: run counts differ");
    if (estimates.empty()) return {};
    const std::size_t steps = truths.front().size();
    const std::size_t nodes = steps == 0 ? 0 : truths.front().front().size();
    RmseTrace trace(steps, nodes);
    for (std::size_t m = 0; m < estimates.size(); ++m) {
        if (estimates[m].size() != steps || truths[m].size() != steps) {
            throw ConfigError("compute_rmse: trajectory length mismatch in run " + std::to_string(m + 1));
        }
        for (std::size_t k = 0; k < steps; ++k) {
            for (std::size_t j = 0; j < nodes; ++j) {
                const double e = estimates[m][k].values[j] - truths[m][k].values[j];
                trace.at(k, j) += e * e;
            }
        }
    }
    const double count = static_cast<double>(estimates.size());
    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t j = 0; j < nodes; ++j) trace.at(k, j) = std::sqrt(trace.at(k, j) / count);
    }
    return trace;
}

FilterRunner default_runner(FilterKind kind) {
    return [kind](std::span<const ReadingFrame> frames, const ModelConfig& cfg, const TrustState& init, Rng& rng) {
        return run_filter(kind, frames, cfg, init, rng);
    };
}

void ExperimentConfig::validate() const {
    model.validate();
    if (runs < 1) throw ConfigError("experiment needs at least one run");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    if (!(init_trust >= 0.0 && init_trust <= 1.0)) throw ConfigError("initial trust must lie in [0,1]");
}

std::size_t ExperimentResult::failed_runs() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return !r.ok(); }));
}

std::size_t ExperimentResult::non_converged_steps() const {
    std::size_t n = 0;
    for (const auto& r : runs) n += static_cast<std::size_t>(std::count(r.converged.begin(), r.converged.end(), false));
    return n;
}

std::vector<TrustState> ExperimentResult::mean_estimates() const {
    std::vector<TrustState> mean;
    std::size_t used = 0;
    for (const auto& r : runs) {
        if (!r.ok()) continue;
        if (mean.empty()) {
            mean = r.estimates;
            for (auto& t : mean) std::fill(t.values.begin(), t.values.end(), 0.0);
        }
        for (std::size_t k = 0; k < mean.size(); ++k) {
            for (std::size_t j = 0; j < mean[k].size(); ++j) mean[k].values[j] += r.estimates[k].values[j];
        }
        ++used;
    }
    for (auto& t : mean) {
        for (double& v : t.values) v /= static_cast<double>(used);
    }
    return mean;
}

ExperimentResult monte_carlo(const ExperimentConfig& cfg, const ScenarioFactory& make_scenario) {
    cfg.validate();
    const FilterRunner runner = cfg.runner ? cfg.runner : default_runner(cfg.kind);

    ExperimentResult result;
    result.kind = cfg.kind;
    result.scenario = make_scenario(cfg.scenario_seed);
    result.scenario.validate();
    if (result.scenario.nodes() != cfg.model.d) {
        throw ConfigError("scenario has " + std::to_string(result.scenario.nodes()) + " nodes but model d=" +
                          std::to_string(cfg.model.d));
    }

    result.runs.resize(cfg.runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.runs; i = next++) {
            const std::size_t m = i + 1;
            if (cfg.redraw_scenario) {
                const Scenario own = make_scenario(derive_seed(cfg.scenario_seed, m));
                result.runs[i] = execute_run(cfg, runner, own, m);
            } else {
                result.runs[i] = execute_run(cfg, runner, result.scenario, m);
            }
        }
    };
    const std::size_t workers = std::min(cfg.jobs, cfg.runs);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    std::vector<std::vector<TrustState>> estimates;
    std::vector<std::vector<TrustState>> truths;
    std::vector<double> seconds;
    for (const auto& r : result.runs) {
        if (!r.ok()) continue;
        estimates.push_back(r.estimates);
        truths.push_back(r.truth);
        seconds.push_back(r.seconds);
    }
    result.rmse = compute_rmse(estimates, truths);
    if (!seconds.empty()) {
        double total = 0.0;
        for (double s : seconds) total += s;
        result.timing.mean_seconds = total / static_cast<double>(seconds.size());
        result.timing.min_seconds = *std::min_element(seconds.begin(), seconds.end());
        result.timing.max_seconds = *std::max_element(seconds.begin(), seconds.end());
    }
    return result;
}

std::vector<ScalingRow> scaling_study(std::span<const std::size_t> d_values, const ExperimentConfig& base,
                                      const PaperScenarioOptions& scenario_opts) {
    if (d_values.empty()) throw ConfigError("scaling study needs at least one node count");
    if (!std::is_sorted(d_values.begin(), d_values.end())) throw ConfigError("scaling node counts must be ascending");
    std::vector<ScalingRow> rows;
    for (std::size_t d : d_values) {
        ExperimentConfig cfg = base;
        cfg.jobs = 1;
        const double q = base.model.q_diag.empty() ? 0.01 : base.model.q_diag.front();
        cfg.model.d = d;
        cfg.model.q_diag.assign(d, q);
        PaperScenarioOptions opts = scenario_opts;
        opts.d = d;
        const auto result = monte_carlo(cfg, [&](std::uint64_t seed) { return paper_scenario(opts, seed); });
        if (result.failed_runs() > 0) throw FilterError("scaling study: runs failed at d=" + std::to_string(d), 0);
        rows.push_back({d, result.timing.mean_seconds, 1.0});
    }
    for (auto& row : rows) row.ratio = row.mean_seconds / rows.front().mean_seconds;
    return rows;
}

std::vector<AlphaResult> alpha_sweep(std::span<const double> alphas, const ExperimentConfig& base,
                                     const ScenarioFactory& make_scenario) {
    if (alphas.empty()) throw ConfigError("alpha sweep needs at least one value");
    std::vector<AlphaResult> out;
    for (double a : alphas) {
        ExperimentConfig cfg = base;
        cfg.model.alpha = a;
        out.push_back({a, monte_carlo(cfg, make_scenario)});
    }
    return out;
}

void write_trajectories_csv(const std::filesystem::path& path, const ExperimentResult& result) {
    auto out = open_output(path);
    out << "run,step,node,estimate,truth\n";
    for (const auto& r : result.runs) {
        if (!r.ok()) continue;
        for (std::size_t k = 0; k < r.estimates.size(); ++k) {
            for (std::size_t j = 0; j < r.estimates[k].size(); ++j) {
                out << r.run << ',' << (k + 1) << ',' << (j + 1) << ',' << format_double(r.estimates[k].values[j])
                    << ',' << format_double(r.truth[k].values[j]) << '\n';
            }
        }
    }
}

std::vector<TrajectoryRow> read_trajectories_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "run,step,node,estimate,truth") throw ConfigError("unexpected trajectories header: " + line);
    std::vector<TrajectoryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        if (c.size() != 5) throw ConfigError("bad trajectories row: " + line);
        rows.push_back({parse_index(c[0]), parse_index(c[1]), parse_index(c[2]), parse_double(c[3]), parse_double(c[4])});
    }
    return rows;
}

void write_rmse_csv(const std::filesystem::path& path, const RmseTrace& rmse) {
    auto out = open_output(path);
    out << "step,node,rmse\n";
    for (std::size_t k = 0; k < rmse.steps(); ++k) {
        for (std::size_t j = 0; j < rmse.nodes(); ++j) {
            out << (k + 1) << ',' << (j + 1) << ',' << format_double(rmse.at(k, j)) << '\n';
        }
    }
}

RmseTrace read_rmse_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "step,node,rmse") throw ConfigError("unexpected rmse header: " + line);
    struct Cell {
        std::size_t k, j;
        double v;
    };
    std::vector<Cell> cells;
    std::size_t steps = 0;
    std::size_t nodes = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        if (c.size() != 3) throw ConfigError("bad rmse row: " + line);
        Cell cell{parse_index(c[0]), parse_index(c[1]), parse_double(c[2])};
        if (cell.k == 0 || cell.j == 0) throw ConfigError("rmse indices start at 1");
        steps = std::max(steps, cell.k);
        nodes = std::max(nodes, cell.j);
        cells.push_back(cell);
    }
    RmseTrace trace(steps, nodes);
    for (const auto& c : cells) trace.at(c.k - 1, c.j - 1) = c.v;
    return trace;
}

void write_iterations_csv(const std::filesystem::path& path, const ExperimentResult& result) {
    auto out = open_output(path);
    out << "run,step,ipf_iterations\n";
    for (const auto& r : result.runs) {
        if (!r.ok()) continue;
        for (std::size_t k = 0; k < r.iterations.size(); ++k) {
            out << r.run << ',' << (k + 1) << ',' << r.iterations[k] << '\n';
        }
    }
}

void write_timing_json(const std::filesystem::path& path, std::span<const ScalingRow> rows) {
    nlohmann::json doc;
    doc["schema_version"] = kOutputSchemaVersion;
    auto& arr = doc["rows"] = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back({{"d", r.d}, {"mean_seconds", r.mean_seconds}, {"ratio", r.ratio}});
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result) {
    std::filesystem::create_directories(dir);
    write_trajectories_csv(dir / "trajectories.csv", result);
    write_rmse_csv(dir / "rmse.csv", result.rmse);
    write_iterations_csv(dir / "iterations.csv", result);
}

}  // namespace sstm
