#include "sstm/ingest.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <string>

namespace sstm {

namespace {

constexpr std::size_t kReportedBadLines = 10;

template <typename T>
bool parse_int(std::string_view s, T& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

bool parse_real(std::string_view s, double& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

std::optional<std::chrono::year_month_day> try_parse_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) || !parse_int(s.substr(8, 2), d)) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

std::optional<double> try_parse_time(std::string_view s) {
    if (s.size() < 8 || s[2] != ':' || s[5] != ':') return std::nullopt;
    int h = 0;
    int m = 0;
    double sec = 0.0;
    if (!parse_int(s.substr(0, 2), h) || !parse_int(s.substr(3, 2), m) || !parse_real(s.substr(6), sec)) {
        return std::nullopt;
    }
    if (h < 0 || h > 23 || m < 0 || m > 59 || sec < 0.0 || sec >= 61.0) return std::nullopt;
    return h * 3600.0 + m * 60.0 + sec;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t begin = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > begin) out.push_back(line.substr(begin, i - begin));
    }
    return out;
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

class ParseAccumulator {
public:
    void feed(std::string_view line) {
        ++result_.report.lines;
        if (is_blank(line)) return;
        if (auto rec = parse_record(line)) {
            result_.records.push_back(*rec);
            return;
        }
        ++result_.report.skipped;
        if (result_.report.first_bad_lines.size() < kReportedBadLines) {
            result_.report.first_bad_lines.push_back(result_.report.lines);
        }
    }

    ParseResult take() { return std::move(result_); }

private:
    ParseResult result_;
};

double attribute_of(const RawRecord& r, Attribute a) {
    switch (a) {
        case Attribute::Temperature: return r.temperature;
        case Attribute::Humidity: return r.humidity;
        case Attribute::Light: return r.light;
    }
    return r.temperature;
}

struct Sample {
    std::int64_t epoch;
    double value;
};

/// Sorted by epoch, duplicates at one epoch averaged.
std::vector<Sample> collapse(std::vector<Sample> raw) {
    std::stable_sort(raw.begin(), raw.end(), [](const Sample& a, const Sample& b) { return a.epoch < b.epoch; });
    std::vector<Sample> out;
    for (std::size_t i = 0; i < raw.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < raw.size() && raw[j].epoch == raw[i].epoch) sum += raw[j++].value;
        out.push_back({raw[i].epoch, sum / static_cast<double>(j - i)});
        i = j;
    }
    return out;
}

std::optional<double> interpolate(const std::vector<Sample>& s, std::int64_t epoch, std::int64_t max_gap) {
    const auto it = std::lower_bound(s.begin(), s.end(), epoch,
                                     [](const Sample& a, std::int64_t e) { return a.epoch < e; });
    if (it != s.end() && it->epoch == epoch) return it->value;
    if (it == s.begin() || it == s.end()) return std::nullopt;
    const Sample& lo = *(it - 1);
    const Sample& hi = *it;
    if (hi.epoch - lo.epoch > max_gap) return std::nullopt;
    const double t = static_cast<double>(epoch - lo.epoch) / static_cast<double>(hi.epoch - lo.epoch);
    return lo.value + t * (hi.value - lo.value);
}

}  // namespace

std::chrono::year_month_day parse_date(std::string_view text) {
    if (auto d = try_parse_date(text)) return *d;
    throw ConfigError("bad date '" + std::string(text) + "' (expected YYYY-MM-DD)");
}

std::optional<RawRecord> parse_record(std::string_view line) {
    const auto f = split_ws(line);
    if (f.size() != 8) return std::nullopt;
    RawRecord r;
    const auto date = try_parse_date(f[0]);
    const auto time = try_parse_time(f[1]);
    if (!date || !time) return std::nullopt;
    r.date = *date;
    r.time_of_day = std::chrono::duration<double>(*time);
    if (!parse_int(f[2], r.epoch) || !parse_int(f[3], r.mote_id) || r.mote_id < 1) return std::nullopt;
    if (!parse_real(f[4], r.temperature) || !parse_real(f[5], r.humidity) || !parse_real(f[6], r.light) ||
        !parse_real(f[7], r.voltage)) {
        return std::nullopt;
    }
    return r;
}

ParseResult parse_dataset(std::istream& in) {
    ParseAccumulator acc;
    std::string line;
    while (std::getline(in, line)) acc.feed(line);
    if (in.bad()) throw std::runtime_error("I/O error while reading dataset stream");
    return acc.take();
}

ParseResult load_dataset(const std::filesystem::path& path) {
    gzFile file = gzopen(path.c_str(), "rb");
    if (file == nullptr) throw std::runtime_error("cannot open dataset " + path.string());
    ParseAccumulator acc;
    std::string line;
    char buf[4096];
    while (gzgets(file, buf, sizeof buf) != nullptr) {
        line.append(buf);
        if (!line.empty() && line.back() == '\n') {
            line.pop_back();
            acc.feed(line);
            line.clear();
        }
    }
    int err = Z_OK;
    const char* msg = gzerror(file, &err);
    const std::string error_text = msg ? msg : "";
    gzclose(file);
    if (err != Z_OK && err != Z_STREAM_END) throw std::runtime_error("error reading " + path.string() + ": " + error_text);
    if (!line.empty()) acc.feed(line);
    return acc.take();
}

std::string_view to_string(Attribute a) {
    switch (a) {
        case Attribute::Temperature: return "temperature";
        case Attribute::Humidity: return "humidity";
        case Attribute::Light: return "light";
    }
    return "temperature";
}

Attribute parse_attribute(std::string_view name) {
    if (name == "temperature") return Attribute::Temperature;
    if (name == "humidity") return Attribute::Humidity;
    if (name == "light") return Attribute::Light;
    throw ConfigError("unknown attribute '" + std::string(name) + "' (expected temperature, humidity or light)");
}

void SyncConfig::validate() const {
    if (node_ids.empty()) throw ConfigError("sync: node list is empty");
    if (std::set<int>(node_ids.begin(), node_ids.end()).size() != node_ids.size()) {
        throw ConfigError("sync: node ids must be distinct");
    }
    if (stride < 1) throw ConfigError("sync: stride must be at least 1");
    if (max_gap < 0) throw ConfigError("sync: max_gap must be non-negative");
    if (grid_start && grid_end && *grid_start > *grid_end) throw ConfigError("sync: grid start must not follow grid end");
}

SyncResult synchronize(const std::vector<RawRecord>& records, const SyncConfig& cfg) {
    cfg.validate();
    std::map<int, std::vector<Sample>> by_node;
    for (int id : cfg.node_ids) by_node[id];
    for (const auto& r : records) {
        if (cfg.day && r.date != *cfg.day) continue;
        auto it = by_node.find(r.mote_id);
        if (it == by_node.end()) continue;
        it->second.push_back({r.epoch, attribute_of(r, cfg.attribute)});
    }

    SyncResult out;
    std::vector<std::vector<Sample>> series;
    std::optional<std::int64_t> first;
    std::optional<std::int64_t> last;
    for (int id : cfg.node_ids) {
        auto s = collapse(std::move(by_node[id]));
        if (s.empty()) {
            out.warnings.push_back("no records for mote " + std::to_string(id) + "; column left absent");
        } else {
            first = first ? std::min(*first, s.front().epoch) : s.front().epoch;
            last = last ? std::max(*last, s.back().epoch) : s.back().epoch;
        }
        series.push_back(std::move(s));
    }

    const auto start = cfg.grid_start ? cfg.grid_start : first;
    const auto end = cfg.grid_end ? cfg.grid_end : last;
    if (!start || !end) {
        out.warnings.push_back("no records for any selected mote; grid is empty");
        return out;
    }
    if (*start > *end) throw ConfigError("sync: grid start must not follow grid end");

    std::size_t step = 0;
    for (std::int64_t e = *start; e <= *end; e += cfg.stride) {
        ReadingFrame f;
        f.time_step = ++step;
        f.readings.reserve(series.size());
        for (const auto& s : series) f.readings.push_back(interpolate(s, e, cfg.max_gap));
        out.frames.push_back(std::move(f));
        out.grid.push_back(e);
    }
    return out;
}

}  // namespace sstm
