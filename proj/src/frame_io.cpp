#include "sstm/frame_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>

namespace sstm {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view token) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw ConfigError("not a number: '" + std::string(token) + "'");
    }
    return value;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> cells;
    std::size_t begin = 0;
    while (true) {
        const auto comma = line.find(',', begin);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(begin));
            break;
        }
        cells.push_back(line.substr(begin, comma - begin));
        begin = comma + 1;
    }
    return cells;
}

namespace {

void write_header(std::ostream& out, std::size_t d) {
    out << "step";
    for (std::size_t j = 0; j < d; ++j) out << ",node_" << (j + 1);
    out << '\n';
}

std::size_t parse_step(std::string_view token) {
    std::size_t step = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), step);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        throw ConfigError("bad step index '" + std::string(token) + "'");
    }
    return step;
}

template <typename Row>
std::vector<Row> read_table(std::istream& in, auto&& make_row) {
    std::string line;
    if (!std::getline(in, line)) return {};
    const auto header = split_csv_line(line);
    if (header.empty() || header.front() != "step") throw ConfigError("CSV header must start with 'step'");
    const std::size_t d = header.size() - 1;

    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != d + 1) {
            throw ConfigError("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(d + 1));
        }
        rows.push_back(make_row(parse_step(cells[0]), std::span(cells).subspan(1)));
    }
    return rows;
}

}  // namespace

void write_frames_csv(std::ostream& out, const std::vector<ReadingFrame>& frames) {
    write_header(out, frames.empty() ? 0 : frames.front().size());
    for (const auto& f : frames) {
        out << f.time_step;
        for (const auto& y : f.readings) {
            out << ',';
            if (y) out << format_double(*y);
        }
        out << '\n';
    }
}

std::vector<ReadingFrame> read_frames_csv(std::istream& in) {
    return read_table<ReadingFrame>(in, [](std::size_t step, std::span<const std::string_view> cells) {
        ReadingFrame f;
        f.time_step = step;
        for (auto c : cells) {
            if (c.empty()) f.readings.emplace_back(std::nullopt);
            else f.readings.emplace_back(parse_double(c));
        }
        return f;
    });
}

void write_truth_csv(std::ostream& out, const std::vector<TrustState>& truth) {
    write_header(out, truth.empty() ? 0 : truth.front().size());
    for (const auto& t : truth) {
        out << t.time_step;
        for (double v : t.values) out << ',' << format_double(v);
        out << '\n';
    }
}

std::vector<TrustState> read_truth_csv(std::istream& in) {
    return read_table<TrustState>(in, [](std::size_t step, std::span<const std::string_view> cells) {
        TrustState t;
        t.time_step = step;
        for (auto c : cells) t.values.push_back(parse_double(c));
        return t;
    });
}

void write_frames_csv(const std::filesystem::path& path, const std::vector<ReadingFrame>& frames) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_frames_csv(out, frames);
}

std::vector<ReadingFrame> read_frames_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_frames_csv(in);
}

}  // namespace sstm
