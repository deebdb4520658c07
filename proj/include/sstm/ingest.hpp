// Ingestion of the Intel Berkeley lab mote dataset.
//
// Each line of the public file reads
//   date time epoch moteid temperature humidity light voltage
// e.g. "2004-02-28 00:59:16.02785 3 1 19.9884 37.0933 45.08 2.69964".
// Motes report asynchronously, so readings are aligned onto a common epoch
// grid by linear interpolation between the neighbouring samples.
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sstm/model.hpp"

namespace sstm {

struct RawRecord {
    std::chrono::year_month_day date;
    std::chrono::duration<double> time_of_day{0.0};
    std::int64_t epoch = 0;
    int mote_id = 0;
    double temperature = 0.0;  ///< degrees Celsius
    double humidity = 0.0;     ///< percent
    double light = 0.0;        ///< lux
    double voltage = 0.0;      ///< volts
};

struct ParseReport {
    std::size_t lines = 0;
    std::size_t skipped = 0;
    std::vector<std::size_t> first_bad_lines;  ///< at most 10, 1-based
};

struct ParseResult {
    std::vector<RawRecord> records;
    ParseReport report;
};

/// Parses one line; std::nullopt if it is malformed.
std::optional<RawRecord> parse_record(std::string_view line);

/// Parses a whole stream. Malformed lines are counted and skipped; blank
/// lines are ignored.
ParseResult parse_dataset(std::istream& in);

/// Reads a file, transparently decompressing gzip input.
/// Throws std::runtime_error if the file cannot be opened.
ParseResult load_dataset(const std::filesystem::path& path);

enum class Attribute { Temperature, Humidity, Light };

std::string_view to_string(Attribute a);
Attribute parse_attribute(std::string_view name);

struct SyncConfig {
    std::vector<int> node_ids{9, 10, 11, 12, 13};
    Attribute attribute = Attribute::Temperature;
    /// Grid bounds in raw epochs (inclusive). Unset bounds default to the
    /// first/last epoch observed for the selected nodes.
    std::optional<std::int64_t> grid_start;
    std::optional<std::int64_t> grid_end;
    std::int64_t stride = 1;
    std::optional<std::chrono::year_month_day> day;
    /// Interpolation is refused across gaps wider than this many epochs.
    std::int64_t max_gap = 20;

    void validate() const;
};

struct SyncResult {
    std::vector<ReadingFrame> frames;
    std::vector<std::int64_t> grid;  ///< raw epoch of every frame
    std::vector<std::string> warnings;
};

/// Builds one frame per grid epoch with columns in node_ids order. A node
/// with no records yields an all-absent column and a warning.
SyncResult synchronize(const std::vector<RawRecord>& records, const SyncConfig& cfg);

/// Parses "YYYY-MM-DD".
std::chrono::year_month_day parse_date(std::string_view text);

}  // namespace sstm
