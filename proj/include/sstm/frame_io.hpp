// CSV encoding shared by the simulator, ingestion and harness outputs.
//
// Numbers are written in shortest round-trip decimal form, so reading a file
// back reproduces the in-memory doubles bit for bit.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sstm/model.hpp"

namespace sstm {

std::string format_double(double value);
/// Parses a complete token; throws ConfigError on trailing garbage.
double parse_double(std::string_view token);

std::vector<std::string_view> split_csv_line(std::string_view line);

/// Header "step,node_1,...,node_d"; absent readings are empty cells.
void write_frames_csv(std::ostream& out, const std::vector<ReadingFrame>& frames);
std::vector<ReadingFrame> read_frames_csv(std::istream& in);

/// Same layout as the frame CSV, one row per truth state.
void write_truth_csv(std::ostream& out, const std::vector<TrustState>& truth);
std::vector<TrustState> read_truth_csv(std::istream& in);

void write_frames_csv(const std::filesystem::path& path, const std::vector<ReadingFrame>& frames);
std::vector<ReadingFrame> read_frames_csv(const std::filesystem::path& path);

}  // namespace sstm
