#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oxgen {

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`, so readers
/// never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);

/// Shortest round-trip decimal form of `v`.
std::string format_real(double v);
/// Fixed notation with `decimals` digits.
std::string format_fixed(double v, int decimals);

/// Parses a full field as a real; rejects trailing garbage and empty input.
bool parse_real(std::string_view field, double& out);

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_record(std::string_view line);
std::string csv_escape(std::string_view field);

/// Splits text into lines, accepting LF or CRLF.
std::vector<std::string_view> split_lines(std::string_view text);

}  // namespace oxgen
