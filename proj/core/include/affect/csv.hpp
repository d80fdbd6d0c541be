#pragma once

// Minimal CSV helpers shared by the dataset, report and prediction files.
// Fields never contain commas or quotes, so no quoting is performed.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace affect {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Parses a full field as a double; throws Error(kParse) with `context`.
double parse_double(std::string_view field, std::string_view context);

std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
};

/// Reads a header line plus rows; every row must match the header width.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text, std::string_view context);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace affect
