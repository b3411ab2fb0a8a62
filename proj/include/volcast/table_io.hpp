#pragma once

// RFC 4180 CSV reading/writing, shortest round-trip number formatting and
// UTC timestamp conversions shared by every module that touches files.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace volcast::io {

/// Shortest decimal that round-trips, laid out like Python's repr(float):
/// "0.1", "2.0", "1e-05", "1.5e+16", "nan", "inf".
std::string format_double(double v);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

using CsvRow = std::vector<std::string>;

/// Parses a whole CSV document (quoted fields may span lines). A trailing
/// newline does not produce an empty row.
std::vector<CsvRow> parse_csv(std::string_view text);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: creates parent directories
/// and truncates.
void write_file(const std::filesystem::path& path, std::string_view content);

/// Seconds since the Unix epoch <-> "YYYY-MM-DDTHH:MM:SSZ".
std::string format_utc(std::int64_t epoch_seconds);
std::string format_date(std::int64_t epoch_seconds);  // "YYYY-MM-DD"
/// Accepts "YYYY-MM-DDTHH:MM:SSZ", "YYYY-MM-DD HH:MM:SS" (UTC) and
/// "YYYY-MM-DD" (midnight). Throws std::invalid_argument otherwise.
std::int64_t parse_utc(std::string_view text);
std::int64_t epoch_from_civil(int year, unsigned month, unsigned day);

/// Strict numeric parsing of a whole field; throws std::invalid_argument.
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
bool parse_bool(std::string_view s);

}  // namespace volcast::io
