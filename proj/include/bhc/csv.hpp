#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bhc::csv {

/// Shortest decimal string that round-trips to the same double.
/// Deterministic across runs and thread schedules, which is what makes
/// byte-identical output files possible.
std::string fmt(double v);
std::string fmt(std::int64_t v);

/// Split one CSV line on commas. No quoting rules: none of the formats
/// written or read by this project quote fields.
std::vector<std::string> split(std::string_view line);

/// Read a whole CSV file into rows of trimmed fields. Skips blank lines.
std::vector<std::vector<std::string>> read_file(const std::string& path);

double to_double(const std::string& field, const std::string& context);
std::int64_t to_int(const std::string& field, const std::string& context);

std::string trim(std::string_view s);

/// FNV-1a 64-bit over a byte string; used for config/content hashes.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t fnv1a_file(const std::string& path);

} // namespace bhc::csv
