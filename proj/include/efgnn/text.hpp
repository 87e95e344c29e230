#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace efgnn {

/// Canonical double formatting: 17 significant digits, "nan" for NaN.
/// Round-trips exactly through parse_real for finite values.
std::string format_double(double v);

/// Locale-independent strict parses; nullopt on any trailing garbage.
std::optional<double> parse_real(const std::string& token);
std::optional<long long> parse_integer(const std::string& token);

std::string trim(const std::string& s);
std::vector<std::string> split_whitespace(const std::string& line);
std::vector<std::string> split_char(const std::string& line, char delim);

/// Reads a whole file into lines (without newline characters); throws
/// std::runtime_error when the file cannot be opened.
std::vector<std::string> read_lines(const std::string& path);

/// 64-bit FNV-1a over the canonical "key=value\n" rendering of the items,
/// as 16 lowercase hex digits. Stable across platforms.
std::string fnv1a_hex(const std::vector<std::pair<std::string, std::string>>& items);

}  // namespace efgnn
