#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gmmpower {

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Splits one CSV record on commas. Double-quoted fields may contain commas and
// "" escapes; a trailing '\r' is dropped.
std::vector<std::string> split_csv_line(std::string_view line);

// Strict full-field parse; returns false on trailing garbage or empty input.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

std::string join_csv(const std::vector<std::string>& fields);

}  // namespace gmmpower
