#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ctface {

/// Shortest decimal form that parses back to the identical double.
std::string format_real(double value);

/// Strict decimal parse of the whole token; throws FormatError otherwise.
double parse_real(std::string_view token);
long long parse_int(std::string_view token);

/// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_whitespace(std::string_view line);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

}  // namespace ctface
