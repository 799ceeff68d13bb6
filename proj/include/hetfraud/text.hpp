#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hetfraud {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

// Strict parse of a full token; returns false on any trailing garbage.
bool try_parse_double(std::string_view text, double& out);
double parse_double(std::string_view text, std::string_view context);
long long parse_integer(std::string_view text, std::string_view context);
bool parse_bool(std::string_view text, std::string_view context);

std::string_view trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace hetfraud
