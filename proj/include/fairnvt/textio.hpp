#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fairnvt::textio {

// Locale-independent float formatting. fmt_g17 round-trips any double.
std::string fmt_g17(double v);
std::string fmt_fixed(double v, int precision);

// Strict parsers: the whole token must be consumed. `context` names the
// location (file, line, column) for the error message.
double parse_double_strict(std::string_view token, const std::string& context);
long long parse_int_strict(std::string_view token, const std::string& context);

// Splits on a delimiter, keeping empty fields.
std::vector<std::string> split(const std::string& text, char delim);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace fairnvt::textio
