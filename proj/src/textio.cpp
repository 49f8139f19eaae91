#include "fairnvt/textio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fairnvt/errors.hpp"

namespace fairnvt::textio {

std::string fmt_g17(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc()) throw ValueError("failed to format double");
  return std::string(buf, ptr);
}

std::string fmt_fixed(double v, int precision) {
  char buf[512];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
  if (ec != std::errc()) throw ValueError("failed to format double");
  return std::string(buf, ptr);
}

double parse_double_strict(std::string_view token, const std::string& context) {
  double v = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || token.empty()) {
    throw FormatError(context + ": expected a number, got '" + std::string(token) + "'");
  }
  return v;
}

long long parse_int_strict(std::string_view token, const std::string& context) {
  long long v = 0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || token.empty()) {
    throw FormatError(context + ": expected an integer, got '" + std::string(token) + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& text, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == delim) {
      out.emplace_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write file '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw FormatError("short write to '" + path + "'");
}

}  // namespace fairnvt::textio
