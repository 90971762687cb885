#ifndef FIXGCN_TEXT_HPP
#define FIXGCN_TEXT_HPP

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "fixgcn/types.hpp"

namespace fixgcn::text {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  while (!s.empty() && (s.front() == ' ' || s.front() == '+')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error("not a number: '" + std::string(s) + "'");
  return v;
}

template <typename Int = long long>
Int parse_int(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  Int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error("not an integer: '" + std::string(s) + "'");
  return v;
}

/// Splits on any run of the given delimiter characters; empty fields are dropped.
inline std::vector<std::string_view> split_ws(std::string_view line, std::string_view delims = " \t\r") {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && delims.find(line[i]) != std::string_view::npos) ++i;
    std::size_t j = i;
    while (j < line.size() && delims.find(line[j]) == std::string_view::npos) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Splits on a single delimiter, keeping empty fields.
inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == delim) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace fixgcn::text

#endif  // FIXGCN_TEXT_HPP
