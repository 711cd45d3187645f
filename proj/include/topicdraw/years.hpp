#pragma once

#include <algorithm>
#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "topicdraw/error.hpp"

namespace topicdraw {

using Year = int;

// An inclusive year interval as written on the command line ("1957..1966"
// or a single "1957").
struct YearRange {
  Year from = 0;
  Year to = 0;

  bool contains(Year y) const noexcept { return y >= from && y <= to; }
};

inline Year parse_year(std::string_view text) {
  Year y = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), y);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ConfigError("invalid year: '" + std::string(text) + "'");
  return y;
}

inline YearRange parse_year_range(std::string_view text) {
  const auto dots = text.find("..");
  YearRange r;
  if (dots == std::string_view::npos) {
    r.from = r.to = parse_year(text);
  } else {
    r.from = parse_year(text.substr(0, dots));
    r.to = parse_year(text.substr(dots + 2));
  }
  if (r.from > r.to) throw ConfigError("empty year range: '" + std::string(text) + "'");
  return r;
}

inline std::string format_year_range(const YearRange& r) {
  return std::to_string(r.from) + ".." + std::to_string(r.to);
}

// Sorted, duplicate-free set of years.
using YearScope = std::vector<Year>;

inline YearScope normalize_scope(YearScope years) {
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());
  return years;
}

inline std::string scope_key(const YearScope& years) {
  std::string key;
  for (Year y : years) {
    if (!key.empty()) key += ',';
    key += std::to_string(y);
  }
  return key;
}

}  // namespace topicdraw
