#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bermudan/error.hpp"

namespace bermudan {

// shortest representation that parses back to the same double
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) fail(ErrorKind::internal_error, "to_chars failed");
  return std::string(buf, p);
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(ErrorKind::invalid_scenario, "bad number '" + std::string(s) + "'");
  return v;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(std::string_view name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return static_cast<int>(k);
    return -1;
  }
};

inline void write_csv(std::ostream& os, const CsvTable& t) {
  for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << fmt_double(r[k]);
    os << '\n';
  }
}

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(is, line)) return t;
  t.columns = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.columns.size()) fail(ErrorKind::invalid_scenario, "ragged csv row");
    std::vector<double> r;
    r.reserve(cells.size());
    for (const auto& c : cells) r.push_back(parse_double(c));
    t.rows.push_back(std::move(r));
  }
  return t;
}

// cells kept as text, for tables with label columns
struct TextTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline void write_csv(std::ostream& os, const TextTable& t) {
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (r[k].find_first_of(",\n") != std::string::npos) fail(ErrorKind::internal_error, "csv cell holds a separator");
      os << (k ? "," : "") << r[k];
    }
    os << '\n';
  };
  line(t.columns);
  for (const auto& r : t.rows) line(r);
}

inline TextTable read_text_csv(std::istream& is) {
  TextTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
      const std::size_t k = s.find(',', start);
      out.push_back(s.substr(start, k == std::string::npos ? std::string::npos : k - start));
      if (k == std::string::npos) return out;
      start = k + 1;
    }
  };
  if (!std::getline(is, line)) return t;
  t.columns = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.columns.size()) fail(ErrorKind::invalid_scenario, "ragged csv row");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace bermudan
