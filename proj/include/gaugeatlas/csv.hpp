#pragma once

#include "gaugeatlas/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

namespace gaugeatlas {

/// Shortest text that round-trips the double ("nan", "inf" for non-finite).
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::trunc), width_(header.size()) {
    if (!out_) throw Error("cannot write " + path.string());
    write_row(header);
  }

  template <typename... Ts>
  void row(const Ts&... values) {
    std::vector<std::string> cells;
    (cells.push_back(cell(values)), ...);
    if (cells.size() != width_) throw InternalInvariantError("csv row width mismatch");
    write_row(cells);
  }

 private:
  template <typename T>
  static std::string cell(const T& v) {
    if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
    else if constexpr (std::is_floating_point_v<T>) return format_number(static_cast<double>(v));
    else if constexpr (std::is_integral_v<T>) return std::to_string(v);
    else return std::string(v);
  }

  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t width_;
};

}  // namespace gaugeatlas
