#include "output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <system_error>

#include <unistd.h>

namespace spinmaser::cli {

std::string format_sci(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json json_stats(const SolverStats& s) {
  Json j;
  j["steps"] = s.steps;
  j["rejected"] = s.rejected;
  j["rhs_evals"] = s.rhs_evals;
  j["jacobian_evals"] = s.jacobian_evals;
  j["decompositions"] = s.decompositions;
  return j;
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw InternalError("CSV row width does not match the header");
  rows_.push_back(std::move(cells));
}

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_sci(v));
  add_row(std::move(cells));
}

CsvTable CsvTable::select(const std::vector<std::string>& columns) const {
  std::vector<std::size_t> idx;
  for (const auto& c : columns) {
    std::size_t i = 0;
    while (i < header_.size() && header_[i] != c) ++i;
    if (i == header_.size()) throw ConfigError("unknown column '" + c + "'");
    idx.push_back(i);
  }
  CsvTable out(columns);
  for (const auto& row : rows_) {
    std::vector<std::string> cells;
    for (auto i : idx) cells.push_back(row[i]);
    out.rows_.push_back(std::move(cells));
  }
  return out;
}

std::string CsvTable::render(std::string_view comment) const {
  std::string out;
  if (!comment.empty()) out.append("# ").append(comment).append("\n");
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp, ec);
      throw IoError("write to '" + tmp.string() + "' failed");
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

} // namespace spinmaser::cli
