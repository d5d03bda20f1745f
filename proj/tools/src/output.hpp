#pragma once

#include <spinmaser/error.hpp>
#include <spinmaser/ode.hpp>

#include "json.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace spinmaser::cli {

using Json = nlohmann::ordered_json;

class IoError : public Error {
public:
  using Error::Error;
};

/// Full-precision scientific notation ("%.17e"); non-finite values as nan/inf.
std::string format_sci(double v);

/// Number or null for non-finite values.
Json json_number(double v);
Json json_stats(const SolverStats& s);

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  void add_row(std::vector<std::string> cells);
  void add_row(const std::vector<double>& values);
  /// Keeps only the named columns, in the given order.
  CsvTable select(const std::vector<std::string>& columns) const;
  /// `comment`, when non-empty, becomes a leading "# ..." line.
  std::string render(std::string_view comment = {}) const;

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace spinmaser::cli
