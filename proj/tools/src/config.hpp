#pragma once

#include <spinmaser/analysis.hpp>
#include <spinmaser/model.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spinmaser::cli {

enum class OutputFormat { csv, json, both };

struct RunConfig {
  // model
  std::string preset = "nv";
  ParameterMap overrides;             ///< [model] keys other than preset
  std::optional<std::string> inline_model; ///< [inline] section as model text
  ModelSpec model;                    ///< resolved, pump schedule included

  // pump
  std::optional<double> power;        ///< W
  std::optional<double> rate;         ///< 1/s, wins over power
  double pump_start = 0.0;            ///< s
  std::optional<double> pump_duration; ///< s; none = on until the end
  double pump_rate = 0.0;             ///< resolved xi

  AssemblyOptions assembly;
  SolverOptions solver;
  SpectrumOptions spectrum;

  // simulate / features
  double t_end = 20e-3;
  int samples = 2001;
  std::vector<std::string> columns;   ///< empty = all
  double rabi_window = 5.0;

  // sweeps
  std::vector<double> pump_grid;      ///< 1/s
  std::vector<double> power_grid;     ///< W, parallel to pump_grid when swept in power
  SweepStart sweep_start = SweepStart::fresh;
  bool sweep_spectrum = true;
  double threshold_significance = 10.0;
  std::vector<double> detunings;      ///< rad/s
  double masing_factor = 10.0;

  // output
  std::filesystem::path out_dir = ".";
  OutputFormat format = OutputFormat::both;
  std::string prefix;
  bool dump_system = false;
  unsigned jobs = 0;

  std::string canonical;              ///< resolved key = value lines, sorted
  std::uint64_t hash = 0;             ///< FNV-1a of `canonical`
};

/// Parses a run configuration. `sets` are "key=value" overrides applied after
/// the document; `origin` names the source in error messages. Throws
/// ConfigError with line/key context.
RunConfig parse_config(std::string_view text, const std::vector<std::string>& sets = {},
                       std::string_view origin = "config");
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& sets = {});

/// Every accepted key with its default, one "key = default" per line.
std::string config_reference();

std::string_view format_name(OutputFormat f);

} // namespace spinmaser::cli
