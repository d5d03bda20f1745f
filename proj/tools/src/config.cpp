#include "config.hpp"

#include <spinmaser/error.hpp>
#include <spinmaser/keyvalue.hpp>
#include <spinmaser/units.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace spinmaser::cli {

namespace {

struct KeySpec {
  std::string_view key;
  std::string_view fallback;
  std::string_view help;
};

// Every accepted key outside [model] and [inline].
constexpr KeySpec kSchema[] = {
    {"pump.power", "2 W", "laser power"},
    {"pump.rate", "", "optical pumping rate (wins over pump.power)"},
    {"pump.start", "0 s", "pump switch-on time"},
    {"pump.duration", "", "pulse length; empty = continuous"},
    {"assembly.phase_pruning", "true", "drop moments with nonzero phase charge"},
    {"assembly.frame", "spin", "rotating frame: spin or cavity"},
    {"assembly.max_keys", "4096", "abort when the closed system grows beyond this"},
    {"solver.method", "rosenbrock", "rosenbrock or dormand-prince"},
    {"solver.rtol", "1e-8", "relative tolerance"},
    {"solver.atol", "1e-10", "absolute tolerance"},
    {"solver.max_step", "0 s", "largest step; 0 = unlimited"},
    {"solver.max_steps", "10000000", "step budget per integration"},
    {"solver.steady_tol", "1e-10", "normalized residual for steady states"},
    {"solver.steady_window", "10", "consecutive steps below steady_tol"},
    {"solver.steady_max_time", "10 s", "model time allowed for relaxation"},
    {"solver.newton", "true", "refine steady states by Newton iteration"},
    {"solver.newton_max_iterations", "50", "Newton iteration limit"},
    {"simulate.t_end", "20 ms", "end of the simulated interval"},
    {"simulate.samples", "2001", "output samples including both ends"},
    {"simulate.columns", "", "comma-separated trajectory columns; empty = all"},
    {"features.window", "5", "Rabi window length in envelope times"},
    {"spectrum.method", "eigenmode", "eigenmode or fft"},
    {"spectrum.samples", "801", "spectrum grid points"},
    {"spectrum.span", "10", "grid half-span in linewidths"},
    {"spectrum.fft_points", "65536", "FFT length"},
    {"sweep.axis", "rate", "rate or power"},
    {"sweep.min", "100 /s", "first grid value"},
    {"sweep.max", "1e7 /s", "last grid value"},
    {"sweep.points", "41", "log-spaced grid points"},
    {"sweep.values", "", "explicit comma-separated grid (wins over min/max)"},
    {"sweep.start", "fresh", "fresh or continuation"},
    {"sweep.spectrum", "true", "compute linewidths"},
    {"sweep.significance", "10", "threshold jump factor over the median slope"},
    {"detuning.min", "0 MHz", "first detuning omega_m - omega_s"},
    {"detuning.max", "2 MHz", "last detuning"},
    {"detuning.points", "21", "linearly spaced grid points"},
    {"detuning.values", "", "explicit comma-separated grid (wins over min/max)"},
    {"detuning.masing_factor", "10", "masing means n above this multiple of n_th"},
    {"output.dir", "", "output directory; empty = SPINMASER_OUT or ."},
    {"output.format", "both", "csv, json or both"},
    {"output.prefix", "", "file name prefix"},
    {"output.dump_system", "false", "also write the symbolic moment equations"},
    {"run.jobs", "0", "worker threads; 0 = all cores"},
};

// Keys that do not change results and stay out of the config hash.
bool affects_results(std::string_view key) { return key != "output.dir" && key != "run.jobs"; }

const KeySpec* schema_entry(std::string_view key) {
  for (const auto& s : kSchema)
    if (s.key == key) return &s;
  return nullptr;
}

struct Value {
  std::string text;
  std::string where; // "line 4" or "--set"
};

[[noreturn]] void fail(std::string_view origin, const std::string& where, std::string_view key,
                       const std::string& message) {
  throw ConfigError(std::string(origin) + ": " + where + ", key '" + std::string(key) + "': " + message);
}

class Resolver {
public:
  Resolver(std::string_view origin, std::map<std::string, Value> values)
      : origin_(origin), values_(std::move(values)) {}

  const std::string& text(std::string_view key) const { return values_.at(std::string(key)).text; }
  bool empty(std::string_view key) const { return trim_view(text(key)).empty(); }

  template <class F>
  auto with_context(std::string_view key, F&& f) const {
    try {
      return f(text(key));
    } catch (const ConfigError& e) {
      fail(origin_, values_.at(std::string(key)).where, key, e.what());
    }
  }
  [[noreturn]] void error(std::string_view key, const std::string& msg) const {
    fail(origin_, values_.at(std::string(key)).where, key, msg);
  }

  double quantity(std::string_view key, Dimension d) const {
    return with_context(key, [&](const std::string& v) { return parse_quantity(v, d); });
  }
  double positive(std::string_view key, Dimension d) const {
    const double v = quantity(key, d);
    if (!(v > 0.0)) error(key, "must be positive");
    return v;
  }
  double non_negative(std::string_view key, Dimension d) const {
    const double v = quantity(key, d);
    if (!(v >= 0.0)) error(key, "must not be negative");
    return v;
  }
  long long integer(std::string_view key, long long lo) const {
    const double v = quantity(key, Dimension::dimensionless);
    if (v != std::floor(v) || v < static_cast<double>(lo) || v > 1e15)
      error(key, "expected an integer >= " + std::to_string(lo));
    return static_cast<long long>(v);
  }
  bool boolean(std::string_view key) const {
    const auto v = trim_view(text(key));
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    error(key, "expected true or false");
  }
  std::string choice(std::string_view key, std::initializer_list<std::string_view> options) const {
    const std::string v{trim_view(text(key))};
    for (auto o : options)
      if (v == o) return v;
    std::string list;
    for (auto o : options) list += (list.empty() ? "" : ", ") + std::string(o);
    error(key, "expected one of " + list);
  }
  std::vector<double> list(std::string_view key, Dimension d) const {
    std::vector<double> out;
    for (const auto& item : split_list(text(key), ','))
      out.push_back(with_context(key, [&](const std::string&) { return parse_quantity(item, d); }));
    return out;
  }

private:
  std::string origin_;
  std::map<std::string, Value> values_;
};

std::pair<std::string, std::string> split_assignment(std::string_view s) {
  const auto eq = s.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("--set '" + std::string(s) + "': expected key=value");
  return {std::string(trim_view(s.substr(0, eq))), std::string(trim_view(s.substr(eq + 1)))};
}

} // namespace

std::string_view format_name(OutputFormat f) {
  switch (f) {
  case OutputFormat::csv: return "csv";
  case OutputFormat::json: return "json";
  case OutputFormat::both: return "both";
  }
  return "both";
}

std::string config_reference() {
  std::ostringstream out;
  out << "model.preset = nv  # nv or pentacene; other [model] keys override preset parameters\n";
  out << "model.file =  # model text file (replaces the preset)\n";
  for (const auto& s : kSchema)
    out << s.key << " = " << s.fallback << "  # " << s.help << "\n";
  out << "inline.*  # model text keys (levels, resonant, channel, ...) for a custom model\n";
  return out.str();
}

RunConfig parse_config(std::string_view text, const std::vector<std::string>& sets,
                       std::string_view origin) {
  const KeyValueDocument doc = KeyValueDocument::parse(text);

  std::map<std::string, Value> values;
  for (const auto& s : kSchema) values[std::string(s.key)] = {std::string(s.fallback), "default"};
  std::map<std::string, Value> model_keys;
  std::vector<std::pair<std::string, std::string>> inline_lines;

  auto accept = [&](const std::string& key, const std::string& value, const std::string& where) {
    if (key.rfind("model.", 0) == 0) {
      model_keys[key.substr(6)] = {value, where};
    } else if (key.rfind("inline.", 0) == 0) {
      inline_lines.emplace_back(key.substr(7), value);
    } else if (schema_entry(key)) {
      values[key] = {value, where};
    } else {
      fail(origin, where, key, "unknown key");
    }
  };
  for (const auto& e : doc.entries()) accept(e.key, e.value, "line " + std::to_string(e.line));
  for (const auto& s : sets) {
    auto [k, v] = split_assignment(s);
    accept(k, v, "--set");
  }

  // Power sweeps get power-valued default bounds.
  if (trim_view(values["sweep.axis"].text) == "power") {
    if (values["sweep.min"].where == "default") values["sweep.min"].text = "0.1 W";
    if (values["sweep.max"].where == "default") values["sweep.max"].text = "10 kW";
  }

  RunConfig cfg;
  const Resolver r(origin, values);

  // Model.
  std::string model_text;
  if (auto it = model_keys.find("file"); it != model_keys.end()) {
    std::ifstream in(it->second.text);
    if (!in) fail(origin, it->second.where, "model.file", "cannot read '" + it->second.text + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    model_text = buf.str();
  }
  for (const auto& [k, v] : inline_lines) model_text += k + " = " + v + "\n";
  if (auto it = model_keys.find("preset"); it != model_keys.end()) cfg.preset = it->second.text;
  for (const auto& [k, v] : model_keys)
    if (k != "preset" && k != "file") cfg.overrides[k] = v.text;

  if (!model_text.empty()) {
    if (!cfg.overrides.empty())
      throw ConfigError(std::string(origin) + ": preset overrides cannot be combined with a custom model");
    cfg.inline_model = model_text;
    try {
      cfg.model = parse_model(model_text);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ": custom model: " + e.what());
    }
    cfg.preset.clear();
  } else {
    try {
      cfg.model = build_preset(cfg.preset, cfg.overrides);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ": model: " + e.what());
    }
  }

  // Pump.
  if (!r.empty("pump.rate")) cfg.rate = r.non_negative("pump.rate", Dimension::rate);
  if (!r.empty("pump.power")) cfg.power = r.non_negative("pump.power", Dimension::power);
  cfg.pump_start = r.non_negative("pump.start", Dimension::time);
  if (!r.empty("pump.duration")) cfg.pump_duration = r.positive("pump.duration", Dimension::time);
  if (cfg.rate) {
    cfg.pump_rate = *cfg.rate;
  } else if (cfg.power) {
    try {
      cfg.pump_rate = pump_rate_from_power(cfg.model.optics, *cfg.power);
    } catch (const Error& e) {
      r.error("pump.power", std::string(e.what()) + " (set pump.rate instead)");
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  cfg.model.pump = PumpSchedule::pulse(cfg.pump_start,
                                       cfg.pump_duration ? cfg.pump_start + *cfg.pump_duration : inf,
                                       cfg.pump_rate);
  if (cfg.pump_start == 0.0 && !cfg.pump_duration) cfg.model.pump = PumpSchedule::constant(cfg.pump_rate);

  // Assembly and solver.
  cfg.assembly.phase_pruning = r.boolean("assembly.phase_pruning");
  cfg.assembly.frame =
      r.choice("assembly.frame", {"spin", "cavity"}) == "spin" ? RotatingFrame::spin : RotatingFrame::cavity;
  cfg.assembly.max_keys = static_cast<std::size_t>(r.integer("assembly.max_keys", 1));
  cfg.solver.method = r.with_context("solver.method", [](const std::string& v) { return parse_method(v); });
  cfg.solver.rtol = r.positive("solver.rtol", Dimension::dimensionless);
  cfg.solver.atol = r.positive("solver.atol", Dimension::dimensionless);
  cfg.solver.max_step = r.non_negative("solver.max_step", Dimension::time);
  cfg.solver.max_steps = static_cast<std::size_t>(r.integer("solver.max_steps", 1));
  cfg.solver.steady_tol = r.positive("solver.steady_tol", Dimension::dimensionless);
  cfg.solver.steady_window = static_cast<int>(r.integer("solver.steady_window", 1));
  cfg.solver.steady_max_time = r.positive("solver.steady_max_time", Dimension::time);
  cfg.solver.newton_refine = r.boolean("solver.newton");
  cfg.solver.newton_max_iterations = static_cast<int>(r.integer("solver.newton_max_iterations", 0));

  // Simulation and features.
  cfg.t_end = r.positive("simulate.t_end", Dimension::time);
  cfg.samples = static_cast<int>(r.integer("simulate.samples", 2));
  if (!r.empty("simulate.columns")) {
    cfg.columns = split_list(r.text("simulate.columns"), ',');
    std::vector<std::string> known = {"t_s", "photon_number", "j_norm", "m_norm", "t_mode_k"};
    for (int i = 1; i <= cfg.model.scheme.level_count; ++i) known.push_back("pop_" + std::to_string(i));
    for (const auto& c : cfg.columns)
      if (std::find(known.begin(), known.end(), c) == known.end())
        r.error("simulate.columns", "unknown column '" + c + "'");
  }
  cfg.rabi_window = r.non_negative("features.window", Dimension::dimensionless);

  // Spectrum.
  cfg.spectrum.method = r.choice("spectrum.method", {"eigenmode", "fft"}) == "fft" ? SpectrumMethod::fft
                                                                                 : SpectrumMethod::eigenmode;
  cfg.spectrum.samples = static_cast<int>(r.integer("spectrum.samples", 3));
  cfg.spectrum.span_widths = r.positive("spectrum.span", Dimension::dimensionless);
  cfg.spectrum.fft_points = static_cast<int>(r.integer("spectrum.fft_points", 64));

  // Sweeps.
  const bool by_power = r.choice("sweep.axis", {"rate", "power"}) == "power";
  const Dimension axis_dim = by_power ? Dimension::power : Dimension::rate;
  std::vector<double> grid;
  try {
    if (!r.empty("sweep.values")) {
      grid = r.list("sweep.values", axis_dim);
    } else {
      grid = log_grid(r.positive("sweep.min", axis_dim), r.positive("sweep.max", axis_dim),
                      static_cast<int>(r.integer("sweep.points", 1)));
    }
  } catch (const DomainError& e) {
    r.error("sweep.values", e.what());
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1])))
      r.error("sweep.values", "grid must be positive and strictly ascending");
  if (by_power) {
    cfg.power_grid = grid;
    for (double p : grid) {
      try {
        cfg.pump_grid.push_back(pump_rate_from_power(cfg.model.optics, p));
      } catch (const Error& e) {
        r.error("sweep.axis", e.what());
      }
    }
  } else {
    cfg.pump_grid = grid;
  }
  cfg.sweep_start = r.choice("sweep.start", {"fresh", "continuation"}) == "fresh" ? SweepStart::fresh
                                                                                 : SweepStart::continuation;
  cfg.sweep_spectrum = r.boolean("sweep.spectrum");
  cfg.threshold_significance = r.positive("sweep.significance", Dimension::dimensionless);
  try {
    if (!r.empty("detuning.values"))
      cfg.detunings = r.list("detuning.values", Dimension::angular_frequency);
    else
      cfg.detunings = linear_grid(r.quantity("detuning.min", Dimension::angular_frequency),
                                  r.quantity("detuning.max", Dimension::angular_frequency),
                                  static_cast<int>(r.integer("detuning.points", 2)));
  } catch (const DomainError& e) {
    r.error("detuning.values", e.what());
  }
  for (std::size_t i = 1; i < cfg.detunings.size(); ++i)
    if (!(cfg.detunings[i] > cfg.detunings[i - 1]))
      r.error("detuning.values", "grid must be strictly ascending");
  cfg.masing_factor = r.positive("detuning.masing_factor", Dimension::dimensionless);

  // Output.
  cfg.out_dir = r.text("output.dir");
  const std::string fmt = r.choice("output.format", {"csv", "json", "both"});
  cfg.format = fmt == "csv" ? OutputFormat::csv : fmt == "json" ? OutputFormat::json : OutputFormat::both;
  cfg.prefix = r.text("output.prefix");
  cfg.dump_system = r.boolean("output.dump_system");
  cfg.jobs = static_cast<unsigned>(r.integer("run.jobs", 0));

  const auto report = validate_model(cfg.model);
  if (!report.ok()) {
    std::string all;
    for (const auto& issue : report.issues) all += (all.empty() ? "" : "; ") + issue;
    throw ConfigError(std::string(origin) + ": invalid model: " + all);
  }

  // Canonical form: sorted resolved keys, custom model text in order.
  std::ostringstream canon;
  for (const auto& [k, v] : values)
    if (affects_results(k)) canon << k << " = " << v.text << "\n";
  if (cfg.inline_model) {
    canon << "[model]\n" << *cfg.inline_model;
  } else {
    canon << "model.preset = " << cfg.preset << "\n";
    for (const auto& [k, v] : cfg.overrides) canon << "model." << k << " = " << v << "\n";
  }
  cfg.canonical = canon.str();
  cfg.hash = fnv1a(cfg.canonical);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& sets) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), sets, path.string());
}

} // namespace spinmaser::cli
