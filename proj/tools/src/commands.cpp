#include "commands.hpp"

#include "output.hpp"

#include <spinmaser/analysis.hpp>
#include <spinmaser/error.hpp>
#include <spinmaser/observables.hpp>
#include <spinmaser/units.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace spinmaser::cli {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

struct CommandInfo {
  Command command;
  std::string_view name;
  std::string_view stem; ///< output file stem
};

constexpr CommandInfo kCommands[] = {
    {Command::simulate, "simulate", "trajectory"},
    {Command::steady, "steady", "steady"},
    {Command::spectrum, "spectrum", "spectrum"},
    {Command::sweep_pump, "sweep-pump", "sweep_pump"},
    {Command::sweep_detuning, "sweep-detuning", "sweep_detuning"},
    {Command::features, "features", "features"},
};

const CommandInfo& info(Command c) {
  for (const auto& i : kCommands)
    if (i.command == c) return i;
  throw InternalError("unknown command");
}

// Collects the artifacts of one command.
class Artifacts {
public:
  Artifacts(const RunConfig& cfg, Command c, std::uint64_t model_hash)
      : cfg_(cfg), command_(c), model_hash_(model_hash) {}

  std::string provenance() const {
    return "spinmaser " + std::string(command_name(command_)) + " config_hash=" + hex_hash(cfg_.hash) +
           " model_hash=" + hex_hash(model_hash_);
  }

  Json header() const {
    Json j;
    j["command"] = command_name(command_);
    j["config_hash"] = hex_hash(cfg_.hash);
    j["model"] = cfg_.model.name;
    j["model_hash"] = hex_hash(model_hash_);
    return j;
  }

  void csv(const CsvTable& table) {
    if (cfg_.format == OutputFormat::json) return;
    write(std::string(info(command_).stem) + ".csv", table.render(provenance()));
  }
  void json(const Json& j) {
    if (cfg_.format == OutputFormat::csv) return;
    write(std::string(info(command_).stem) + ".json", j.dump(2) + "\n");
  }
  void text(const std::string& name, const std::string& content) { write(name, content); }

  CommandResult finish(int code, std::string summary) {
    CommandResult r;
    r.exit_code = code;
    r.files = files_;
    r.summary = std::move(summary);
    if (!files_.empty()) {
      r.summary += " [";
      for (std::size_t i = 0; i < files_.size(); ++i)
        r.summary += (i ? ", " : "") + files_[i].string();
      r.summary += "]";
    }
    return r;
  }

private:
  void write(const std::string& name, const std::string& content) {
    const auto path = cfg_.out_dir / (cfg_.prefix + name);
    write_atomic(path, content);
    files_.push_back(path);
  }

  const RunConfig& cfg_;
  Command command_;
  std::uint64_t model_hash_;
  std::vector<std::filesystem::path> files_;
};

Json pump_json(const RunConfig& cfg) {
  Json j;
  j["rate_per_s"] = cfg.pump_rate;
  j["power_w"] = cfg.rate ? Json(nullptr) : json_number(cfg.power.value_or(nan));
  j["start_s"] = cfg.pump_start;
  j["duration_s"] = cfg.pump_duration ? Json(*cfg.pump_duration) : Json(nullptr);
  return j;
}

Json populations_json(const std::vector<double>& p) {
  Json j = Json::array();
  for (double v : p) j.push_back(json_number(v));
  return j;
}

double safe_mode_temperature(double n, double omega) {
  return n > 0.0 ? mode_temperature(n, omega) : nan;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Compiled {
  CompiledMomentSystem sys;
};

CompiledMomentSystem compile(const RunConfig& cfg, Artifacts& out) {
  MomentSystem system = complete_system(cfg.model, cfg.assembly);
  if (cfg.dump_system) out.text("system.txt", system.dump());
  return compile_rhs(std::move(system));
}

std::vector<std::string> trajectory_header(int levels) {
  std::vector<std::string> h = {"t_s", "photon_number"};
  for (int i = 1; i <= levels; ++i) h.push_back("pop_" + std::to_string(i));
  h.insert(h.end(), {"j_norm", "m_norm", "t_mode_k"});
  return h;
}

Trajectory simulate_trajectory(const RunConfig& cfg, const CompiledMomentSystem& sys) {
  std::vector<double> times(static_cast<std::size_t>(cfg.samples));
  for (int i = 0; i < cfg.samples; ++i)
    times[static_cast<std::size_t>(i)] = cfg.t_end * i / (cfg.samples - 1);
  times.back() = cfg.t_end;
  return integrate(sys, thermal_initial_state(sys), cfg.t_end, cfg.solver, times);
}

CommandResult run_simulate(const RunConfig& cfg) {
  Artifacts out(cfg, Command::simulate, model_hash(cfg.model));
  const auto sys = compile(cfg, out);
  const Trajectory tr = simulate_trajectory(cfg, sys);
  const int levels = cfg.model.scheme.level_count;
  CsvTable table(trajectory_header(levels));
  double n_max = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto& y = tr.states[k];
    const double n = photon_number(sys, y);
    n_max = std::max(n_max, n);
    std::vector<double> row = {tr.times[k], n};
    for (double p : populations_of(sys, y)) row.push_back(p);
    const auto d = dicke_coordinates(sys, y);
    row.insert(row.end(), {d.j_norm, d.m_norm, safe_mode_temperature(n, cfg.model.cavity.frequency)});
    table.add_row(row);
  }
  out.csv(cfg.columns.empty() ? table : table.select(cfg.columns));

  const auto& y_end = tr.states.back();
  const double n_end = photon_number(sys, y_end);
  Json j = out.header();
  j["pump"] = pump_json(cfg);
  j["samples"] = tr.size();
  j["t_end_s"] = cfg.t_end;
  j["moment_count"] = sys.key_count();
  j["state_dimension"] = sys.dimension();
  j["thermal_photon_number"] = cfg.model.cavity.thermal_occupation();
  j["max_photon_number"] = n_max;
  Json fin;
  fin["photon_number"] = n_end;
  fin["populations"] = populations_json(populations_of(sys, y_end));
  const auto d = dicke_coordinates(sys, y_end);
  fin["j_norm"] = json_number(d.j_norm);
  fin["m_norm"] = json_number(d.m_norm);
  fin["t_mode_k"] = json_number(safe_mode_temperature(n_end, cfg.model.cavity.frequency));
  j["final"] = fin;
  j["solver"] = json_stats(tr.stats);
  out.json(j);
  return out.finish(exit_ok, "simulate: " + std::to_string(tr.size()) + " samples to t = " +
                                 short_number(cfg.t_end) + " s, final photon number " + short_number(n_end));
}

Json steady_json(const CompiledMomentSystem& sys, const SteadyStateResult& r, const ModelSpec& model) {
  Json j;
  j["status"] = steady_status_name(r.status);
  j["converged"] = r.ok();
  const double n = photon_number(sys, r.state.y);
  j["photon_number"] = json_number(n);
  j["populations"] = populations_json(populations_of(sys, r.state.y));
  const auto d = dicke_coordinates(sys, r.state.y);
  j["j_norm"] = json_number(d.j_norm);
  j["m_norm"] = json_number(d.m_norm);
  j["t_mode_k"] = json_number(safe_mode_temperature(n, model.cavity.frequency));
  j["residual"] = json_number(r.residual);
  j["roundoff_floor"] = json_number(r.roundoff_floor);
  j["newton_iterations"] = r.newton_iterations;
  j["relaxation_time_s"] = json_number(r.state.time);
  j["warnings"] = r.warnings;
  j["solver"] = json_stats(r.stats);
  return j;
}

CommandResult run_steady(const RunConfig& cfg) {
  Artifacts out(cfg, Command::steady, model_hash(cfg.model));
  const auto sys = compile(cfg, out);
  const auto r = find_steady_state(sys, thermal_initial_state(sys), cfg.pump_rate, cfg.solver);
  const int levels = cfg.model.scheme.level_count;
  std::vector<std::string> header = {"pump_rate_per_s", "converged", "photon_number"};
  for (int i = 1; i <= levels; ++i) header.push_back("pop_" + std::to_string(i));
  header.insert(header.end(), {"j_norm", "m_norm", "t_mode_k", "residual"});
  CsvTable table(header);
  const double n = photon_number(sys, r.state.y);
  std::vector<double> row = {cfg.pump_rate, r.ok() ? 1.0 : 0.0, n};
  for (double p : populations_of(sys, r.state.y)) row.push_back(p);
  const auto d = dicke_coordinates(sys, r.state.y);
  row.insert(row.end(), {d.j_norm, d.m_norm, safe_mode_temperature(n, cfg.model.cavity.frequency), r.residual});
  table.add_row(row);
  out.csv(table);
  Json j = out.header();
  j["pump"] = pump_json(cfg);
  j["steady"] = steady_json(sys, r, cfg.model);
  out.json(j);
  if (!r.ok())
    return out.finish(exit_convergence, "steady: no fixed point found (residual " + short_number(r.residual) + ")");
  return out.finish(exit_ok, "steady: " + std::string(steady_status_name(r.status)) + ", photon number " +
                                 short_number(n));
}

CommandResult run_spectrum(const RunConfig& cfg) {
  Artifacts out(cfg, Command::spectrum, model_hash(cfg.model));
  const auto sys = compile(cfg, out);
  const auto steady = find_steady_state(sys, thermal_initial_state(sys), cfg.pump_rate, cfg.solver);
  if (!steady.ok())
    throw ConvergenceError("no steady state for the spectrum (residual " + short_number(steady.residual) + ")");
  const RegressionSystem rs = build_regression_system(sys, steady.state, cfg.pump_rate);
  const SpectrumResult s = spectrum_and_linewidth(rs, cfg.spectrum);

  CsvTable table({"offset_hz", "absolute_hz", "s_value"});
  for (std::size_t i = 0; i < s.offsets.size(); ++i)
    table.add_row(std::vector<double>{s.offsets[i] / two_pi, (rs.carrier + s.offsets[i]) / two_pi, s.values[i]});
  out.csv(table);

  Json j = out.header();
  j["pump"] = pump_json(cfg);
  j["fwhm_hz"] = s.fwhm_hz;
  j["peak_hz"] = s.peak_frequency / two_pi;
  j["pulling_factor"] = nullptr;
  j["peak_offset_hz"] = s.peak_offset / two_pi;
  j["carrier_hz"] = rs.carrier / two_pi;
  j["method"] = spectrum_method_name(s.method);
  j["photon_number"] = photon_number(sys, steady.state.y);
  Json modes = Json::array();
  for (const auto& m : s.modes) {
    Json mj;
    mj["eigenvalue_re"] = m.eigenvalue.real();
    mj["eigenvalue_im"] = m.eigenvalue.imag();
    mj["residue_re"] = m.residue.real();
    mj["residue_im"] = m.residue.imag();
    modes.push_back(mj);
  }
  j["modes"] = modes;
  j["dominant_mode"] = s.dominant;
  j["warnings"] = s.warnings;
  j["steady"] = steady_json(sys, steady, cfg.model);
  out.json(j);
  return out.finish(exit_ok, "spectrum: fwhm " + short_number(s.fwhm_hz) + " Hz, peak offset " +
                                 short_number(s.peak_offset / two_pi) + " Hz");
}

SweepOptions sweep_options(const RunConfig& cfg, bool spectrum) {
  SweepOptions o;
  o.assembly = cfg.assembly;
  o.solver = cfg.solver;
  o.spectrum = cfg.spectrum;
  o.compute_spectrum = spectrum;
  o.start = cfg.sweep_start;
  o.jobs = cfg.jobs;
  return o;
}

Json threshold_json(const std::optional<Threshold>& t) {
  if (!t) return nullptr;
  Json j;
  j["rate_per_s"] = t->rate;
  j["lower_per_s"] = t->lower;
  j["upper_per_s"] = t->upper;
  j["slope"] = t->slope;
  return j;
}

int sweep_exit(const SweepResult& s) {
  if (s.failures() == 0) return exit_ok;
  return s.failures() == s.points.size() ? exit_convergence : exit_partial;
}

Json failures_json(const SweepResult& s) {
  Json j = Json::array();
  for (std::size_t i = 0; i < s.points.size(); ++i)
    if (!s.points[i].converged || !s.points[i].error.empty()) {
      Json f;
      f["index"] = i;
      f["axis"] = s.points[i].axis;
      f["converged"] = s.points[i].converged;
      f["error"] = s.points[i].error;
      j.push_back(f);
    }
  return j;
}

std::vector<double> population_cells(const SweepPoint& p, int levels) {
  std::vector<double> out(static_cast<std::size_t>(levels), nan);
  for (std::size_t i = 0; i < p.populations.size() && i < out.size(); ++i) out[i] = p.populations[i];
  return out;
}

CommandResult run_sweep_pump(const RunConfig& cfg) {
  Artifacts out(cfg, Command::sweep_pump, model_hash(cfg.model));
  const SweepResult s = pump_sweep(cfg.model, cfg.pump_grid, sweep_options(cfg, cfg.sweep_spectrum), cfg.power_grid);
  const int levels = cfg.model.scheme.level_count;
  std::vector<std::string> header = {"pump_rate_per_s", "power_w", "converged", "photon_number", "linewidth_hz",
                                     "peak_offset_hz"};
  for (int i = 1; i <= levels; ++i) header.push_back("pop_" + std::to_string(i));
  header.insert(header.end(), {"j_norm", "m_norm", "t_mode_k", "residual"});
  CsvTable table(header);
  SolverStats total;
  for (const auto& p : s.points) {
    std::vector<double> row = {p.pump_rate,    p.power_w,         p.converged ? 1.0 : 0.0,
                               p.photon_number, p.linewidth_hz, p.peak_offset / two_pi};
    for (double v : population_cells(p, levels)) row.push_back(v);
    row.insert(row.end(), {p.j_norm, p.m_norm,
                           p.converged ? safe_mode_temperature(p.photon_number, cfg.model.cavity.frequency) : nan,
                           p.residual});
    table.add_row(row);
    total += p.stats;
  }
  out.csv(table);
  const ThresholdResult th = detect_thresholds(s, cfg.threshold_significance);
  Json j = out.header();
  j["points"] = s.points.size();
  j["failures"] = s.failures();
  j["start"] = cfg.sweep_start == SweepStart::fresh ? "fresh" : "continuation";
  Json tj;
  tj["pt1"] = threshold_json(th.pt1);
  tj["pt2"] = threshold_json(th.pt2);
  tj["diagnostic"] = th.diagnostic;
  j["thresholds"] = tj;
  j["failed_points"] = failures_json(s);
  j["solver"] = json_stats(total);
  out.json(j);
  std::string summary = "sweep-pump: " + std::to_string(s.points.size()) + " points, " +
                        std::to_string(s.failures()) + " failed";
  if (th.pt1) summary += ", PT1 ~ " + short_number(th.pt1->rate) + " /s";
  if (th.pt2) summary += ", PT2 ~ " + short_number(th.pt2->rate) + " /s";
  return out.finish(sweep_exit(s), summary);
}

CommandResult run_sweep_detuning(const RunConfig& cfg) {
  Artifacts out(cfg, Command::sweep_detuning, model_hash(cfg.model));
  const SweepResult s = detuning_sweep(cfg.model, cfg.detunings, cfg.pump_rate, sweep_options(cfg, true));
  const int levels = cfg.model.scheme.level_count;
  const double n_floor = cfg.masing_factor * std::max(cfg.model.cavity.thermal_occupation(), 1.0);

  PullingResult pulling;
  std::vector<std::string> header = {"detuning_hz", "converged", "masing", "photon_number", "linewidth_hz",
                                     "maser_offset_hz", "shift_hz"};
  for (int i = 1; i <= levels; ++i) header.push_back("pop_" + std::to_string(i));
  header.insert(header.end(), {"j_norm", "m_norm"});
  CsvTable table(header);
  SolverStats total;
  for (const auto& p : s.points) {
    // maser frequency relative to the fixed cavity
    const double carrier_minus_cavity = cfg.assembly.frame == RotatingFrame::spin ? -p.axis : 0.0;
    const double shift = p.spectrum_ok ? std::abs(p.peak_offset + carrier_minus_cavity) : nan;
    const bool masing = p.converged && p.spectrum_ok && p.photon_number > n_floor;
    pulling.detunings.push_back(std::abs(p.axis));
    pulling.shifts.push_back(std::isfinite(shift) ? shift : 0.0);
    pulling.photon_numbers.push_back(p.photon_number);
    pulling.linewidths_hz.push_back(p.linewidth_hz);
    pulling.masing.push_back(masing);
    std::vector<double> row = {p.axis / two_pi,   p.converged ? 1.0 : 0.0, masing ? 1.0 : 0.0,
                               p.photon_number,   p.linewidth_hz,          p.peak_offset / two_pi,
                               shift / two_pi};
    for (double v : population_cells(p, levels)) row.push_back(v);
    row.insert(row.end(), {p.j_norm, p.m_norm});
    table.add_row(row);
    total += p.stats;
  }
  out.csv(table);

  Json j = out.header();
  j["pump"] = pump_json(cfg);
  j["points"] = s.points.size();
  j["failures"] = s.failures();
  Json pj;
  std::string pulling_text;
  try {
    fit_pulling(pulling);
    pj["factor"] = json_number(pulling.factor);
    pj["intercept_hz"] = json_number(pulling.intercept / two_pi);
    pj["r_squared"] = json_number(pulling.r_squared);
    pj["r_squared_inner"] = json_number(pulling.r_squared_inner);
    double widest = 0.0;
    for (std::size_t i = 0; i < pulling.masing.size(); ++i)
      if (pulling.masing[i]) widest = std::max(widest, pulling.detunings[i]);
    pj["max_masing_detuning_hz"] = widest / two_pi;
    pulling_text = ", pulling factor " + short_number(pulling.factor);
  } catch (const DomainError& e) {
    pj["factor"] = nullptr;
    pj["diagnostic"] = e.what();
    pulling_text = ", masing lost on the whole grid";
  }
  j["pulling_factor"] = pj["factor"];
  j["pulling"] = pj;
  j["failed_points"] = failures_json(s);
  j["solver"] = json_stats(total);
  out.json(j);
  return out.finish(sweep_exit(s), "sweep-detuning: " + std::to_string(s.points.size()) + " points, " +
                                       std::to_string(s.failures()) + " failed" + pulling_text);
}

CommandResult run_features(const RunConfig& cfg) {
  Artifacts out(cfg, Command::features, model_hash(cfg.model));
  const auto sys = compile(cfg, out);
  const Trajectory tr = simulate_trajectory(cfg, sys);
  const double pump_end = cfg.pump_duration ? cfg.pump_start + *cfg.pump_duration : cfg.t_end;

  std::vector<double> t, n;
  double post_min = std::numeric_limits<double>::infinity(), post_time = nan;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double v = photon_number(sys, tr.states[k]);
    if (tr.times[k] >= cfg.pump_start && tr.times[k] <= pump_end) {
      t.push_back(tr.times[k]);
      n.push_back(v);
    } else if (tr.times[k] > pump_end && v < post_min) {
      post_min = v;
      post_time = tr.times[k];
    }
  }
  RabiOptions ro;
  ro.window_envelopes = cfg.rabi_window;
  const RabiFeatures f = extract_rabi_features(t, n, ro);

  CsvTable table({"t_s", "photon_number"});
  for (const auto& [pt, pn] : f.peaks) table.add_row(std::vector<double>{pt, pn});
  out.csv(table);

  Json j = out.header();
  j["pump"] = pump_json(cfg);
  j["found"] = f.found;
  j["frequency_hz"] = f.found ? Json(f.frequency_hz) : Json(nullptr);
  j["duration_s"] = f.found ? Json(f.duration_s) : Json(nullptr);
  j["delay_s"] = f.found ? Json(f.delay_s - cfg.pump_start) : Json(nullptr);
  j["peak_count"] = f.peaks.size();
  j["diagnostic"] = f.diagnostic;
  const double nth = cfg.model.cavity.thermal_occupation();
  if (std::isfinite(post_min)) {
    Json post;
    post["min_photon_number"] = post_min;
    post["time_s"] = post_time;
    post["t_mode_k"] = json_number(safe_mode_temperature(post_min, cfg.model.cavity.frequency));
    post["thermal_photon_number"] = nth;
    post["below_thermal"] = post_min < nth;
    j["post_pulse"] = post;
  } else {
    j["post_pulse"] = nullptr;
  }
  j["solver"] = json_stats(tr.stats);
  out.json(j);
  std::string summary = f.found ? "features: Rabi " + short_number(f.frequency_hz) + " Hz, envelope " +
                                      short_number(f.duration_s) + " s, delay " +
                                      short_number(f.delay_s - cfg.pump_start) + " s"
                                : "features: none (" + f.diagnostic + ")";
  return out.finish(exit_ok, summary);
}

} // namespace

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& i : kCommands)
    if (i.name == name) return i.command;
  return std::nullopt;
}

std::string_view command_name(Command c) { return info(c).name; }

const std::vector<std::string_view>& command_names() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> v;
    for (const auto& i : kCommands) v.push_back(i.name);
    return v;
  }();
  return names;
}

CommandResult run_command(const RunConfig& config, Command command) {
  switch (command) {
  case Command::simulate: return run_simulate(config);
  case Command::steady: return run_steady(config);
  case Command::spectrum: return run_spectrum(config);
  case Command::sweep_pump: return run_sweep_pump(config);
  case Command::sweep_detuning: return run_sweep_detuning(config);
  case Command::features: return run_features(config);
  }
  throw InternalError("unhandled command");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
  if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const DomainError*>(&e))
    return exit_convergence;
  return exit_failure;
}

std::string error_json(const std::exception& e) {
  std::string kind = "internal";
  if (dynamic_cast<const ConfigError*>(&e)) kind = "config";
  else if (dynamic_cast<const ConvergenceError*>(&e)) kind = "convergence";
  else if (dynamic_cast<const DomainError*>(&e)) kind = "domain";
  else if (dynamic_cast<const IoError*>(&e)) kind = "io";
  Json j;
  j["error"]["kind"] = kind;
  j["error"]["message"] = e.what();
  j["error"]["exit_code"] = exit_code_for(e);
  return j.dump();
}

} // namespace spinmaser::cli
