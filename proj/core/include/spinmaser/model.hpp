#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spinmaser {

/// Energy levels of one emitter. Indices are 1-based throughout the library.
struct LevelScheme {
  int level_count = 0;
  std::vector<std::string> labels;
  int lower = 0;      ///< lower level of the cavity-coupled transition
  int upper = 0;      ///< upper level of the cavity-coupled transition
  int eliminated = 0; ///< population removed through completeness; 0 = pick default
  /// Emitter populations of the initial state; empty = everything in level 1.
  std::vector<double> initial_populations;

  /// The eliminated level actually used (default: highest level outside the
  /// resonant pair).
  int eliminated_level() const;
  bool operator==(const LevelScheme&) const = default;
};

enum class ChannelKind { transition, dephasing };

/// One Lindblad dissipator acting on every emitter.
///
/// transition: collapse operator |to><from| with rate `rate` (+ xi(t) when
/// pump_scaled). dephasing: collapse operator (|from><from| - |to><to|) with
/// Lindblad weight rate/2, so the from-to coherence decays at `rate`.
struct LindbladChannel {
  ChannelKind kind = ChannelKind::transition;
  int from = 0;
  int to = 0;
  double rate = 0.0;
  bool pump_scaled = false;
  bool operator==(const LindbladChannel&) const = default;
};

struct CavityMode {
  double frequency = 0.0;   ///< omega_m, rad/s
  double damping = 0.0;     ///< kappa, rad/s
  double temperature = 0.0; ///< bath temperature, K

  double thermal_occupation() const;
  bool operator==(const CavityMode&) const = default;
};

struct CouplingSpec {
  double g = 0.0;              ///< single-emitter coupling, rad/s
  double emitter_count = 1.0;  ///< N
  double spin_frequency = 0.0; ///< omega_s of the resonant transition, rad/s
  bool operator==(const CouplingSpec&) const = default;
};

struct PumpOptics {
  double wavelength = 0.0;    ///< m
  double cross_section = 0.0; ///< m^2
  double beam_area = 0.0;     ///< m^2
  std::optional<double> absorption; ///< 1/m
  std::optional<double> thickness;  ///< m
  std::optional<double> n1;
  std::optional<double> n2;

  bool has_full_form() const { return absorption && thickness; }
  double fresnel_reflection() const;
  bool operator==(const PumpOptics&) const = default;
};

struct PumpSegment {
  double t_start = 0.0; ///< s
  double t_end = 0.0;   ///< s
  double rate = 0.0;    ///< xi, 1/s
  bool operator==(const PumpSegment&) const = default;
};

/// Piecewise-constant optical pumping rate; zero outside all segments.
struct PumpSchedule {
  std::vector<PumpSegment> segments;

  static PumpSchedule constant(double rate);
  static PumpSchedule pulse(double t_start, double t_end, double rate);

  double rate_at(double t) const;
  /// Segment boundaries strictly inside (t0, t1), sorted.
  std::vector<double> breakpoints(double t0, double t1) const;
  bool operator==(const PumpSchedule&) const = default;
};

struct ModelSpec {
  std::string name;
  LevelScheme scheme;
  std::vector<LindbladChannel> channels;
  CavityMode cavity;
  CouplingSpec coupling;
  PumpSchedule pump;
  PumpOptics optics;

  /// Delta = omega_m - omega_s.
  double detuning() const { return cavity.frequency - coupling.spin_frequency; }
  bool operator==(const ModelSpec&) const = default;
};

/// n_th = 1/(exp(hbar omega / kB T) - 1).
double thermal_occupation(double omega, double temperature);

/// Optical pumping rate for a given laser power. Uses the full absorption
/// and Fresnel form when absorption and thickness are known, otherwise
/// lambda sigma P / (h c A).
double pump_rate_from_power(const PumpOptics& optics, double power);

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
  bool contains(std::string_view fragment) const;
};

ValidationReport validate_model(const ModelSpec& spec);

/// Override values are text with optional units ("4e13", "260 kHz").
using ParameterMap = std::map<std::string, std::string>;

/// Named preset parameter with its value in internal units and provenance.
struct PresetParameter {
  std::string name;
  double value = 0.0;
  std::string unit;
  std::string note;
};

ModelSpec build_nv_preset(const ParameterMap& overrides = {});
/// `variant = breeze2017` selects the alternative spin decay/dephasing set.
ModelSpec build_pentacene_preset(const ParameterMap& overrides = {});
ModelSpec build_preset(std::string_view name, const ParameterMap& overrides = {});

std::vector<std::string> preset_names();
/// Resolved parameter table of a preset (after variant selection).
std::vector<PresetParameter> preset_parameters(std::string_view name,
                                               const ParameterMap& overrides = {});
PumpOptics preset_optics(std::string_view name);
/// Raw text of the bundled preset data file.
std::string_view preset_data_text();

/// Text form of a model, readable by parse_model. Round-trips exactly.
std::string serialize_model(const ModelSpec& spec);
ModelSpec parse_model(std::string_view text);

/// FNV-1a of the serialized model.
std::uint64_t model_hash(const ModelSpec& spec);
std::uint64_t fnv1a(std::string_view text);
std::string hex_hash(std::uint64_t h);

} // namespace spinmaser
