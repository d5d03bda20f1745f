#include "spinmaser/model.hpp"

#include "spinmaser/error.hpp"
#include "spinmaser/keyvalue.hpp"
#include "spinmaser/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace spinmaser {

namespace detail {
extern const std::string_view kPresetData;
} // namespace detail

int LevelScheme::eliminated_level() const {
  if (eliminated != 0)
    return eliminated;
  for (int i = level_count; i >= 1; --i)
    if (i != lower && i != upper)
      return i;
  return level_count;
}

double thermal_occupation(double omega, double temperature) {
  if (temperature <= 0.0)
    return 0.0;
  const double x = constants::hbar * omega / (constants::boltzmann * temperature);
  return 1.0 / std::expm1(x);
}

double CavityMode::thermal_occupation() const {
  return spinmaser::thermal_occupation(frequency, temperature);
}

double PumpOptics::fresnel_reflection() const {
  if (!n1 || !n2)
    return 0.0;
  const double r = (*n1 - *n2) / (*n1 + *n2);
  return r * r;
}

PumpSchedule PumpSchedule::constant(double rate) {
  PumpSchedule s;
  s.segments.push_back({-std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity(), rate});
  return s;
}

PumpSchedule PumpSchedule::pulse(double t_start, double t_end, double rate) {
  PumpSchedule s;
  s.segments.push_back({t_start, t_end, rate});
  return s;
}

double PumpSchedule::rate_at(double t) const {
  for (const auto& seg : segments)
    if (t >= seg.t_start && t < seg.t_end)
      return seg.rate;
  return 0.0;
}

std::vector<double> PumpSchedule::breakpoints(double t0, double t1) const {
  std::vector<double> out;
  for (const auto& seg : segments) {
    for (double b : {seg.t_start, seg.t_end})
      if (std::isfinite(b) && b > t0 && b < t1)
        out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double pump_rate_from_power(const PumpOptics& optics, double power) {
  if (!(power >= 0.0))
    throw DomainError("pump power must be non-negative, got " + format_double(power) + " W");
  const double photon_flux_per_watt =
      optics.wavelength / (constants::planck * constants::speed_of_light * optics.beam_area);
  double rate = photon_flux_per_watt * optics.cross_section * power;
  if (optics.has_full_form()) {
    const double la = *optics.thickness * *optics.absorption;
    const double absorbed_fraction = la > 0.0 ? -std::expm1(-la) / la : 1.0;
    rate *= absorbed_fraction * (1.0 - optics.fresnel_reflection());
  }
  return rate;
}

bool ValidationReport::contains(std::string_view fragment) const {
  return std::any_of(issues.begin(), issues.end(),
                     [&](const std::string& s) { return s.find(fragment) != std::string::npos; });
}

ValidationReport validate_model(const ModelSpec& spec) {
  ValidationReport report;
  auto issue = [&](std::string s) { report.issues.push_back(std::move(s)); };
  const auto& sc = spec.scheme;
  auto valid_level = [&](int i) { return i >= 1 && i <= sc.level_count; };

  if (sc.level_count < 2)
    issue("level scheme needs at least 2 levels");
  if (!sc.labels.empty() && static_cast<int>(sc.labels.size()) != sc.level_count)
    issue("label count does not match level count");
  if (!valid_level(sc.lower) || !valid_level(sc.upper))
    issue("invalid level index in resonant transition");
  else if (sc.lower == sc.upper)
    issue("degenerate transition: resonant transition (" + std::to_string(sc.lower) + "," +
          std::to_string(sc.upper) + ")");
  if (sc.eliminated != 0 && !valid_level(sc.eliminated))
    issue("invalid eliminated level " + std::to_string(sc.eliminated));
  if (!sc.initial_populations.empty()) {
    double total = 0.0;
    bool negative = false;
    for (double p : sc.initial_populations) {
      total += p;
      negative = negative || !(p >= 0.0);
    }
    if (static_cast<int>(sc.initial_populations.size()) != sc.level_count)
      issue("initial population count does not match level count");
    else if (negative || std::abs(total - 1.0) > 1e-12)
      issue("initial populations must be non-negative and sum to 1");
  }

  for (std::size_t c = 0; c < spec.channels.size(); ++c) {
    const auto& ch = spec.channels[c];
    const std::string tag = "channel " + std::to_string(c + 1);
    if (!std::isfinite(ch.rate))
      issue(tag + ": non-finite rate");
    else if (ch.rate < 0.0)
      issue(tag + ": negative rate " + format_double(ch.rate));
    if (!valid_level(ch.from) || !valid_level(ch.to))
      issue(tag + ": invalid level index");
    else if (ch.from == ch.to)
      issue(tag + ": degenerate transition (" + std::to_string(ch.from) + "," +
            std::to_string(ch.to) + ")");
    if (ch.kind == ChannelKind::dephasing && ch.pump_scaled)
      issue(tag + ": dephasing channel cannot follow the pump");
  }

  if (!(spec.cavity.damping > 0.0))
    issue("cavity damping kappa must be positive");
  if (!(spec.cavity.frequency > 0.0) || !std::isfinite(spec.cavity.frequency))
    issue("cavity frequency must be positive");
  if (!(spec.cavity.temperature >= 0.0))
    issue("bath temperature must be non-negative");
  if (!(spec.coupling.emitter_count >= 1.0) || !std::isfinite(spec.coupling.emitter_count))
    issue("emitter count N must be >= 1");
  if (!std::isfinite(spec.coupling.g))
    issue("coupling g must be finite");
  if (!std::isfinite(spec.detuning()))
    issue("detuning is not finite");

  const auto& segs = spec.pump.segments;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (!(segs[i].rate >= 0.0))
      issue("pump segment " + std::to_string(i + 1) + ": negative rate");
    if (!(segs[i].t_start < segs[i].t_end))
      issue("pump segment " + std::to_string(i + 1) + ": empty or reversed interval");
    if (i > 0 && segs[i].t_start < segs[i - 1].t_end)
      issue("pump segment " + std::to_string(i + 1) + ": overlaps or is out of order");
  }

  const auto& o = spec.optics;
  if (o.wavelength != 0.0 || o.cross_section != 0.0 || o.beam_area != 0.0) {
    if (!(o.wavelength > 0.0 && o.cross_section > 0.0 && o.beam_area > 0.0))
      issue("pump optics: wavelength, cross section and beam area must be positive");
    for (const auto& opt : {o.absorption, o.thickness, o.n1, o.n2})
      if (opt && !(*opt > 0.0))
        issue("pump optics: optional parameters must be positive");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

struct ParamDef {
  std::string_view name;
  Dimension dimension;
  bool optional = false; // reverse spin-lattice rates default to the forward rate
};

constexpr ParamDef kCommonDefs[] = {
    {"N", Dimension::dimensionless},
    {"g", Dimension::angular_frequency},
    {"kappa", Dimension::angular_frequency},
    {"T", Dimension::temperature},
    {"omega_m", Dimension::angular_frequency},
    {"omega_s", Dimension::angular_frequency},
    {"wavelength", Dimension::length},
    {"cross_section", Dimension::area},
    {"absorption", Dimension::inverse_length, true},
    {"beam_area", Dimension::area},
    {"thickness", Dimension::length, true},
    {"n1", Dimension::dimensionless, true},
    {"n2", Dimension::dimensionless, true},
};

constexpr ParamDef kNvDefs[] = {
    {"k_sp", Dimension::rate},  {"k47", Dimension::rate},
    {"k57", Dimension::rate},   {"k67", Dimension::rate},
    {"k71", Dimension::rate},   {"k72", Dimension::rate},
    {"k73", Dimension::rate},   {"k12", Dimension::rate},
    {"k32", Dimension::rate},   {"k21", Dimension::rate, true},
    {"k23", Dimension::rate, true},
    {"chi12", Dimension::angular_frequency},
    {"chi32", Dimension::angular_frequency},
};

constexpr ParamDef kPentaceneDefs[] = {
    {"k_sp", Dimension::rate},  {"k23", Dimension::rate},
    {"k24", Dimension::rate},   {"k25", Dimension::rate},
    {"k31", Dimension::rate},   {"k41", Dimension::rate},
    {"k51", Dimension::rate},   {"k34", Dimension::rate},
    {"k35", Dimension::rate},   {"k45", Dimension::rate},
    {"k43", Dimension::rate, true},
    {"k53", Dimension::rate, true},
    {"k54", Dimension::rate, true},
    {"chi34", Dimension::angular_frequency},
    {"chi35", Dimension::angular_frequency},
    {"chi45", Dimension::angular_frequency},
};

std::vector<ParamDef> defs_for(std::string_view preset) {
  std::vector<ParamDef> defs(std::begin(kCommonDefs), std::end(kCommonDefs));
  if (preset == "nv")
    defs.insert(defs.end(), std::begin(kNvDefs), std::end(kNvDefs));
  else if (preset == "pentacene")
    defs.insert(defs.end(), std::begin(kPentaceneDefs), std::end(kPentaceneDefs));
  else
    throw ConfigError("unknown preset '" + std::string(preset) + "' (known: nv, pentacene)");
  return defs;
}

const KeyValueDocument& preset_document() {
  static const KeyValueDocument doc = KeyValueDocument::parse(detail::kPresetData);
  return doc;
}

class ParameterTable {
public:
  ParameterTable(std::string_view preset, const ParameterMap& overrides) : defs_(defs_for(preset)) {
    std::string variant;
    if (auto it = overrides.find("variant"); it != overrides.end())
      variant = it->second;
    const auto& doc = preset_document();
    load(doc.subsection(preset), preset);
    if (!variant.empty() && variant != "default") {
      const std::string section = std::string(preset) + "." + variant;
      const auto& sections = doc.sections();
      if (std::find(sections.begin(), sections.end(), section) == sections.end())
        throw ConfigError("unknown variant '" + variant + "' for preset '" + std::string(preset) +
                          "'");
      load(doc.subsection(section), preset);
    }
    for (const auto& [key, text] : overrides) {
      if (key == "variant")
        continue;
      const auto* def = lookup(key);
      if (!def)
        throw ConfigError("unknown parameter '" + key + "' for preset '" + std::string(preset) +
                          "'");
      set(*def, parse_quantity(text, def->dimension), "override");
    }
    for (const auto& def : defs_) {
      if (!def.optional && !values_.contains(std::string(def.name)))
        throw ConfigError("preset '" + std::string(preset) + "' lacks parameter '" +
                          std::string(def.name) + "'");
    }
  }

  double get(std::string_view name) const {
    auto it = values_.find(std::string(name));
    if (it == values_.end())
      throw InternalError("missing preset parameter " + std::string(name));
    return it->second.value;
  }
  double get_or(std::string_view name, double fallback) const {
    auto it = values_.find(std::string(name));
    return it == values_.end() ? fallback : it->second.value;
  }
  std::optional<double> maybe(std::string_view name) const {
    auto it = values_.find(std::string(name));
    if (it == values_.end())
      return std::nullopt;
    return it->second.value;
  }

  std::vector<PresetParameter> listing() const {
    std::vector<PresetParameter> out;
    for (const auto& def : defs_) {
      auto it = values_.find(std::string(def.name));
      if (it != values_.end())
        out.push_back(it->second);
    }
    return out;
  }

private:
  const ParamDef* lookup(std::string_view name) const {
    for (const auto& d : defs_)
      if (d.name == name)
        return &d;
    return nullptr;
  }

  void set(const ParamDef& def, double value, std::string note) {
    PresetParameter p;
    p.name = std::string(def.name);
    p.value = value;
    p.unit = std::string(internal_unit(def.dimension));
    p.note = std::move(note);
    values_[p.name] = std::move(p);
  }

  void load(const KeyValueDocument& section, std::string_view preset) {
    for (const auto& e : section.entries()) {
      // Dotted keys belong to a nested variant section.
      if (e.key == "schema" || e.key.find('.') != std::string::npos)
        continue;
      const auto* def = lookup(e.key);
      if (!def)
        throw ConfigError("preset data line " + std::to_string(e.line) + ": unknown parameter '" +
                          e.key + "' for preset '" + std::string(preset) + "'");
      set(*def, parse_quantity(e.value, def->dimension), e.note);
    }
  }

  std::vector<ParamDef> defs_;
  std::map<std::string, PresetParameter> values_;
};

PumpOptics optics_from(const ParameterTable& t) {
  PumpOptics o;
  o.wavelength = t.get("wavelength");
  o.cross_section = t.get("cross_section");
  o.beam_area = t.get("beam_area");
  o.absorption = t.maybe("absorption");
  o.thickness = t.maybe("thickness");
  o.n1 = t.maybe("n1");
  o.n2 = t.maybe("n2");
  return o;
}

void fill_common(ModelSpec& m, const ParameterTable& t) {
  m.cavity.frequency = t.get("omega_m");
  m.cavity.damping = t.get("kappa");
  m.cavity.temperature = t.get("T");
  m.coupling.g = t.get("g");
  m.coupling.emitter_count = t.get("N");
  m.coupling.spin_frequency = t.get("omega_s");
  m.optics = optics_from(t);
}

LindbladChannel transition(int from, int to, double rate, bool pump = false) {
  return {ChannelKind::transition, from, to, rate, pump};
}

LindbladChannel dephasing(int a, int b, double chi) {
  return {ChannelKind::dephasing, a, b, chi, false};
}

void ensure_valid(const ModelSpec& m) {
  auto report = validate_model(m);
  if (!report.ok()) {
    std::string msg = "invalid model '" + m.name + "':";
    for (const auto& s : report.issues)
      msg += " " + s + ";";
    throw ConfigError(msg);
  }
}

} // namespace

std::string_view preset_data_text() { return detail::kPresetData; }

std::vector<std::string> preset_names() { return {"nv", "pentacene"}; }

std::vector<PresetParameter> preset_parameters(std::string_view name,
                                               const ParameterMap& overrides) {
  return ParameterTable(name, overrides).listing();
}

PumpOptics preset_optics(std::string_view name) { return optics_from(ParameterTable(name, {})); }

ModelSpec build_nv_preset(const ParameterMap& overrides) {
  ParameterTable t("nv", overrides);
  ModelSpec m;
  m.name = "nv";
  m.scheme.level_count = 7;
  m.scheme.labels = {"3A2 ms=-1", "3A2 ms=0", "3A2 ms=+1", "3E ms=-1",
                     "3E ms=0",   "3E ms=+1", "1A1/1E singlet"};
  m.scheme.lower = 1;
  m.scheme.upper = 2;
  m.scheme.eliminated = 7;
  m.scheme.initial_populations = {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0, 0.0, 0.0, 0.0};
  fill_common(m, t);

  const double k_sp = t.get("k_sp");
  // Spin-preserving optical pumping and emission on 1<->4, 2<->5, 3<->6.
  for (int i = 1; i <= 3; ++i) {
    m.channels.push_back(transition(i, i + 3, 0.0, true));
    m.channels.push_back(transition(i + 3, i, k_sp, true));
  }
  m.channels.push_back(transition(4, 7, t.get("k47")));
  m.channels.push_back(transition(5, 7, t.get("k57")));
  m.channels.push_back(transition(6, 7, t.get("k67")));
  m.channels.push_back(transition(7, 1, t.get("k71")));
  m.channels.push_back(transition(7, 2, t.get("k72")));
  m.channels.push_back(transition(7, 3, t.get("k73")));
  const double k12 = t.get("k12");
  const double k32 = t.get("k32");
  m.channels.push_back(transition(1, 2, k12));
  m.channels.push_back(transition(2, 1, t.get_or("k21", k12)));
  m.channels.push_back(transition(3, 2, k32));
  m.channels.push_back(transition(2, 3, t.get_or("k23", k32)));
  m.channels.push_back(dephasing(1, 2, t.get("chi12")));
  m.channels.push_back(dephasing(3, 2, t.get("chi32")));
  ensure_valid(m);
  return m;
}

ModelSpec build_pentacene_preset(const ParameterMap& overrides) {
  ParameterTable t("pentacene", overrides);
  ModelSpec m;
  m.name = "pentacene";
  m.scheme.level_count = 5;
  m.scheme.labels = {"S0", "S1", "T1 Z", "T1 Y", "T1 X"};
  m.scheme.lower = 3;
  m.scheme.upper = 5;
  m.scheme.eliminated = 1;
  m.scheme.initial_populations = {1.0, 0.0, 0.0, 0.0, 0.0};
  fill_common(m, t);

  m.channels.push_back(transition(1, 2, 0.0, true));
  m.channels.push_back(transition(2, 1, t.get("k_sp"), true));
  m.channels.push_back(transition(2, 3, t.get("k23")));
  m.channels.push_back(transition(2, 4, t.get("k24")));
  m.channels.push_back(transition(2, 5, t.get("k25")));
  m.channels.push_back(transition(3, 1, t.get("k31")));
  m.channels.push_back(transition(4, 1, t.get("k41")));
  m.channels.push_back(transition(5, 1, t.get("k51")));
  const double k34 = t.get("k34");
  const double k35 = t.get("k35");
  const double k45 = t.get("k45");
  m.channels.push_back(transition(3, 4, k34));
  m.channels.push_back(transition(4, 3, t.get_or("k43", k34)));
  m.channels.push_back(transition(3, 5, k35));
  m.channels.push_back(transition(5, 3, t.get_or("k53", k35)));
  m.channels.push_back(transition(4, 5, k45));
  m.channels.push_back(transition(5, 4, t.get_or("k54", k45)));
  m.channels.push_back(dephasing(3, 4, t.get("chi34")));
  m.channels.push_back(dephasing(3, 5, t.get("chi35")));
  m.channels.push_back(dephasing(4, 5, t.get("chi45")));
  ensure_valid(m);
  return m;
}

ModelSpec build_preset(std::string_view name, const ParameterMap& overrides) {
  if (name == "nv")
    return build_nv_preset(overrides);
  if (name == "pentacene")
    return build_pentacene_preset(overrides);
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: nv, pentacene)");
}

// ---------------------------------------------------------------------------
// Text form

namespace {

std::string quantity(double v, Dimension d) {
  std::string s = format_double(v);
  auto unit = internal_unit(d);
  if (!unit.empty())
    s += " " + std::string(unit);
  return s;
}

std::vector<std::string> tokens_of(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok)
    out.push_back(tok);
  return out;
}

int parse_level(const std::string& s, int line) {
  try {
    double v = parse_number(s);
    if (v != std::floor(v))
      throw ConfigError("");
    return static_cast<int>(v);
  } catch (const ConfigError&) {
    throw ConfigError("line " + std::to_string(line) + ": expected a level index, got '" + s + "'");
  }
}

std::string join_from(const std::vector<std::string>& toks, std::size_t first, std::size_t last) {
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (!out.empty())
      out += " ";
    out += toks[i];
  }
  return out;
}

} // namespace

std::string serialize_model(const ModelSpec& spec) {
  std::ostringstream out;
  out << "name = " << spec.name << "\n";
  out << "levels = " << spec.scheme.level_count << "\n";
  if (!spec.scheme.labels.empty()) {
    out << "labels = ";
    for (std::size_t i = 0; i < spec.scheme.labels.size(); ++i)
      out << (i ? " | " : "") << spec.scheme.labels[i];
    out << "\n";
  }
  out << "resonant = " << spec.scheme.lower << " " << spec.scheme.upper << "\n";
  out << "eliminated = " << spec.scheme.eliminated << "\n";
  if (!spec.scheme.initial_populations.empty()) {
    out << "initial =";
    for (double p : spec.scheme.initial_populations)
      out << " " << format_double(p);
    out << "\n";
  }
  out << "cavity.frequency = " << quantity(spec.cavity.frequency, Dimension::angular_frequency)
      << "\n";
  out << "cavity.damping = " << quantity(spec.cavity.damping, Dimension::angular_frequency) << "\n";
  out << "cavity.temperature = " << quantity(spec.cavity.temperature, Dimension::temperature)
      << "\n";
  out << "coupling.g = " << quantity(spec.coupling.g, Dimension::angular_frequency) << "\n";
  out << "coupling.N = " << format_double(spec.coupling.emitter_count) << "\n";
  out << "coupling.spin_frequency = "
      << quantity(spec.coupling.spin_frequency, Dimension::angular_frequency) << "\n";
  for (const auto& ch : spec.channels) {
    const bool dep = ch.kind == ChannelKind::dephasing;
    out << "channel = " << (dep ? "dephasing " : "transition ") << ch.from << " " << ch.to << " "
        << quantity(ch.rate, dep ? Dimension::angular_frequency : Dimension::rate)
        << (ch.pump_scaled ? " pump" : "") << "\n";
  }
  for (const auto& seg : spec.pump.segments)
    out << "pump.segment = " << format_double(seg.t_start) << " " << format_double(seg.t_end)
        << " " << format_double(seg.rate) << "\n";
  const auto& o = spec.optics;
  out << "optics.wavelength = " << quantity(o.wavelength, Dimension::length) << "\n";
  out << "optics.cross_section = " << quantity(o.cross_section, Dimension::area) << "\n";
  out << "optics.beam_area = " << quantity(o.beam_area, Dimension::area) << "\n";
  if (o.absorption)
    out << "optics.absorption = " << quantity(*o.absorption, Dimension::inverse_length) << "\n";
  if (o.thickness)
    out << "optics.thickness = " << quantity(*o.thickness, Dimension::length) << "\n";
  if (o.n1)
    out << "optics.n1 = " << format_double(*o.n1) << "\n";
  if (o.n2)
    out << "optics.n2 = " << format_double(*o.n2) << "\n";
  return out.str();
}

ModelSpec parse_model(std::string_view text) {
  auto doc = KeyValueDocument::parse(text);
  ModelSpec m;
  bool have_levels = false;
  bool have_resonant = false;
  for (const auto& e : doc.entries()) {
    const auto& k = e.key;
    auto ctx = [&](const ConfigError& err) {
      return ConfigError("line " + std::to_string(e.line) + ", key '" + k + "': " + err.what());
    };
    try {
      if (k == "name") {
        m.name = e.value;
      } else if (k == "levels") {
        m.scheme.level_count = parse_level(e.value, e.line);
        have_levels = true;
      } else if (k == "labels") {
        m.scheme.labels = split_list(e.value, '|');
      } else if (k == "resonant") {
        auto toks = tokens_of(e.value);
        if (toks.size() != 2)
          throw ConfigError("expected 'lower upper'");
        m.scheme.lower = parse_level(toks[0], e.line);
        m.scheme.upper = parse_level(toks[1], e.line);
        have_resonant = true;
      } else if (k == "eliminated") {
        m.scheme.eliminated = parse_level(e.value, e.line);
      } else if (k == "initial") {
        m.scheme.initial_populations.clear();
        for (const auto& tok : tokens_of(e.value))
          m.scheme.initial_populations.push_back(parse_number(tok));
      } else if (k == "cavity.frequency") {
        m.cavity.frequency = parse_quantity(e.value, Dimension::angular_frequency);
      } else if (k == "cavity.damping") {
        m.cavity.damping = parse_quantity(e.value, Dimension::angular_frequency);
      } else if (k == "cavity.temperature") {
        m.cavity.temperature = parse_quantity(e.value, Dimension::temperature);
      } else if (k == "coupling.g") {
        m.coupling.g = parse_quantity(e.value, Dimension::angular_frequency);
      } else if (k == "coupling.N") {
        m.coupling.emitter_count = parse_number(e.value);
      } else if (k == "coupling.spin_frequency") {
        m.coupling.spin_frequency = parse_quantity(e.value, Dimension::angular_frequency);
      } else if (k == "channel") {
        auto toks = tokens_of(e.value);
        if (toks.size() < 4)
          throw ConfigError("expected '<transition|dephasing> <from> <to> <rate> [unit] [pump]'");
        LindbladChannel ch;
        if (toks[0] == "transition")
          ch.kind = ChannelKind::transition;
        else if (toks[0] == "dephasing")
          ch.kind = ChannelKind::dephasing;
        else
          throw ConfigError("unknown channel kind '" + toks[0] + "'");
        ch.from = parse_level(toks[1], e.line);
        ch.to = parse_level(toks[2], e.line);
        std::size_t last = toks.size();
        if (toks.back() == "pump") {
          ch.pump_scaled = true;
          --last;
        }
        ch.rate = parse_quantity(join_from(toks, 3, last),
                                 ch.kind == ChannelKind::dephasing ? Dimension::angular_frequency
                                                                   : Dimension::rate);
        m.channels.push_back(ch);
      } else if (k == "pump.segment") {
        auto toks = tokens_of(e.value);
        if (toks.size() != 3)
          throw ConfigError("expected '<t_start_s> <t_end_s> <rate_per_s>'");
        m.pump.segments.push_back(
            {parse_number(toks[0]), parse_number(toks[1]), parse_number(toks[2])});
      } else if (k == "optics.wavelength") {
        m.optics.wavelength = parse_quantity(e.value, Dimension::length);
      } else if (k == "optics.cross_section") {
        m.optics.cross_section = parse_quantity(e.value, Dimension::area);
      } else if (k == "optics.beam_area") {
        m.optics.beam_area = parse_quantity(e.value, Dimension::area);
      } else if (k == "optics.absorption") {
        m.optics.absorption = parse_quantity(e.value, Dimension::inverse_length);
      } else if (k == "optics.thickness") {
        m.optics.thickness = parse_quantity(e.value, Dimension::length);
      } else if (k == "optics.n1") {
        m.optics.n1 = parse_number(e.value);
      } else if (k == "optics.n2") {
        m.optics.n2 = parse_number(e.value);
      } else {
        throw ConfigError("unknown model key");
      }
    } catch (const ConfigError& err) {
      throw ctx(err);
    }
  }
  if (!have_levels)
    throw ConfigError("model: missing 'levels'");
  if (!have_resonant)
    throw ConfigError("model: missing 'resonant'");
  return m;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t model_hash(const ModelSpec& spec) { return fnv1a(serialize_model(spec)); }

} // namespace spinmaser
