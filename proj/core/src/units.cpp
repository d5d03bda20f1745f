#include "spinmaser/units.hpp"

#include "spinmaser/error.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <utility>

namespace spinmaser {

namespace {

struct UnitEntry {
  std::string_view symbol;
  Dimension dimension;
  double factor;
};

constexpr double tp = constants::two_pi;

constexpr std::array kUnits{
    UnitEntry{"s", Dimension::time, 1.0},
    UnitEntry{"ms", Dimension::time, 1e-3},
    UnitEntry{"us", Dimension::time, 1e-6},
    UnitEntry{"µs", Dimension::time, 1e-6},
    UnitEntry{"ns", Dimension::time, 1e-9},

    UnitEntry{"rad/s", Dimension::angular_frequency, 1.0},
    UnitEntry{"Hz", Dimension::angular_frequency, tp},
    UnitEntry{"kHz", Dimension::angular_frequency, tp * 1e3},
    UnitEntry{"MHz", Dimension::angular_frequency, tp * 1e6},
    UnitEntry{"GHz", Dimension::angular_frequency, tp * 1e9},

    UnitEntry{"/s", Dimension::rate, 1.0},
    UnitEntry{"1/s", Dimension::rate, 1.0},
    UnitEntry{"s^-1", Dimension::rate, 1.0},
    UnitEntry{"Hz", Dimension::rate, 1.0},
    UnitEntry{"kHz", Dimension::rate, 1e3},
    UnitEntry{"MHz", Dimension::rate, 1e6},
    UnitEntry{"/ms", Dimension::rate, 1e3},
    UnitEntry{"/us", Dimension::rate, 1e6},

    UnitEntry{"W", Dimension::power, 1.0},
    UnitEntry{"mW", Dimension::power, 1e-3},
    UnitEntry{"kW", Dimension::power, 1e3},

    UnitEntry{"m", Dimension::length, 1.0},
    UnitEntry{"cm", Dimension::length, 1e-2},
    UnitEntry{"mm", Dimension::length, 1e-3},
    UnitEntry{"um", Dimension::length, 1e-6},
    UnitEntry{"nm", Dimension::length, 1e-9},

    UnitEntry{"m^2", Dimension::area, 1.0},
    UnitEntry{"cm^2", Dimension::area, 1e-4},
    UnitEntry{"mm^2", Dimension::area, 1e-6},
    UnitEntry{"um^2", Dimension::area, 1e-12},

    UnitEntry{"/m", Dimension::inverse_length, 1.0},
    UnitEntry{"1/m", Dimension::inverse_length, 1.0},
    UnitEntry{"m^-1", Dimension::inverse_length, 1.0},
    UnitEntry{"/cm", Dimension::inverse_length, 1e2},
    UnitEntry{"1/cm", Dimension::inverse_length, 1e2},

    UnitEntry{"K", Dimension::temperature, 1.0},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::pair<double, std::string_view> split_number(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr == text.data())
    throw ConfigError("expected a number, got '" + std::string(text) + "'");
  std::string_view rest(ptr, static_cast<std::size_t>(text.data() + text.size() - ptr));
  return {value, trim(rest)};
}

} // namespace

std::string_view dimension_name(Dimension d) {
  switch (d) {
  case Dimension::dimensionless: return "dimensionless";
  case Dimension::time: return "time";
  case Dimension::angular_frequency: return "angular frequency";
  case Dimension::rate: return "rate";
  case Dimension::power: return "power";
  case Dimension::length: return "length";
  case Dimension::area: return "area";
  case Dimension::inverse_length: return "inverse length";
  case Dimension::temperature: return "temperature";
  }
  return "unknown";
}

std::string_view internal_unit(Dimension d) {
  switch (d) {
  case Dimension::dimensionless: return "";
  case Dimension::time: return "s";
  case Dimension::angular_frequency: return "rad/s";
  case Dimension::rate: return "/s";
  case Dimension::power: return "W";
  case Dimension::length: return "m";
  case Dimension::area: return "m^2";
  case Dimension::inverse_length: return "/m";
  case Dimension::temperature: return "K";
  }
  return "";
}

double parse_number(std::string_view text) {
  auto [value, rest] = split_number(text);
  if (!rest.empty())
    throw ConfigError("unexpected trailing text '" + std::string(rest) + "' after number");
  return value;
}

double parse_quantity(std::string_view text, Dimension d) {
  auto [value, unit] = split_number(text);
  if (unit.empty())
    return value;
  if (d == Dimension::dimensionless)
    throw ConfigError("expected a dimensionless number, got unit '" + std::string(unit) + "'");
  for (const auto& entry : kUnits) {
    if (entry.dimension == d && entry.symbol == unit)
      return value * entry.factor;
  }
  for (const auto& entry : kUnits) {
    if (entry.symbol == unit) {
      throw ConfigError("unit '" + std::string(unit) + "' has dimension " +
                        std::string(dimension_name(entry.dimension)) + ", expected " +
                        std::string(dimension_name(d)));
    }
  }
  throw ConfigError("unknown unit '" + std::string(unit) + "' (expected " +
                    std::string(dimension_name(d)) + ")");
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{})
    throw InternalError("format_double failed");
  return std::string(buf.data(), ptr);
}

} // namespace spinmaser
