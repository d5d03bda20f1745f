#pragma once

#include <numbers>
#include <string>
#include <string_view>

namespace spinmaser {

namespace constants {
inline constexpr double planck = 6.62607015e-34;        // J s
inline constexpr double hbar = planck / (2.0 * std::numbers::pi);
inline constexpr double boltzmann = 1.380649e-23;       // J/K
inline constexpr double speed_of_light = 299792458.0;   // m/s
inline constexpr double two_pi = 2.0 * std::numbers::pi;
} // namespace constants

/// Physical dimension expected when reading a quantity from text.
///
/// Internally every oscillation frequency, coupling, detuning, cavity damping
/// and dephasing rate is an angular rate in rad/s, so for those an `Hz`-family
/// unit is multiplied by 2 pi. Population transfer rates (pumping, decay,
/// inter-system crossing, spin-lattice) are plain rates in 1/s and an `Hz`
/// unit on them means 1/s with no 2 pi.
enum class Dimension {
  dimensionless,
  time,              // s
  angular_frequency, // rad/s
  rate,              // 1/s
  power,             // W
  length,            // m
  area,              // m^2
  inverse_length,    // 1/m
  temperature,       // K
};

std::string_view dimension_name(Dimension d);

/// Parse "<number> [unit]" into the internal SI unit of `d`. A bare number is
/// taken as already being in the internal unit. Throws ConfigError naming the
/// expected dimension on a unit mismatch.
double parse_quantity(std::string_view text, Dimension d);

/// Parse a plain number; throws ConfigError on trailing garbage.
double parse_number(std::string_view text);

/// Shortest text that parses back to exactly `value`.
std::string format_double(double value);

/// Internal unit label written by serializers ("rad/s", "/s", ...).
std::string_view internal_unit(Dimension d);

} // namespace spinmaser
