#pragma once

#include "spinmaser/spectrum.hpp"

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spinmaser {

struct RabiFeatures {
  bool found = false;
  double frequency_hz = 0.0; ///< 1 / mean peak spacing
  double duration_s = 0.0;   ///< envelope 1/e time, measured from the largest peak
  double delay_s = 0.0;      ///< time of the first peak
  std::vector<std::pair<double, double>> peaks; ///< (t, n) after sub-sample interpolation
  std::string diagnostic;
};

struct RabiOptions {
  /// Asymptote subtracted from the peak heights; NaN = last sample.
  double baseline = std::numeric_limits<double>::quiet_NaN();
  /// Peaks whose envelope is below this fraction of the largest are ignored.
  double min_relative_amplitude = 1e-4;
  /// Window end in envelope times after the series start (0 = no window).
  double window_envelopes = 5.0;
};

/// Peak-based Rabi features of a photon-number series sampled on ascending t.
RabiFeatures extract_rabi_features(const std::vector<double>& t, const std::vector<double>& n,
                                   const RabiOptions& options = {});

enum class SweepAxis { pump, detuning };
enum class SweepStart { fresh, continuation };

struct SweepOptions {
  AssemblyOptions assembly;
  SolverOptions solver;
  SpectrumOptions spectrum;
  bool compute_spectrum = true;
  SweepStart start = SweepStart::fresh; ///< continuation runs serially
  unsigned jobs = 0;                    ///< 0 = hardware concurrency
};

struct SweepPoint {
  double axis = 0.0;  ///< pump rate 1/s or detuning rad/s
  double power_w = std::numeric_limits<double>::quiet_NaN();
  double pump_rate = 0.0;
  bool converged = false;
  SteadyStatus status = SteadyStatus::no_fixed_point;
  double residual = 0.0;
  int newton_iterations = 0;
  SolverStats stats;
  double photon_number = std::numeric_limits<double>::quiet_NaN();
  bool spectrum_ok = false;
  double linewidth_hz = std::numeric_limits<double>::quiet_NaN();
  double peak_offset = std::numeric_limits<double>::quiet_NaN(); ///< rad/s from the carrier
  double peak_frequency = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> populations;
  double j_norm = std::numeric_limits<double>::quiet_NaN();
  double m_norm = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::pump;
  std::vector<SweepPoint> points;

  bool all_converged() const;
  std::size_t failures() const;
};

/// Steady state (and spectrum) at each pump rate. `powers`, when given,
/// labels the points with laser power and must match `rates` in length.
SweepResult pump_sweep(const ModelSpec& spec, const std::vector<double>& rates,
                       const SweepOptions& options = {}, const std::vector<double>& powers = {});

/// Steady state at fixed pump for each detuning omega_m - omega_s; the cavity
/// stays fixed and the spin transition moves.
SweepResult detuning_sweep(const ModelSpec& spec, const std::vector<double>& detunings, double xi,
                           const SweepOptions& options = {});

struct Threshold {
  double rate = 0.0;  ///< geometric centre of the jump interval
  double lower = 0.0; ///< confidence interval: the grid interval holding the jump
  double upper = 0.0;
  double slope = 0.0; ///< d log n / d log xi over that interval
};

struct ThresholdResult {
  std::optional<Threshold> pt1, pt2;
  std::string diagnostic;
  bool complete() const { return pt1 && pt2; }
};

/// Thresholds at the two largest jumps of d log n / d log xi that exceed
/// `significance` times the median slope magnitude.
ThresholdResult detect_thresholds(const std::vector<double>& rates,
                                  const std::vector<double>& photon_numbers,
                                  double significance = 10.0);
ThresholdResult detect_thresholds(const SweepResult& sweep, double significance = 10.0);

/// n log-spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int n);
std::vector<double> linear_grid(double lo, double hi, int n);

} // namespace spinmaser
