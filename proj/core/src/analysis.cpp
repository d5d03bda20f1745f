#include "spinmaser/analysis.hpp"

#include "spinmaser/error.hpp"
#include "spinmaser/observables.hpp"
#include "spinmaser/parallel.hpp"
#include "spinmaser/units.hpp"

#include <algorithm>
#include <cmath>

namespace spinmaser {

namespace {

struct Peak {
  double t, n;
};

// Vertex of the parabola through three samples.
Peak interpolate_peak(double t0, double n0, double t1, double n1, double t2, double n2) {
  const double d0 = t0 - t1, d2 = t2 - t1;
  const double s0 = (n0 - n1) / d0, s2 = (n2 - n1) / d2;
  const double curvature = (s2 - s0) / (d2 - d0);
  if (!(curvature < 0.0)) return {t1, n1};
  const double slope = s0 - curvature * d0; // derivative at t1
  const double dt = std::clamp(-slope / (2.0 * curvature), d0, d2);
  return {t1 + dt, n1 + slope * dt + curvature * dt * dt};
}

double envelope_time(const std::vector<Peak>& peaks, double baseline, std::size_t& top) {
  top = 0;
  for (std::size_t k = 1; k < peaks.size(); ++k)
    if (peaks[k].n > peaks[top].n) top = k;
  const double amax = peaks[top].n - baseline;
  const double threshold = amax / std::exp(1.0);
  for (std::size_t k = top; k + 1 < peaks.size(); ++k) {
    const double a = peaks[k].n - baseline, b = peaks[k + 1].n - baseline;
    if (b < threshold) {
      if (!(b > 0.0)) // log-linear interpolation needs positive amplitudes
        return peaks[k].t + (a - threshold) / (a - b) * (peaks[k + 1].t - peaks[k].t) - peaks[top].t;
      const double f = std::log(a / threshold) / std::log(a / b);
      return peaks[k].t + f * (peaks[k + 1].t - peaks[k].t) - peaks[top].t;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

} // namespace

RabiFeatures extract_rabi_features(const std::vector<double>& t, const std::vector<double>& n,
                                   const RabiOptions& options) {
  RabiFeatures out;
  if (t.size() != n.size()) throw DomainError("time and photon series differ in length");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw DomainError("time series must be strictly ascending");
  if (t.size() < 3) {
    out.diagnostic = "series too short";
    return out;
  }
  const double baseline = std::isnan(options.baseline) ? n.back() : options.baseline;

  std::vector<Peak> peaks;
  for (std::size_t i = 1; i + 1 < n.size(); ++i)
    if (n[i] > n[i - 1] && n[i] >= n[i + 1])
      peaks.push_back(interpolate_peak(t[i - 1], n[i - 1], t[i], n[i], t[i + 1], n[i + 1]));
  if (!peaks.empty()) {
    double amax = 0.0;
    for (const auto& p : peaks) amax = std::max(amax, p.n - baseline);
    std::erase_if(peaks, [&](const Peak& p) { return !(p.n - baseline > options.min_relative_amplitude * amax); });
  }
  if (peaks.size() < 3) {
    out.diagnostic = "fewer than three oscillation peaks (" + std::to_string(peaks.size()) + ")";
    return out;
  }

  std::size_t top = 0;
  double tau = envelope_time(peaks, baseline, top);
  if (std::isnan(tau)) {
    out.diagnostic = "envelope does not decay to 1/e inside the series";
    return out;
  }
  if (options.window_envelopes > 0.0) {
    const double end = t.front() + options.window_envelopes * tau;
    std::vector<Peak> inside;
    for (const auto& p : peaks)
      if (p.t <= end) inside.push_back(p);
    if (inside.size() >= 3) {
      peaks = std::move(inside);
      const double again = envelope_time(peaks, baseline, top);
      if (!std::isnan(again)) tau = again;
    }
  }

  out.found = true;
  out.duration_s = tau;
  out.delay_s = peaks.front().t;
  out.frequency_hz = static_cast<double>(peaks.size() - 1) / (peaks.back().t - peaks.front().t);
  for (const auto& p : peaks) out.peaks.emplace_back(p.t, p.n);
  return out;
}

bool SweepResult::all_converged() const {
  return std::all_of(points.begin(), points.end(), [](const SweepPoint& p) { return p.converged; });
}

std::size_t SweepResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [](const SweepPoint& p) { return !p.converged; }));
}

namespace {

void fill_point(SweepPoint& point, const CompiledMomentSystem& sys, const SpectralPoint& sp) {
  point.status = sp.steady.status;
  point.converged = sp.steady.ok();
  point.residual = sp.steady.residual;
  point.newton_iterations = sp.steady.newton_iterations;
  point.stats = sp.steady.stats;
  point.photon_number = sp.photon_number;
  point.error = sp.error;
  if (!point.converged) return;
  const auto& y = sp.steady.state.y;
  point.populations = populations_of(sys, y);
  const auto d = dicke_coordinates(sys, y);
  point.j_norm = d.j_norm;
  point.m_norm = d.m_norm;
  if (sp.spectrum_ok) {
    point.spectrum_ok = true;
    point.linewidth_hz = sp.spectrum.fwhm_hz;
    point.peak_offset = sp.spectrum.peak_offset;
    point.peak_frequency = sp.spectrum.peak_frequency;
  }
}

void require_monotone(const std::vector<double>& grid, bool positive, const char* what) {
  if (grid.empty()) throw DomainError(std::string(what) + " grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || (positive && !(grid[i] > 0.0)))
      throw DomainError(std::string(what) + " grid values must be finite" +
                        (positive ? " and positive" : ""));
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw DomainError(std::string(what) + " grid must be strictly ascending");
  }
}

template <class Solve>
void run_points(std::size_t count, const SweepOptions& options, const Solve& solve) {
  if (options.start == SweepStart::continuation) {
    std::optional<StateVector> previous;
    for (std::size_t i = 0; i < count; ++i) solve(i, previous);
  } else {
    parallel_for(count, options.jobs, [&](std::size_t i) {
      std::optional<StateVector> none;
      solve(i, none);
    });
  }
}

} // namespace

SweepResult pump_sweep(const ModelSpec& spec, const std::vector<double>& rates,
                       const SweepOptions& options, const std::vector<double>& powers) {
  require_monotone(rates, true, "pump");
  if (!powers.empty() && powers.size() != rates.size())
    throw DomainError("power labels do not match the pump grid");
  const CompiledMomentSystem sys = compile_rhs(complete_system(spec, options.assembly));
  const StateVector initial = thermal_initial_state(sys);

  SweepResult out;
  out.axis = SweepAxis::pump;
  out.points.resize(rates.size());
  run_points(rates.size(), options, [&](std::size_t i, std::optional<StateVector>& previous) {
    SweepPoint& point = out.points[i];
    point.axis = rates[i];
    point.pump_rate = rates[i];
    if (!powers.empty()) point.power_w = powers[i];
    try {
      const SpectralPoint sp = solve_spectral_point(sys, previous ? *previous : initial, rates[i],
                                                    options.solver, options.spectrum,
                                                    options.compute_spectrum);
      fill_point(point, sys, sp);
      if (point.converged) previous = sp.steady.state;
    } catch (const Error& e) {
      point.error = e.what();
    }
  });
  return out;
}

SweepResult detuning_sweep(const ModelSpec& spec, const std::vector<double>& detunings, double xi,
                           const SweepOptions& options) {
  require_monotone(detunings, false, "detuning");
  if (!(xi >= 0.0)) throw DomainError("pump rate must be non-negative");
  SweepResult out;
  out.axis = SweepAxis::detuning;
  out.points.resize(detunings.size());
  run_points(detunings.size(), options, [&](std::size_t i, std::optional<StateVector>& previous) {
    SweepPoint& point = out.points[i];
    point.axis = detunings[i];
    point.pump_rate = xi;
    try {
      ModelSpec s = spec;
      s.coupling.spin_frequency = spec.cavity.frequency - detunings[i];
      const CompiledMomentSystem sys = compile_rhs(complete_system(s, options.assembly));
      StateVector start = thermal_initial_state(sys);
      if (previous && previous->y.size() == start.y.size()) start = *previous;
      const SpectralPoint sp = solve_spectral_point(sys, start, xi, options.solver, options.spectrum,
                                                    options.compute_spectrum);
      fill_point(point, sys, sp);
      if (point.converged) previous = sp.steady.state;
    } catch (const Error& e) {
      point.error = e.what();
    }
  });
  return out;
}

ThresholdResult detect_thresholds(const std::vector<double>& rates,
                                  const std::vector<double>& photon_numbers, double significance) {
  if (rates.size() != photon_numbers.size())
    throw DomainError("pump grid and photon numbers differ in length");
  ThresholdResult out;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < rates.size(); ++i)
    if (rates[i] > 0.0 && photon_numbers[i] > 0.0 && std::isfinite(photon_numbers[i])) {
      x.push_back(std::log(rates[i]));
      y.push_back(std::log(photon_numbers[i]));
    }
  if (x.size() < 3) {
    out.diagnostic = "fewer than three usable sweep points";
    return out;
  }
  std::vector<double> slope(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (!(x[i + 1] > x[i])) throw DomainError("pump grid must be strictly ascending");
    slope[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  }
  std::vector<double> mags(slope.size());
  std::transform(slope.begin(), slope.end(), mags.begin(), [](double s) { return std::abs(s); });
  std::vector<double> sorted = mags;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double median = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + sorted.size() / 2);
    median = 0.5 * (median + lower);
  }
  const double cut = std::max(significance * median, 1e-9);

  // Runs of adjacent significant intervals count as one jump, located at the
  // steepest interval of the run.
  std::vector<std::size_t> jumps;
  for (std::size_t i = 0; i < mags.size();) {
    if (!(mags[i] > cut)) {
      ++i;
      continue;
    }
    std::size_t best = i;
    for (; i < mags.size() && mags[i] > cut; ++i)
      if (mags[i] > mags[best]) best = i;
    jumps.push_back(best);
  }
  std::sort(jumps.begin(), jumps.end(), [&](std::size_t a, std::size_t b) { return mags[a] > mags[b]; });
  if (jumps.size() > 2) jumps.resize(2);
  std::sort(jumps.begin(), jumps.end());

  auto make = [&](std::size_t i) {
    Threshold t;
    t.lower = std::exp(x[i]);
    t.upper = std::exp(x[i + 1]);
    t.rate = std::sqrt(t.lower * t.upper);
    t.slope = slope[i];
    return t;
  };
  if (jumps.size() == 2) {
    out.pt1 = make(jumps[0]);
    out.pt2 = make(jumps[1]);
  } else if (jumps.size() == 1) {
    (slope[jumps[0]] > 0 ? out.pt1 : out.pt2) = make(jumps[0]);
    out.diagnostic = "only one significant jump found";
  } else {
    out.diagnostic = "no jump exceeds " + format_double(significance) + " times the median slope";
  }
  return out;
}

ThresholdResult detect_thresholds(const SweepResult& sweep, double significance) {
  if (sweep.axis != SweepAxis::pump) throw DomainError("thresholds need a pump sweep");
  std::vector<double> rates, n;
  for (const auto& p : sweep.points)
    if (p.converged) {
      rates.push_back(p.axis);
      n.push_back(p.photon_number);
    }
  return detect_thresholds(rates, n, significance);
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0 && hi > lo) || n < 2) throw DomainError("log grid needs 0 < lo < hi and n >= 2");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> linear_grid(double lo, double hi, int n) {
  if (!(hi > lo) || n < 2) throw DomainError("linear grid needs lo < hi and n >= 2");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  out.back() = hi;
  return out;
}

} // namespace spinmaser
