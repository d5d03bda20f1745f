#include "spinmaser/spectrum.hpp"

#include "spinmaser/error.hpp"
#include "spinmaser/parallel.hpp"
#include "spinmaser/units.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spinmaser {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

int monomial_charge(const Monomial& m, int upper) { return phase_charge(m, upper); }

// Splits a monomial into its cavity part and single emitter operators.
std::vector<Monomial> factors_of(const Monomial& m) {
  std::vector<Monomial> out;
  if (m.creations || m.annihilations) out.push_back(Monomial{m.creations, m.annihilations, {}});
  for (const auto& e : m.emitters) out.push_back(Monomial{0, 0, {{1, e.row, e.col}}});
  return out;
}

Monomial product_of(const std::vector<Monomial>& parts) {
  Monomial m;
  int label = 0;
  for (const auto& p : parts) {
    m.creations += p.creations;
    m.annihilations += p.annihilations;
    for (auto e : p.emitters) {
      e.emitter = ++label;
      m.emitters.push_back(e);
    }
  }
  return m;
}

Monomial times_annihilation(const Monomial& x) {
  Monomial m = x;
  m.annihilations += 1;
  return m;
}

// Rosenbrock integration of dc/dtau = G c on a real (Re, Im) stack.
std::vector<cplx> integrate_correlation(const RegressionSystem& rs, const std::vector<double>& tau) {
  const int n = rs.size();
  const Eigen::MatrixXd a = rs.generator.real();
  const Eigen::MatrixXd b = rs.generator.imag();
  Eigen::MatrixXd big(2 * n, 2 * n);
  big << a, -b, b, a;

  OdeProblem problem;
  problem.rhs = [&big](const Eigen::VectorXd& y, Eigen::VectorXd& f) { f.noalias() = big * y; };
  problem.jacobian = [&big](const Eigen::VectorXd&, Eigen::MatrixXd& j) { j = big; };

  Eigen::VectorXd y(2 * n);
  y << rs.initial.real(), rs.initial.imag();
  StepControl control;
  control.rtol = 1e-11;
  control.atol = Eigen::VectorXd::Constant(2 * n, 1e-14 * std::max(rs.initial.norm(), 1e-300));
  SolverStats stats;

  std::vector<cplx> out;
  out.reserve(tau.size());
  double t = 0.0;
  for (double target : tau) {
    if (target < t) throw DomainError("correlation grid must be non-negative and ascending");
    if (target > t) integrate_segment(SolverMethod::rosenbrock, problem, t, target, y, control, stats);
    t = target;
    out.emplace_back(y(0), y(n));
  }
  return out;
}

double half_max_crossing(const std::vector<RegressionMode>& modes, double peak, double half,
                         double step, double direction) {
  double inside = peak;
  double outside = peak + direction * step;
  for (int i = 0; spectral_density(modes, outside) > half; ++i) {
    if (i > 200) throw DomainError("spectrum does not fall to half maximum");
    inside = outside;
    step *= 2.0;
    outside = peak + direction * step;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (inside + outside);
    if (mid == inside || mid == outside) break;
    (spectral_density(modes, mid) > half ? inside : outside) = mid;
  }
  return 0.5 * (inside + outside);
}

double golden_maximum(const std::vector<RegressionMode>& modes, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
  double f1 = spectral_density(modes, x1), f2 = spectral_density(modes, x2);
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(std::abs(lo), std::abs(hi)); ++i) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = spectral_density(modes, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = spectral_density(modes, x1);
    }
  }
  return 0.5 * (lo + hi);
}

int dominant_mode(const std::vector<RegressionMode>& modes) {
  int best = -1;
  double best_weight = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double decay = std::abs(modes[k].eigenvalue.real());
    if (decay == 0.0) continue;
    const double w = std::abs(modes[k].residue) / decay;
    if (best < 0 || w > best_weight ||
        (w == best_weight && decay < std::abs(modes[best].eigenvalue.real()))) {
      best = static_cast<int>(k);
      best_weight = w;
    }
  }
  return best;
}

} // namespace

RegressionSystem build_regression_system(const CompiledMomentSystem& sys, const StateVector& steady,
                                         double xi, const RegressionOptions& options) {
  const ModelSpec& spec = sys.spec();
  const int upper = spec.scheme.upper;
  const RotatingFrame frame = sys.system().options.frame;

  RegressionSystem rs;
  const auto [residual, floor] = steady_residual(sys, steady.y, xi);
  rs.steady_residual = residual;
  if (!(residual <= std::max(options.residual_tol, 10.0 * floor)))
    throw ConvergenceError("state is not a steady state (residual " + format_double(residual) +
                           "), cannot build the regression system");
  rs.carrier = frame == RotatingFrame::spin ? spec.coupling.spin_frequency : spec.cavity.frequency;

  // Worklist over the charge +1 operators reachable from a†.
  std::vector<std::map<Monomial, cplx>> rows;
  std::map<Monomial, int> index;
  auto intern = [&](const Monomial& x) {
    auto [it, fresh] = index.emplace(x, static_cast<int>(rs.operators.size()));
    if (fresh) rs.operators.push_back(x);
    return it->second;
  };
  intern(Monomial{1, 0, {}});
  for (std::size_t next = 0; next < rs.operators.size(); ++next) {
    std::map<Monomial, cplx> row;
    for (const auto& [m, coeff] : derive_operator_eom(spec, rs.operators[next], frame)) {
      const cplx c = coeff.at(xi);
      if (c == cplx{}) continue;
      if (monomial_charge(m, upper) != 1)
        throw InternalError("regression equation of " + render(rs.operators[next]) +
                            " contains " + render(m));
      const auto parts = factors_of(m);
      int dynamic = -1;
      bool vanishes = false;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        const int q = monomial_charge(parts[i], upper);
        if (q == 1 && dynamic < 0 && parts[i].order() == 1)
          dynamic = static_cast<int>(i);
        else if (q != 0)
          vanishes = true; // frozen factor with nonzero charge has zero steady mean
      }
      if (vanishes) continue;
      if (dynamic < 0)
        throw InternalError("no dynamic factor in " + render(m));
      std::vector<Monomial> frozen;
      for (std::size_t i = 0; i < parts.size(); ++i)
        if (static_cast<int>(i) != dynamic) frozen.push_back(parts[i]);
      cplx weight = c;
      if (!frozen.empty()) weight *= moment_value(sys, steady.y, product_of(frozen));
      row[parts[static_cast<std::size_t>(dynamic)]] += weight;
    }
    for (const auto& [x, w] : row) intern(x);
    rows.push_back(std::move(row));
  }

  const int n = rs.size();
  rs.generator = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (const auto& [x, w] : rows[static_cast<std::size_t>(i)]) rs.generator(i, index.at(x)) += w;
  rs.initial.resize(n);
  for (int i = 0; i < n; ++i)
    rs.initial(i) = moment_value(sys, steady.y, times_annihilation(rs.operators[static_cast<std::size_t>(i)]));
  return rs;
}

std::vector<RegressionMode> regression_modes(const RegressionSystem& rs) {
  // Osborne balancing: B = D^-1 G D with power-of-two D. Photon and spin
  // rows differ by ~N, which would otherwise dominate the conditioning.
  const int n = rs.size();
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  Eigen::MatrixXcd b = rs.generator;
  for (bool changed = true; changed;) {
    changed = false;
    for (int i = 0; i < n; ++i) {
      double col = 0.0, row = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != i) {
          col += std::abs(b(j, i));
          row += std::abs(b(i, j));
        }
      if (col == 0.0 || row == 0.0) continue;
      int e = 0;
      std::frexp(std::sqrt(row / col), &e);
      if (std::abs(e) <= 1) continue;
      const double f = std::ldexp(1.0, e);
      b.col(i) *= f;
      b.row(i) /= f;
      d(i) *= f;
      changed = true;
    }
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(b);
  if (es.info() != Eigen::Success) throw DomainError("eigen-decomposition of the generator failed");
  const Eigen::MatrixXcd& v = es.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > 1e-10 * s(0)))
    throw DomainError("regression generator is defective (eigenvector condition " +
                      format_double(s(0) / s(s.size() - 1)) + ")");
  const Eigen::VectorXcd scaled = rs.initial.cwiseQuotient(d.cast<cplx>());
  const Eigen::VectorXcd coeff = v.partialPivLu().solve(scaled);
  std::vector<RegressionMode> modes;
  for (int k = 0; k < n; ++k)
    modes.push_back({es.eigenvalues()(k), d(0) * v(0, k) * coeff(k)});
  return modes;
}

CorrelationSeries correlation_function(const RegressionSystem& rs, const std::vector<double>& tau,
                                       CorrelationMethod method) {
  CorrelationSeries out;
  out.tau = tau;
  for (double t : tau)
    if (!(t >= 0.0)) throw DomainError("correlation lag must be non-negative");
  if (method == CorrelationMethod::eigen) {
    try {
      const auto modes = regression_modes(rs);
      out.value.reserve(tau.size());
      for (double t : tau) {
        cplx c{};
        for (const auto& m : modes) c += m.residue * std::exp(m.eigenvalue * t);
        out.value.push_back(c);
      }
      out.method = CorrelationMethod::eigen;
      return out;
    } catch (const DomainError& e) {
      out.warnings.push_back(std::string(e.what()) + "; using ODE integration");
    }
  }
  std::vector<double> sorted = tau;
  std::sort(sorted.begin(), sorted.end());
  const auto values = integrate_correlation(rs, sorted);
  out.value.resize(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const auto pos = std::lower_bound(sorted.begin(), sorted.end(), tau[i]) - sorted.begin();
    out.value[i] = values[static_cast<std::size_t>(pos)];
  }
  out.method = CorrelationMethod::ode;
  return out;
}

std::string_view spectrum_method_name(SpectrumMethod m) {
  return m == SpectrumMethod::eigenmode ? "eigenmode" : "fft";
}

double spectral_density(const std::vector<RegressionMode>& modes, double omega) {
  cplx s{};
  for (const auto& m : modes)
    s += m.residue / cplx(-m.eigenvalue.real(), omega - m.eigenvalue.imag());
  return 2.0 * s.real();
}

SpectrumResult spectrum_and_linewidth(const RegressionSystem& rs, const SpectrumOptions& options) {
  SpectrumResult out;
  out.method = options.method;
  out.modes = regression_modes(rs);
  for (const auto& m : out.modes)
    if (m.eigenvalue.real() > 1e-9)
      throw DomainError("regression generator has a growing mode (Re lambda = " +
                        format_double(m.eigenvalue.real()) + ")");
  out.dominant = dominant_mode(out.modes);
  if (out.dominant < 0 || !(out.modes[static_cast<std::size_t>(out.dominant)].residue.real() > 0.0))
    throw DomainError("no spectral mode with positive weight");
  const RegressionMode& dom = out.modes[static_cast<std::size_t>(out.dominant)];
  const double gamma = -dom.eigenvalue.real();

  if (options.method == SpectrumMethod::eigenmode) {
    const double center = dom.eigenvalue.imag();
    out.peak_offset = golden_maximum(out.modes, center - 2.0 * gamma, center + 2.0 * gamma);
    const double half = 0.5 * spectral_density(out.modes, out.peak_offset);
    double left, right;
    try {
      right = half_max_crossing(out.modes, out.peak_offset, half, 0.5 * gamma, +1.0);
      left = half_max_crossing(out.modes, out.peak_offset, half, 0.5 * gamma, -1.0);
    } catch (const DomainError& e) {
      out.warnings.push_back(std::string(e.what()) + "; using the dominant-mode width");
      right = out.peak_offset + gamma;
      left = out.peak_offset - gamma;
    }
    out.fwhm_hz = (right - left) / two_pi;
    const int samples = std::max(options.samples, 3);
    const double span = options.span_widths * (right - left);
    for (int i = 0; i < samples; ++i) {
      const double w = out.peak_offset - span + 2.0 * span * i / (samples - 1);
      out.offsets.push_back(w);
      out.values.push_back(spectral_density(out.modes, w));
    }
  } else {
    // One-sided transform of the ODE-integrated c(tau) by FFT, trapezoid rule.
    const int m = std::max(options.fft_points, 64);
    double reach = 0.0;
    for (const auto& mode : out.modes)
      reach = std::max(reach, std::abs(mode.eigenvalue.imag()) + 20.0 * std::abs(mode.eigenvalue.real()));
    reach = std::max(reach, std::abs(dom.eigenvalue.imag()) + 20.0 * gamma);
    const double dt = std::numbers::pi / reach;
    std::vector<double> tau(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) tau[static_cast<std::size_t>(j)] = j * dt;
    const auto series = correlation_function(rs, tau, CorrelationMethod::ode);
    std::vector<cplx> c = series.value;
    c[0] *= 0.5;
    Eigen::FFT<double> fft;
    std::vector<cplx> spectrum;
    fft.fwd(spectrum, c);
    const double period = m * dt;
    std::vector<std::pair<double, double>> samples;
    samples.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      const int kk = k < m / 2 ? k : k - m;
      samples.emplace_back(two_pi * kk / period, 2.0 * dt * spectrum[static_cast<std::size_t>(k)].real());
    }
    std::sort(samples.begin(), samples.end());
    for (const auto& [w, s] : samples) {
      out.offsets.push_back(w);
      out.values.push_back(s);
    }
    const auto peak = std::max_element(out.values.begin(), out.values.end()) - out.values.begin();
    out.peak_offset = out.offsets[static_cast<std::size_t>(peak)];
    const double half = 0.5 * out.values[static_cast<std::size_t>(peak)];
    auto crossing = [&](int dir) {
      for (auto i = peak; i + dir >= 0 && i + dir < m; i += dir) {
        const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(i + dir);
        if (out.values[b] <= half) {
          const double f = (out.values[a] - half) / (out.values[a] - out.values[b]);
          return out.offsets[a] + f * (out.offsets[b] - out.offsets[a]);
        }
      }
      throw DomainError("FFT spectrum does not fall to half maximum inside the window");
    };
    out.fwhm_hz = (crossing(+1) - crossing(-1)) / two_pi;
  }
  out.peak_frequency = rs.carrier + out.peak_offset;
  return out;
}

SpectralPoint solve_spectral_point(const CompiledMomentSystem& sys, const StateVector& start,
                                   double xi, const SolverOptions& solver,
                                   const SpectrumOptions& options, bool with_spectrum) {
  SpectralPoint point;
  point.steady = find_steady_state(sys, start, xi, solver);
  point.photon_number = moment_value(sys, point.steady.state.y, Monomial{1, 1, {}}).real();
  if (!point.steady.ok()) {
    point.error = "no fixed point";
    return point;
  }
  if (!with_spectrum) return point;
  try {
    point.spectrum = spectrum_and_linewidth(build_regression_system(sys, point.steady.state, xi), options);
    point.spectrum_ok = true;
  } catch (const Error& e) {
    point.error = e.what();
  }
  return point;
}

SpectralPoint solve_spectral_point(const ModelSpec& spec, double xi, const AssemblyOptions& assembly,
                                   const SolverOptions& solver, const SpectrumOptions& options) {
  const CompiledMomentSystem sys = compile_rhs(complete_system(spec, assembly));
  return solve_spectral_point(sys, thermal_initial_state(sys), xi, solver, options);
}

void fit_pulling(PullingResult& out) {
  const std::size_t n = out.detunings.size();
  if (out.shifts.size() != n || out.masing.size() != n)
    throw DomainError("pulling data columns differ in length");
  auto fit = [&](double max_x, double& slope, double& intercept) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    int k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!out.masing[i] || out.detunings[i] > max_x) continue;
      const double x = out.detunings[i], y = out.shifts[i];
      sx += x, sy += y, sxx += x * x, sxy += x * y, syy += y * y, ++k;
    }
    if (k < 2) return std::numeric_limits<double>::quiet_NaN();
    const double vx = sxx - sx * sx / k, vy = syy - sy * sy / k, cxy = sxy - sx * sy / k;
    slope = vx > 0 ? cxy / vx : 0.0;
    intercept = (sy - slope * sx) / k;
    if (k < 3) return 1.0;
    return vy > 0 ? cxy * cxy / (vx * vy) : 1.0;
  };
  if (std::none_of(out.masing.begin(), out.masing.end(), [](bool b) { return b; }))
    throw DomainError("masing is lost across the entire detuning grid");
  double max_x = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (out.masing[i]) max_x = std::max(max_x, out.detunings[i]);
  out.r_squared = fit(max_x, out.factor, out.intercept);
  double s_inner = 0, i_inner = 0;
  out.r_squared_inner = fit(0.5 * max_x, s_inner, i_inner);
}

PullingResult cavity_pulling(const ModelSpec& spec, double xi, const std::vector<double>& detunings,
                             const PullingOptions& options) {
  if (detunings.empty()) throw DomainError("empty detuning grid");
  const std::size_t n = detunings.size();
  PullingResult out;
  out.detunings.resize(n);
  out.shifts.assign(n, 0.0);
  out.photon_numbers.assign(n, 0.0);
  out.linewidths_hz.assign(n, 0.0);
  std::vector<char> masing(n, 0);
  const double n_floor = options.masing_factor * std::max(spec.cavity.thermal_occupation(), 1.0);

  parallel_for(n, options.jobs, [&](std::size_t i) {
    ModelSpec point_spec = spec;
    point_spec.coupling.spin_frequency = spec.cavity.frequency - detunings[i];
    const SpectralPoint p =
        solve_spectral_point(point_spec, xi, options.assembly, options.solver, options.spectrum);
    out.detunings[i] = std::abs(detunings[i]);
    out.photon_numbers[i] = p.photon_number;
    if (!p.spectrum_ok) return;
    out.linewidths_hz[i] = p.spectrum.fwhm_hz;
    // maser frequency relative to the cavity: carrier + offset - omega_m
    const double carrier_minus_cavity =
        options.assembly.frame == RotatingFrame::spin ? -detunings[i] : 0.0;
    out.shifts[i] = std::abs(p.spectrum.peak_offset + carrier_minus_cavity);
    masing[i] = p.photon_number > n_floor;
  });
  out.masing.assign(masing.begin(), masing.end());

  fit_pulling(out);
  return out;
}

} // namespace spinmaser
