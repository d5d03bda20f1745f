#pragma once

#include "spinmaser/dynamics.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace spinmaser {

/// Linear equations for c(tau) = (<X_1(tau) a(0)>, <X_2(tau) a(0)>, ...) where
/// X_1 = a† and the remaining X_k are the single-emitter operators it couples
/// to. Second moments in the equations of the X_k are factorized with the
/// other factor frozen at its steady value.
struct RegressionSystem {
  std::vector<Monomial> operators;  ///< X_k; operators[0] is a†
  Eigen::MatrixXcd generator;       ///< dc/dtau = generator * c
  Eigen::VectorXcd initial;         ///< c(0) = <X_k a>_ss
  double carrier = 0.0;             ///< rad/s; frequency of the rotating frame
  double steady_residual = 0.0;

  int size() const { return static_cast<int>(operators.size()); }
};

struct RegressionOptions {
  /// Largest accepted steady residual; the rounding floor of the state is
  /// always allowed (ten times over).
  double residual_tol = 1e-6;
};

RegressionSystem build_regression_system(const CompiledMomentSystem& sys, const StateVector& steady,
                                         double xi, const RegressionOptions& options = {});

struct RegressionMode {
  cplx eigenvalue;
  cplx residue; ///< weight of exp(eigenvalue tau) in <a†(tau) a(0)>
};

enum class CorrelationMethod { eigen, ode };

struct CorrelationSeries {
  std::vector<double> tau;
  std::vector<cplx> value; ///< <a†(tau) a(0)>
  CorrelationMethod method = CorrelationMethod::eigen;
  std::vector<std::string> warnings;
};

/// Eigen-decomposition of the generator projected onto <a†(tau) a(0)>.
/// Throws DomainError when the eigenvector basis is too ill-conditioned.
std::vector<RegressionMode> regression_modes(const RegressionSystem& rs);

/// c(tau) on a grid of tau >= 0. The eigen path falls back to ODE
/// integration (with a warning) for defective generators.
CorrelationSeries correlation_function(const RegressionSystem& rs, const std::vector<double>& tau,
                                       CorrelationMethod method = CorrelationMethod::eigen);

enum class SpectrumMethod { eigenmode, fft };
std::string_view spectrum_method_name(SpectrumMethod m);

struct SpectrumOptions {
  SpectrumMethod method = SpectrumMethod::eigenmode;
  int samples = 801;        ///< spectrum grid points (eigenmode path)
  double span_widths = 10;  ///< grid half-span in units of the FWHM
  int fft_points = 1 << 16; ///< FFT length (fft path)
};

struct SpectrumResult {
  std::vector<RegressionMode> modes;
  int dominant = -1;              ///< index into modes
  std::vector<double> offsets;    ///< rad/s relative to the carrier
  std::vector<double> values;     ///< S(omega)
  double peak_offset = 0.0;       ///< rad/s
  double peak_frequency = 0.0;    ///< rad/s, carrier restored
  double fwhm_hz = 0.0;
  SpectrumMethod method = SpectrumMethod::eigenmode;
  std::vector<std::string> warnings;
};

/// S(omega) = 2 Re sum_k r_k / (i(omega - Im l_k) - Re l_k).
double spectral_density(const std::vector<RegressionMode>& modes, double omega);

SpectrumResult spectrum_and_linewidth(const RegressionSystem& rs,
                                      const SpectrumOptions& options = {});

/// Steady state and spectrum of one model at constant pump.
struct SpectralPoint {
  SteadyStateResult steady;
  SpectrumResult spectrum;
  double photon_number = 0.0;
  bool spectrum_ok = false;
  std::string error;
};

SpectralPoint solve_spectral_point(const CompiledMomentSystem& sys, const StateVector& start,
                                   double xi, const SolverOptions& solver,
                                   const SpectrumOptions& options = {}, bool with_spectrum = true);
SpectralPoint solve_spectral_point(const ModelSpec& spec, double xi, const AssemblyOptions& assembly,
                                   const SolverOptions& solver, const SpectrumOptions& options = {});

struct PullingOptions {
  AssemblyOptions assembly;
  SolverOptions solver;
  SpectrumOptions spectrum;
  double masing_factor = 10.0; ///< masing means n > masing_factor * max(n_th, 1)
  unsigned jobs = 0;
};

struct PullingResult {
  std::vector<double> detunings;     ///< |omega_m - omega_s|, rad/s
  std::vector<double> shifts;        ///< |omega_maser - omega_m|, rad/s
  std::vector<double> photon_numbers;
  std::vector<double> linewidths_hz;
  std::vector<bool> masing;
  double factor = 0.0;               ///< slope of shift against detuning
  double intercept = 0.0;
  double r_squared = 0.0;
  double r_squared_inner = 0.0;      ///< inner half of the masing points
};

/// Fills factor, intercept and the R^2 values from detunings, shifts and the
/// masing flags. Throws DomainError when no point is masing.
void fit_pulling(PullingResult& result);

/// Holds the cavity fixed and moves the spin transition by each detuning.
PullingResult cavity_pulling(const ModelSpec& spec, double xi, const std::vector<double>& detunings,
                             const PullingOptions& options = {});

} // namespace spinmaser
