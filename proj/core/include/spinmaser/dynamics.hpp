#pragma once

#include "spinmaser/assembler.hpp"
#include "spinmaser/ode.hpp"

#include <Eigen/Core>

#include <limits>
#include <string>
#include <vector>

namespace spinmaser {

struct SolverOptions {
  SolverMethod method = SolverMethod::rosenbrock;
  double rtol = 1e-8;
  double atol = 1e-10;
  bool scale_photon_atol = true; ///< photon-number atol multiplied by max(n_th, 1)
  double max_step = 0.0;         ///< s, 0 = unlimited
  std::size_t max_steps = 10'000'000;

  // Steady-state search.
  double steady_tol = 1e-10;  ///< ||f|| / max(||y||, 1)
  int steady_window = 10;     ///< consecutive accepted steps below steady_tol
  double steady_max_time = 10.0; ///< s of model time before giving up on relaxation
  bool newton_refine = true;
  int newton_max_iterations = 50;
};

/// Packed moment values at one time.
struct StateVector {
  double time = 0.0;
  Eigen::VectorXd y;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  bool dense_output = false; ///< samples come from Hermite interpolation
  SolverStats stats;

  std::size_t size() const { return times.size(); }
  StateVector at(std::size_t i) const { return {times[i], states[i]}; }
};

/// Expectation value of any normal-ordered product of order <= 2. Moments
/// removed by phase pruning evaluate to zero; other missing moments throw.
cplx moment_value(const CompiledMomentSystem& sys, const Eigen::VectorXd& y,
                  const Monomial& product);

/// Product state: thermal cavity at n_th and every emitter in the scheme's
/// initial populations, no coherences.
StateVector thermal_initial_state(const CompiledMomentSystem& sys);

/// Moments of an uncorrelated product state given the cavity normal-ordered
/// moments <a†^p a^q> and a single-emitter density matrix rho(i,j) = <s^{ji}>.
StateVector product_state(const CompiledMomentSystem& sys,
                          const std::function<cplx(int p, int q)>& cavity_moment,
                          const Eigen::MatrixXcd& emitter_rho);

Eigen::VectorXd absolute_tolerances(const CompiledMomentSystem& sys, const SolverOptions& options);

/// Integrate over [state0.time, t_end] following the model's pump schedule.
/// Samples are taken at `sample_times` (dense output) or at every accepted
/// step when the grid is empty.
Trajectory integrate(const CompiledMomentSystem& sys, const StateVector& state0, double t_end,
                     const SolverOptions& options, const std::vector<double>& sample_times = {});

/// Same with a constant pump rate instead of the schedule.
Trajectory integrate_constant(const CompiledMomentSystem& sys, const StateVector& state0,
                              double t_end, double xi, const SolverOptions& options,
                              const std::vector<double>& sample_times = {});

enum class SteadyStatus { converged, newton, relaxed_only, no_fixed_point };
std::string_view steady_status_name(SteadyStatus s);

struct SteadyStateResult {
  StateVector state;
  SteadyStatus status = SteadyStatus::no_fixed_point;
  double residual = 0.0;        ///< ||f|| / max(||y||, 1)
  double roundoff_floor = 0.0;  ///< residual attainable in double precision
  int newton_iterations = 0;
  SolverStats stats;
  std::vector<std::string> warnings;

  bool ok() const { return status != SteadyStatus::no_fixed_point; }
};

/// Relax with constant pump until the residual criterion holds, then refine by
/// damped Newton with the analytic Jacobian.
SteadyStateResult find_steady_state(const CompiledMomentSystem& sys, const StateVector& state0,
                                    double xi, const SolverOptions& options = {});

/// Normalized residual ||f|| / max(||y||, 1) and its rounding-error floor.
std::pair<double, double> steady_residual(const CompiledMomentSystem& sys, const Eigen::VectorXd& y,
                                          double xi);

} // namespace spinmaser
