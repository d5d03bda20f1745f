#include "spinmaser/dynamics.hpp"

#include "spinmaser/error.hpp"
#include "spinmaser/units.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace spinmaser {

cplx moment_value(const CompiledMomentSystem& sys, const Eigen::VectorXd& y,
                  const Monomial& product) {
  const auto& spec = sys.spec();
  const auto& opts = sys.system().options;
  cplx total{};
  for (const auto& [m, sign] :
       eliminate_population(product, spec.scheme.level_count, sys.system().eliminated_level)) {
    if (m.is_identity()) {
      total += sign;
      continue;
    }
    if (opts.phase_pruning && phase_charge(m, spec.scheme.upper) != 0)
      continue;
    const auto c = canonicalize_moment(m);
    const int idx = sys.key_index(c.key);
    if (idx < 0)
      throw DomainError("moment " + render(c.key) + " is not part of the assembled system");
    const cplx v = sys.value(y.data(), idx);
    total += sign * (c.conjugated ? std::conj(v) : v);
  }
  return total;
}

StateVector product_state(const CompiledMomentSystem& sys,
                          const std::function<cplx(int, int)>& cavity_moment,
                          const Eigen::MatrixXcd& rho) {
  const auto& keys = sys.system().keys;
  std::vector<cplx> values(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& m = keys[i].mono;
    cplx v = cavity_moment(m.creations, m.annihilations);
    for (const auto& e : m.emitters)
      v *= rho(e.col - 1, e.row - 1);
    values[i] = v;
  }
  return {0.0, sys.pack(values)};
}

StateVector thermal_initial_state(const CompiledMomentSystem& sys) {
  const auto& spec = sys.spec();
  const int L = spec.scheme.level_count;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(L, L);
  if (spec.scheme.initial_populations.empty())
    rho(0, 0) = 1.0;
  else
    for (int i = 0; i < L; ++i)
      rho(i, i) = spec.scheme.initial_populations[i];
  const double nth = spec.cavity.thermal_occupation();
  auto cavity = [nth](int p, int q) -> cplx {
    if (p != q)
      return 0.0;
    double v = 1.0;
    for (int k = 1; k <= p; ++k)
      v *= k * nth;
    return v;
  };
  return product_state(sys, cavity, rho);
}

Eigen::VectorXd absolute_tolerances(const CompiledMomentSystem& sys, const SolverOptions& o) {
  if (!(o.atol > 0.0) || !(o.rtol > 0.0))
    throw ConfigError("solver tolerances must be positive");
  Eigen::VectorXd atol = Eigen::VectorXd::Constant(sys.dimension(), o.atol);
  if (o.scale_photon_atol) {
    const double scale = std::max(sys.spec().cavity.thermal_occupation(), 1.0);
    for (int s : sys.photon_slots())
      atol[s] *= scale;
  }
  return atol;
}

namespace {

OdeProblem make_problem(const CompiledMomentSystem& sys, double xi) {
  OdeProblem p;
  p.rhs = [&sys, xi](const Eigen::VectorXd& y, Eigen::VectorXd& f) {
    f.resize(y.size());
    sys.rhs(y.data(), xi, f.data());
  };
  p.jacobian = [&sys, xi](const Eigen::VectorXd& y, Eigen::MatrixXd& j) { sys.jacobian(y, xi, j); };
  p.describe = [&sys](int component) {
    for (int k = 0; k < sys.key_count(); ++k) {
      if (sys.real_slot(k) == component)
        return "Re<" + render(sys.system().keys[k]) + ">";
      if (sys.imag_slot(k) == component)
        return "Im<" + render(sys.system().keys[k]) + ">";
    }
    return std::to_string(component);
  };
  return p;
}

StepControl make_control(const CompiledMomentSystem& sys, const SolverOptions& o) {
  StepControl c;
  c.rtol = o.rtol;
  c.atol = absolute_tolerances(sys, o);
  c.max_step = o.max_step;
  c.max_steps = o.max_steps;
  return c;
}

// Shared driver: `segments` holds (t_begin, t_end, xi) pieces covering the span.
Trajectory run(const CompiledMomentSystem& sys, const StateVector& state0,
               const std::vector<std::tuple<double, double, double>>& segments,
               const SolverOptions& options, const std::vector<double>& samples) {
  if (state0.y.size() != sys.dimension())
    throw DomainError("initial state has " + std::to_string(state0.y.size()) +
                      " components, system needs " + std::to_string(sys.dimension()));
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (!(samples[i] > samples[i - 1]))
      throw DomainError("sample times must be strictly increasing");

  Trajectory traj;
  traj.dense_output = !samples.empty();
  const StepControl control = make_control(sys, options);
  Eigen::VectorXd y = state0.y;
  std::size_t next = 0;
  const double t_begin = state0.time;
  while (next < samples.size() && samples[next] < t_begin)
    ++next;
  if (samples.empty()) {
    traj.times.push_back(t_begin);
    traj.states.push_back(y);
  } else if (next < samples.size() && samples[next] == t_begin) {
    traj.times.push_back(t_begin);
    traj.states.push_back(y);
    ++next;
  }

  StepObserver observer = [&](const StepInfo& s) {
    if (samples.empty()) {
      traj.times.push_back(s.t1);
      traj.states.push_back(s.y1);
      return true;
    }
    while (next < samples.size() && samples[next] <= s.t1) {
      traj.times.push_back(samples[next]);
      traj.states.push_back(samples[next] == s.t1 ? s.y1 : hermite(s, samples[next]));
      ++next;
    }
    return true;
  };

  for (const auto& [a, b, xi] : segments) {
    if (b <= a)
      continue;
    const OdeProblem problem = make_problem(sys, xi);
    integrate_segment(options.method, problem, a, b, y, control, traj.stats, observer);
  }
  return traj;
}

} // namespace

Trajectory integrate(const CompiledMomentSystem& sys, const StateVector& state0, double t_end,
                     const SolverOptions& options, const std::vector<double>& sample_times) {
  const double t0 = state0.time;
  if (!(t_end >= t0))
    throw DomainError("integration end time precedes the start time");
  const auto& pump = sys.spec().pump;
  std::vector<double> cuts{t0};
  for (double b : pump.breakpoints(t0, t_end))
    cuts.push_back(b);
  cuts.push_back(t_end);
  std::vector<std::tuple<double, double, double>> segments;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    segments.emplace_back(cuts[i], cuts[i + 1], pump.rate_at(0.5 * (cuts[i] + cuts[i + 1])));
  return run(sys, state0, segments, options, sample_times);
}

Trajectory integrate_constant(const CompiledMomentSystem& sys, const StateVector& state0,
                              double t_end, double xi, const SolverOptions& options,
                              const std::vector<double>& sample_times) {
  if (!(t_end >= state0.time))
    throw DomainError("integration end time precedes the start time");
  return run(sys, state0, {{state0.time, t_end, xi}}, options, sample_times);
}

std::string_view steady_status_name(SteadyStatus s) {
  switch (s) {
  case SteadyStatus::converged:
    return "converged";
  case SteadyStatus::newton:
    return "newton";
  case SteadyStatus::relaxed_only:
    return "relaxed-only";
  case SteadyStatus::no_fixed_point:
    return "no-fixed-point";
  }
  return "unknown";
}

std::pair<double, double> steady_residual(const CompiledMomentSystem& sys, const Eigen::VectorXd& y,
                                          double xi) {
  Eigen::VectorXd f(sys.dimension());
  Eigen::VectorXd mag(sys.dimension());
  sys.rhs(y.data(), xi, f.data());
  sys.rhs_magnitude(y.data(), xi, mag.data());
  const double denom = std::max(y.norm(), 1.0);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  return {f.norm() / denom, 16.0 * eps * mag.norm() / denom};
}

namespace {

bool physically_valid(const CompiledMomentSystem& sys, const Eigen::VectorXd& y) {
  if (!y.allFinite())
    return false;
  const auto& sc = sys.spec().scheme;
  for (int i = 1; i <= sc.level_count; ++i) {
    const double p = moment_value(sys, y, Monomial{0, 0, {{1, i, i}}}).real();
    if (p < -1e-6 || p > 1.0 + 1e-6)
      return false;
  }
  return moment_value(sys, y, Monomial{1, 1, {}}).real() >= -1e-6;
}

struct NewtonOutcome {
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd y;
};

NewtonOutcome newton(const CompiledMomentSystem& sys, Eigen::VectorXd y, double xi,
                     const SolverOptions& o, SolverStats& stats) {
  NewtonOutcome out;
  const int n = sys.dimension();
  Eigen::VectorXd f(n), trial_f(n);
  Eigen::MatrixXd jac;
  sys.rhs(y.data(), xi, f.data());
  ++stats.rhs_evals;
  double fnorm = f.norm();
  for (int it = 0; it < o.newton_max_iterations; ++it) {
    auto [res, floor] = steady_residual(sys, y, xi);
    const double target = std::max(1e-12, 4.0 * floor);
    if (res <= target) {
      out.converged = true;
      break;
    }
    sys.jacobian(y, xi, jac);
    ++stats.jacobian_evals;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    ++stats.decompositions;
    const Eigen::VectorXd delta = lu.solve(-f);
    if (!delta.allFinite())
      break;
    ++out.iterations;
    double lambda = 1.0;
    bool improved = false;
    for (int k = 0; k < 12; ++k, lambda *= 0.5) {
      const Eigen::VectorXd trial = y + lambda * delta;
      sys.rhs(trial.data(), xi, trial_f.data());
      ++stats.rhs_evals;
      const double tn = trial_f.norm();
      if (std::isfinite(tn) && tn < (1.0 - 1e-4 * lambda) * fnorm) {
        y = trial;
        f = trial_f;
        fnorm = tn;
        improved = true;
        break;
      }
    }
    if (!improved) {
      // Stagnation at the rounding floor still counts as convergence.
      auto [r2, fl2] = steady_residual(sys, y, xi);
      out.converged = r2 <= std::max(1e-12, 64.0 * fl2);
      break;
    }
    if (delta.norm() * lambda <= 1e-15 * std::max(y.norm(), 1.0)) {
      auto [r2, fl2] = steady_residual(sys, y, xi);
      out.converged = r2 <= std::max(1e-12, 64.0 * fl2);
      break;
    }
  }
  if (!out.converged) {
    auto [res, floor] = steady_residual(sys, y, xi);
    out.converged = res <= std::max(1e-12, 4.0 * floor);
  }
  out.y = std::move(y);
  return out;
}

} // namespace

SteadyStateResult find_steady_state(const CompiledMomentSystem& sys, const StateVector& state0,
                                    double xi, const SolverOptions& options) {
  if (!(xi >= 0.0))
    throw DomainError("pump rate must be non-negative");
  SteadyStateResult result;
  const StepControl control = make_control(sys, options);
  const OdeProblem problem = make_problem(sys, xi);

  Eigen::VectorXd y = state0.y;
  int below = 0;
  bool relaxed = false;
  double plateau_min = std::numeric_limits<double>::infinity();
  double plateau_max = 0.0;
  Eigen::VectorXd mag(sys.dimension());
  const StepObserver observer = [&](const StepInfo& s) {
    const double denom = std::max(s.y1.norm(), 1.0);
    const double res = s.f1.norm() / denom;
    sys.rhs_magnitude(s.y1.data(), xi, mag.data());
    const double floor = 16.0 * std::numeric_limits<double>::epsilon() * mag.norm() / denom;
    if (res < std::max(options.steady_tol, 4.0 * floor)) {
      if (++below >= options.steady_window) {
        relaxed = true;
        return false;
      }
    } else {
      below = 0;
    }
    plateau_min = std::min(plateau_min, res);
    plateau_max = std::max(plateau_max, res);
    return true;
  };
  const double t_reached = integrate_segment(options.method, problem, state0.time,
                                             state0.time + options.steady_max_time, y, control,
                                             result.stats, observer);
  result.state.time = t_reached;

  NewtonOutcome refined;
  if (options.newton_refine)
    refined = newton(sys, y, xi, options, result.stats);
  result.newton_iterations = refined.iterations;

  const bool newton_ok = options.newton_refine && refined.converged &&
                         physically_valid(sys, refined.y) &&
                         (relaxed || (refined.y - y).norm() <= 1e-3 * std::max(y.norm(), 1.0));

  if (newton_ok) {
    result.state.y = refined.y;
    result.status = relaxed ? SteadyStatus::converged : SteadyStatus::newton;
  } else {
    result.state.y = y;
    if (relaxed) {
      result.status = options.newton_refine ? SteadyStatus::relaxed_only : SteadyStatus::converged;
      if (options.newton_refine)
        result.warnings.push_back("newton refinement failed; returning the relaxed state");
    } else {
      result.status = SteadyStatus::no_fixed_point;
      result.warnings.push_back("no fixed point: residual stays between " +
                                format_double(plateau_min) + " and " + format_double(plateau_max) +
                                " after " + format_double(options.steady_max_time) +
                                " s of relaxation (limit cycle or slow drift)");
    }
  }
  std::tie(result.residual, result.roundoff_floor) = steady_residual(sys, result.state.y, xi);
  return result;
}

} // namespace spinmaser
