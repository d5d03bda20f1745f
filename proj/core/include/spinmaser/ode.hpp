#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <string>

namespace spinmaser {

enum class SolverMethod { dormand_prince, rosenbrock };

std::string_view method_name(SolverMethod m);
SolverMethod parse_method(std::string_view text);

/// Autonomous system y' = f(y) on one pump segment.
struct OdeProblem {
  std::function<void(const Eigen::VectorXd& y, Eigen::VectorXd& dydt)> rhs;
  std::function<void(const Eigen::VectorXd& y, Eigen::MatrixXd& jac)> jacobian;
  std::function<std::string(int component)> describe; ///< optional, for diagnostics
};

struct StepControl {
  double rtol = 1e-8;
  Eigen::VectorXd atol; ///< per component
  double max_step = 0.0;     ///< 0 = unlimited
  double initial_step = 0.0; ///< 0 = automatic
  std::size_t max_steps = 10'000'000;
};

struct SolverStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
  std::size_t jacobian_evals = 0;
  std::size_t decompositions = 0;

  SolverStats& operator+=(const SolverStats& o);
};

/// One accepted step with endpoint derivatives (for Hermite dense output).
struct StepInfo {
  double t0, t1;
  const Eigen::VectorXd& y0;
  const Eigen::VectorXd& f0;
  const Eigen::VectorXd& y1;
  const Eigen::VectorXd& f1;
};

/// Return false to stop integration after this step.
using StepObserver = std::function<bool(const StepInfo&)>;

/// Integrate from t0 towards t1; returns the time reached (t1 unless the
/// observer stopped early). `y` is updated in place.
double integrate_segment(SolverMethod method, const OdeProblem& problem, double t0, double t1,
                         Eigen::VectorXd& y, const StepControl& control, SolverStats& stats,
                         const StepObserver& observer = {});

/// Cubic Hermite interpolation inside an accepted step.
Eigen::VectorXd hermite(const StepInfo& step, double t);

} // namespace spinmaser
