#include "spinmaser/ode.hpp"

#include "spinmaser/error.hpp"
#include "spinmaser/units.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace spinmaser {

std::string_view method_name(SolverMethod m) {
  return m == SolverMethod::dormand_prince ? "dormand-prince" : "rosenbrock";
}

SolverMethod parse_method(std::string_view text) {
  if (text == "dormand-prince" || text == "dp5" || text == "explicit")
    return SolverMethod::dormand_prince;
  if (text == "rosenbrock" || text == "stiff" || text == "implicit")
    return SolverMethod::rosenbrock;
  throw ConfigError("unknown solver method '" + std::string(text) +
                    "' (expected rosenbrock or dormand-prince)");
}

SolverStats& SolverStats::operator+=(const SolverStats& o) {
  steps += o.steps;
  rejected += o.rejected;
  rhs_evals += o.rhs_evals;
  jacobian_evals += o.jacobian_evals;
  decompositions += o.decompositions;
  return *this;
}

Eigen::VectorXd hermite(const StepInfo& s, double t) {
  const double h = s.t1 - s.t0;
  if (h == 0.0)
    return s.y1;
  const double th = (t - s.t0) / h;
  const double th2 = th * th;
  const double th3 = th2 * th;
  const double h00 = 2 * th3 - 3 * th2 + 1;
  const double h10 = th3 - 2 * th2 + th;
  const double h01 = -2 * th3 + 3 * th2;
  const double h11 = th3 - th2;
  return h00 * s.y0 + (h10 * h) * s.f0 + h01 * s.y1 + (h11 * h) * s.f1;
}

namespace {

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                  const StepControl& c) {
  double sum = 0.0;
  const Eigen::Index n = err.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double scale = c.atol[i] + c.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / scale;
    sum += r * r;
  }
  return n > 0 ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

void check_finite(const Eigen::VectorXd& v, double t, const OdeProblem& p) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::string what = p.describe ? p.describe(static_cast<int>(i)) : std::to_string(i);
      throw ConvergenceError("non-finite derivative of " + what + " at t = " + format_double(t) +
                             " s");
    }
  }
}

double initial_step(const OdeProblem& p, const Eigen::VectorXd& y0, const Eigen::VectorXd& f0,
                    double span, int order, const StepControl& c, SolverStats& stats) {
  // Hairer, Norsett & Wanner II.4 starting-step heuristic.
  Eigen::VectorXd scale = c.atol.array() + c.rtol * y0.array().abs();
  const double d0 = std::sqrt((y0.array() / scale.array()).square().mean());
  const double d1 = std::sqrt((f0.array() / scale.array()).square().mean());
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  Eigen::VectorXd y1 = y0 + h0 * f0;
  Eigen::VectorXd f1(y0.size());
  p.rhs(y1, f1);
  ++stats.rhs_evals;
  const double d2 = std::sqrt(((f1 - f0).array() / scale.array()).square().mean()) / h0;
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6 * span, h0 * 1e-3)
                                : std::pow(0.01 / dm, 1.0 / (order + 1));
  double h = std::min({100.0 * h0, h1, span});
  if (c.max_step > 0.0)
    h = std::min(h, c.max_step);
  if (c.initial_step > 0.0)
    h = std::min(c.initial_step, span);
  return h;
}

// Dormand-Prince 5(4) tableau.
namespace dp {
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
} // namespace dp

// Shampine's L-stable 4(3) Rosenbrock pair, gamma = 1/2.
namespace ros {
constexpr double gam = 0.5;
constexpr double a21 = 2.0;
constexpr double a31 = 48.0 / 25, a32 = 6.0 / 25;
constexpr double c21 = -8.0;
constexpr double c31 = 372.0 / 25, c32 = 12.0 / 5;
constexpr double c41 = -112.0 / 125, c42 = -54.0 / 125, c43 = -2.0 / 5;
constexpr double b1 = 19.0 / 9, b2 = 0.5, b3 = 25.0 / 108, b4 = 125.0 / 108;
constexpr double e1 = 17.0 / 54, e2 = 7.0 / 36, e3 = 0.0, e4 = 125.0 / 108;
} // namespace ros

struct Workspace {
  Eigen::VectorXd f0, f1, ynew, err, k2, k3, k4, k5, k6, k7, tmp;
  Eigen::MatrixXd jac, w;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  explicit Workspace(Eigen::Index n)
      : f0(n), f1(n), ynew(n), err(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n) {}
};

} // namespace

double integrate_segment(SolverMethod method, const OdeProblem& p, double t0, double t1,
                         Eigen::VectorXd& y, const StepControl& c, SolverStats& stats,
                         const StepObserver& observer) {
  if (!(t1 >= t0))
    throw DomainError("integration interval must be increasing");
  if (t1 == t0)
    return t0;
  if (c.atol.size() != y.size())
    throw InternalError("absolute tolerance vector has the wrong size");
  if (method == SolverMethod::rosenbrock && !p.jacobian)
    throw InternalError("rosenbrock method needs a Jacobian");

  const Eigen::Index n = y.size();
  Workspace ws(n);
  p.rhs(y, ws.f0);
  ++stats.rhs_evals;
  check_finite(ws.f0, t0, p);

  const int order = method == SolverMethod::dormand_prince ? 5 : 4;
  const double err_exponent = method == SolverMethod::dormand_prince ? 1.0 / 5 : 1.0 / 4;
  double h = initial_step(p, y, ws.f0, t1 - t0, order, c, stats);
  double t = t0;
  std::size_t local_steps = 0;
  bool last_rejected = false;
  bool jacobian_current = false;

  while (t < t1) {
    if (local_steps++ >= c.max_steps)
      throw ConvergenceError("step limit of " + std::to_string(c.max_steps) + " reached at t = " +
                             format_double(t) + " s");
    if (c.max_step > 0.0)
      h = std::min(h, c.max_step);
    bool final_step = false;
    if (t + h >= t1 || t + 1.01 * h >= t1) {
      h = t1 - t;
      final_step = true;
    }
    if (h <= 1e-14 * std::max(std::abs(t), 1e-30) || h <= 0.0) {
      throw ConvergenceError(
          "step size underflow at t = " + format_double(t) + " s" +
          (method == SolverMethod::dormand_prince
               ? "; the system is probably stiff, use the rosenbrock method"
               : ""));
    }

    if (method == SolverMethod::dormand_prince) {
      using namespace dp;
      const auto& k1 = ws.f0;
      ws.tmp = y + h * a21 * k1;
      p.rhs(ws.tmp, ws.k2);
      ws.tmp = y + h * (a31 * k1 + a32 * ws.k2);
      p.rhs(ws.tmp, ws.k3);
      ws.tmp = y + h * (a41 * k1 + a42 * ws.k2 + a43 * ws.k3);
      p.rhs(ws.tmp, ws.k4);
      ws.tmp = y + h * (a51 * k1 + a52 * ws.k2 + a53 * ws.k3 + a54 * ws.k4);
      p.rhs(ws.tmp, ws.k5);
      ws.tmp = y + h * (a61 * k1 + a62 * ws.k2 + a63 * ws.k3 + a64 * ws.k4 + a65 * ws.k5);
      p.rhs(ws.tmp, ws.k6);
      ws.ynew = y + h * (a71 * k1 + a73 * ws.k3 + a74 * ws.k4 + a75 * ws.k5 + a76 * ws.k6);
      p.rhs(ws.ynew, ws.k7);
      stats.rhs_evals += 6;
      ws.err = h * (e1 * k1 + e3 * ws.k3 + e4 * ws.k4 + e5 * ws.k5 + e6 * ws.k6 + e7 * ws.k7);
      ws.f1 = ws.k7;
    } else {
      using namespace ros;
      if (!jacobian_current) {
        p.jacobian(y, ws.jac);
        ++stats.jacobian_evals;
        jacobian_current = true;
      }
      ws.w = -ws.jac;
      ws.w.diagonal().array() += 1.0 / (gam * h);
      ws.lu.compute(ws.w);
      ++stats.decompositions;
      // g1..g4 are stored in k2..k5.
      ws.k2 = ws.lu.solve(ws.f0);
      ws.tmp = y + a21 * ws.k2;
      p.rhs(ws.tmp, ws.k6);
      ws.k3 = ws.lu.solve(ws.k6 + (c21 / h) * ws.k2);
      ws.tmp = y + a31 * ws.k2 + a32 * ws.k3;
      p.rhs(ws.tmp, ws.k6);
      ws.k4 = ws.lu.solve(ws.k6 + (c31 * ws.k2 + c32 * ws.k3) / h);
      ws.k5 = ws.lu.solve(ws.k6 + (c41 * ws.k2 + c42 * ws.k3 + c43 * ws.k4) / h);
      ws.ynew = y + b1 * ws.k2 + b2 * ws.k3 + b3 * ws.k4 + b4 * ws.k5;
      ws.err = e1 * ws.k2 + e2 * ws.k3 + e3 * ws.k4 + e4 * ws.k5;
      stats.rhs_evals += 2;
    }

    double en = error_norm(ws.err, y, ws.ynew, c);
    if (!std::isfinite(en))
      en = 1e10;

    if (en <= 1.0) {
      if (method == SolverMethod::rosenbrock) {
        p.rhs(ws.ynew, ws.f1);
        ++stats.rhs_evals;
      }
      check_finite(ws.f1, t + h, p);
      const double t_new = final_step ? t1 : t + h;
      ++stats.steps;
      bool keep_going = true;
      if (observer)
        keep_going = observer(StepInfo{t, t_new, y, ws.f0, ws.ynew, ws.f1});
      t = t_new;
      y.swap(ws.ynew);
      ws.f0.swap(ws.f1);
      jacobian_current = false;
      if (!keep_going)
        return t;
      double fac = en == 0.0 ? 5.0 : 0.9 * std::pow(en, -err_exponent);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
      h *= fac;
      last_rejected = false;
    } else {
      ++stats.rejected;
      const double fac = std::max(0.2, 0.9 * std::pow(en, -err_exponent));
      h *= fac;
      last_rejected = true;
    }
  }
  return t;
}

} // namespace spinmaser
