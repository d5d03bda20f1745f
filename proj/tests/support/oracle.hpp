#pragma once

// Brute-force master equation on the full Hilbert space (truncated cavity x
// N explicit emitters). Independent of the moment machinery: it only shares
// the ModelSpec data structure.

#include <spinmaser/algebra.hpp>
#include <spinmaser/assembler.hpp>
#include <spinmaser/model.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

using spinmaser::cplx;
using Mat = Eigen::MatrixXcd;

class DensityMatrixModel {
public:
  DensityMatrixModel(const spinmaser::ModelSpec& spec, int emitters, int fock_cutoff,
                     spinmaser::RotatingFrame frame = spinmaser::RotatingFrame::spin)
      : spec_(spec), emitters_(emitters), fock_(fock_cutoff + 1), levels_(spec.scheme.level_count) {
    dim_ = fock_;
    for (int k = 0; k < emitters_; ++k) dim_ *= levels_;

    Mat a_small = Mat::Zero(fock_, fock_);
    for (int n = 1; n < fock_; ++n) a_small(n - 1, n) = std::sqrt(double(n));
    a_ = embed(a_small, -1);
    ad_ = a_.adjoint();

    const int lo = spec.scheme.lower, up = spec.scheme.upper;
    const double g = spec.coupling.g, delta = spec.detuning();
    h_ = Mat::Zero(dim_, dim_);
    if (frame == spinmaser::RotatingFrame::spin) h_ += delta * ad_ * a_;
    for (int k = 1; k <= emitters_; ++k) {
      if (frame == spinmaser::RotatingFrame::cavity) h_ -= delta * sigma(k, up, up);
      h_ += g * (ad_ * sigma(k, lo, up) + sigma(k, up, lo) * a_);
    }

    const double kappa = spec.cavity.damping;
    const double nth = spec.cavity.thermal_occupation();
    collapse_.push_back({a_, kappa * (nth + 1.0), 0.0});
    collapse_.push_back({ad_, kappa * nth, 0.0});
    for (const auto& ch : spec.channels)
      for (int k = 1; k <= emitters_; ++k) {
        if (ch.kind == spinmaser::ChannelKind::transition)
          collapse_.push_back({sigma(k, ch.to, ch.from), ch.rate, ch.pump_scaled ? 1.0 : 0.0});
        else
          collapse_.push_back({sigma(k, ch.from, ch.from) - sigma(k, ch.to, ch.to), 0.5 * ch.rate, 0.0});
      }
  }

  int dimension() const { return dim_; }
  int emitters() const { return emitters_; }
  const Mat& a() const { return a_; }

  /// |row><col| on emitter k (1-based).
  Mat sigma(int k, int row, int col) const {
    Mat s = Mat::Zero(levels_, levels_);
    s(row - 1, col - 1) = 1.0;
    return embed(s, k - 1);
  }

  Mat operator_of(const spinmaser::Monomial& m) const {
    Mat op = Mat::Identity(dim_, dim_);
    for (int i = 0; i < m.creations; ++i) op = op * ad_;
    for (int i = 0; i < m.annihilations; ++i) op = op * a_;
    for (const auto& e : m.emitters) op = op * sigma(e.emitter, e.row, e.col);
    return op;
  }

  cplx expect(const spinmaser::Monomial& m, const Mat& rho) const { return (operator_of(m) * rho).trace(); }

  /// d rho / dt.
  Mat lindblad(const Mat& rho, double xi) const {
    const cplx I(0.0, 1.0);
    Mat out = -I * (h_ * rho - rho * h_);
    for (const auto& c : collapse_) {
      const double w = c.weight + c.pump * xi;
      if (w == 0.0) continue;
      const Mat cd = c.op.adjoint();
      const Mat cdc = cd * c.op;
      out += w * (c.op * rho * cd - 0.5 * (cdc * rho + rho * cdc));
    }
    return out;
  }

  /// exp(L t) rho by a Taylor series (short t only).
  Mat propagate(const Mat& rho, double t, double xi, int terms = 12) const {
    Mat out = rho, term = rho;
    for (int n = 1; n <= terms; ++n) {
      term = lindblad(term, xi) * (t / n);
      out += term;
    }
    return out;
  }

  Mat product_state(const Mat& cavity, const Mat& emitter) const {
    Mat rho = cavity;
    for (int k = 0; k < emitters_; ++k) rho = Eigen::kroneckerProduct(rho, emitter).eval();
    return rho;
  }

private:
  struct Collapse {
    Mat op;
    double weight;
    double pump;
  };

  // slot -1 = cavity, otherwise emitter index.
  Mat embed(const Mat& local, int slot) const {
    Mat out = slot == -1 ? local : Mat::Identity(fock_, fock_);
    for (int k = 0; k < emitters_; ++k) {
      const Mat f = (k == slot) ? local : Mat::Identity(levels_, levels_);
      out = Eigen::kroneckerProduct(out, f).eval();
    }
    return out;
  }

  spinmaser::ModelSpec spec_;
  int emitters_, fock_, levels_, dim_;
  Mat a_, ad_, h_;
  std::vector<Collapse> collapse_;
};

/// Truncated, renormalized coherent state.
inline Mat coherent_state(int cutoff, cplx alpha) {
  Eigen::VectorXcd psi(cutoff + 1);
  double fact = 1.0;
  for (int n = 0; n <= cutoff; ++n) {
    if (n > 0) fact *= n;
    psi(n) = std::exp(-0.5 * std::norm(alpha)) * std::pow(alpha, n) / std::sqrt(fact);
  }
  psi /= psi.norm();
  return psi * psi.adjoint();
}

/// Geometric photon distribution with ratio x, truncated and renormalized.
inline Mat thermal_state(int cutoff, double x) {
  Mat rho = Mat::Zero(cutoff + 1, cutoff + 1);
  double sum = 0.0;
  for (int n = 0; n <= cutoff; ++n) sum += std::pow(x, n);
  for (int n = 0; n <= cutoff; ++n) rho(n, n) = std::pow(x, n) / sum;
  return rho;
}

/// Random density matrix; with `phase_free` the upper level carries no
/// coherence with the other levels.
inline Mat random_emitter_state(int levels, int upper, bool phase_free, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Mat g(levels, levels);
  for (int i = 0; i < levels; ++i)
    for (int j = 0; j < levels; ++j) g(i, j) = cplx(nd(rng), nd(rng));
  Mat rho = g * g.adjoint();
  if (phase_free)
    for (int i = 0; i < levels; ++i)
      if (i != upper - 1) rho(i, upper - 1) = rho(upper - 1, i) = 0.0;
  return rho / rho.trace().real();
}

/// Three-level test model with every kind of channel and O(1) rates.
inline spinmaser::ModelSpec three_level_model(double n_thermal = 0.02) {
  spinmaser::ModelSpec m;
  m.name = "three-level";
  m.scheme.level_count = 3;
  m.scheme.labels = {"g", "e", "aux"};
  m.scheme.lower = 1;
  m.scheme.upper = 2;
  m.scheme.eliminated = 3;
  m.cavity.frequency = 2.0e11;
  m.cavity.damping = 1.3;
  // temperature giving the requested thermal occupation
  m.cavity.temperature = 1.054571817e-34 * m.cavity.frequency / (1.380649e-23 * std::log1p(1.0 / n_thermal));
  m.coupling.g = 0.9;
  m.coupling.emitter_count = 2.0;
  m.coupling.spin_frequency = m.cavity.frequency - 0.7;
  using spinmaser::ChannelKind;
  m.channels = {
      {ChannelKind::transition, 1, 3, 0.4, true},
      {ChannelKind::transition, 3, 2, 1.1, false},
      {ChannelKind::transition, 2, 1, 0.3, false},
      {ChannelKind::transition, 1, 2, 0.2, false},
      {ChannelKind::transition, 3, 1, 0.5, false},
      {ChannelKind::dephasing, 1, 2, 0.8, false},
      {ChannelKind::dephasing, 3, 2, 0.6, false},
  };
  m.pump = spinmaser::PumpSchedule::constant(0.0);
  return m;
}

struct RhsComparison {
  double max_abs_error = 0.0;
  double scale = 0.0; ///< max |exact derivative|
  double relative() const { return scale > 0.0 ? max_abs_error / scale : max_abs_error; }
};

/// Compares the compiled closed RHS on the moments of `rho` against the
/// derivative of the exact evolution. With `finite_difference` the exact
/// derivative is a central difference of the propagated state, otherwise
/// tr(O L rho).
inline RhsComparison compare_rhs(const spinmaser::CompiledMomentSystem& sys, const DensityMatrixModel& dm,
                                 const Mat& rho, double xi, bool finite_difference = true) {
  const auto& keys = sys.system().keys;
  std::vector<cplx> values(keys.size());
  // pair moments do not exist for a single emitter; their coefficients vanish
  auto physical = [&](std::size_t i) { return keys[i].emitter_count() <= dm.emitters(); };
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (physical(i)) values[i] = dm.expect(keys[i].mono, rho);
  const Eigen::VectorXd y = sys.pack(values);
  Eigen::VectorXd dy(y.size());
  sys.rhs(y, xi, dy);
  const std::vector<cplx> closed = sys.unpack(dy);

  Mat drho;
  if (finite_difference) {
    const double h = 1e-4;
    drho = (dm.propagate(rho, h, xi) - dm.propagate(rho, -h, xi)) / (2.0 * h);
  } else {
    drho = dm.lindblad(rho, xi);
  }
  RhsComparison out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!physical(i)) continue;
    const cplx exact = dm.expect(keys[i].mono, drho);
    out.scale = std::max(out.scale, std::abs(exact));
    out.max_abs_error = std::max(out.max_abs_error, std::abs(exact - closed[i]));
  }
  return out;
}

} // namespace oracle
