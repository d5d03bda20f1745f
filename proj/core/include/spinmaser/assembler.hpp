#pragma once

#include "spinmaser/algebra.hpp"
#include "spinmaser/model.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace spinmaser {

/// Frame of the rotating-wave Hamiltonian.
///  spin:   H = Delta a†a + g sum_k (a† s_k^{lu} + s_k^{ul} a)
///  cavity: H = -Delta sum_k s_k^{uu} + g sum_k (a† s_k^{lu} + s_k^{ul} a)
enum class RotatingFrame { spin, cavity };

struct AssemblyOptions {
  bool phase_pruning = true;
  bool dicke_seeds = true; ///< also seed the pair moments needed for Dicke coordinates
  RotatingFrame frame = RotatingFrame::spin;
  std::size_t max_keys = 4096;
  bool operator==(const AssemblyOptions&) const = default;
};

/// base + pump * xi(t)
struct Coefficient {
  cplx base{};
  cplx pump{};

  Coefficient& operator+=(const Coefficient& o) {
    base += o.base;
    pump += o.pump;
    return *this;
  }
  Coefficient operator*(cplx s) const { return {base * s, pump * s}; }
  cplx at(double xi) const { return base + pump * xi; }
  bool is_zero() const { return base == cplx{} && pump == cplx{}; }
};

struct MomentRef {
  MomentKey key;
  bool conj = false;
  auto operator<=>(const MomentRef&) const = default;
};

/// coefficient x product of up to three moments.
struct SymbolicTerm {
  Coefficient coeff;
  std::vector<MomentRef> factors;
};
using SymbolicExpr = std::vector<SymbolicTerm>;

/// Operator-level Heisenberg-Lindblad derivative of a product (no closure,
/// no population elimination).
std::map<Monomial, Coefficient> derive_operator_eom(const ModelSpec& spec, const Monomial& product,
                                                    RotatingFrame frame = RotatingFrame::spin);

/// d<product>/dt as a polynomial in canonical moments of order <= 2.
SymbolicExpr derive_moment_eom(const ModelSpec& spec, const Monomial& product,
                               const AssemblyOptions& options = {});
SymbolicExpr derive_moment_eom(const ModelSpec& spec, const MomentKey& key,
                               const AssemblyOptions& options = {});

/// Second-order closure of an order-3 monomial into products of lower moments.
struct ClosureTerm {
  double coeff = 0.0;
  std::vector<Monomial> factors;
};
std::vector<ClosureTerm> cumulant_close(const Monomial& order3);

/// <xyz> ~ <xy><z> + <xz><y> + <yz><x> - 2<x><y><z>
cplx cumulant_closure_value(cplx x, cplx y, cplx z, cplx xy, cplx xz, cplx yz);

/// Substitute s^{ee} = 1 - sum_{i != e} s^{ii} on every emitter label.
std::vector<std::pair<Monomial, double>> eliminate_population(const Monomial& m, int level_count,
                                                              int eliminated);

struct MomentSystem {
  ModelSpec spec;
  AssemblyOptions options;
  int eliminated_level = 0;
  std::vector<MomentKey> keys;
  std::vector<SymbolicExpr> equations; ///< d/dt keys[i]
  std::map<MomentKey, int> index;

  int index_of(const MomentKey& key) const;
  /// Symbolic right-hand side on complex moment values (one per key).
  std::vector<cplx> evaluate(const std::vector<cplx>& values, double xi) const;
  /// One equation per line with canonical key names.
  std::string dump() const;
};

std::vector<Monomial> default_seeds(const ModelSpec& spec, const AssemblyOptions& options);

/// Worklist completion from the default seeds plus `extra_seeds`.
MomentSystem complete_system(const ModelSpec& spec, const AssemblyOptions& options = {},
                             const std::vector<Monomial>& extra_seeds = {});

/// Closed moment equations on a packed real state: one slot per self-conjugate
/// key, (re, im) slots per conjugate pair.
class CompiledMomentSystem {
public:
  explicit CompiledMomentSystem(MomentSystem system);

  int dimension() const { return dimension_; }
  int key_count() const { return static_cast<int>(system_.keys.size()); }
  const MomentSystem& system() const { return system_; }
  const ModelSpec& spec() const { return system_.spec; }
  std::uint64_t model_hash() const { return model_hash_; }

  int real_slot(int key) const { return slots_[key].re; }
  int imag_slot(int key) const { return slots_[key].im; } ///< -1 for real keys
  int key_index(const MomentKey& key) const { return system_.index_of(key); }

  cplx value(const double* y, int key) const;
  cplx value(const double* y, const MomentRef& ref) const;
  Eigen::VectorXd pack(const std::vector<cplx>& values) const;
  std::vector<cplx> unpack(const Eigen::VectorXd& y) const;

  /// dy/dt; allocation free.
  void rhs(const double* y, double xi, double* dydt) const;
  void rhs(const Eigen::VectorXd& y, double xi, Eigen::VectorXd& dydt) const;
  /// Sum of |term| per component: the scale of cancellation in rhs.
  void rhs_magnitude(const double* y, double xi, double* out) const;
  /// Analytic Jacobian d(dy/dt)/dy.
  void jacobian(const Eigen::VectorXd& y, double xi, Eigen::MatrixXd& jac) const;

  /// Indices (in the packed state) of components that hold photon numbers.
  const std::vector<int>& photon_slots() const { return photon_slots_; }

private:
  struct Slot {
    int re = 0;
    int im = -1;
  };
  struct Term {
    int target = 0;
    cplx base, pump;
    int count = 0;
    std::array<int, 3> key{};
    std::array<bool, 3> conj{};
  };

  MomentSystem system_;
  std::vector<Slot> slots_;
  std::vector<Term> terms_;
  std::vector<int> photon_slots_;
  int dimension_ = 0;
  std::uint64_t model_hash_ = 0;
};

CompiledMomentSystem compile_rhs(MomentSystem system);

} // namespace spinmaser
