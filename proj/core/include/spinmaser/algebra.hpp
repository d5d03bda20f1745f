#pragma once

#include <compare>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spinmaser {

using cplx = std::complex<double>;

/// sigma_k^{row col} = |row><col| acting on representative emitter `emitter`.
struct EmitterOp {
  int emitter = 1;
  int row = 0;
  int col = 0;
  auto operator<=>(const EmitterOp&) const = default;
};

struct OperatorFactor {
  enum class Kind { creation, annihilation, transition };
  Kind kind = Kind::creation;
  EmitterOp op; // used for transitions only

  static OperatorFactor creation() { return {Kind::creation, {}}; }
  static OperatorFactor annihilation() { return {Kind::annihilation, {}}; }
  static OperatorFactor transition(int emitter, int row, int col) {
    return {Kind::transition, {emitter, row, col}};
  }
};

/// sigma^{ij} sigma^{kl} = delta_jk sigma^{il}; nullopt when the product vanishes.
std::optional<std::pair<int, int>> multiply_emitter_ops(std::pair<int, int> a,
                                                        std::pair<int, int> b);

/// Normal-ordered product a†^creations a^annihilations followed by at most one
/// reduced transition operator per emitter label, sorted by label.
struct Monomial {
  int creations = 0;
  int annihilations = 0;
  std::vector<EmitterOp> emitters;

  int order() const { return creations + annihilations + static_cast<int>(emitters.size()); }
  bool is_identity() const { return order() == 0; }
  auto operator<=>(const Monomial&) const = default;
};

/// A sum of normal-ordered monomials with complex coefficients.
using OperatorSum = std::map<Monomial, cplx>;

/// Hermitian adjoint; still normal-ordered.
Monomial adjoint(const Monomial& m);

/// Product of two normal-ordered monomials, normal ordered.
OperatorSum multiply(const Monomial& left, const Monomial& right);
OperatorSum multiply(const OperatorSum& left, const OperatorSum& right);

/// Reduce an arbitrary factor string to canonical normal-ordered form using
/// [a, a†] = 1, commuting cavity and emitter factors, and the projector algebra.
OperatorSum normal_order_product(const std::vector<OperatorFactor>& factors, cplx scalar = 1.0);

/// Identifier of an expectation value: a monomial with emitter labels 1..m
/// assigned in (row, col) order, the representative of its conjugate pair.
struct MomentKey {
  Monomial mono;

  int order() const { return mono.order(); }
  int emitter_count() const { return static_cast<int>(mono.emitters.size()); }
  auto operator<=>(const MomentKey&) const = default;
};

struct CanonicalMoment {
  MomentKey key;
  bool conjugated = false; ///< <product> = conj(<key>) when true
};

/// Map a product to its canonical key, applying emitter exchange symmetry
/// and Hermitian conjugation.
CanonicalMoment canonicalize_moment(const Monomial& m);

bool is_self_conjugate(const MomentKey& key);

/// U(1) charge: (#a† - #a) + sum over emitter ops of (delta_{row,u} - delta_{col,u}).
/// The master equations conserve it, so moments with nonzero charge vanish
/// for phase-symmetric initial data.
int phase_charge(const Monomial& m, int upper);

/// Text form, e.g. "ad*a", "s12[1]", "s21[1]s12[2]", "ad*s12[1]".
std::string render(const Monomial& m);
std::string render(const MomentKey& key);

/// Inverse of render for keys; throws ConfigError on malformed text.
MomentKey parse_moment_key(const std::string& text);

} // namespace spinmaser
