#pragma once

#include "spinmaser/dynamics.hpp"

#include <vector>

namespace spinmaser {

/// Collective spin of the resonant transition (l, u) in Dicke language.
struct DickeCoordinates {
  double ax = 0, ay = 0, az = 0; ///< <j^x>, <j^y>, <j^z>
  double bx = 0, by = 0, bz = 0; ///< <(j^x)^2>, <(j^y)^2>, <(j^z)^2>
  double j = 0;                  ///< sqrt(bx + by + bz), not the J of J(J+1)
  double m = 0;                  ///< az
  double j_norm = 0;             ///< j / N
  double m_norm = 0;             ///< m / N
};

/// Single- and pair-emitter moments entering the Dicke coordinates, written
/// with lu = s^{lu} (lowering) and ul = s^{ul} (raising).
struct DickeMoments {
  cplx lu, ul;
  double ll = 0, uu = 0;
  cplx lu_lu, lu_ul, ul_lu, ul_ul;
  double uu_uu = 0, ll_uu = 0, ll_ll = 0;
};

DickeCoordinates dicke_from_moments(const DickeMoments& mom, double n_emitters);

DickeMoments dicke_moments(const CompiledMomentSystem& sys, const Eigen::VectorXd& y, int lower,
                           int upper);

DickeCoordinates dicke_coordinates(const CompiledMomentSystem& sys, const Eigen::VectorXd& y,
                                   int lower, int upper, double n_emitters);
/// Uses the model's resonant transition and emitter count.
DickeCoordinates dicke_coordinates(const CompiledMomentSystem& sys, const Eigen::VectorXd& y);

/// T = hbar omega / (kB ln(1/n + 1)).
double mode_temperature(double photon_number, double omega);

double photon_number(const CompiledMomentSystem& sys, const Eigen::VectorXd& y);

/// Real populations of the requested levels (all levels when empty); the
/// eliminated level is reconstructed through completeness.
std::vector<double> populations_of(const CompiledMomentSystem& sys, const Eigen::VectorXd& y,
                                   const std::vector<int>& levels = {});

} // namespace spinmaser
