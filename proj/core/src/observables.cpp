#include "spinmaser/observables.hpp"

#include "spinmaser/error.hpp"
#include "spinmaser/units.hpp"

#include <cmath>

namespace spinmaser {

DickeCoordinates dicke_from_moments(const DickeMoments& s, double n) {
  constexpr cplx I{0.0, 1.0};
  DickeCoordinates d;
  d.ax = (n / 2 * (s.lu + s.ul)).real();
  d.ay = (I * (n / 2) * (s.lu - s.ul)).real();
  d.az = n / 2 * (s.uu - s.ll);
  d.bx = (n / 4 * ((n - 1) * (s.lu_lu + s.lu_ul + s.ul_lu + s.ul_ul) + 1.0)).real();
  d.by = (-n / 4 * ((n - 1) * (s.lu_lu - s.lu_ul - s.ul_lu + s.ul_ul) - 1.0)).real();
  d.bz = n / 4 * ((n - 1) * (s.uu_uu - 2 * s.ll_uu + s.ll_ll) + (s.ll + s.uu));
  d.j = std::sqrt(std::max(d.bx + d.by + d.bz, 0.0));
  d.m = d.az;
  d.j_norm = d.j / n;
  d.m_norm = d.m / n;
  return d;
}

DickeMoments dicke_moments(const CompiledMomentSystem& sys, const Eigen::VectorXd& y, int l,
                           int u) {
  auto one = [&](int i, int j) { return moment_value(sys, y, Monomial{0, 0, {{1, i, j}}}); };
  auto pair = [&](int i, int j, int k, int m) {
    return moment_value(sys, y, Monomial{0, 0, {{1, i, j}, {2, k, m}}});
  };
  DickeMoments s;
  s.lu = one(l, u);
  s.ul = one(u, l);
  s.ll = one(l, l).real();
  s.uu = one(u, u).real();
  s.lu_lu = pair(l, u, l, u);
  s.lu_ul = pair(l, u, u, l);
  s.ul_lu = pair(u, l, l, u);
  s.ul_ul = pair(u, l, u, l);
  s.uu_uu = pair(u, u, u, u).real();
  s.ll_uu = pair(l, l, u, u).real();
  s.ll_ll = pair(l, l, l, l).real();
  return s;
}

DickeCoordinates dicke_coordinates(const CompiledMomentSystem& sys, const Eigen::VectorXd& y,
                                   int lower, int upper, double n_emitters) {
  return dicke_from_moments(dicke_moments(sys, y, lower, upper), n_emitters);
}

DickeCoordinates dicke_coordinates(const CompiledMomentSystem& sys, const Eigen::VectorXd& y) {
  const auto& spec = sys.spec();
  return dicke_coordinates(sys, y, spec.scheme.lower, spec.scheme.upper,
                           spec.coupling.emitter_count);
}

double mode_temperature(double photon_number, double omega) {
  if (!(photon_number > 0.0))
    throw DomainError("mode temperature needs a positive photon number, got " +
                      format_double(photon_number));
  return constants::hbar * omega / (constants::boltzmann * std::log1p(1.0 / photon_number));
}

double photon_number(const CompiledMomentSystem& sys, const Eigen::VectorXd& y) {
  return moment_value(sys, y, Monomial{1, 1, {}}).real();
}

std::vector<double> populations_of(const CompiledMomentSystem& sys, const Eigen::VectorXd& y,
                                   const std::vector<int>& levels) {
  std::vector<int> which = levels;
  if (which.empty())
    for (int i = 1; i <= sys.spec().scheme.level_count; ++i)
      which.push_back(i);
  std::vector<double> out;
  out.reserve(which.size());
  for (int i : which) {
    if (i < 1 || i > sys.spec().scheme.level_count)
      throw DomainError("level " + std::to_string(i) + " is outside the level scheme");
    out.push_back(moment_value(sys, y, Monomial{0, 0, {{1, i, i}}}).real());
  }
  return out;
}

} // namespace spinmaser
