#include "doctest.h"
#include "oracle.hpp"

#include <spinmaser/dynamics.hpp>
#include <spinmaser/error.hpp>
#include <spinmaser/observables.hpp>
#include <spinmaser/spectrum.hpp>

#include <cmath>
#include <numbers>

using namespace spinmaser;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

struct Solved {
  CompiledMomentSystem sys;
  SteadyStateResult steady;
  RegressionSystem rs;
};

Solved solve(const ModelSpec& m, double xi, const AssemblyOptions& opt = {}) {
  auto sys = compile_rhs(complete_system(m, opt));
  auto steady = find_steady_state(sys, thermal_initial_state(sys), xi);
  REQUIRE(steady.ok());
  auto rs = build_regression_system(sys, steady.state, xi);
  return {std::move(sys), std::move(steady), std::move(rs)};
}

ModelSpec bare_cavity(double kappa, double nth, double delta) {
  ModelSpec m = oracle::three_level_model(nth);
  m.coupling.g = 0.0;
  m.cavity.damping = kappa;
  m.coupling.spin_frequency = m.cavity.frequency - delta;
  return m;
}

} // namespace

TEST_SUITE("spectrum") {

TEST_CASE("bare cavity: a single damped mode at the detuning") {
  const ModelSpec m = bare_cavity(2.0, 3.0, 5.0);
  const auto s = solve(m, 0.0);
  REQUIRE(s.rs.size() == 1);
  CHECK(s.rs.generator(0, 0).real() == doctest::Approx(-1.0));
  CHECK(s.rs.generator(0, 0).imag() == doctest::Approx(5.0));
  CHECK(s.rs.initial(0).real() == doctest::Approx(m.cavity.thermal_occupation()));

  std::vector<double> tau{0.0, 0.3, 1.0, 2.5};
  const auto c = correlation_function(s.rs, tau);
  const double nth = m.cavity.thermal_occupation();
  for (std::size_t k = 0; k < tau.size(); ++k) {
    const cplx exact = nth * std::exp(cplx(-1.0, 5.0) * tau[k]);
    CHECK(std::abs(c.value[k] - exact) <= 1e-12 * nth);
  }
}

TEST_CASE("bare cavity linewidth equals kappa over 2 pi for any kappa, n_th, detuning") {
  for (double kappa : {0.5, 3.0, 2.0e6})
    for (double nth : {0.01, 2.0, 600.0})
      for (double delta : {0.0, -3.0, 7.0e5}) {
        CAPTURE(kappa);
        CAPTURE(nth);
        CAPTURE(delta);
        const auto s = solve(bare_cavity(kappa, nth, delta), 0.0);
        const auto r = spectrum_and_linewidth(s.rs);
        CHECK(r.method == SpectrumMethod::eigenmode);
        CHECK(r.fwhm_hz == doctest::Approx(kappa / two_pi).epsilon(0.01));
        CHECK(r.peak_offset == doctest::Approx(delta).epsilon(1e-6).scale(kappa));
        CHECK(r.peak_frequency == doctest::Approx(s.rs.carrier + delta));
        for (double v : r.values) CHECK(v >= -1e-12);
      }
}

TEST_CASE("FFT path agrees with the eigenmode path on broad lines") {
  const auto s = solve(bare_cavity(2.0e6, 662.0, 3.0e5), 0.0);
  SpectrumOptions fft;
  fft.method = SpectrumMethod::fft;
  const auto a = spectrum_and_linewidth(s.rs);
  const auto b = spectrum_and_linewidth(s.rs, fft);
  CHECK(b.method == SpectrumMethod::fft);
  CHECK(b.fwhm_hz == doctest::Approx(2.0e6 / two_pi).epsilon(0.05));
  CHECK(b.fwhm_hz == doctest::Approx(a.fwhm_hz).epsilon(0.05));
  // pointwise agreement near the peak
  const auto modes = regression_modes(s.rs);
  const double peak = spectral_density(modes, a.peak_offset);
  for (std::size_t i = 0; i < b.offsets.size(); ++i) {
    if (std::abs(b.offsets[i] - a.peak_offset) > 2.0e6) continue;
    CHECK(b.values[i] == doctest::Approx(spectral_density(modes, b.offsets[i])).epsilon(0.05).scale(0.05 * peak));
  }
}

TEST_CASE("spectral weight of the bare cavity") {
  // integral of S over omega / 2 pi equals c(0) = n_th
  const auto s = solve(bare_cavity(1.0, 4.0, 0.0), 0.0);
  const auto modes = regression_modes(s.rs);
  double integral = 0.0;
  const double dw = 1e-3;
  for (double w = -2000.0; w < 2000.0; w += dw) integral += spectral_density(modes, w) * dw;
  CHECK(integral / two_pi == doctest::Approx(s.rs.initial(0).real()).epsilon(2e-3));
}

TEST_CASE("NV masing state") {
  const ModelSpec nv = build_preset("nv");
  const auto s = solve(nv, 2.0e4);
  CHECK(s.rs.initial(0).real() == photon_number(s.sys, s.steady.state.y));

  SUBCASE("eigen and ODE correlation agree") {
    std::vector<double> tau;
    for (int k = 0; k <= 50; ++k) tau.push_back(k * 2e-6);
    for (int k = 1; k <= 20; ++k) tau.push_back(1e-4 + k * 5e-2);
    const auto e = correlation_function(s.rs, tau, CorrelationMethod::eigen);
    const auto o = correlation_function(s.rs, tau, CorrelationMethod::ode);
    CHECK(e.method == CorrelationMethod::eigen);
    CHECK(o.method == CorrelationMethod::ode);
    double worst = 0.0;
    for (std::size_t k = 0; k < tau.size(); ++k)
      worst = std::max(worst, std::abs(e.value[k] - o.value[k]) / std::abs(e.value[0]));
    CHECK(worst <= 1e-6);
    CHECK(e.value[0] == s.rs.initial(0));
  }
  SUBCASE("narrow line, all modes decaying") {
    const auto r = spectrum_and_linewidth(s.rs);
    CHECK(r.fwhm_hz > 0.0);
    CHECK(r.fwhm_hz < 1.0);
    for (const auto& mode : r.modes) CHECK(mode.eigenvalue.real() <= 1e-9);
    REQUIRE(r.dominant >= 0);
    CHECK(r.modes[static_cast<std::size_t>(r.dominant)].residue.real() > 0.0);
    // resonant operation: the line sits on the carrier
    CHECK(std::abs(r.peak_offset) < two_pi * r.fwhm_hz);
  }
}

TEST_CASE("NV below threshold: every regression mode decays") {
  const auto s = solve(build_preset("nv"), 300.0);
  for (const auto& mode : regression_modes(s.rs)) CHECK(mode.eigenvalue.real() < 0.0);
}

TEST_CASE("pentacene below threshold has a cavity-scale line") {
  const auto s = solve(build_preset("pentacene"), 10.0);
  const auto r = spectrum_and_linewidth(s.rs);
  CHECK(r.fwhm_hz > 1e4);
  CHECK(r.fwhm_hz < 1e6);
}

TEST_CASE("regression requires a steady state") {
  const ModelSpec nv = build_preset("nv");
  const auto sys = compile_rhs(complete_system(nv));
  CHECK_THROWS_AS(build_regression_system(sys, thermal_initial_state(sys), 2.0e4), ConvergenceError);
}

TEST_CASE("generator does not depend on the frame's phase convention") {
  // without pruning the moment set is larger but the regression block is the same
  const ModelSpec nv = build_preset("nv");
  AssemblyOptions off;
  off.phase_pruning = false;
  const auto a = solve(nv, 2.0e4);
  const auto b = solve(nv, 2.0e4, off);
  REQUIRE(a.rs.size() == b.rs.size());
  const double scale = a.rs.generator.cwiseAbs().maxCoeff();
  CHECK((a.rs.generator - b.rs.generator).cwiseAbs().maxCoeff() <= 1e-6 * scale);
}

TEST_CASE("cavity pulling") {
  SUBCASE("resonance gives no shift") {
    const ModelSpec nv = build_preset("nv");
    const auto r = cavity_pulling(nv, pump_rate_from_power(nv.optics, 10.0), {0.0});
    REQUIRE(r.masing.size() == 1);
    CHECK(r.masing[0]);
    CHECK(r.shifts[0] < 1e-6);
  }
  SUBCASE("NV pulling factor") {
    const ModelSpec nv = build_preset("nv");
    std::vector<double> d;
    for (int i = 0; i <= 8; ++i) d.push_back(two_pi * 0.05e6 * i);
    const auto r = cavity_pulling(nv, pump_rate_from_power(nv.optics, 10.0), d);
    CHECK(r.factor == doctest::Approx(0.13).epsilon(0.05 / 0.13));
    CHECK(r.r_squared_inner >= 0.99);
  }
  SUBCASE("fit on synthetic data") {
    PullingResult p;
    p.detunings = {0, 1, 2, 3, 4};
    p.shifts = {0, 0.1, 0.2, 0.3, 5.0};
    p.masing = {true, true, true, true, false};
    fit_pulling(p);
    CHECK(p.factor == doctest::Approx(0.1));
    CHECK(p.intercept == doctest::Approx(0.0).scale(1));
    CHECK(p.r_squared == doctest::Approx(1.0));
    p.masing.assign(5, false);
    CHECK_THROWS_AS(fit_pulling(p), DomainError);
  }
}

}
