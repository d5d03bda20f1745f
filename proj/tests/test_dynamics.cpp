#include "doctest.h"
#include "oracle.hpp"

#include <spinmaser/dynamics.hpp>
#include <spinmaser/error.hpp>
#include <spinmaser/observables.hpp>

#include <cmath>

using namespace spinmaser;

namespace {

// fixed step h through generous tolerances and max_step = h
double fixed_step_error(SolverMethod method, double h) {
  OdeProblem p;
  // y0' = -y0^2 (y0 = 1/(1+t)), (y1, y2) rotate at unit rate
  p.rhs = [](const Eigen::VectorXd& y, Eigen::VectorXd& f) {
    f.resize(3);
    f << -y(0) * y(0), -y(2), y(1);
  };
  p.jacobian = [](const Eigen::VectorXd& y, Eigen::MatrixXd& j) {
    j.setZero(3, 3);
    j(0, 0) = -2 * y(0);
    j(1, 2) = -1;
    j(2, 1) = 1;
  };
  StepControl c;
  c.rtol = 1e3;
  c.atol = Eigen::VectorXd::Constant(3, 1e3);
  c.max_step = h;
  c.initial_step = h;
  SolverStats stats;
  Eigen::VectorXd y(3);
  y << 1.0, 1.0, 0.0;
  const double T = 2.0;
  integrate_segment(method, p, 0.0, T, y, c, stats);
  Eigen::VectorXd exact(3);
  exact << 1.0 / (1.0 + T), std::cos(T), std::sin(T);
  return (y - exact).cwiseAbs().maxCoeff();
}

StateVector empty_cavity_state(const CompiledMomentSystem& sys) {
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(sys.spec().scheme.level_count, sys.spec().scheme.level_count);
  rho(0, 0) = 1.0;
  return product_state(sys, [](int p, int q) { return cplx(p == 0 && q == 0 ? 1.0 : 0.0); }, rho);
}

ModelSpec uncoupled(double nth) {
  ModelSpec m = oracle::three_level_model(nth);
  m.coupling.g = 0.0;
  return m;
}

double population_drift(const CompiledMomentSystem& sys, const Trajectory& tr) {
  double worst = 0.0;
  for (const auto& y : tr.states) {
    double sum = 0.0;
    for (double p : populations_of(sys, y)) sum += p;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

} // namespace

TEST_SUITE("dynamics") {

TEST_CASE("integrators reach their design order") {
  SUBCASE("rosenbrock is fourth order") {
    const double e1 = fixed_step_error(SolverMethod::rosenbrock, 0.04);
    const double e2 = fixed_step_error(SolverMethod::rosenbrock, 0.02);
    CHECK(std::log2(e1 / e2) == doctest::Approx(4.0).epsilon(0.1));
  }
  SUBCASE("dormand-prince is fifth order") {
    const double e1 = fixed_step_error(SolverMethod::dormand_prince, 0.1);
    const double e2 = fixed_step_error(SolverMethod::dormand_prince, 0.05);
    CHECK(std::log2(e1 / e2) == doctest::Approx(5.0).epsilon(0.1));
  }
}

TEST_CASE("NV initial state") {
  const auto sys = compile_rhs(complete_system(build_preset("nv")));
  const auto s0 = thermal_initial_state(sys);
  const auto pops = populations_of(sys, s0.y);
  REQUIRE(pops.size() == 7);
  for (int i = 0; i < 3; ++i) CHECK(pops[i] == doctest::Approx(1.0 / 3));
  for (int i = 3; i < 7; ++i) CHECK(std::abs(pops[i]) < 1e-15);
  CHECK(photon_number(sys, s0.y) == doctest::Approx(662).epsilon(0.005));
}

TEST_CASE("pentacene initial state") {
  const auto sys = compile_rhs(complete_system(build_preset("pentacene")));
  const auto s0 = thermal_initial_state(sys);
  CHECK(populations_of(sys, s0.y)[0] == doctest::Approx(1.0));
  CHECK(photon_number(sys, s0.y) == doctest::Approx(4211).epsilon(0.005));
  CHECK(moment_value(sys, s0.y, Monomial{0, 1, {}}) == cplx(0.0));
}

TEST_CASE("bare cavity relaxes exponentially") {
  const ModelSpec m = uncoupled(5.0);
  const auto sys = compile_rhs(complete_system(m));
  const double kappa = m.cavity.damping, nth = m.cavity.thermal_occupation();
  SolverOptions o;
  o.rtol = 1e-10;
  o.atol = 1e-12;
  for (auto method : {SolverMethod::rosenbrock, SolverMethod::dormand_prince}) {
    o.method = method;
    const double t = 3.0 / kappa;
    const auto tr = integrate_constant(sys, empty_cavity_state(sys), t, 0.0, o, {0.5 / kappa, t});
    CHECK(photon_number(sys, tr.states[0]) ==
          doctest::Approx(nth * (1 - std::exp(-0.5))).epsilon(1e-6));
    CHECK(photon_number(sys, tr.states[1]) == doctest::Approx(nth * (1 - std::exp(-3.0))).epsilon(1e-6));
  }
}

TEST_CASE("short-time mean field follows the exact single-emitter dynamics") {
  ModelSpec m = oracle::three_level_model();
  m.coupling.emitter_count = 1.0;
  AssemblyOptions opt;
  opt.phase_pruning = false;
  const auto sys = compile_rhs(complete_system(m, opt));
  const oracle::DensityMatrixModel dm(m, 1, 10);

  std::mt19937_64 rng(21);
  const auto em = oracle::random_emitter_state(3, 2, false, rng);
  const cplx alpha(0.4, 0.2);
  const auto cav = oracle::coherent_state(10, alpha);
  oracle::Mat rho = dm.product_state(cav, em);

  const auto& keys = sys.system().keys;
  std::vector<cplx> values(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (keys[i].emitter_count() <= 1) values[i] = dm.expect(keys[i].mono, rho);
  StateVector s0{0.0, sys.pack(values)};

  const double t = 0.1 / m.coupling.g;
  SolverOptions o;
  o.rtol = 1e-10;
  o.atol = 1e-12;
  const auto tr = integrate_constant(sys, s0, t, 0.4, o, {t});
  const int steps = 200;
  for (int k = 0; k < steps; ++k) rho = dm.propagate(rho, t / steps, 0.4);
  const auto pops = populations_of(sys, tr.states.back());
  for (int i = 1; i <= 3; ++i) {
    const double exact = dm.expect(Monomial{0, 0, {{1, i, i}}}, rho).real();
    CHECK(pops[i - 1] == doctest::Approx(exact).epsilon(0).scale(1).epsilon(1e-4));
  }
  CHECK(photon_number(sys, tr.states.back()) ==
        doctest::Approx(dm.expect(Monomial{1, 1, {}}, rho).real()).epsilon(1e-4));
}

TEST_CASE("NV pulse conserves probability and keeps the photon number positive") {
  ModelSpec m = build_preset("nv");
  m.pump = PumpSchedule::pulse(0.0, 12e-3, pump_rate_from_power(m.optics, 2.0));
  const auto sys = compile_rhs(complete_system(m));
  std::vector<double> times;
  for (int i = 1; i <= 400; ++i) times.push_back(20e-3 * i / 400);
  const auto tr = integrate(sys, thermal_initial_state(sys), 20e-3, {}, times);
  CHECK(population_drift(sys, tr) < 1e-9);
  double n_max = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto& y = tr.states[k];
    const double n = photon_number(sys, y);
    CHECK(n >= -1e-6);
    n_max = std::max(n_max, n);
    const auto mom = dicke_moments(sys, y, 1, 2);
    CHECK(std::norm(mom.lu) <= mom.ll * mom.uu + 1e-6);
  }
  // masing during the pulse, thermal again 8 ms after it
  CHECK(n_max > 1e7);
  CHECK(photon_number(sys, tr.states.back()) < 1e4);
}

TEST_CASE("phase pruning does not change phase-symmetric trajectories") {
  ModelSpec m = build_preset("pentacene");
  m.pump = PumpSchedule::pulse(0.0, 20e-6, 2.0e5);
  AssemblyOptions off;
  off.phase_pruning = false;
  const auto pruned = compile_rhs(complete_system(m));
  const auto full = compile_rhs(complete_system(m, off));
  CHECK(pruned.key_count() < full.key_count());
  const std::vector<double> times{5e-6, 10e-6, 20e-6, 40e-6};
  const auto a = integrate(pruned, thermal_initial_state(pruned), 40e-6, {}, times);
  const auto b = integrate(full, thermal_initial_state(full), 40e-6, {}, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK(photon_number(pruned, a.states[k]) ==
          doctest::Approx(photon_number(full, b.states[k])).epsilon(1e-6));
    const auto pa = populations_of(pruned, a.states[k]), pb = populations_of(full, b.states[k]);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-6));
  }
}

TEST_CASE("tighter tolerance changes the answer by less than the loose run's error") {
  ModelSpec m = build_preset("nv");
  m.pump = PumpSchedule::constant(2.0e4);
  const auto sys = compile_rhs(complete_system(m));
  SolverOptions loose, tight, reference;
  loose.rtol = 1e-6;
  tight.rtol = 5e-7;
  reference.rtol = 1e-11;
  const std::vector<double> times{1e-3, 2e-3, 4e-3};
  const auto s0 = thermal_initial_state(sys);
  const auto a = integrate(sys, s0, 4e-3, loose, times);
  const auto b = integrate(sys, s0, 4e-3, tight, times);
  const auto r = integrate(sys, s0, 4e-3, reference, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double na = photon_number(sys, a.states[k]), nb = photon_number(sys, b.states[k]);
    const double nr = photon_number(sys, r.states[k]);
    CHECK(std::abs(na - nb) <= std::abs(na - nr) + 1e-9 * nr);
    CHECK(std::abs(nb - nr) <= 1e-3 * nr);
  }
}

TEST_CASE("pump segment boundaries are honoured") {
  ModelSpec m = build_preset("nv");
  m.pump = PumpSchedule::pulse(1e-3, 2e-3, 5.0e4);
  const auto sys = compile_rhs(complete_system(m));
  const auto tr = integrate(sys, thermal_initial_state(sys), 3e-3, {});
  CHECK(!tr.dense_output);
  CHECK(std::find(tr.times.begin(), tr.times.end(), 1e-3) != tr.times.end());
  CHECK(std::find(tr.times.begin(), tr.times.end(), 2e-3) != tr.times.end());
  for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr.times[k] > tr.times[k - 1]);
  // nothing moves before the pump: the initial state is the xi = 0 fixed point
  // up to spin-lattice balance
  const auto pops = populations_of(sys, tr.states[0]);
  CHECK(pops[0] == doctest::Approx(1.0 / 3));
}

TEST_CASE("non-finite state is reported with the offending moment") {
  const auto sys = compile_rhs(complete_system(build_preset("nv")));
  auto s0 = thermal_initial_state(sys);
  s0.y(sys.real_slot(sys.key_index(MomentKey{Monomial{1, 1, {}}}))) = std::nan("");
  try {
    integrate_constant(sys, s0, 1e-3, 0.0, {});
    FAIL("expected an error");
  } catch (const ConvergenceError& e) {
    CHECK(std::string(e.what()).find('<') != std::string::npos);
  }
}

TEST_CASE("steady state") {
  SUBCASE("thermal fixed point without coupling or pump") {
    const ModelSpec m = uncoupled(7.5);
    const auto sys = compile_rhs(complete_system(m));
    const auto r = find_steady_state(sys, empty_cavity_state(sys), 0.0);
    REQUIRE(r.ok());
    CHECK(photon_number(sys, r.state.y) == doctest::Approx(m.cavity.thermal_occupation()).epsilon(1e-6));
  }
  SUBCASE("pentacene under strong pump masses on the X-Z transition") {
    const ModelSpec m = build_preset("pentacene");
    const auto sys = compile_rhs(complete_system(m));
    const double xi = pump_rate_from_power(m.optics, 10.0);
    const auto r = find_steady_state(sys, thermal_initial_state(sys), xi);
    REQUIRE(r.ok());
    const auto pops = populations_of(sys, r.state.y);
    CHECK(pops[4] > pops[2]);
    CHECK(photon_number(sys, r.state.y) > 1e3 * m.cavity.thermal_occupation());
  }
  SUBCASE("Newton refinement reaches the residual floor") {
    const auto sys = compile_rhs(complete_system(build_preset("nv")));
    const auto r = find_steady_state(sys, thermal_initial_state(sys), 2.2e3);
    REQUIRE(r.ok());
    CHECK(r.status == SteadyStatus::newton);
    CHECK(r.residual <= std::max(1e-12, 10 * r.roundoff_floor));
    const auto [res, floor] = steady_residual(sys, r.state.y, 2.2e3);
    CHECK(res == r.residual);
    CHECK(floor == r.roundoff_floor);
  }
  SUBCASE("negative pump is rejected") {
    const auto sys = compile_rhs(complete_system(build_preset("nv")));
    CHECK_THROWS_AS(find_steady_state(sys, thermal_initial_state(sys), -1.0), DomainError);
  }
}

}
