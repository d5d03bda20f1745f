#include "doctest.h"
#include "oracle.hpp"

#include <spinmaser/assembler.hpp>
#include <spinmaser/dynamics.hpp>
#include <spinmaser/error.hpp>

#include <random>

using namespace spinmaser;

namespace {

std::vector<cplx> random_values(const CompiledMomentSystem& sys, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> v;
  for (const auto& k : sys.system().keys)
    v.push_back(is_self_conjugate(k) ? cplx(u(rng), 0.0) : cplx(u(rng), u(rng)));
  return v;
}

} // namespace

TEST_SUITE("assembler") {

TEST_CASE("rhs matches the density-matrix oracle on product states") {
  const ModelSpec model = oracle::three_level_model();
  std::mt19937_64 rng(7);
  for (bool pruning : {false, true}) {
    for (auto frame : {RotatingFrame::spin, RotatingFrame::cavity}) {
      CAPTURE(pruning);
      CAPTURE(static_cast<int>(frame));
      AssemblyOptions opt;
      opt.phase_pruning = pruning;
      opt.frame = frame;
      const auto sys = compile_rhs(complete_system(model, opt));
      const oracle::DensityMatrixModel dm(model, 2, 5, frame);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (int trial = 0; trial < 5; ++trial) {
        const oracle::Mat cav = pruning ? oracle::thermal_state(5, 0.03)
                                        : oracle::coherent_state(5, 0.12 * cplx(u(rng), u(rng)));
        const oracle::Mat em = oracle::random_emitter_state(3, model.scheme.upper, pruning, rng);
        const double xi = 0.5 + u(rng);
        const auto cmp = oracle::compare_rhs(sys, dm, dm.product_state(cav, em), xi);
        CHECK(cmp.relative() < 1e-6);
        const auto direct = oracle::compare_rhs(sys, dm, dm.product_state(cav, em), xi, false);
        CHECK(direct.relative() < 1e-6);
      }
    }
  }
}

TEST_CASE("single-emitter Jaynes-Cummings limit matches the oracle") {
  ModelSpec model = oracle::three_level_model();
  model.coupling.emitter_count = 1.0;
  AssemblyOptions opt;
  opt.phase_pruning = false;
  const auto sys = compile_rhs(complete_system(model, opt));
  const oracle::DensityMatrixModel dm(model, 1, 6);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto em = oracle::random_emitter_state(3, 2, false, rng);
    const auto rho = dm.product_state(oracle::coherent_state(6, cplx(0.1, -0.05 * trial)), em);
    CHECK(oracle::compare_rhs(sys, dm, rho, 0.3).relative() < 1e-6);
  }
}

TEST_CASE("golden moment count of the NV preset") {
  const auto sys = compile_rhs(complete_system(build_preset("nv")));
  CHECK(sys.key_count() == 30);
  CHECK(sys.dimension() == 31);
  CHECK(sys.key_count() <= 200);

  AssemblyOptions off;
  off.phase_pruning = false;
  const auto full = complete_system(build_preset("nv"), off);
  CHECK(full.keys.size() > 30);
  CHECK(full.keys.size() <= 200);
}

TEST_CASE("every retained moment has order at most two and a unique index") {
  for (auto name : preset_names()) {
    const auto s = complete_system(build_preset(name));
    CHECK(s.keys.size() == s.equations.size());
    for (std::size_t i = 0; i < s.keys.size(); ++i) {
      CHECK(s.keys[i].order() <= 2);
      CHECK(s.index_of(s.keys[i]) == static_cast<int>(i));
      CHECK(canonicalize_moment(s.keys[i].mono).key == s.keys[i]);
    }
  }
}

TEST_CASE("completion honours the key budget") {
  AssemblyOptions opt;
  opt.max_keys = 5;
  CHECK_THROWS_AS(complete_system(build_preset("nv"), opt), InternalError);
}

TEST_CASE("an uncoupled model closes on the photon number and populations") {
  ModelSpec m = oracle::three_level_model();
  m.coupling.g = 0.0;
  m.channels.clear();
  AssemblyOptions opt;
  opt.dicke_seeds = false;
  const auto s = complete_system(m, opt);
  for (const auto& k : s.keys) {
    const bool photon = k.mono == Monomial{1, 1, {}};
    const bool population = k.mono.creations == 0 && k.mono.annihilations == 0 &&
                            k.mono.emitters.size() == 1 && k.mono.emitters[0].row == k.mono.emitters[0].col;
    CHECK((photon || population));
  }
  CHECK(s.index_of(MomentKey{Monomial{1, 1, {}}}) >= 0);
}

TEST_CASE("compiled rhs agrees with symbolic evaluation") {
  std::mt19937_64 rng(3);
  for (auto name : preset_names()) {
    const auto sys = compile_rhs(complete_system(build_preset(name)));
    for (int trial = 0; trial < 3; ++trial) {
      const auto values = random_values(sys, rng);
      const double xi = 1234.5 * (trial + 1);
      const auto symbolic = sys.system().evaluate(values, xi);
      Eigen::VectorXd dy(sys.dimension());
      sys.rhs(sys.pack(values), xi, dy);
      const auto compiled = sys.unpack(dy);
      double scale = 0.0, err = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        scale = std::max(scale, std::abs(symbolic[i]));
        err = std::max(err, std::abs(symbolic[i] - compiled[i]));
      }
      CHECK(err <= 1e-12 * scale);
    }
  }
}

TEST_CASE("analytic jacobian matches central differences") {
  std::mt19937_64 rng(5);
  ModelSpec model = oracle::three_level_model();
  for (bool pruning : {true, false}) {
    AssemblyOptions opt;
    opt.phase_pruning = pruning;
    const auto sys = compile_rhs(complete_system(model, opt));
    const Eigen::VectorXd y = sys.pack(random_values(sys, rng));
    Eigen::MatrixXd jac;
    sys.jacobian(y, 0.7, jac);
    const int n = sys.dimension();
    Eigen::MatrixXd fd(n, n);
    Eigen::VectorXd fp(n), fm(n);
    const double h = 1e-6;
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd yp = y, ym = y;
      yp(j) += h;
      ym(j) -= h;
      sys.rhs(yp, 0.7, fp);
      sys.rhs(ym, 0.7, fm);
      fd.col(j) = (fp - fm) / (2 * h);
    }
    CHECK((jac - fd).cwiseAbs().maxCoeff() < 1e-7 * std::max(1.0, jac.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("jacobian is exact for the NV preset at a masing state") {
  const auto sys = compile_rhs(complete_system(build_preset("nv")));
  const auto steady = find_steady_state(sys, thermal_initial_state(sys), 2.0e4);
  REQUIRE(steady.ok());
  Eigen::MatrixXd jac;
  sys.jacobian(steady.state.y, 2.0e4, jac);
  Eigen::VectorXd fp(sys.dimension()), fm(sys.dimension());
  for (int j = 0; j < sys.dimension(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(steady.state.y(j)));
    Eigen::VectorXd yp = steady.state.y, ym = steady.state.y;
    yp(j) += h;
    ym(j) -= h;
    sys.rhs(yp, 2.0e4, fp);
    sys.rhs(ym, 2.0e4, fm);
    const Eigen::VectorXd col = (fp - fm) / (2 * h);
    const double scale = std::max(col.cwiseAbs().maxCoeff(), jac.col(j).cwiseAbs().maxCoeff());
    CHECK((col - jac.col(j)).cwiseAbs().maxCoeff() <= 1e-6 * std::max(scale, 1e-30));
  }
}

TEST_CASE("rhs is affine in the pump rate") {
  std::mt19937_64 rng(9);
  const auto sys = compile_rhs(complete_system(build_preset("pentacene")));
  const Eigen::VectorXd y = sys.pack(random_values(sys, rng));
  Eigen::VectorXd f0(sys.dimension()), f1(sys.dimension()), f2(sys.dimension());
  sys.rhs(y, 0.0, f0);
  sys.rhs(y, 1.0e3, f1);
  sys.rhs(y, 2.0e3, f2);
  CHECK((f2 - 2 * f1 + f0).cwiseAbs().maxCoeff() <= 1e-9 * f2.cwiseAbs().maxCoeff());
}

TEST_CASE("cumulant closure") {
  SUBCASE("value formula") {
    const cplx x(1, 2), y(0.5, -1), z(-0.3, 0.4);
    // an uncorrelated triple closes to the plain product
    CHECK(std::abs(cumulant_closure_value(x, y, z, x * y, x * z, y * z) - x * y * z) < 1e-15);
    CHECK(std::abs(cumulant_closure_value(x, y, z, 2.0, 3.0, 4.0) -
                   (2.0 * z + 3.0 * y + 4.0 * x - 2.0 * x * y * z)) < 1e-14);
  }
  SUBCASE("structure") {
    // <a† a s12> -> <a† a><s12> + <a† s12><a> + <a s12><a†> - 2<a†><a><s12>
    const Monomial m{1, 1, {{1, 1, 2}}};
    const auto terms = cumulant_close(m);
    double total = 0.0;
    for (const auto& t : terms) total += t.coeff * static_cast<double>(t.factors.size() == 3 ? 1 : 0);
    CHECK(total == doctest::Approx(-2.0));
    CHECK(terms.size() == 4);
  }
}

TEST_CASE("population elimination") {
  // s33 -> 1 - s11 - s22 on a three-level scheme
  const auto out = eliminate_population(Monomial{0, 0, {{1, 3, 3}}}, 3, 3);
  REQUIRE(out.size() == 3);
  double identity = 0.0, minus = 0.0;
  for (const auto& [m, c] : out) {
    if (m.is_identity()) identity += c;
    else minus += c;
  }
  CHECK(identity == 1.0);
  CHECK(minus == -2.0);
  // untouched when the eliminated level does not appear
  CHECK(eliminate_population(Monomial{1, 0, {{1, 1, 2}}}, 3, 3).size() == 1);
}

TEST_CASE("operator equations of the bare cavity") {
  ModelSpec m = oracle::three_level_model(0.5);
  m.coupling.g = 0.0;
  // d<a†a>/dt = -kappa <a†a> + kappa n_th
  const auto eom = derive_operator_eom(m, Monomial{1, 1, {}});
  const double kappa = m.cavity.damping, nth = m.cavity.thermal_occupation();
  REQUIRE(eom.size() == 2);
  CHECK(eom.at(Monomial{1, 1, {}}).base.real() == doctest::Approx(-kappa));
  CHECK(eom.at(Monomial{}).base.real() == doctest::Approx(kappa * nth));
}

TEST_CASE("system dump names every equation") {
  const auto s = complete_system(build_preset("nv"));
  const std::string text = s.dump();
  for (const auto& k : s.keys) CHECK(text.find(render(k)) != std::string::npos);
}

}
