#include "doctest.h"
#include "oracle.hpp"

#include "commands.hpp"
#include "config.hpp"
#include "output.hpp"

#include <spinmaser/error.hpp>
#include <spinmaser/keyvalue.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace spinmaser;
using namespace spinmaser::cli;
namespace fs = std::filesystem;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("spinmaser_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

struct ToolRun {
  int exit_code = -1;
  std::string stdout_text, stderr_text;
};

ToolRun run_tool(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && '" + SPINMASER_TOOL_PATH + "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  ToolRun r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.stdout_text = slurp(out);
  r.stderr_text = slurp(err);
  fs::remove(out);
  fs::remove(err);
  return r;
}

std::string expect_config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  FAIL("no configuration error for: " << text);
  return {};
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("minimal config takes the defaults") {
  const RunConfig c = parse_config("[model]\npreset = nv\n");
  CHECK(c.model == [] {
    ModelSpec m = build_preset("nv");
    m.pump = PumpSchedule::constant(pump_rate_from_power(m.optics, 2.0));
    return m;
  }());
  CHECK(c.pump_rate == doctest::Approx(2.19e3).epsilon(0.01));
  CHECK(c.t_end == 20e-3);
  CHECK(c.format == OutputFormat::both);
  CHECK(c.pump_grid.size() == 41);
  CHECK(c.hash == parse_config("").hash);
}

TEST_CASE("config errors carry line and key context") {
  CHECK(expect_config_error("[pump]\npower = -2 W\n").find("pump.power") != std::string::npos);
  const std::string unknown = expect_config_error("# comment\n[pump]\npowr = 2 W\n");
  CHECK(unknown.find("line 3") != std::string::npos);
  CHECK(unknown.find("pump.powr") != std::string::npos);
  const std::string unit = expect_config_error("[simulate]\nt_end = 3 W\n");
  CHECK(unit.find("time") != std::string::npos);
  CHECK(expect_config_error("[solver]\nmethod = euler\n").find("solver.method") != std::string::npos);
  CHECK(expect_config_error("[model]\npreset = nv\nkappa = 0\n").find("kappa") != std::string::npos);
  CHECK_THROWS_AS(parse_config("", {"nonsense"}), ConfigError);
  CHECK_THROWS_AS(parse_config("", {"pump.power=-1 W"}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("overrides and provenance hash") {
  const RunConfig a = parse_config("[pump]\npower = 2 W\n");
  const RunConfig b = parse_config("[pump]\npower = 2 W\n", {"pump.power=3 W"});
  CHECK(b.power == 3.0);
  CHECK(a.hash != b.hash);
  // output placement and threading do not change results
  CHECK(parse_config("", {"output.dir=/tmp/x", "run.jobs=3"}).hash == parse_config("").hash);
  CHECK(parse_config("[model]\npreset = nv\nN = 1e13\n").model.coupling.emitter_count == 1e13);
}

TEST_CASE("inline three-level model round-trips") {
  ModelSpec hand = oracle::three_level_model();
  hand.name = "custom";
  hand.scheme.initial_populations = {1.0, 0.0, 0.0};
  std::string text = "[inline]\n";
  for (const auto& line : lines_of(serialize_model(hand)))
    if (line.find('=') != std::string::npos) text += line + "\n";
  text += "[pump]\nrate = 0.7 /s\n[simulate]\nt_end = 2 s\nsamples = 11\n";
  const RunConfig c = parse_config(text);
  ModelSpec expected = hand;
  expected.pump = PumpSchedule::constant(0.7);
  CHECK(c.model == expected);

  TempDir dir;
  RunConfig run = c;
  run.out_dir = dir.path();
  const auto r = run_command(run, Command::simulate);
  CHECK(r.exit_code == exit_ok);
  const auto rows = lines_of(slurp(dir.path() / "trajectory.csv"));
  CHECK(rows[1] == "t_s,photon_number,pop_1,pop_2,pop_3,j_norm,m_norm,t_mode_k");
  CHECK(rows.size() == 2 + 11);
}

TEST_CASE("simulate writes the trajectory contract") {
  TempDir dir;
  RunConfig c = parse_config("[simulate]\nt_end = 5 ms\nsamples = 51\n");
  c.out_dir = dir.path();
  const auto r = run_command(c, Command::simulate);
  REQUIRE(r.exit_code == exit_ok);
  CHECK(r.files.size() == 2);
  const auto rows = lines_of(slurp(dir.path() / "trajectory.csv"));
  REQUIRE(rows.size() == 2 + 51);
  CHECK(rows[0].rfind("# spinmaser simulate config_hash=" + hex_hash(c.hash), 0) == 0);
  CHECK(rows[1] == "t_s,photon_number,pop_1,pop_2,pop_3,pop_4,pop_5,pop_6,pop_7,j_norm,m_norm,t_mode_k");

  const Json j = Json::parse(slurp(dir.path() / "trajectory.json"));
  CHECK(j["config_hash"] == hex_hash(c.hash));
  CHECK(j["model_hash"] == hex_hash(model_hash(c.model)));
  CHECK(j["solver"]["steps"].get<int>() > 0);
  CHECK(j["moment_count"] == 30);
  // stable key order
  CHECK(j.begin().key() == "command");
}

TEST_CASE("column selection") {
  TempDir dir;
  RunConfig c = parse_config("[simulate]\nt_end = 1 ms\nsamples = 3\ncolumns = t_s, photon_number\n[output]\nformat = csv\n");
  c.out_dir = dir.path();
  run_command(c, Command::simulate);
  CHECK(lines_of(slurp(dir.path() / "trajectory.csv"))[1] == "t_s,photon_number");
  CHECK(!fs::exists(dir.path() / "trajectory.json"));
  CHECK(expect_config_error("[simulate]\ncolumns = t_s, nope\n").find("nope") != std::string::npos);
}

TEST_CASE("CSV values re-read to full precision") {
  CsvTable t({"a", "b"});
  const std::vector<double> v{0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 1e-320};
  for (double x : v) t.add_row(std::vector<double>{x, -x});
  const auto rows = lines_of(t.render("comment"));
  REQUIRE(rows.size() == 2 + v.size());
  CHECK(rows[0] == "# comment");
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto cells = split_list(rows[i + 2], ',');
    CHECK(std::strtod(cells[0].c_str(), nullptr) == v[i]);
    CHECK(std::strtod(cells[1].c_str(), nullptr) == -v[i]);
  }
  CHECK(format_sci(std::nan("")) == "nan");
}

TEST_CASE("spectrum of an uncoupled model gives the cavity linewidth") {
  TempDir dir;
  RunConfig c = parse_config("[model]\npreset = nv\ng = 0\n[pump]\nrate = 0 /s\n");
  c.out_dir = dir.path();
  REQUIRE(run_command(c, Command::spectrum).exit_code == exit_ok);
  const Json j = Json::parse(slurp(dir.path() / "spectrum.json"));
  CHECK(j["fwhm_hz"].get<double>() == doctest::Approx(c.model.cavity.damping / two_pi).epsilon(0.01));
  CHECK(j["pulling_factor"].is_null());
  CHECK(lines_of(slurp(dir.path() / "spectrum.csv"))[1] == "offset_hz,absolute_hz,s_value");
}

TEST_CASE("steady and features commands") {
  TempDir dir;
  RunConfig c = parse_config("[pump]\nrate = 2e4 /s\n[output]\nprefix = run1_\n");
  c.out_dir = dir.path();
  CHECK(run_command(c, Command::steady).exit_code == exit_ok);
  const Json s = Json::parse(slurp(dir.path() / "run1_steady.json"));
  CHECK(s["steady"]["converged"] == true);

  RunConfig f = parse_config("[pump]\npower = 2 W\nduration = 12 ms\n[simulate]\nt_end = 20 ms\nsamples = 4001\n");
  f.out_dir = dir.path();
  CHECK(run_command(f, Command::features).exit_code == exit_ok);
  const Json j = Json::parse(slurp(dir.path() / "features.json"));
  CHECK(j["found"] == true);
  CHECK(j["frequency_hz"].get<double>() > 1e3);
  CHECK(j["post_pulse"]["min_photon_number"].get<double>() > 0.0);
}

TEST_CASE("tool exit codes and error JSON") {
  TempDir dir;
  SUBCASE("unknown command") {
    const auto r = run_tool("fly", dir.path());
    CHECK(r.exit_code == exit_config);
    const Json j = Json::parse(r.stderr_text);
    CHECK(j["error"]["kind"] == "config");
  }
  SUBCASE("bad value") {
    const auto r = run_tool("steady --set 'pump.power=-2 W'", dir.path());
    CHECK(r.exit_code == exit_config);
    CHECK(Json::parse(r.stderr_text)["error"]["message"].get<std::string>().find("pump.power") !=
          std::string::npos);
  }
  SUBCASE("unwritable output") {
    const auto r = run_tool("steady --out /proc/spinmaser_no_such_dir", dir.path());
    CHECK(r.exit_code == exit_failure);
    CHECK(Json::parse(r.stderr_text)["error"]["kind"] == "io");
  }
  SUBCASE("partial sweep") {
    const auto r = run_tool("sweep-pump --set 'sweep.values=1e-3, 1e6' --set solver.steady_max_time=1e-6 "
                            "--set sweep.spectrum=false",
                            dir.path());
    CHECK(r.exit_code == exit_partial);
    const auto rows = lines_of(slurp(dir.path() / "sweep_pump.csv"));
    REQUIRE(rows.size() == 4);
    CHECK(split_list(rows[1], ',')[2] == "converged");
    const auto flag = [&](int row) { return std::strtod(split_list(rows[row], ',')[2].c_str(), nullptr); };
    CHECK(flag(2) + flag(3) == 1.0);
  }
  SUBCASE("summary line") {
    const auto r = run_tool("steady --preset pentacene --format json", dir.path());
    CHECK(r.exit_code == exit_ok);
    CHECK(lines_of(r.stdout_text).size() == 1);
    CHECK(fs::exists(dir.path() / "steady.json"));
    CHECK(!fs::exists(dir.path() / "steady.csv"));
  }
  SUBCASE("output directory from the environment") {
    const auto target = dir.path() / "env_out";
    const auto r = run_tool("steady", dir.path());
    CHECK(r.exit_code == exit_ok);
    ::setenv("SPINMASER_OUT", target.c_str(), 1);
    const auto e = run_tool("steady", dir.path());
    ::unsetenv("SPINMASER_OUT");
    CHECK(e.exit_code == exit_ok);
    CHECK(fs::exists(target / "steady.csv"));
  }
}

TEST_CASE("outputs are byte-identical across runs and thread counts") {
  TempDir a, b;
  const std::string args = "sweep-pump --set 'sweep.values=1e3, 5e3, 2e4, 1e5' ";
  REQUIRE(run_tool(args + "--jobs 1", a.path()).exit_code == exit_ok);
  REQUIRE(run_tool(args + "--jobs 4", b.path()).exit_code == exit_ok);
  for (const char* name : {"sweep_pump.csv", "sweep_pump.json"})
    CHECK(slurp(a.path() / name) == slurp(b.path() / name));

  REQUIRE(run_tool("simulate --set simulate.t_end=2ms --set simulate.samples=21", a.path()).exit_code == 0);
  const std::string first = slurp(a.path() / "trajectory.csv");
  REQUIRE(run_tool("simulate --set simulate.t_end=2ms --set simulate.samples=21", a.path()).exit_code == 0);
  CHECK(slurp(a.path() / "trajectory.csv") == first);
}

TEST_CASE("system dump") {
  TempDir dir;
  RunConfig c = parse_config("[simulate]\nt_end = 1 ms\nsamples = 2\n[output]\ndump_system = true\n");
  c.out_dir = dir.path();
  run_command(c, Command::simulate);
  const std::string dump = slurp(dir.path() / "system.txt");
  CHECK(dump.find("ad*a") != std::string::npos);
  CHECK(lines_of(dump).size() >= 30);
}

TEST_CASE("command names") {
  for (auto name : command_names()) CHECK(command_name(*parse_command(name)) == name);
  CHECK(!parse_command("nope"));
}

}
