#include "commands.hpp"
#include "config.hpp"

#include <spinmaser/error.hpp>

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>

using namespace spinmaser;
using namespace spinmaser::cli;

int main(int argc, char** argv) {
  CLI::App app{"spinmaser: mean-field maser dynamics for optically pumped spin ensembles"};
  app.set_version_flag("--version", "spinmaser 0.1.0");

  std::string command_text;
  std::string config_path;
  std::string preset;
  std::vector<std::string> sets;
  unsigned jobs = 0;
  std::string out_dir;
  std::string format;
  bool list_keys = false;

  std::string commands;
  for (auto name : command_names()) commands += (commands.empty() ? "" : ", ") + std::string(name);
  app.add_option("command", command_text, "One of: " + commands);
  app.add_option("--config", config_path, "Run configuration file")->check(CLI::ExistingFile);
  app.add_option("--preset", preset, "Model preset (nv, pentacene, ...)");
  app.add_option("--set", sets, "Override a config key: key=value")->allow_extra_args(false);
  app.add_option("--jobs", jobs, "Worker threads for sweeps (0 = all cores)");
  app.add_option("--out", out_dir, "Output directory (default: $SPINMASER_OUT or .)");
  app.add_option("--format", format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
  app.add_flag("--list-keys", list_keys, "Print every config key with its default and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  if (list_keys) {
    std::cout << config_reference();
    return exit_ok;
  }

  try {
    const auto command = parse_command(command_text);
    if (!command) throw ConfigError("unknown command '" + command_text + "' (expected " + commands + ")");

    // flags win over --set, which wins over the file
    if (!preset.empty()) sets.push_back("model.preset=" + preset);
    if (!out_dir.empty()) sets.push_back("output.dir=" + out_dir);
    if (!format.empty()) sets.push_back("output.format=" + format);
    if (app.count("--jobs")) sets.push_back("run.jobs=" + std::to_string(jobs));

    RunConfig cfg = config_path.empty() ? parse_config("", sets, "command line") : load_config(config_path, sets);
    if (cfg.out_dir.empty()) {
      const char* env = std::getenv("SPINMASER_OUT");
      cfg.out_dir = env && *env ? env : ".";
    }

    const CommandResult r = run_command(cfg, *command);
    std::cout << r.summary << '\n';
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << error_json(e) << '\n';
    return exit_code_for(e);
  }
}
