#pragma once

#include "config.hpp"

#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spinmaser::cli {

enum class Command { simulate, steady, spectrum, sweep_pump, sweep_detuning, features };

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1; ///< I/O or internal error
inline constexpr int exit_config = 2;
inline constexpr int exit_convergence = 3;
inline constexpr int exit_partial = 4;

std::optional<Command> parse_command(std::string_view name);
std::string_view command_name(Command c);
const std::vector<std::string_view>& command_names();

struct CommandResult {
  int exit_code = exit_ok;
  std::string summary; ///< one line
  std::vector<std::filesystem::path> files;
};

/// Runs `command` and writes its artifacts into config.out_dir.
CommandResult run_command(const RunConfig& config, Command command);

int exit_code_for(const std::exception& e);
/// {"error": {"kind": ..., "message": ..., "exit_code": ...}}
std::string error_json(const std::exception& e);

} // namespace spinmaser::cli
