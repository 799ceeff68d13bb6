#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hetfraud/config.hpp"

namespace hetfraud::cli {

inline constexpr const char* kVersion = "0.1.0";

// Resolved configuration plus provenance of one command run. Written as a
// key = value file whose non-"manifest." keys are a valid --config input,
// so `hetfraud <command> --config <manifest>` replays the run.
struct RunManifest {
  std::string command;
  KeyValueConfig config;
  std::vector<std::string> artifacts;
  std::string started;
  std::string finished;

  void write(const std::filesystem::path& path) const;
};

// Argument vector to config: file first, then --key value / --key=value
// overrides (dashes in keys become underscores).
KeyValueConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides);

// Entry point; returns the process exit code (0 ok, 1 internal, 2 input,
// 3 config or shape).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hetfraud::cli
