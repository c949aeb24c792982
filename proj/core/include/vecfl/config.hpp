#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "vecfl/netmodel.hpp"
#include "vecfl/schemes.hpp"

namespace vecfl::cli {

// A parsed, validated run configuration. `canonical` is the sorted-key JSON
// dump the config hash is computed over; re-running a command with the same
// file reproduces hash and artifacts byte for byte.
struct RunConfig {
  pipeline::Experiment experiment;
  // task id -> stage -> calibration CSV path (relative to the config file).
  std::map<int, std::map<netmodel::Stage, std::string>> calibration_sources;
  std::string canonical;
  std::string hash_hex;
};

// Strict parser: unknown keys anywhere raise ConfigError naming the key.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::filesystem::path& path);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace vecfl::cli
