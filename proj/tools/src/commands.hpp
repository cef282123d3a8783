#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "config.hpp"

namespace distort::cli {

struct RunContext {
  std::filesystem::path out;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct RunReport {
  json report;                            // deterministic content
  std::map<std::string, double> timing;   // wall-clock seconds per phase, kept out of report.json
  int exit_code = 0;                      // nonzero when a verification inside the run failed
};

RunReport cmd_tree(const json& config, const RunContext& ctx);
RunReport cmd_dynamics(const json& config, const RunContext& ctx);
RunReport cmd_density(const json& config, const RunContext& ctx);

}  // namespace distort::cli
