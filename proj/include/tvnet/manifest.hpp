#pragma once

#include <map>
#include <string>
#include <vector>

#include "tvnet/solver.hpp"

namespace tvnet {

/// Record of one CLI run. Serialized as JSON with keys in sorted order.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, double> metrics;
  std::string timestamp;  // ISO 8601, UTC

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

/// Solver fields as key/value strings, using the configuration-file keys.
std::map<std::string, std::string> config_snapshot(const SolverConfig& cfg);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace tvnet
