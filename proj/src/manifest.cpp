#include "tvnet/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include <json.hpp>

namespace tvnet {

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["metrics"] = metrics;
  j["timestamp"] = timestamp;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RunManifest m;
  j.at("command").get_to(m.command);
  j.at("config").get_to(m.config);
  j.at("inputs").get_to(m.inputs);
  j.at("outputs").get_to(m.outputs);
  j.at("metrics").get_to(m.metrics);
  j.at("timestamp").get_to(m.timestamp);
  return m;
}

std::map<std::string, std::string> config_snapshot(const SolverConfig& cfg) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  return {
      {"lambda", num(cfg.lambda)},
      {"theta", num(cfg.theta)},
      {"tau", num(cfg.tau)},
      {"eps_stop", num(cfg.eps_stop)},
      {"eps_div", num(cfg.eps_div)},
      {"scale_factor", num(cfg.scale_factor)},
      {"n_scales", std::to_string(cfg.n_scales)},
      {"n_warps", std::to_string(cfg.n_warps)},
      {"n_iters", std::to_string(cfg.n_iters)},
  };
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace tvnet
