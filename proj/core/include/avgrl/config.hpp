#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "avgrl/agents.hpp"
#include "avgrl/env.hpp"
#include "json.hpp"

namespace avgrl::config {

// Bad config file, unknown key, out-of-range value. The CLI maps this to
// its config-error exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProtocolEnvConfig {
  std::vector<std::string> command;
  int timeout_ms = 30000;
};

using EnvConfig =
    std::variant<env::DotReacherConfig, env::PendulumConfig, ProtocolEnvConfig>;

std::string env_kind(const EnvConfig& config);
std::unique_ptr<env::Env> make_env(const EnvConfig& config);

// JSON codecs. Parsers reject unknown keys, listing the nearest valid ones.
nlohmann::json agent_to_json(const agents::AgentConfig& config);
agents::AgentConfig agent_from_json(const nlohmann::json& j);
nlohmann::json env_to_json(const EnvConfig& config);
EnvConfig env_from_json(const nlohmann::json& j);

// Enum names used across config files and logs.
std::string to_string(nn::Activation a);
std::string to_string(nn::FeatureNorm f);
std::string to_string(agents::EntropyKind e);
nn::Activation activation_from_string(const std::string& s);
nn::FeatureNorm feature_norm_from_string(const std::string& s);
agents::EntropyKind entropy_kind_from_string(const std::string& s);

// Applies one dotted-path override ("agent.tau=1.0"); the value is parsed
// as JSON when possible, as a string otherwise. The path must already exist
// in the document — creating new keys is an error with suggestions.
void apply_override(nlohmann::json& doc, const std::string& assignment);

nlohmann::json load_json_file(const std::string& path);

}  // namespace avgrl::config
