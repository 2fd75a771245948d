#include "avgrl/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "avgrl/env_protocol.hpp"

namespace avgrl::config {

using nlohmann::json;

namespace {

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string nearest_keys(const std::string& key,
                         const std::vector<std::string>& known) {
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& k : known) ranked.emplace_back(edit_distance(key, k), k);
  std::sort(ranked.begin(), ranked.end());
  std::ostringstream os;
  const std::size_t n = std::min<std::size_t>(3, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i) os << ", ";
    os << ranked[i].second;
  }
  return os.str();
}

void reject_unknown_keys(const json& obj, const std::string& where,
                         const std::vector<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown key '" + where + "." + key +
                        "'; nearest valid keys: " + nearest_keys(key, known));
  }
}

template <typename T>
void read_field(const json& obj, const std::string& key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

std::string to_string(nn::Activation a) {
  switch (a) {
    case nn::Activation::kLeakyRelu: return "leaky_relu";
    case nn::Activation::kRelu: return "relu";
    case nn::Activation::kTanh: return "tanh";
    case nn::Activation::kIdentity: return "identity";
  }
  return "?";
}

std::string to_string(nn::FeatureNorm f) {
  switch (f) {
    case nn::FeatureNorm::kNone: return "none";
    case nn::FeatureNorm::kPnorm: return "pnorm";
    case nn::FeatureNorm::kLayerNorm: return "layer_norm";
    case nn::FeatureNorm::kRmsNorm: return "rms_norm";
  }
  return "?";
}

std::string to_string(agents::EntropyKind e) {
  return e == agents::EntropyKind::kDistribution ? "distribution" : "sample";
}

nn::Activation activation_from_string(const std::string& s) {
  if (s == "leaky_relu") return nn::Activation::kLeakyRelu;
  if (s == "relu") return nn::Activation::kRelu;
  if (s == "tanh") return nn::Activation::kTanh;
  if (s == "identity") return nn::Activation::kIdentity;
  throw ConfigError("unknown activation: " + s);
}

nn::FeatureNorm feature_norm_from_string(const std::string& s) {
  if (s == "none") return nn::FeatureNorm::kNone;
  if (s == "pnorm") return nn::FeatureNorm::kPnorm;
  if (s == "layer_norm") return nn::FeatureNorm::kLayerNorm;
  if (s == "rms_norm") return nn::FeatureNorm::kRmsNorm;
  throw ConfigError("unknown feature_norm: " + s);
}

agents::EntropyKind entropy_kind_from_string(const std::string& s) {
  if (s == "distribution") return agents::EntropyKind::kDistribution;
  if (s == "sample") return agents::EntropyKind::kSample;
  throw ConfigError("unknown entropy kind: " + s);
}

json agent_to_json(const agents::AgentConfig& c) {
  json j;
  j["gamma"] = c.gamma;
  j["eta"] = c.eta;
  j["actor_lr"] = c.actor_lr;
  j["critic_lr"] = c.critic_lr;
  j["tau"] = c.tau;
  j["rho"] = c.rho;
  j["alpha_lr"] = c.alpha_lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["norm_obs"] = c.norm_obs;
  j["scaled_td"] = c.scaled_td;
  j["feature_norm"] = to_string(c.feature_norm);
  j["hidden_dims"] = c.hidden_dims;
  j["activation"] = to_string(c.activation);
  j["hidden_gain"] = c.hidden_gain;
  j["output_gain"] = c.output_gain;
  j["raw_sgd"] = c.raw_sgd;
  j["literal_no_mask"] = c.literal_no_mask;
  j["iac_entropy"] = to_string(c.iac_entropy);
  j["target_entropy_sign"] = c.target_entropy_sign;
  j["log_std_min"] = c.log_std_min;
  j["log_std_max"] = c.log_std_max;
  j["seed"] = c.seed;
  return j;
}

agents::AgentConfig agent_from_json(const json& j) {
  static const std::vector<std::string> known = {
      "gamma", "eta", "actor_lr", "critic_lr", "tau", "rho", "alpha_lr",
      "beta1", "beta2", "norm_obs", "scaled_td", "feature_norm",
      "hidden_dims", "activation", "hidden_gain", "output_gain", "raw_sgd",
      "literal_no_mask", "iac_entropy", "target_entropy_sign", "log_std_min",
      "log_std_max", "seed", "kind"};
  if (!j.is_object()) throw ConfigError("agent config must be an object");
  reject_unknown_keys(j, "agent", known);

  agents::AgentConfig c;
  read_field(j, "gamma", c.gamma);
  read_field(j, "eta", c.eta);
  read_field(j, "actor_lr", c.actor_lr);
  read_field(j, "critic_lr", c.critic_lr);
  read_field(j, "tau", c.tau);
  read_field(j, "rho", c.rho);
  read_field(j, "alpha_lr", c.alpha_lr);
  read_field(j, "beta1", c.beta1);
  read_field(j, "beta2", c.beta2);
  read_field(j, "norm_obs", c.norm_obs);
  read_field(j, "scaled_td", c.scaled_td);
  if (j.contains("feature_norm"))
    c.feature_norm = feature_norm_from_string(j.at("feature_norm"));
  read_field(j, "hidden_dims", c.hidden_dims);
  if (j.contains("activation"))
    c.activation = activation_from_string(j.at("activation"));
  read_field(j, "hidden_gain", c.hidden_gain);
  read_field(j, "output_gain", c.output_gain);
  read_field(j, "raw_sgd", c.raw_sgd);
  read_field(j, "literal_no_mask", c.literal_no_mask);
  if (j.contains("iac_entropy"))
    c.iac_entropy = entropy_kind_from_string(j.at("iac_entropy"));
  read_field(j, "target_entropy_sign", c.target_entropy_sign);
  read_field(j, "log_std_min", c.log_std_min);
  read_field(j, "log_std_max", c.log_std_max);
  read_field(j, "seed", c.seed);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string env_kind(const EnvConfig& config) {
  if (const auto* dot = std::get_if<env::DotReacherConfig>(&config))
    return dot->variant == env::DotReacherVariant::kEasy ? "dot_reacher_easy"
                                                         : "dot_reacher_hard";
  if (std::holds_alternative<env::PendulumConfig>(config)) return "pendulum";
  return "protocol";
}

std::unique_ptr<env::Env> make_env(const EnvConfig& config) {
  if (const auto* dot = std::get_if<env::DotReacherConfig>(&config))
    return std::make_unique<env::DotReacher>(*dot);
  if (const auto* pend = std::get_if<env::PendulumConfig>(&config))
    return std::make_unique<env::Pendulum>(*pend);
  const auto& proto = std::get<ProtocolEnvConfig>(config);
  if (proto.command.empty())
    throw ConfigError("protocol env: 'command' must be non-empty");
  auto transport = std::make_unique<env::SubprocessTransport>(proto.command,
                                                              proto.timeout_ms);
  return std::make_unique<env::ProtocolClientEnv>(std::move(transport));
}

json env_to_json(const EnvConfig& config) {
  json j;
  j["kind"] = env_kind(config);
  if (const auto* dot = std::get_if<env::DotReacherConfig>(&config)) {
    j["dt"] = dot->dt;
    j["max_accel"] = dot->max_accel;
    j["arena_half_width"] = dot->arena_half_width;
    j["target_radius"] = dot->target_radius;
    j["velocity_threshold"] = dot->velocity_threshold;
    j["timeout_steps"] = dot->timeout_steps;
    j["reward_per_step"] = dot->reward_per_step;
    j["target_x"] = dot->target_x;
    j["target_y"] = dot->target_y;
    j["reward_scale"] = dot->reward_scale;
  } else if (const auto* pend = std::get_if<env::PendulumConfig>(&config)) {
    j["dt"] = pend->dt;
    j["gravity"] = pend->gravity;
    j["mass"] = pend->mass;
    j["length"] = pend->length;
    j["max_torque"] = pend->max_torque;
    j["max_speed"] = pend->max_speed;
    j["timeout_steps"] = pend->timeout_steps;
    j["reward_scale"] = pend->reward_scale;
  } else {
    const auto& proto = std::get<ProtocolEnvConfig>(config);
    j["command"] = proto.command;
    j["timeout_ms"] = proto.timeout_ms;
  }
  return j;
}

EnvConfig env_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("env config must be an object with a 'kind' field");
  const std::string kind = j.at("kind").get<std::string>();

  if (kind == "dot_reacher_easy" || kind == "dot_reacher_hard") {
    static const std::vector<std::string> known = {
        "kind", "dt", "max_accel", "arena_half_width", "target_radius",
        "velocity_threshold", "timeout_steps", "reward_per_step", "target_x",
        "target_y", "reward_scale"};
    reject_unknown_keys(j, "env", known);
    env::DotReacherConfig c = kind == "dot_reacher_easy"
                                  ? env::DotReacherConfig::easy()
                                  : env::DotReacherConfig::hard();
    read_field(j, "dt", c.dt);
    read_field(j, "max_accel", c.max_accel);
    read_field(j, "arena_half_width", c.arena_half_width);
    read_field(j, "target_radius", c.target_radius);
    read_field(j, "velocity_threshold", c.velocity_threshold);
    read_field(j, "timeout_steps", c.timeout_steps);
    read_field(j, "reward_per_step", c.reward_per_step);
    read_field(j, "target_x", c.target_x);
    read_field(j, "target_y", c.target_y);
    read_field(j, "reward_scale", c.reward_scale);
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return c;
  }
  if (kind == "pendulum") {
    static const std::vector<std::string> known = {
        "kind", "dt", "gravity", "mass", "length", "max_torque", "max_speed",
        "timeout_steps", "reward_scale"};
    reject_unknown_keys(j, "env", known);
    env::PendulumConfig c;
    read_field(j, "dt", c.dt);
    read_field(j, "gravity", c.gravity);
    read_field(j, "mass", c.mass);
    read_field(j, "length", c.length);
    read_field(j, "max_torque", c.max_torque);
    read_field(j, "max_speed", c.max_speed);
    read_field(j, "timeout_steps", c.timeout_steps);
    read_field(j, "reward_scale", c.reward_scale);
    return c;
  }
  if (kind == "protocol") {
    static const std::vector<std::string> known = {"kind", "command",
                                                   "timeout_ms"};
    reject_unknown_keys(j, "env", known);
    ProtocolEnvConfig c;
    read_field(j, "command", c.command);
    read_field(j, "timeout_ms", c.timeout_ms);
    return c;
  }
  throw ConfigError(
      "unknown env kind '" + kind +
      "'; valid kinds: dot_reacher_easy, dot_reacher_hard, pendulum, protocol");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like path.to.key=value: " +
                      assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);

  std::vector<std::string> parts;
  std::istringstream ps(path);
  std::string part;
  while (std::getline(ps, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty override path");

  json* node = &doc;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i]))
      throw ConfigError("override path not found: " + path);
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!node->is_object() || !node->contains(leaf)) {
    std::vector<std::string> known;
    if (node->is_object())
      for (const auto& [key, v] : node->items()) {
        (void)v;
        known.push_back(key);
      }
    throw ConfigError("override key not found: '" + path + "'" +
                      (known.empty()
                           ? ""
                           : "; nearest valid keys: " +
                                 nearest_keys(leaf, known)));
  }

  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;  // plain string
  }
  (*node)[leaf] = value;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

}  // namespace avgrl::config
