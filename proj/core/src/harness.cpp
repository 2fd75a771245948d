#include "avgrl/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "avgrl/checkpoint.hpp"
#include "avgrl/env_protocol.hpp"

namespace avgrl::harness {

using nlohmann::json;

namespace {

// Distinct sub-streams derived from the run seed.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

std::string row_kind_name(RowKind kind) {
  switch (kind) {
    case RowKind::kEpisode: return "episode";
    case RowKind::kDiagnostic: return "diag";
    case RowKind::kEval: return "eval";
    case RowKind::kDivergence: return "divergence";
  }
  return "?";
}

}  // namespace

void RunConfig::validate() const {
  if (total_steps < 0)
    throw config::ConfigError("run: total_steps must be >= 0");
  if (diag_every < 1)
    throw config::ConfigError("run: diag_every must be >= 1");
  if (eval_every < 0 || eval_episodes < 1)
    throw config::ConfigError("run: eval cadence/episodes out of range");
  if (checkpoint_every < 0)
    throw config::ConfigError("run: checkpoint_every must be >= 0");
  agent.validate();
}

json run_to_json(const RunConfig& config) {
  json j;
  json agent = config::agent_to_json(config.agent);
  agent["kind"] = agents::to_string(config.agent_kind);
  j["agent"] = agent;
  j["env"] = config::env_to_json(config.env);
  j["run"] = {{"total_steps", config.total_steps},
              {"diag_every", config.diag_every},
              {"eval_every", config.eval_every},
              {"eval_episodes", config.eval_episodes},
              {"checkpoint_every", config.checkpoint_every},
              {"seed", config.seed},
              {"out_dir", config.out_dir}};
  return j;
}

RunConfig run_from_json(const json& j) {
  if (!j.is_object())
    throw config::ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "agent" && key != "env" && key != "run")
      throw config::ConfigError("unknown top-level key '" + key +
                                "'; expected agent, env, run");
  }
  RunConfig config;
  if (j.contains("agent")) {
    const json& agent = j.at("agent");
    config.agent = config::agent_from_json(agent);
    if (agent.contains("kind"))
      config.agent_kind =
          agents::agent_kind_from_string(agent.at("kind").get<std::string>());
  }
  if (j.contains("env")) {
    config.env = config::env_from_json(j.at("env"));
  } else {
    throw config::ConfigError("missing required 'env' section (env.kind "
                              "selects the task)");
  }
  if (j.contains("run")) {
    const json& run = j.at("run");
    static const std::vector<std::string> known = {
        "total_steps", "diag_every", "eval_every", "eval_episodes",
        "checkpoint_every", "seed", "out_dir"};
    for (const auto& [key, value] : run.items()) {
      (void)value;
      bool ok = false;
      for (const auto& k : known) ok = ok || k == key;
      if (!ok)
        throw config::ConfigError("unknown key 'run." + key + "'");
    }
    if (run.contains("total_steps"))
      config.total_steps = run.at("total_steps").get<std::int64_t>();
    if (run.contains("diag_every"))
      config.diag_every = run.at("diag_every").get<std::int64_t>();
    if (run.contains("eval_every"))
      config.eval_every = run.at("eval_every").get<std::int64_t>();
    if (run.contains("eval_episodes"))
      config.eval_episodes = run.at("eval_episodes").get<std::int64_t>();
    if (run.contains("checkpoint_every"))
      config.checkpoint_every = run.at("checkpoint_every").get<std::int64_t>();
    if (run.contains("seed")) config.seed = run.at("seed").get<std::uint64_t>();
    if (run.contains("out_dir"))
      config.out_dir = run.at("out_dir").get<std::string>();
  }
  config.validate();
  return config;
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kCompleted: return "completed";
    case RunStatus::kDiverged: return "diverged";
    case RunStatus::kFaulted: return "faulted";
  }
  return "?";
}

std::optional<double> compute_auc(const std::vector<MetricRow>& rows) {
  double sum = 0.0;
  std::int64_t count = 0;
  for (const auto& row : rows) {
    if (row.kind != RowKind::kEpisode) continue;
    sum += row.episodic_return;
    count += 1;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

TrainingLoop::TrainingLoop(const RunConfig& config)
    : config_(config), env_rng_(splitmix64(config.seed ^ 0x656e76ull)) {
  config_.validate();
  agents::AgentConfig agent_config = config_.agent;
  if (agent_config.seed == 0)
    agent_config.seed = splitmix64(config_.seed ^ 0x6167656e74ull);
  owned_env_ = config::make_env(config_.env);
  owned_agent_ = agents::make_agent(config_.agent_kind, agent_config,
                                    owned_env_->obs_dim(),
                                    owned_env_->act_dim());
  agent_ = owned_agent_.get();
  env_ = owned_env_.get();
}

TrainingLoop::TrainingLoop(const RunConfig& config, agents::Agent& agent,
                           env::Env& env)
    : config_(config),
      agent_(&agent),
      env_(&env),
      env_rng_(splitmix64(config.seed ^ 0x656e76ull)) {
  config_.validate();
}

void TrainingLoop::write_jsonl_row(const MetricRow& row) {
  if (!jsonl_) return;
  json j;
  j["type"] = row_kind_name(row.kind);
  j["step"] = row.step;
  j["episode"] = row.episode;
  j["episodic_return"] = finite_or_null(row.episodic_return);
  j["episode_length"] = row.episode_length;
  j["actor_grad_norm"] = finite_or_null(row.actor_grad_norm);
  j["critic_grad_norm"] = finite_or_null(row.critic_grad_norm);
  j["delta"] = finite_or_null(row.delta);
  j["delta_scaled"] = finite_or_null(row.delta_scaled);
  j["sigma_delta"] = finite_or_null(row.sigma_delta);
  j["q_value"] = finite_or_null(row.q_value);
  *jsonl_ << j.dump() << '\n';
}

void TrainingLoop::emit(MetricRow row, RunSummary& summary) {
  write_jsonl_row(row);
  summary.rows.push_back(std::move(row));
}

RunSummary TrainingLoop::run() {
  RunSummary summary;
  const double wall_start = now_ms();

  std::string metrics_path;
  if (!config_.out_dir.empty()) {
    std::filesystem::create_directories(config_.out_dir);
    metrics_path = config_.out_dir + "/metrics.jsonl";
    const bool resuming = step_ > 0;
    jsonl_ = std::make_unique<std::ofstream>(
        metrics_path, resuming ? std::ios::app : std::ios::trunc);
    if (!*jsonl_)
      throw std::runtime_error("cannot open metrics log: " + metrics_path);
    if (!resuming) {
      json header;
      header["type"] = "header";
      header["schema_version"] = kMetricSchemaVersion;
      header["config"] = run_to_json(config_);
      *jsonl_ << header.dump() << '\n';
    }
  }

  try {
    if (step_ < config_.total_steps && !episode_open_) {
      current_obs_ = env_->reset(env_rng_);
      agent_->begin_episode(current_obs_);
      episode_open_ = true;
    }

    while (step_ < config_.total_steps) {
      const double step_start = now_ms();
      const Eigen::VectorXd action = agent_->act();
      const env::EnvStep env_step = env_->step(action);

      agents::Transition transition;
      transition.obs = current_obs_;
      transition.action = action;
      transition.reward = env_step.reward;
      transition.next_obs = env_step.observation;
      transition.terminal = env_step.terminal;
      transition.truncated = env_step.truncated;

      const agents::UpdateDiagnostics diag = agent_->learn(transition);
      step_ += 1;
      episode_return_ += env_step.reward;
      episode_length_ += 1;

      MetricRow row;
      row.step = step_;
      row.episode = episode_;
      row.episodic_return = episode_return_;
      row.episode_length = episode_length_;
      row.actor_grad_norm = diag.actor_grad_norm;
      row.critic_grad_norm = diag.critic_grad_norm;
      row.delta = diag.delta;
      row.delta_scaled = diag.delta_scaled;
      row.sigma_delta = diag.sigma_delta;
      row.q_value = diag.q_value;
      row.wall_ms = now_ms() - step_start;

      if (agent_->diverged()) {
        row.kind = RowKind::kDivergence;
        emit(row, summary);
        summary.status = RunStatus::kDiverged;
        break;
      }

      if (step_ % config_.diag_every == 0) {
        row.kind = RowKind::kDiagnostic;
        emit(row, summary);
      }

      if (config_.eval_every > 0 && step_ % config_.eval_every == 0) {
        // Deterministic greedy rollouts on a fresh env instance; the
        // training env and statistics stay untouched.
        auto eval_env = config::make_env(config_.env);
        const auto returns = evaluate(*agent_, *eval_env,
                                      static_cast<int>(config_.eval_episodes),
                                      config_.seed ^ 0x6576616cull);
        MetricRow eval_row;
        eval_row.kind = RowKind::kEval;
        eval_row.step = step_;
        eval_row.episode = episode_;
        double mean = 0.0;
        for (const double r : returns) mean += r;
        eval_row.episodic_return = mean / static_cast<double>(returns.size());
        eval_row.episode_length = static_cast<std::int64_t>(returns.size());
        emit(eval_row, summary);
      }

      if (env_step.terminal || env_step.truncated) {
        row.kind = RowKind::kEpisode;
        emit(row, summary);
        episode_ += 1;
        episode_return_ = 0.0;
        episode_length_ = 0;
        episode_open_ = false;
        if (step_ < config_.total_steps) {
          current_obs_ = env_->reset(env_rng_);
          agent_->begin_episode(current_obs_);
          episode_open_ = true;
        }
      } else {
        current_obs_ = env_step.observation;
      }

      if (config_.checkpoint_every > 0 && !config_.out_dir.empty() &&
          step_ % config_.checkpoint_every == 0 &&
          summary.status == RunStatus::kCompleted) {
        save_checkpoint(config_.out_dir + "/checkpoint_" +
                        std::to_string(step_) + ".bin");
      }
    }
  } catch (const env::EnvProtocolError& e) {
    summary.status = RunStatus::kFaulted;
    summary.fault_message = e.what();
  }

  summary.steps = step_;
  summary.episodes = episode_;
  summary.auc = compute_auc(summary.rows);
  summary.total_wall_ms = now_ms() - wall_start;

  if (!config_.out_dir.empty()) {
    if (summary.status != RunStatus::kFaulted) {
      summary.checkpoint_path = config_.out_dir + "/checkpoint_final.bin";
      save_checkpoint(summary.checkpoint_path);
    }
    std::ofstream csv(config_.out_dir + "/summary.csv", std::ios::trunc);
    csv << "status,steps,episodes,auc,total_wall_ms\n";
    csv << to_string(summary.status) << ',' << summary.steps << ','
        << summary.episodes << ',';
    csv.precision(17);
    if (summary.auc.has_value()) csv << *summary.auc;
    csv << ',' << summary.total_wall_ms << '\n';
  }
  jsonl_.reset();
  return summary;
}

void TrainingLoop::save_checkpoint(const std::string& path) const {
  checkpoint::Writer root;
  checkpoint::Writer meta;
  // out_dir is machine/run-local, not part of the reproducibility contract.
  nlohmann::json config_echo = run_to_json(config_);
  config_echo["run"].erase("out_dir");
  meta.str(config_echo.dump());
  meta.i64(step_);
  meta.i64(episode_);
  meta.f64(episode_return_);
  meta.i64(episode_length_);
  meta.boolean(episode_open_);
  meta.vec(current_obs_);
  checkpoint::write_rng(meta, env_rng_);
  root.section("harness", meta);

  const auto env_state = env_->save_state();
  checkpoint::Writer env_section;
  env_section.boolean(env_state.has_value());
  if (env_state.has_value()) env_section.str(*env_state);
  root.section("env", env_section);

  agent_->save(root);
  checkpoint::save_file(path, root);
}

void TrainingLoop::load_checkpoint(const std::string& path) {
  const std::string payload = checkpoint::load_file(path);
  checkpoint::Reader root{std::string_view(payload)};

  checkpoint::Reader meta = root.section("harness");
  const std::string config_text = meta.str();
  const json saved_config = json::parse(config_text);
  json current_config = run_to_json(config_);
  // The output directory may legitimately differ between save and resume.
  json saved_cmp = saved_config;
  saved_cmp["run"].erase("out_dir");
  current_config["run"].erase("out_dir");
  if (saved_cmp != current_config)
    throw checkpoint::SchemaError(
        "checkpoint config does not match the current run config; refusing "
        "to resume");
  step_ = meta.i64();
  episode_ = meta.i64();
  episode_return_ = meta.f64();
  episode_length_ = meta.i64();
  episode_open_ = meta.boolean();
  current_obs_ = meta.vec();
  env_rng_ = checkpoint::read_rng(meta);

  checkpoint::Reader env_section = root.section("env");
  const bool has_env_state = env_section.boolean();
  if (has_env_state) {
    env_->load_state(env_section.str());
  } else if (episode_open_) {
    throw checkpoint::SchemaError(
        "checkpoint has no environment snapshot (external env); cannot "
        "resume mid-episode");
  }

  agent_->load(root);
}

RunSummary run_training(const RunConfig& config) {
  TrainingLoop loop(config);
  return loop.run();
}

std::vector<double> evaluate(const agents::Agent& agent, env::Env& env,
                             int episodes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> returns;
  returns.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    Eigen::VectorXd obs = env.reset(rng);
    double ep_return = 0.0;
    while (true) {
      const env::EnvStep step = env.step(agent.eval_action(obs));
      ep_return += step.reward;
      if (step.terminal || step.truncated) break;
      obs = step.observation;
    }
    returns.push_back(ep_return);
  }
  return returns;
}

}  // namespace avgrl::harness
