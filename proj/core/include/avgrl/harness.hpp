#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avgrl/agents.hpp"
#include "avgrl/config.hpp"
#include "avgrl/env.hpp"

namespace avgrl::harness {

inline constexpr std::uint32_t kMetricSchemaVersion = 1;

struct RunConfig {
  agents::AgentKind agent_kind = agents::AgentKind::kAvg;
  agents::AgentConfig agent;
  config::EnvConfig env = env::DotReacherConfig::easy();
  std::int64_t total_steps = 100000;
  std::int64_t diag_every = 1000;     // gradient-norm rows
  std::int64_t eval_every = 0;        // 0: no periodic deterministic evals
  std::int64_t eval_episodes = 5;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: keep metrics in memory only

  void validate() const;
};

nlohmann::json run_to_json(const RunConfig& config);
RunConfig run_from_json(const nlohmann::json& j);

enum class RowKind { kEpisode, kDiagnostic, kEval, kDivergence };

struct MetricRow {
  RowKind kind = RowKind::kEpisode;
  std::int64_t step = 0;
  std::int64_t episode = 0;
  double episodic_return = 0.0;  // undiscounted
  std::int64_t episode_length = 0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
  double delta = 0.0;
  double delta_scaled = 0.0;
  double sigma_delta = 1.0;
  double q_value = 0.0;
  // Telemetry only; kept out of the JSONL stream so identical seeds produce
  // byte-identical logs.
  double wall_ms = 0.0;
};

enum class RunStatus { kCompleted, kDiverged, kFaulted };

std::string to_string(RunStatus status);

struct RunSummary {
  RunStatus status = RunStatus::kCompleted;
  std::int64_t steps = 0;
  std::int64_t episodes = 0;
  std::optional<double> auc;  // missing when no episode finished
  double total_wall_ms = 0.0;
  std::vector<MetricRow> rows;
  std::string checkpoint_path;
  std::string fault_message;
};

// Mean undiscounted episodic return over the run's episode rows; nullopt
// when no episodes completed.
std::optional<double> compute_auc(const std::vector<MetricRow>& rows);

// Owns agent, env and loop counters; supports checkpoint/resume with
// bit-exact continuation.
class TrainingLoop {
 public:
  explicit TrainingLoop(const RunConfig& config);
  // Injected dependencies (fault-injection tests); the loop does not own
  // them.
  TrainingLoop(const RunConfig& config, agents::Agent& agent, env::Env& env);

  // Runs until total_steps, divergence or fault; returns the summary and,
  // when out_dir is set, writes metrics.jsonl, summary.csv and checkpoints.
  RunSummary run();

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  const agents::Agent& agent() const { return *agent_; }
  std::int64_t step() const { return step_; }

 private:
  void write_jsonl_row(const MetricRow& row);
  void emit(MetricRow row, RunSummary& summary);

  RunConfig config_;
  std::unique_ptr<agents::Agent> owned_agent_;
  std::unique_ptr<env::Env> owned_env_;
  agents::Agent* agent_ = nullptr;
  env::Env* env_ = nullptr;
  Rng env_rng_;

  std::int64_t step_ = 0;
  std::int64_t episode_ = 0;
  double episode_return_ = 0.0;
  std::int64_t episode_length_ = 0;
  Eigen::VectorXd current_obs_;
  bool episode_open_ = false;

  std::unique_ptr<std::ofstream> jsonl_;
};

// Convenience wrapper: fresh loop, full run.
RunSummary run_training(const RunConfig& config);

// Deterministic evaluation: noise-free actions, no statistics updates.
// Returns one undiscounted return per episode.
std::vector<double> evaluate(const agents::Agent& agent, env::Env& env,
                             int episodes, std::uint64_t seed);

}  // namespace avgrl::harness
