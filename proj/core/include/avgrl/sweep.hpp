#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avgrl/agents.hpp"
#include "avgrl/config.hpp"
#include "avgrl/harness.hpp"

namespace avgrl::sweep {

// Random-search ranges. Learning rates and the entropy-side coefficient are
// drawn log-uniformly; beta1 and gamma are uniform categorical draws.
struct SearchSpace {
  double lr_log10_lo = -6.0;
  double lr_log10_hi = -2.0;
  double alpha_log10_lo = -5.0;
  double alpha_log10_hi = 0.0;
  std::vector<double> beta1_choices = {0.0, 0.9};
  double beta2 = 0.999;
  std::vector<double> gamma_choices = {0.95, 0.97, 0.99, 0.995, 1.0};
};

// One draw from the space on top of `base`. Draw order is fixed (actor_lr,
// critic_lr, beta1, alpha_lr, gamma) so a seed fully determines the config.
// The alpha_lr draw populates the fixed entropy coefficient for AVG and IAC
// and the entropy-coefficient learning rate for SAC-1.
agents::AgentConfig sample_config(const SearchSpace& space,
                                  const agents::AgentConfig& base,
                                  agents::AgentKind kind, Rng& rng);

struct SweepConfig {
  agents::AgentKind agent_kind = agents::AgentKind::kAvg;
  agents::AgentConfig base;
  config::EnvConfig env = env::DotReacherConfig::easy();
  SearchSpace space;
  int num_configs = 30;
  int num_seeds = 5;
  std::int64_t steps_per_run = 100000;
  std::uint64_t seed = 0;
  int workers = 0;  // 0: hardware concurrency
  std::string out_dir;
};

struct RunRecord {
  int config_id = 0;
  std::uint64_t run_seed = 0;
  std::optional<double> auc;
  bool diverged = false;
  bool faulted = false;
};

struct SweepResult {
  int config_id = 0;
  agents::AgentConfig config;
  std::vector<RunRecord> runs;
  std::optional<double> mean_auc;   // over completed runs only
  std::optional<double> stderr_;    // of the mean
  bool diverged_any = false;
};

// Dispatches num_configs x num_seeds runs to a bounded worker pool; results
// merge deterministically by cell index. Writes manifest.json and
// results.csv when out_dir is set.
std::vector<SweepResult> run_sweep(const SweepConfig& config);

// Drops configurations with any diverged seed (or no completed run), sorts
// by mean AUC descending; ties break by lower stderr, then config id.
std::vector<SweepResult> rank_configs(const std::vector<SweepResult>& results,
                                      int top_k);

void write_manifest(const std::string& path, const SweepConfig& config,
                    const std::vector<SweepResult>& results);
void write_results_csv(const std::string& path,
                       const std::vector<SweepResult>& results);

nlohmann::json sweep_to_json(const SweepConfig& config);
SweepConfig sweep_from_json(const nlohmann::json& j);

}  // namespace avgrl::sweep
