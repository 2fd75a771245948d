#include "avgrl/sweep.hpp"

#include <cmath>

#include "doctest.h"
#include "support/oracles.hpp"

using namespace avgrl;
using sweep::SearchSpace;
using sweep::SweepResult;

namespace {

SweepResult result_with(int id, std::vector<std::optional<double>> aucs,
                        std::vector<bool> diverged) {
  SweepResult r;
  r.config_id = id;
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < aucs.size(); ++i) {
    sweep::RunRecord record;
    record.config_id = id;
    record.auc = aucs[i];
    record.diverged = diverged[i];
    r.runs.push_back(record);
    r.diverged_any = r.diverged_any || diverged[i];
    if (!diverged[i] && aucs[i].has_value()) {
      sum += *aucs[i];
      sq += *aucs[i] * *aucs[i];
      n += 1;
    }
  }
  if (n > 0) {
    r.mean_auc = sum / n;
    r.stderr_ = n > 1 ? std::sqrt(std::max(0.0, (sq - n * *r.mean_auc *
                                                          *r.mean_auc) /
                                                    (n - 1)) /
                                  n)
                      : 0.0;
  }
  return r;
}

}  // namespace

TEST_CASE("sampled hyperparameters respect the declared ranges") {
  SearchSpace space;
  agents::AgentConfig base;
  Rng rng(2024);
  std::vector<double> actor_log10;
  int beta1_zero = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto config =
        sweep::sample_config(space, base, agents::AgentKind::kAvg, rng);
    CHECK(config.actor_lr >= 1e-6);
    CHECK(config.actor_lr <= 1e-2);
    CHECK(config.critic_lr >= 1e-6);
    CHECK(config.critic_lr <= 1e-2);
    CHECK((config.beta1 == 0.0 || config.beta1 == 0.9));
    CHECK(config.beta2 == 0.999);
    CHECK(config.eta >= 1e-5);
    CHECK(config.eta <= 1.0);
    bool gamma_ok = false;
    for (const double g : space.gamma_choices) gamma_ok = gamma_ok || g == config.gamma;
    CHECK(gamma_ok);
    actor_log10.push_back((std::log10(config.actor_lr) + 6.0) / 4.0);
    beta1_zero += config.beta1 == 0.0 ? 1 : 0;
  }
  // KS uniformity of log10(actor_lr) over its range.
  CHECK(testsupport::ks_uniform_pvalue(actor_log10) > 0.01);
  // beta1 should be a fair coin: 3 sigma around n/2.
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(beta1_zero - n / 2.0) < 3.0 * sigma);
}

TEST_CASE("alpha draw lands in eta for avg and in alpha_lr for sac") {
  SearchSpace space;
  agents::AgentConfig base;
  base.alpha_lr = 0.5;
  base.eta = 0.25;
  Rng rng_a(1);
  Rng rng_b(1);
  const auto avg = sweep::sample_config(space, base, agents::AgentKind::kAvg,
                                        rng_a);
  const auto sac = sweep::sample_config(space, base, agents::AgentKind::kSac1,
                                        rng_b);
  CHECK(avg.eta == sac.alpha_lr);     // same draw, different destination
  CHECK(avg.alpha_lr == 0.5);         // untouched base value
  CHECK(sac.eta == 0.25);
}

TEST_CASE("same seed reproduces the same configuration") {
  SearchSpace space;
  agents::AgentConfig base;
  Rng rng_a(99);
  Rng rng_b(99);
  const auto a = sweep::sample_config(space, base, agents::AgentKind::kAvg,
                                      rng_a);
  const auto b = sweep::sample_config(space, base, agents::AgentKind::kAvg,
                                      rng_b);
  CHECK(a.actor_lr == b.actor_lr);
  CHECK(a.critic_lr == b.critic_lr);
  CHECK(a.beta1 == b.beta1);
  CHECK(a.eta == b.eta);
  CHECK(a.gamma == b.gamma);
}

TEST_CASE("a single diverged seed removes the configuration from ranking") {
  std::vector<SweepResult> results;
  results.push_back(result_with(0, {-5.0, -5.0}, {false, false}));
  results.push_back(result_with(1, {-3.0, -3.0}, {false, true}));
  const auto ranked = sweep::rank_configs(results, -1);
  REQUIRE(ranked.size() == 1);
  CHECK(ranked[0].config_id == 0);
}

TEST_CASE("clean configurations sort by mean AUC descending") {
  std::vector<SweepResult> results;
  results.push_back(result_with(0, {-5.0}, {false}));
  results.push_back(result_with(1, {-3.0}, {false}));
  const auto ranked = sweep::rank_configs(results, -1);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].config_id == 1);
  CHECK(ranked[1].config_id == 0);
}

TEST_CASE("ties break by lower stderr then config id") {
  std::vector<SweepResult> results;
  auto a = result_with(0, {-4.0, -6.0}, {false, false});   // mean -5
  auto b = result_with(1, {-4.5, -5.5}, {false, false});   // mean -5, tighter
  REQUIRE(*a.mean_auc == *b.mean_auc);
  REQUIRE(*b.stderr_ < *a.stderr_);
  results.push_back(a);
  results.push_back(b);
  auto ranked = sweep::rank_configs(results, -1);
  CHECK(ranked[0].config_id == 1);

  // Exact tie on stderr as well: lower id first.
  std::vector<SweepResult> same;
  same.push_back(result_with(5, {-5.0}, {false}));
  same.push_back(result_with(2, {-5.0}, {false}));
  ranked = sweep::rank_configs(same, -1);
  CHECK(ranked[0].config_id == 2);
}

TEST_CASE("all-diverged sweeps rank to an empty list") {
  std::vector<SweepResult> results;
  results.push_back(result_with(0, {-1.0}, {true}));
  results.push_back(result_with(1, {-2.0}, {true}));
  CHECK(sweep::rank_configs(results, -1).empty());
}

TEST_CASE("rank respects top_k") {
  std::vector<SweepResult> results;
  for (int i = 0; i < 6; ++i)
    results.push_back(result_with(i, {static_cast<double>(-i)}, {false}));
  CHECK(sweep::rank_configs(results, 3).size() == 3);
}

TEST_CASE("tiny sweeps are deterministic end to end") {
  sweep::SweepConfig config;
  config.agent_kind = agents::AgentKind::kAvg;
  config.base.hidden_dims = {6, 6};
  env::DotReacherConfig env_config = env::DotReacherConfig::easy();
  env_config.timeout_steps = 40;
  config.env = env_config;
  config.num_configs = 2;
  config.num_seeds = 2;
  config.steps_per_run = 150;
  config.seed = 7;
  config.workers = 2;

  const auto first = sweep::run_sweep(config);
  const auto second = sweep::run_sweep(config);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].config.actor_lr == second[i].config.actor_lr);
    REQUIRE(first[i].runs.size() == second[i].runs.size());
    for (std::size_t j = 0; j < first[i].runs.size(); ++j) {
      CHECK(first[i].runs[j].run_seed == second[i].runs[j].run_seed);
      CHECK(first[i].runs[j].auc == second[i].runs[j].auc);
      CHECK(first[i].runs[j].diverged == second[i].runs[j].diverged);
    }
  }
}

TEST_CASE("sweep config json round-trips") {
  sweep::SweepConfig config;
  config.num_configs = 5;
  config.num_seeds = 3;
  config.steps_per_run = 1234;
  config.seed = 42;
  const auto j = sweep::sweep_to_json(config);
  const auto back = sweep::sweep_from_json(j);
  CHECK(back.num_configs == 5);
  CHECK(back.num_seeds == 3);
  CHECK(back.steps_per_run == 1234);
  CHECK(back.seed == 42);
  CHECK(sweep::sweep_to_json(back) == j);
}
