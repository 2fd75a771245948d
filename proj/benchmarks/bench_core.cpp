#include <benchmark/benchmark.h>

#include "avgrl/agents.hpp"
#include "avgrl/env.hpp"
#include "avgrl/harness.hpp"
#include "avgrl/nn.hpp"
#include "avgrl/norm.hpp"

namespace {

using namespace avgrl;

nn::MlpSpec critic_spec() {
  nn::MlpSpec spec;
  spec.input_dim = 6;
  spec.hidden_dims = {256, 256};
  spec.output_dim = 1;
  spec.feature_norm = nn::FeatureNorm::kPnorm;
  return spec;
}

void BM_MlpForward(benchmark::State& state) {
  Rng rng(1);
  const auto spec = critic_spec();
  const auto params = nn::init_params(spec, rng);
  nn::Vector x(6);
  x << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
  for (auto _ : state) {
    auto [y, tape] = nn::forward(params, spec, x);
    benchmark::DoNotOptimize(y);
    benchmark::DoNotOptimize(tape);
  }
}
BENCHMARK(BM_MlpForward);

void BM_MlpBackwardParams(benchmark::State& state) {
  Rng rng(1);
  const auto spec = critic_spec();
  const auto params = nn::init_params(spec, rng);
  nn::Vector x(6);
  x << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
  auto [y, tape] = nn::forward(params, spec, x);
  const nn::Vector upstream = nn::Vector::Ones(1);
  for (auto _ : state) {
    auto g = nn::grad_wrt_params(params, tape, upstream);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_MlpBackwardParams);

void BM_MlpBackwardInput(benchmark::State& state) {
  Rng rng(1);
  const auto spec = critic_spec();
  const auto params = nn::init_params(spec, rng);
  nn::Vector x(6);
  x << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
  auto [y, tape] = nn::forward(params, spec, x);
  const nn::Vector upstream = nn::Vector::Ones(1);
  for (auto _ : state) {
    auto g = nn::grad_wrt_input(params, tape, upstream);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_MlpBackwardInput);

void BM_AdamStep(benchmark::State& state) {
  Rng rng(1);
  const auto spec = critic_spec();
  auto params = nn::init_params(spec, rng);
  auto opt = optim::AdamState::make(params.values.size(), 1e-3, 0.0, 0.999);
  nn::Vector g(params.values.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        optim::adam_step(opt, params, g, optim::Direction::kAscent));
  }
}
BENCHMARK(BM_AdamStep);

void BM_WelfordUpdate(benchmark::State& state) {
  auto stat = norm::RunningStat::make(4);
  Rng rng(3);
  norm::Array x(4);
  for (auto _ : state) {
    for (int i = 0; i < 4; ++i) x(i) = rng.normal();
    benchmark::DoNotOptimize(stat.update(x));
  }
}
BENCHMARK(BM_WelfordUpdate);

void BM_AvgAgentStep(benchmark::State& state) {
  agents::AgentConfig config;
  config.seed = 5;
  auto agent = agents::make_agent(agents::AgentKind::kAvg, config, 4, 2);
  env::DotReacher reacher(env::DotReacherConfig::easy());
  Rng env_rng(7);
  Eigen::VectorXd obs = reacher.reset(env_rng);
  agent->begin_episode(obs);
  for (auto _ : state) {
    const Eigen::VectorXd action = agent->act();
    const env::EnvStep step = reacher.step(action);
    agents::Transition t;
    t.obs = obs;
    t.action = action;
    t.reward = step.reward;
    t.next_obs = step.observation;
    t.terminal = step.terminal;
    t.truncated = step.truncated;
    benchmark::DoNotOptimize(agent->learn(t));
    if (step.terminal || step.truncated) {
      obs = reacher.reset(env_rng);
      agent->begin_episode(obs);
    } else {
      obs = step.observation;
    }
  }
}
BENCHMARK(BM_AvgAgentStep);

}  // namespace

BENCHMARK_MAIN();
