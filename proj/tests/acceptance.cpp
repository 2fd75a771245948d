// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// fails. Training-heavy checks run their seeds on a small worker pool.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>
#include <thread>
#include <vector>

#include "avgrl/agents.hpp"
#include "avgrl/checkpoint.hpp"
#include "avgrl/dist.hpp"
#include "avgrl/env.hpp"
#include "avgrl/harness.hpp"
#include "avgrl/lintest.hpp"
#include "avgrl/nn.hpp"
#include "avgrl/norm.hpp"
#include "avgrl/sweep.hpp"
#include "support/finite_diff.hpp"
#include "support/oracles.hpp"
#include "support/pd_controller.hpp"

using namespace avgrl;
using Eigen::VectorXd;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool passed,
            const std::string& detail) {
  std::printf("%s  criterion %2d: %s (%s)\n", passed ? "PASS" : "FAIL",
              criterion, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!passed) g_failures += 1;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

// Runs jobs on `workers` threads; results slot into their own indices.
template <typename Fn>
void parallel_for(int jobs, int workers, Fn&& fn) {
  std::atomic<int> next{0};
  auto work = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= jobs) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(workers, jobs); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

VectorXd random_vector(Rng& rng, int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness across every spec variant.

void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  const nn::FeatureNorm norms[] = {
      nn::FeatureNorm::kNone, nn::FeatureNorm::kPnorm,
      nn::FeatureNorm::kLayerNorm, nn::FeatureNorm::kRmsNorm};
  const nn::Activation acts[] = {nn::Activation::kLeakyRelu,
                                 nn::Activation::kTanh};
  Rng rng(101);
  double worst = 0.0;
  for (const auto norm : norms) {
    for (const auto act : acts) {
      nn::MlpSpec spec;
      spec.input_dim = 4;
      spec.hidden_dims = {6, 5};
      spec.output_dim = 3;
      spec.activation = act;
      spec.feature_norm = norm;
      int cases = 0;
      while (cases < 100) {
        const nn::ParamBundle params = nn::init_params(spec, rng);
        const VectorXd x = random_vector(rng, spec.input_dim);
        const auto [y, tape] = nn::forward(params, spec, x);
        (void)y;
        // Keep central differences away from activation kinks and norm
        // floors.
        double min_abs_pre = 1e9;
        for (std::size_t l = 0; l + 1 < tape.preact.size(); ++l)
          min_abs_pre = std::min(min_abs_pre,
                                 tape.preact[l].array().abs().minCoeff());
        // The normalizers' curvature grows like 1/norm^2; keep the norms
        // well clear of zero so h^2 truncation stays under the tolerance.
        const bool norm_ok = norm == nn::FeatureNorm::kNone ||
                             tape.feature_norm_value > 0.2;
        if (min_abs_pre < 1e-2 || !norm_ok) continue;
        cases += 1;

        const VectorXd upstream = random_vector(rng, spec.output_dim);
        const VectorXd g_params = nn::grad_wrt_params(params, tape, upstream);
        const VectorXd g_input = nn::grad_wrt_input(params, tape, upstream);
        const auto f_params = [&](const VectorXd& values) {
          nn::ParamBundle probe = params;
          probe.values = values;
          return upstream.dot(nn::forward(probe, spec, x).first);
        };
        const auto f_input = [&](const VectorXd& input) {
          return upstream.dot(nn::forward(params, spec, input).first);
        };
        worst = std::max(worst,
                         testsupport::max_rel_error(
                             g_params,
                             testsupport::central_diff(f_params, params.values)));
        worst = std::max(
            worst, testsupport::max_rel_error(
                       g_input, testsupport::central_diff(f_input, x)));
      }
    }
  }
  const double elapsed = seconds_since(start);
  std::ostringstream detail;
  detail << "max rel err " << worst << ", " << elapsed << " s";
  report(1, "gradient correctness vs central differences",
         worst < 1e-5 && elapsed < 60.0, detail.str());
}

// ---------------------------------------------------------------------------
// 2. Distribution correctness.

void criterion_2() {
  Rng rng(202);
  double worst_abs = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double mu = rng.uniform(-2.0, 2.0);
    const double sigma = std::exp(rng.uniform(-2.0, 1.0));
    const double u = rng.uniform(-8.0, 8.0);
    dist::SquashedNormalParams p;
    p.mean = VectorXd::Constant(1, mu);
    p.log_std = VectorXd::Constant(1, std::log(sigma));
    dist::SquashedSample s;
    s.pre_tanh = VectorXd::Constant(1, u);
    s.noise = VectorXd::Constant(1, (u - mu) / sigma);
    s.action = s.pre_tanh.array().tanh();
    const double got = dist::log_prob(p, s);
    const double want = testsupport::log_prob_reference(mu, sigma, u);
    worst_abs = std::max(worst_abs,
                         std::abs(got - want) / std::max(1.0, std::abs(want)));
  }
  const bool oracle_ok = worst_abs <= 1e-10;

  // Quadrature of exp(log_prob) over the action interval.
  const auto& quad = lintest::noise_quadrature();
  (void)quad;
  bool integral_ok = true;
  {
    const int order = 400;
    std::vector<double> nodes(order), weights(order);
    for (int i = 0; i < order; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
      double pp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < order; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
        }
        pp = order * (x * p0 - p1) / (x * x - 1.0);
        const double dx = p0 / pp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    for (const auto& [mu, sigma] :
         {std::pair{0.0, 0.6}, {0.5, 1.0}, {-0.8, 0.4}}) {
      dist::SquashedNormalParams p;
      p.mean = VectorXd::Constant(1, mu);
      p.log_std = VectorXd::Constant(1, std::log(sigma));
      double integral = 0.0;
      for (int i = 0; i < order; ++i) {
        dist::SquashedSample s;
        s.pre_tanh = VectorXd::Constant(1, std::atanh(nodes[i]));
        s.action = VectorXd::Constant(1, nodes[i]);
        s.noise = (s.pre_tanh - p.mean) / sigma;
        integral += weights[i] * std::exp(dist::log_prob(p, s));
      }
      integral_ok = integral_ok && std::abs(integral - 1.0) <= 1e-4;
    }
  }

  // Reparameterization gradients vs finite differences at fixed noise.
  double worst_grad = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double mu = rng.uniform(-1.5, 1.5);
    const double log_sigma = rng.uniform(-1.5, 0.5);
    const double xi = rng.normal();
    dist::SquashedNormalParams p;
    p.mean = VectorXd::Constant(1, mu);
    p.log_std = VectorXd::Constant(1, log_sigma);
    dist::SquashedSample s;
    s.noise = VectorXd::Constant(1, xi);
    s.pre_tanh = p.mean + (p.std().array() * s.noise.array()).matrix();
    s.action = s.pre_tanh.array().tanh();
    const auto grads = dist::reparam_grads(p, s);
    const auto logp_of = [&](double m, double ls) {
      dist::SquashedNormalParams q;
      q.mean = VectorXd::Constant(1, m);
      q.log_std = VectorXd::Constant(1, ls);
      dist::SquashedSample t;
      t.noise = s.noise;
      t.pre_tanh = q.mean + (q.std().array() * t.noise.array()).matrix();
      t.action = t.pre_tanh.array().tanh();
      return dist::log_prob(q, t);
    };
    const auto action_of = [&](double m, double ls) {
      return std::tanh(m + std::exp(ls) * xi);
    };
    const double h = 1e-6;
    const auto rel = [](double a, double b) {
      if (std::abs(a) < 1e-4 && std::abs(b) < 1e-4) return 0.0;
      return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
    };
    worst_grad = std::max(
        {worst_grad,
         rel(grads.d_action_d_mean(0),
             (action_of(mu + h, log_sigma) - action_of(mu - h, log_sigma)) /
                 (2 * h)),
         rel(grads.d_action_d_log_std(0),
             (action_of(mu, log_sigma + h) - action_of(mu, log_sigma - h)) /
                 (2 * h)),
         rel(grads.d_logp_d_mean(0),
             (logp_of(mu + h, log_sigma) - logp_of(mu - h, log_sigma)) /
                 (2 * h)),
         rel(grads.d_logp_d_log_std(0),
             (logp_of(mu, log_sigma + h) - logp_of(mu, log_sigma - h)) /
                 (2 * h))});
  }
  const bool grads_ok = worst_grad < 1e-5;

  std::ostringstream detail;
  detail << "oracle rel " << worst_abs << ", grads rel " << worst_grad
         << ", integral ok " << integral_ok;
  report(2, "squashed-normal density and gradients",
         oracle_ok && integral_ok && grads_ok, detail.str());
}

// ---------------------------------------------------------------------------
// 3. Squashed entropy non-monotone, normal entropy rising.

void criterion_3() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(303);
  const double sigmas[] = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> squashed, stderrs, normal;
  for (const double s : sigmas) {
    dist::SquashedNormalParams p;
    p.mean = VectorXd::Zero(1);
    p.log_std = VectorXd::Constant(1, std::log(s));
    const auto est = dist::squashed_entropy_mc(p, 100000, rng);
    squashed.push_back(est.mean);
    stderrs.push_back(est.stderr_);
    normal.push_back(dist::normal_entropy(p.log_std));
  }
  bool normal_increasing = true;
  for (int i = 0; i + 1 < 6; ++i)
    normal_increasing = normal_increasing && normal[i] < normal[i + 1];
  const auto argmax = static_cast<int>(std::distance(
      squashed.begin(), std::max_element(squashed.begin(), squashed.end())));
  const bool interior = argmax > 0 && argmax < 5;
  const bool rises = interior &&
                     squashed[argmax] >
                         squashed[0] + 5.0 * (stderrs[argmax] + stderrs[0]);
  const bool falls = interior &&
                     squashed[argmax] >
                         squashed[5] + 5.0 * (stderrs[argmax] + stderrs[5]);
  const double elapsed = seconds_since(start);
  std::ostringstream detail;
  detail << "peak at sigma=" << sigmas[std::max(argmax, 0)] << ", " << elapsed
         << " s";
  report(3, "squashed entropy non-monotone in sigma",
         normal_increasing && interior && rises && falls && elapsed < 30.0,
         detail.str());
}

// ---------------------------------------------------------------------------
// 4. Welford vs two-pass batch statistics.

void criterion_4() {
  Rng rng(404);
  bool ok = true;
  double worst = 0.0;
  for (const double offset : {0.0, 1e9}) {
    auto stat = norm::RunningStat::make(1);
    std::vector<double> xs;
    xs.reserve(1000000);
    for (int i = 0; i < 1000000; ++i) {
      const double x = offset + rng.normal();
      xs.push_back(x);
      stat.update_scalar(x);
    }
    const auto batch = testsupport::two_pass_stats(xs);
    const double mean_rel = std::abs(stat.scalar_mean() - batch.mean) /
                            std::max(1.0, std::abs(batch.mean));
    const double var_rel = std::abs(stat.scalar_variance() - batch.variance) /
                           std::abs(batch.variance);
    worst = std::max({worst, mean_rel, var_rel});
    ok = ok && mean_rel <= 1e-9 && var_rel <= 1e-9;
  }
  std::ostringstream detail;
  detail << "worst rel err " << worst;
  report(4, "Welford equals two-pass statistics on 1e6-element streams", ok,
         detail.str());
}

// ---------------------------------------------------------------------------
// 5. ScaleTDError contract.

void criterion_5() {
  bool guard_ok = true;
  norm::TdScaleState state;
  guard_ok = guard_ok && state.update(0.5, 0.99) == 1.0;
  guard_ok = guard_ok && state.update(-1.0, 0.99) == 1.0;
  guard_ok = guard_ok && state.update(0.0, 0.0, 4.0) == 1.0;  // n_G = 1
  guard_ok = guard_ok && state.update(2.0, 0.99) == 1.0;

  // Batch-oracle agreement on a synthetic stream.
  norm::TdScaleState synth;
  Rng rng(505);
  std::vector<double> rewards, gammas, g2s;
  double sigma = 1.0;
  for (int episode = 0; episode < 60; ++episode) {
    double g = 0.0;
    const int len = 4 + static_cast<int>(rng.uniform_int(6));
    for (int t = 0; t < len; ++t) {
      const double r = rng.normal() * 2.0 + 0.3;
      g += r;
      rewards.push_back(r);
      gammas.push_back(0.97);
      sigma = synth.update(r, 0.97);
    }
    const double r_term = rng.normal();
    g += r_term;
    rewards.push_back(r_term);
    gammas.push_back(0.0);
    g2s.push_back(g * g);
    sigma = synth.update(r_term, 0.0, g);
  }
  const auto batch_r = testsupport::two_pass_stats(rewards);
  const auto batch_gamma = testsupport::two_pass_stats(gammas);
  const auto batch_g2 = testsupport::two_pass_stats(g2s);
  const double expected =
      std::sqrt(batch_r.variance + batch_g2.mean * batch_gamma.variance);
  const double rel = std::abs(sigma - expected) / expected;
  const bool formula_ok = rel <= 1e-9;

  // Degenerate constant stream: floored, never divides by zero.
  norm::TdScaleState degenerate;
  double floor_sigma = 1.0;
  for (int episode = 0; episode < 4; ++episode) {
    for (int t = 0; t < 8; ++t) floor_sigma = degenerate.update(0.0, 0.9);
    floor_sigma = degenerate.update(0.0, 0.9, 0.0);
  }
  const bool floor_ok = floor_sigma == norm::kSigmaDeltaFloor &&
                        std::isfinite(norm::scale(1.0, floor_sigma));

  std::ostringstream detail;
  detail << "formula rel err " << rel << ", floor " << floor_sigma;
  report(5, "TD-error scaling contract", guard_ok && formula_ok && floor_ok,
         detail.str());
}

// ---------------------------------------------------------------------------
// 6. tau=1 equivalence over 1e3 Dot Reacher steps.

void criterion_6() {
  harness::RunConfig base;
  base.env = env::DotReacherConfig::easy();
  base.total_steps = 1000;
  base.seed = 606;

  harness::RunConfig plain = base;
  plain.agent_kind = agents::AgentKind::kAvg;
  harness::RunConfig target = base;
  target.agent_kind = agents::AgentKind::kAvgTarget;
  target.agent.tau = 1.0;

  harness::TrainingLoop plain_loop(plain);
  harness::TrainingLoop target_loop(target);
  plain_loop.run();
  target_loop.run();

  const bool actor_equal = plain_loop.agent().param_bundles()[0]->values ==
                           target_loop.agent().param_bundles()[0]->values;
  const bool critic_equal = plain_loop.agent().param_bundles()[1]->values ==
                            target_loop.agent().param_bundles()[1]->values;
  report(6, "tau=1 target variant is bit-identical to plain AVG",
         actor_equal && critic_equal,
         actor_equal && critic_equal ? "trajectories match" : "mismatch");
}

// ---------------------------------------------------------------------------
// 7. Learning check on Dot Reacher Easy.

double random_policy_baseline(int episodes) {
  env::DotReacher reacher(env::DotReacherConfig::easy());
  Rng rng(7070);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    reacher.reset(rng);
    double ep = 0.0;
    while (true) {
      VectorXd a(2);
      a << rng.uniform(-1, 1), rng.uniform(-1, 1);
      const auto step = reacher.step(a);
      ep += step.reward;
      if (step.terminal || step.truncated) break;
    }
    total += ep;
  }
  return total / episodes;
}

double pd_policy_baseline(int episodes) {
  env::DotReacher reacher(env::DotReacherConfig::easy());
  Rng rng(7171);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    VectorXd obs = reacher.reset(rng);
    double ep = 0.0;
    while (true) {
      const auto step = reacher.step(testsupport::pd_action(obs));
      ep += step.reward;
      obs = step.observation;
      if (step.terminal || step.truncated) break;
    }
    total += ep;
  }
  return total / episodes;
}

void criterion_7() {
  const auto start = std::chrono::steady_clock::now();
  const double random_baseline = random_policy_baseline(300);
  const double pd_baseline = pd_policy_baseline(300);
  const double threshold =
      random_baseline + 0.5 * (pd_baseline - random_baseline);

  const int kSeeds = 5;
  std::vector<double> final50(kSeeds, 0.0);
  parallel_for(kSeeds, 2, [&](int seed_idx) {
    harness::RunConfig config;
    config.agent_kind = agents::AgentKind::kAvg;
    config.agent = agents::AgentConfig{};  // shipped defaults, switches on
    config.env = env::DotReacherConfig::easy();
    config.total_steps = 200000;
    config.seed = 700 + seed_idx;
    const auto summary = harness::run_training(config);
    std::vector<double> episode_returns;
    for (const auto& row : summary.rows)
      if (row.kind == harness::RowKind::kEpisode)
        episode_returns.push_back(row.episodic_return);
    const int n = static_cast<int>(episode_returns.size());
    const int take = std::min(50, n);
    double mean = -1e9;
    if (take > 0) {
      mean = 0.0;
      for (int i = n - take; i < n; ++i) mean += episode_returns[i];
      mean /= take;
    }
    final50[seed_idx] = mean;
  });

  const double mean_final =
      std::accumulate(final50.begin(), final50.end(), 0.0) / kSeeds;
  const double elapsed = seconds_since(start);
  std::ostringstream detail;
  detail << "final-50 mean " << mean_final << " vs threshold " << threshold
         << " (random " << random_baseline << ", pd " << pd_baseline << "), "
         << elapsed << " s";
  report(7, "AVG learns Dot Reacher Easy at 200k steps",
         mean_final > threshold && elapsed < 900.0, detail.str());
}

// ---------------------------------------------------------------------------
// 8. Instability without normalization (reward x1000).

harness::RunConfig scaled_reward_config(bool switches_on, std::uint64_t seed,
                                        std::int64_t steps) {
  harness::RunConfig config;
  config.agent_kind = agents::AgentKind::kAvg;
  config.agent = agents::AgentConfig{};
  if (!switches_on) {
    config.agent.norm_obs = false;
    config.agent.scaled_td = false;
    config.agent.feature_norm = nn::FeatureNorm::kNone;
  }
  env::DotReacherConfig env_config = env::DotReacherConfig::easy();
  env_config.reward_scale = 1000.0;
  config.env = env_config;
  config.total_steps = steps;
  config.diag_every = 100;
  config.seed = seed;
  return config;
}

void criterion_8() {
  const int kSeeds = 5;
  std::vector<int> passes(kSeeds, 0);
  std::vector<double> ratios(kSeeds, 0.0);

  // Run pairs seed by seed (two runs fill both workers).
  for (int seed_idx = 0; seed_idx < kSeeds; ++seed_idx) {
    harness::RunSummary off_summary, on_summary;
    std::thread off_thread([&] {
      off_summary =
          harness::run_training(scaled_reward_config(false, 800 + seed_idx,
                                                     20000));
    });
    on_summary = harness::run_training(
        scaled_reward_config(true, 800 + seed_idx, 20000));
    off_thread.join();

    // Geometric mean of the critic grad norm ratio at matched diagnostic
    // steps (up to the off-run's divergence point).
    std::vector<double> off_norms, on_norms;
    for (const auto& row : off_summary.rows)
      if (row.kind == harness::RowKind::kDiagnostic &&
          std::isfinite(row.critic_grad_norm) && row.critic_grad_norm > 0)
        off_norms.push_back(row.critic_grad_norm);
    for (const auto& row : on_summary.rows)
      if (row.kind == harness::RowKind::kDiagnostic &&
          std::isfinite(row.critic_grad_norm) && row.critic_grad_norm > 0)
        on_norms.push_back(row.critic_grad_norm);
    const std::size_t matched = std::min(off_norms.size(), on_norms.size());
    double log_ratio = 0.0;
    for (std::size_t i = 0; i < matched; ++i)
      log_ratio += std::log(off_norms[i] / on_norms[i]);
    const double geo_ratio =
        matched > 0 ? std::exp(log_ratio / static_cast<double>(matched)) : 0.0;
    ratios[seed_idx] = geo_ratio;
    passes[seed_idx] = geo_ratio >= 100.0 ? 1 : 0;
  }

  const int passed = std::accumulate(passes.begin(), passes.end(), 0);
  std::ostringstream detail;
  detail << "ratios";
  for (const double r : ratios) detail << ' ' << r;
  report(8, "AVG- critic gradient norms exceed full AVG by >=100x",
         passed >= 4, detail.str());
}

// ---------------------------------------------------------------------------
// 9. Ablation direction: full AVG beats AVG- on mean AUC.

void criterion_9() {
  const int kSeeds = 5;
  const std::int64_t kSteps = 30000;
  std::vector<double> on_aucs(kSeeds), off_aucs(kSeeds);
  parallel_for(2 * kSeeds, 2, [&](int job) {
    const bool switches_on = job < kSeeds;
    const int seed_idx = job % kSeeds;
    const auto summary = harness::run_training(
        scaled_reward_config(switches_on, 900 + seed_idx, kSteps));
    // Diverged or episode-free runs score the worst possible return.
    const double worst = -500.0 * 1000.0;
    const double auc = summary.auc.value_or(worst);
    (switches_on ? on_aucs : off_aucs)[seed_idx] =
        summary.status == harness::RunStatus::kDiverged ? worst : auc;
  });
  const double on_mean =
      std::accumulate(on_aucs.begin(), on_aucs.end(), 0.0) / kSeeds;
  const double off_mean =
      std::accumulate(off_aucs.begin(), off_aucs.end(), 0.0) / kSeeds;
  std::ostringstream detail;
  detail << "full AVG " << on_mean << " vs AVG- " << off_mean;
  report(9, "full AVG mean AUC strictly exceeds AVG- on scaled rewards",
         on_mean > off_mean, detail.str());
}

// ---------------------------------------------------------------------------
// 10. RPG-TD testbed.

void criterion_10() {
  const auto mdp = lintest::make_default_mdp();

  // (a) Frozen actor: tracking error decays below 1e-6 within 1e4
  // iterations. The contraction is checked on the expected-update path (the
  // derived linear-TD oracle); constant-step sampled TD cannot reach 1e-6.
  lintest::LinearPolicy policy;
  policy.theta = Eigen::Vector3d(0.1, -0.1, 0.2);
  lintest::RpgTdConfig config_a;
  config_a.alpha_w = 0.5;
  config_a.alpha_theta = 0.0;
  config_a.batch_m = 8;
  config_a.iterations = 10000;
  config_a.expected_updates = true;
  config_a.diag_every = 1000;
  const auto result_a = lintest::run_rpg_td(mdp, policy, config_a);
  const double final_err =
      (result_a.w - lintest::w_star_td(mdp, policy)).norm();
  const bool a_ok = final_err < 1e-6;

  // (b) Compatible weights: empirical mean actor update over 1e5 samples
  // matches the brute-force gradient within 3 standard errors per component
  // (after undoing the (1-gamma) normalization absorbed into alpha_theta).
  lintest::LinearPolicy policy_b;
  policy_b.theta = Eigen::Vector3d(0.3, 0.0, -0.2);
  const VectorXd w_xi = lintest::w_star_compatible(mdp, policy_b);
  const VectorXd grad = lintest::brute_force_policy_gradient(mdp, policy_b);
  const VectorXd nu_hat =
      lintest::discounted_visitation(mdp, policy_b) * (1.0 - mdp.gamma);
  Rng rng(1010);
  const int kSamples = 100000;
  VectorXd sum = VectorXd::Zero(3);
  VectorXd sum_sq = VectorXd::Zero(3);
  for (int i = 0; i < kSamples; ++i) {
    // One actor-phase sample: s' ~ nu_hat, update e_{s'} w_xi[s'].
    const double u = rng.uniform();
    int s = 0;
    double acc = 0.0;
    for (; s < 3; ++s) {
      acc += nu_hat(s);
      if (u < acc) break;
    }
    s = std::min(s, 2);
    lintest::sample_noise(rng);  // eps' drawn per the sampling scheme
    VectorXd term = VectorXd::Zero(3);
    term(s) = w_xi(s);
    sum += term;
    sum_sq += term.cwiseProduct(term);
  }
  bool b_ok = true;
  double worst_sigmas = 0.0;
  for (int s = 0; s < 3; ++s) {
    const double mean = sum(s) / kSamples;
    const double var =
        std::max(0.0, sum_sq(s) / kSamples - mean * mean);
    const double stderr_ = std::sqrt(var / kSamples);
    const double target = (1.0 - mdp.gamma) * grad(s);
    const double sigmas = std::abs(mean - target) / std::max(stderr_, 1e-300);
    worst_sigmas = std::max(worst_sigmas, sigmas);
    b_ok = b_ok && sigmas <= 3.0;
  }

  // (c) Theorem-2 shape: smaller min gradient norm with larger batches.
  const int kSeedsC = 10;
  double mins[2] = {0.0, 0.0};
  const int batch_sizes[2] = {1, 64};
  for (int b = 0; b < 2; ++b) {
    std::vector<double> per_seed(kSeedsC);
    parallel_for(kSeedsC, 2, [&](int seed_idx) {
      lintest::LinearPolicy p;
      p.theta = Eigen::Vector3d::Zero();
      lintest::RpgTdConfig config_c;
      // Step sizes inside the stability region for the smallest batch.
      config_c.alpha_w = 0.02;
      config_c.alpha_theta = 0.005;
      config_c.batch_m = batch_sizes[b];
      config_c.iterations = 2000;
      config_c.seed = 1100 + seed_idx;
      config_c.diag_every = 2000;  // only the running min matters
      per_seed[seed_idx] =
          lintest::run_rpg_td(mdp, p, config_c).min_grad_norm_sq;
    });
    mins[b] = std::accumulate(per_seed.begin(), per_seed.end(), 0.0) / kSeedsC;
  }
  const bool c_ok = mins[1] < mins[0];

  std::ostringstream detail;
  detail << "tracking " << final_err << ", prop-1 worst " << worst_sigmas
         << " sigma, min|gradJ|^2 M=1 " << mins[0] << " vs M=64 " << mins[1];
  report(10, "RPG-TD testbed (contraction, Prop 1, Theorem 2 shape)",
         a_ok && b_ok && c_ok, detail.str());
}

// ---------------------------------------------------------------------------
// 11. Determinism and persistence.

void criterion_11() {
  namespace fs = std::filesystem;
  const auto dir_a = fs::temp_directory_path() / "avgrl_acc_det_a";
  const auto dir_b = fs::temp_directory_path() / "avgrl_acc_det_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  harness::RunConfig config;
  config.env = env::DotReacherConfig::easy();
  config.total_steps = 700;
  config.seed = 111;
  config.checkpoint_every = 300;

  harness::RunConfig a = config;
  a.out_dir = dir_a.string();
  harness::RunConfig b = config;
  b.out_dir = dir_b.string();
  harness::TrainingLoop loop_a(a);
  loop_a.run();
  harness::TrainingLoop loop_b(b);
  loop_b.run();

  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  const std::string log_a = slurp(dir_a / "metrics.jsonl");
  const std::string log_b = slurp(dir_b / "metrics.jsonl");
  const std::string body_a = log_a.substr(log_a.find('\n') + 1);
  const std::string body_b = log_b.substr(log_b.find('\n') + 1);
  const bool logs_equal = !body_a.empty() && body_a == body_b;

  // Resume from the mid-run snapshot and compare the final checkpoints.
  const auto dir_c = fs::temp_directory_path() / "avgrl_acc_det_c";
  fs::remove_all(dir_c);
  harness::RunConfig c = config;
  c.out_dir = dir_c.string();
  harness::TrainingLoop loop_c(c);
  loop_c.load_checkpoint((dir_a / "checkpoint_300.bin").string());
  loop_c.run();
  const bool resume_equal = slurp(dir_a / "checkpoint_final.bin") ==
                            slurp(dir_c / "checkpoint_final.bin");

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
  report(11, "byte-identical logs and bit-exact checkpoint resume",
         logs_equal && resume_equal,
         logs_equal ? (resume_equal ? "logs and checkpoints match"
                                    : "resume diverged")
                    : "logs differ");
}

// ---------------------------------------------------------------------------
// 12. Sweep contract.

void criterion_12() {
  // Injected-NaN run excludes its configuration from the ranking.
  std::vector<sweep::SweepResult> results(2);
  for (int cid = 0; cid < 2; ++cid) {
    results[cid].config_id = cid;
    for (int s = 0; s < 3; ++s) {
      sweep::RunRecord record;
      record.config_id = cid;
      record.auc = -100.0 - cid;
      results[cid].runs.push_back(record);
    }
    results[cid].mean_auc = -100.0 - cid;
    results[cid].stderr_ = 0.0;
  }
  //配置 0 gets one NaN-diverged seed through the real harness path.
  {
    harness::RunConfig config;
    config.env = env::DotReacherConfig::easy();
    config.total_steps = 50;
    config.seed = 1;
    // Divergence through the public path: a critic poisoned to overflow.
    auto agent = agents::make_agent(agents::AgentKind::kAvg,
                                    agents::AgentConfig{}, 4, 2);
    agent->mutable_param_bundles()[1]->values.setConstant(1e200);
    auto env = config::make_env(config.env);
    harness::TrainingLoop loop(config, *agent, *env);
    const auto summary = loop.run();
    sweep::RunRecord nan_record;
    nan_record.config_id = 0;
    nan_record.diverged = summary.status == harness::RunStatus::kDiverged;
    results[0].runs.push_back(nan_record);
    results[0].diverged_any = nan_record.diverged;
  }
  const auto ranked = sweep::rank_configs(results, -1);
  const bool exclusion_ok = ranked.size() == 1 && ranked[0].config_id == 1;

  // Sampled hyperparameters respect the declared ranges; log10 draws are
  // KS-uniform.
  sweep::SearchSpace space;
  agents::AgentConfig base;
  Rng rng(1212);
  std::vector<double> actor_u, critic_u, alpha_u;
  bool ranges_ok = true;
  for (int i = 0; i < 10000; ++i) {
    const auto config =
        sweep::sample_config(space, base, agents::AgentKind::kAvg, rng);
    ranges_ok = ranges_ok && config.actor_lr >= 1e-6 &&
                config.actor_lr <= 1e-2 && config.critic_lr >= 1e-6 &&
                config.critic_lr <= 1e-2 && config.eta >= 1e-5 &&
                config.eta <= 1.0;
    actor_u.push_back((std::log10(config.actor_lr) + 6.0) / 4.0);
    critic_u.push_back((std::log10(config.critic_lr) + 6.0) / 4.0);
    alpha_u.push_back((std::log10(config.eta) + 5.0) / 5.0);
  }
  const double p_actor = testsupport::ks_uniform_pvalue(actor_u);
  const double p_critic = testsupport::ks_uniform_pvalue(critic_u);
  const double p_alpha = testsupport::ks_uniform_pvalue(alpha_u);
  const bool ks_ok = p_actor > 0.01 && p_critic > 0.01 && p_alpha > 0.01;

  std::ostringstream detail;
  detail << "exclusion " << (exclusion_ok ? "ok" : "broken") << ", KS p "
         << p_actor << '/' << p_critic << '/' << p_alpha;
  report(12, "sweep divergence filtering and range uniformity",
         exclusion_ok && ranges_ok && ks_ok, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
  bool skip_slow = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--skip-training") skip_slow = true;

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  if (skip_slow) {
    std::printf("SKIP  criterion  7: learning check (--skip-training)\n");
    std::printf("SKIP  criterion  8: instability property (--skip-training)\n");
    std::printf("SKIP  criterion  9: ablation direction (--skip-training)\n");
  } else {
    criterion_7();
    criterion_8();
    criterion_9();
  }
  criterion_10();
  criterion_11();
  criterion_12();

  std::printf("%d criterion failures\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
