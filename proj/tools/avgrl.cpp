#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avgrl/checkpoint.hpp"
#include "avgrl/config.hpp"
#include "avgrl/env_protocol.hpp"
#include "avgrl/harness.hpp"
#include "avgrl/lintest.hpp"
#include "avgrl/sweep.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

// Exit codes are a stable contract.
constexpr int kExitOk = 0;
constexpr int kExitDiverged = 2;
constexpr int kExitEnvFault = 3;
constexpr int kExitConfigError = 4;

json default_run_json() {
  avgrl::harness::RunConfig config;
  return avgrl::harness::run_to_json(config);
}

// Fixed algorithm constants alongside the configurable defaults, so a
// single document records every declared default. The parser accepts and
// ignores the "constants" section.
json constants_json() {
  json j;
  j["leaky_relu_slope"] = avgrl::nn::kLeakyReluSlope;
  j["feature_norm_eps"] = avgrl::nn::kNormEps;
  j["welford_eps"] = avgrl::norm::kWelfordEps;
  j["sigma_delta_floor"] = avgrl::norm::kSigmaDeltaFloor;
  j["adam_eps"] = 1e-8;
  j["lintest_noise_bound"] = avgrl::lintest::kNoiseBound;
  j["lintest_noise_quad_order"] = avgrl::lintest::kNoiseQuadOrder;
  j["lintest_action_grid_points"] = avgrl::lintest::kActionGridPoints;
  j["lintest_action_grid"] = {avgrl::lintest::kActionGridLo,
                              avgrl::lintest::kActionGridHi};
  json dot_hard = avgrl::config::env_to_json(avgrl::env::DotReacherConfig::hard());
  j["dot_reacher_hard"] = dot_hard;
  j["pendulum"] = avgrl::config::env_to_json(avgrl::env::PendulumConfig{});
  return j;
}

// Applies one --set override, resolving bare keys against the run/agent/env
// sections so `--set total_steps=1000` works without a prefix.
void apply_override_with_sections(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw avgrl::config::ConfigError(
        "override must look like path.to.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);

  try {
    avgrl::config::apply_override(doc, assignment);
    return;
  } catch (const avgrl::config::ConfigError&) {
    if (path.find('.') != std::string::npos) throw;
  }

  std::vector<std::string> hits;
  for (const std::string section : {"run", "agent", "env", "sweep"}) {
    if (doc.contains(section) && doc[section].is_object() &&
        doc[section].contains(path))
      hits.push_back(section);
  }
  if (hits.empty()) {
    avgrl::config::apply_override(doc, assignment);  // rethrows with hints
    return;
  }
  if (hits.size() > 1)
    throw avgrl::config::ConfigError("override '" + path +
                                     "' is ambiguous; qualify it (" +
                                     hits[0] + "." + path + ", ...)");
  avgrl::config::apply_override(doc, hits[0] + "." + assignment);
}

// Without --config the full defaults apply. With a file, its values merge
// over the agent/run defaults; the env section must come from the file
// itself (a config that never names an env kind is an error).
json load_config_document(const std::string& config_path,
                          const std::vector<std::string>& overrides,
                          json fallback) {
  json doc = std::move(fallback);
  if (!config_path.empty()) {
    doc.erase("env");
    doc.merge_patch(avgrl::config::load_json_file(config_path));
  }
  doc.erase("constants");  // informational section from export-defaults
  for (const auto& assignment : overrides)
    apply_override_with_sections(doc, assignment);
  return doc;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& out_dir, const std::string& resume_path) {
  json doc = load_config_document(config_path, overrides, default_run_json());
  if (!out_dir.empty()) doc["run"]["out_dir"] = out_dir;
  avgrl::harness::RunConfig config = avgrl::harness::run_from_json(doc);

  std::cout << "effective config: " << avgrl::harness::run_to_json(config).dump()
            << std::endl;

  avgrl::harness::TrainingLoop loop(config);
  if (!resume_path.empty()) loop.load_checkpoint(resume_path);
  const avgrl::harness::RunSummary summary = loop.run();

  std::cout << "status: " << avgrl::harness::to_string(summary.status)
            << "  steps: " << summary.steps
            << "  episodes: " << summary.episodes << "  auc: ";
  if (summary.auc.has_value())
    std::cout << *summary.auc;
  else
    std::cout << "n/a";
  std::cout << "  wall_ms: " << summary.total_wall_ms << std::endl;
  if (summary.status == avgrl::harness::RunStatus::kFaulted) {
    std::cerr << "environment fault: " << summary.fault_message << std::endl;
    return kExitEnvFault;
  }
  if (summary.status == avgrl::harness::RunStatus::kDiverged)
    return kExitDiverged;
  return kExitOk;
}

int cmd_sweep(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& out_dir, int top_k) {
  avgrl::sweep::SweepConfig defaults;
  json doc = load_config_document(config_path, overrides,
                                  avgrl::sweep::sweep_to_json(defaults));
  avgrl::sweep::SweepConfig config = avgrl::sweep::sweep_from_json(doc);
  if (!out_dir.empty()) config.out_dir = out_dir;

  std::cout << "effective config: "
            << avgrl::sweep::sweep_to_json(config).dump() << std::endl;

  const auto results = avgrl::sweep::run_sweep(config);
  const auto ranked = avgrl::sweep::rank_configs(results, top_k);
  if (ranked.empty()) {
    std::cerr << "warning: no configuration completed without divergence"
              << std::endl;
    return kExitOk;
  }
  std::cout << "rank,config_id,mean_auc,stderr,actor_lr,critic_lr,beta1,"
               "alpha_or_eta,gamma\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    const double alpha_or_eta = config.agent_kind == avgrl::agents::AgentKind::kSac1
                                    ? r.config.alpha_lr
                                    : r.config.eta;
    std::cout << i + 1 << ',' << r.config_id << ',' << *r.mean_auc << ','
              << *r.stderr_ << ',' << r.config.actor_lr << ','
              << r.config.critic_lr << ',' << r.config.beta1 << ','
              << alpha_or_eta << ',' << r.config.gamma << '\n';
  }
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, int episodes,
             std::uint64_t seed) {
  const std::string payload = avgrl::checkpoint::load_file(checkpoint_path);
  avgrl::checkpoint::Reader root{std::string_view(payload)};
  avgrl::checkpoint::Reader meta = root.section("harness");
  const json config_json = json::parse(meta.str());
  avgrl::harness::RunConfig config = avgrl::harness::run_from_json(config_json);
  config.out_dir.clear();

  avgrl::harness::TrainingLoop loop(config);
  loop.load_checkpoint(checkpoint_path);

  auto env = avgrl::config::make_env(config.env);
  const auto returns =
      avgrl::harness::evaluate(loop.agent(), *env, episodes, seed);
  double mean = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    std::cout << "episode " << i << ": return " << returns[i] << '\n';
    mean += returns[i];
  }
  if (!returns.empty()) mean /= static_cast<double>(returns.size());
  std::cout << "mean_return: " << mean << std::endl;
  return kExitOk;
}

int cmd_lintest(const std::string& out_path, int iterations,
                const std::vector<int>& batch_sizes, int seeds,
                double alpha_w, double alpha_theta, int diag_every) {
  const auto mdp = avgrl::lintest::make_default_mdp();
  avgrl::lintest::LinearPolicy policy;
  policy.theta = Eigen::VectorXd::Zero(mdp.num_states());

  std::vector<std::pair<avgrl::lintest::RpgTdConfig, avgrl::lintest::RpgTdResult>>
      runs;
  for (const int m : batch_sizes) {
    for (int s = 0; s < seeds; ++s) {
      avgrl::lintest::RpgTdConfig config;
      config.alpha_w = alpha_w;
      config.alpha_theta = alpha_theta;
      config.batch_m = m;
      config.iterations = iterations;
      config.seed = static_cast<std::uint64_t>(s);
      config.diag_every = diag_every;
      runs.emplace_back(config, avgrl::lintest::run_rpg_td(mdp, policy, config));
      std::cout << "M=" << m << " seed=" << s << " min ||grad J||^2 = "
                << runs.back().second.min_grad_norm_sq << '\n';
    }
  }
  avgrl::lintest::write_csv(out_path, runs);

  std::vector<avgrl::lintest::LinearPolicy> probes;
  for (double t0 : {-0.5, 0.0, 0.5})
    for (double t1 : {-0.3, 0.3}) {
      avgrl::lintest::LinearPolicy p;
      p.theta = Eigen::Vector3d(t0, t1, 0.1);
      probes.push_back(p);
    }
  std::cout << "measured kappa over " << probes.size()
            << " probe policies: " << avgrl::lintest::measure_kappa(mdp, probes)
            << std::endl;
  std::cout << "wrote " << out_path << std::endl;
  return kExitOk;
}

int cmd_env_serve(const std::string& env_kind_name,
                  const std::vector<std::string>& overrides) {
  // Materialize the kind's full default document so overrides can address
  // every field.
  json env_json = avgrl::config::env_to_json(
      avgrl::config::env_from_json({{"kind", env_kind_name}}));
  for (const auto& assignment : overrides) {
    json wrapper = {{"env", env_json}};
    apply_override_with_sections(wrapper, assignment);
    env_json = wrapper["env"];
  }
  const auto env_config = avgrl::config::env_from_json(env_json);
  auto env = avgrl::config::make_env(env_config);
  avgrl::env::StreamTransport transport(std::cin, std::cout);
  avgrl::env::serve(*env, transport);
  return kExitOk;
}

int cmd_export_defaults() {
  json doc = default_run_json();
  doc["constants"] = constants_json();
  std::cout << doc.dump(2) << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental actor-critic training toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string resume_path;
  std::vector<std::string> overrides;

  auto* train = app.add_subcommand("train", "Run one training job");
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--set", overrides, "Override config keys (a.b=c)");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--resume", resume_path, "Checkpoint to resume from");

  int top_k = -1;
  auto* sweep = app.add_subcommand("sweep", "Random-search driver");
  sweep->add_option("--config", config_path, "JSON sweep config file");
  sweep->add_option("--set", overrides, "Override config keys (a.b=c)");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--top", top_k, "Print only the top K configs");

  std::string checkpoint_path;
  int episodes = 10;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Deterministic checkpoint replay");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  eval->add_option("--episodes", episodes, "Episodes to evaluate");
  eval->add_option("--seed", eval_seed, "Environment seed");

  std::string lintest_out = "rpg_td.csv";
  int lintest_iters = 2000;
  std::vector<int> lintest_batches = {1, 8, 64};
  int lintest_seeds = 10;
  double lintest_alpha_w = 0.1;
  double lintest_alpha_theta = 0.01;
  int lintest_diag_every = 10;
  auto* lintest = app.add_subcommand(
      "lintest", "Linear-critic convergence testbed on the built-in MDP");
  lintest->add_option("--out", lintest_out, "CSV output path");
  lintest->add_option("--iterations", lintest_iters, "Iterations per run");
  lintest->add_option("--batch", lintest_batches, "Batch sizes M");
  lintest->add_option("--seeds", lintest_seeds, "Seeds per batch size");
  lintest->add_option("--alpha-w", lintest_alpha_w, "Critic step size");
  lintest->add_option("--alpha-theta", lintest_alpha_theta, "Actor step size");
  lintest->add_option("--diag-every", lintest_diag_every,
                      "Diagnostics cadence");

  auto* exportd =
      app.add_subcommand("export-defaults", "Print the full default config");

  std::string serve_env = "dot_reacher_easy";
  auto* env_serve = app.add_subcommand(
      "env-serve", "Serve a built-in env over stdin/stdout JSON lines");
  env_serve->add_option("--env", serve_env, "Env kind");
  env_serve->add_option("--set", overrides, "Override env keys (key=value)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return cmd_train(config_path, overrides, out_dir, resume_path);
    if (sweep->parsed())
      return cmd_sweep(config_path, overrides, out_dir, top_k);
    if (eval->parsed()) return cmd_eval(checkpoint_path, episodes, eval_seed);
    if (lintest->parsed())
      return cmd_lintest(lintest_out, lintest_iters, lintest_batches,
                         lintest_seeds, lintest_alpha_w, lintest_alpha_theta,
                         lintest_diag_every);
    if (exportd->parsed()) return cmd_export_defaults();
    if (env_serve->parsed()) return cmd_env_serve(serve_env, overrides);
  } catch (const avgrl::config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfigError;
  } catch (const avgrl::checkpoint::SchemaError& e) {
    std::cerr << "checkpoint error: " << e.what() << std::endl;
    return kExitConfigError;
  } catch (const avgrl::env::EnvProtocolError& e) {
    std::cerr << "environment fault: " << e.what() << std::endl;
    return kExitEnvFault;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return kExitOk;
}
