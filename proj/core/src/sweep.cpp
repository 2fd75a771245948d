#include "avgrl/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

namespace avgrl::sweep {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

agents::AgentConfig sample_config(const SearchSpace& space,
                                  const agents::AgentConfig& base,
                                  agents::AgentKind kind, Rng& rng) {
  agents::AgentConfig config = base;
  config.actor_lr =
      std::pow(10.0, rng.uniform(space.lr_log10_lo, space.lr_log10_hi));
  config.critic_lr =
      std::pow(10.0, rng.uniform(space.lr_log10_lo, space.lr_log10_hi));
  config.beta1 = space.beta1_choices[rng.uniform_int(
      space.beta1_choices.size())];
  const double alpha =
      std::pow(10.0, rng.uniform(space.alpha_log10_lo, space.alpha_log10_hi));
  if (kind == agents::AgentKind::kSac1) {
    config.alpha_lr = alpha;
  } else {
    config.eta = alpha;
  }
  config.beta2 = space.beta2;
  config.gamma = space.gamma_choices[rng.uniform_int(
      space.gamma_choices.size())];
  return config;
}

std::vector<SweepResult> run_sweep(const SweepConfig& sweep_config) {
  if (sweep_config.num_configs < 1 || sweep_config.num_seeds < 1)
    throw config::ConfigError("sweep: num_configs and num_seeds must be >= 1");

  std::vector<SweepResult> results(sweep_config.num_configs);
  for (int cid = 0; cid < sweep_config.num_configs; ++cid) {
    Rng config_rng(splitmix64(sweep_config.seed + 0x636f6e66ull) +
                   static_cast<std::uint64_t>(cid));
    results[cid].config_id = cid;
    results[cid].config = sample_config(sweep_config.space, sweep_config.base,
                                        sweep_config.agent_kind, config_rng);
    results[cid].runs.resize(sweep_config.num_seeds);
  }

  const int total_cells = sweep_config.num_configs * sweep_config.num_seeds;
  std::atomic<int> next_cell{0};
  const int workers =
      sweep_config.workers > 0
          ? sweep_config.workers
          : std::max(1u, std::thread::hardware_concurrency());

  auto work = [&] {
    while (true) {
      const int cell = next_cell.fetch_add(1);
      if (cell >= total_cells) return;
      const int cid = cell / sweep_config.num_seeds;
      const int sidx = cell % sweep_config.num_seeds;

      harness::RunConfig run_config;
      run_config.agent_kind = sweep_config.agent_kind;
      run_config.agent = results[cid].config;
      run_config.env = sweep_config.env;
      run_config.total_steps = sweep_config.steps_per_run;
      run_config.seed = splitmix64(splitmix64(sweep_config.seed +
                                              static_cast<std::uint64_t>(cid)) +
                                   static_cast<std::uint64_t>(sidx));

      RunRecord record;
      record.config_id = cid;
      record.run_seed = run_config.seed;
      const harness::RunSummary summary = harness::run_training(run_config);
      record.auc = summary.auc;
      record.diverged = summary.status == harness::RunStatus::kDiverged;
      record.faulted = summary.status == harness::RunStatus::kFaulted;
      results[cid].runs[sidx] = record;
    }
  };

  std::vector<std::thread> pool;
  for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  for (auto& result : results) {
    double sum = 0.0;
    double sum_sq = 0.0;
    int n = 0;
    for (const auto& run : result.runs) {
      result.diverged_any = result.diverged_any || run.diverged;
      if (run.diverged || run.faulted || !run.auc.has_value()) continue;
      sum += *run.auc;
      sum_sq += *run.auc * *run.auc;
      n += 1;
    }
    if (n > 0) {
      const double mean = sum / n;
      result.mean_auc = mean;
      if (n > 1) {
        const double sample_var =
            std::max(0.0, (sum_sq - n * mean * mean) / (n - 1));
        result.stderr_ = std::sqrt(sample_var / n);
      } else {
        result.stderr_ = 0.0;
      }
    }
  }

  if (!sweep_config.out_dir.empty()) {
    std::filesystem::create_directories(sweep_config.out_dir);
    write_manifest(sweep_config.out_dir + "/manifest.json", sweep_config,
                   results);
    write_results_csv(sweep_config.out_dir + "/results.csv", results);
  }
  return results;
}

std::vector<SweepResult> rank_configs(const std::vector<SweepResult>& results,
                                      int top_k) {
  std::vector<SweepResult> eligible;
  for (const auto& r : results) {
    if (r.diverged_any || !r.mean_auc.has_value()) continue;
    eligible.push_back(r);
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const SweepResult& a, const SweepResult& b) {
              if (*a.mean_auc != *b.mean_auc) return *a.mean_auc > *b.mean_auc;
              if (*a.stderr_ != *b.stderr_) return *a.stderr_ < *b.stderr_;
              return a.config_id < b.config_id;
            });
  if (top_k >= 0 && static_cast<int>(eligible.size()) > top_k)
    eligible.resize(top_k);
  return eligible;
}

void write_manifest(const std::string& path, const SweepConfig& config,
                    const std::vector<SweepResult>& results) {
  nlohmann::json j;
  j["space"] = {{"lr_log10", {config.space.lr_log10_lo, config.space.lr_log10_hi}},
                {"alpha_log10",
                 {config.space.alpha_log10_lo, config.space.alpha_log10_hi}},
                {"beta1", config.space.beta1_choices},
                {"beta2", config.space.beta2},
                {"gamma", config.space.gamma_choices}};
  j["agent_kind"] = agents::to_string(config.agent_kind);
  j["env"] = config::env_to_json(config.env);
  j["num_seeds"] = config.num_seeds;
  j["steps_per_run"] = config.steps_per_run;
  j["seed"] = config.seed;
  nlohmann::json configs = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json c;
    c["id"] = r.config_id;
    c["agent"] = config::agent_to_json(r.config);
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& run : r.runs) seeds.push_back(run.run_seed);
    c["run_seeds"] = seeds;
    configs.push_back(c);
  }
  j["configs"] = configs;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

void write_results_csv(const std::string& path,
                       const std::vector<SweepResult>& results) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write results: " + path);
  out << "config_id,seed,auc,diverged\n";
  out.precision(17);
  for (const auto& r : results)
    for (const auto& run : r.runs) {
      out << r.config_id << ',' << run.run_seed << ',';
      if (run.auc.has_value()) out << *run.auc;
      out << ',' << (run.diverged ? 1 : 0) << '\n';
    }
}

nlohmann::json sweep_to_json(const SweepConfig& config) {
  nlohmann::json agent = config::agent_to_json(config.base);
  agent["kind"] = agents::to_string(config.agent_kind);
  nlohmann::json j;
  j["agent"] = agent;
  j["env"] = config::env_to_json(config.env);
  j["sweep"] = {
      {"num_configs", config.num_configs},
      {"num_seeds", config.num_seeds},
      {"steps_per_run", config.steps_per_run},
      {"seed", config.seed},
      {"workers", config.workers},
      {"space",
       {{"lr_log10_lo", config.space.lr_log10_lo},
        {"lr_log10_hi", config.space.lr_log10_hi},
        {"alpha_log10_lo", config.space.alpha_log10_lo},
        {"alpha_log10_hi", config.space.alpha_log10_hi},
        {"beta1_choices", config.space.beta1_choices},
        {"beta2", config.space.beta2},
        {"gamma_choices", config.space.gamma_choices}}}};
  return j;
}

SweepConfig sweep_from_json(const nlohmann::json& j) {
  SweepConfig config;
  if (!j.is_object())
    throw config::ConfigError("sweep config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "agent" && key != "env" && key != "sweep")
      throw config::ConfigError("unknown top-level key '" + key +
                                "'; expected agent, env, sweep");
  }
  if (j.contains("agent")) {
    config.base = config::agent_from_json(j.at("agent"));
    if (j.at("agent").contains("kind"))
      config.agent_kind = agents::agent_kind_from_string(
          j.at("agent").at("kind").get<std::string>());
  }
  if (!j.contains("env"))
    throw config::ConfigError("sweep config missing 'env' section");
  config.env = config::env_from_json(j.at("env"));
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    static const std::vector<std::string> known = {
        "num_configs", "num_seeds", "steps_per_run", "seed", "workers",
        "space"};
    for (const auto& [key, value] : s.items()) {
      (void)value;
      bool ok = false;
      for (const auto& k : known) ok = ok || k == key;
      if (!ok) throw config::ConfigError("unknown key 'sweep." + key + "'");
    }
    if (s.contains("num_configs")) config.num_configs = s.at("num_configs");
    if (s.contains("num_seeds")) config.num_seeds = s.at("num_seeds");
    if (s.contains("steps_per_run"))
      config.steps_per_run = s.at("steps_per_run").get<std::int64_t>();
    if (s.contains("seed")) config.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("workers")) config.workers = s.at("workers");
    if (s.contains("space")) {
      const auto& sp = s.at("space");
      if (sp.contains("lr_log10_lo")) config.space.lr_log10_lo = sp.at("lr_log10_lo");
      if (sp.contains("lr_log10_hi")) config.space.lr_log10_hi = sp.at("lr_log10_hi");
      if (sp.contains("alpha_log10_lo"))
        config.space.alpha_log10_lo = sp.at("alpha_log10_lo");
      if (sp.contains("alpha_log10_hi"))
        config.space.alpha_log10_hi = sp.at("alpha_log10_hi");
      if (sp.contains("beta1_choices"))
        config.space.beta1_choices =
            sp.at("beta1_choices").get<std::vector<double>>();
      if (sp.contains("beta2")) config.space.beta2 = sp.at("beta2");
      if (sp.contains("gamma_choices"))
        config.space.gamma_choices =
            sp.at("gamma_choices").get<std::vector<double>>();
    }
  }
  return config;
}

}  // namespace avgrl::sweep
