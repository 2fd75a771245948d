#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "avgrl/dist.hpp"
#include "avgrl/nn.hpp"
#include "avgrl/norm.hpp"
#include "avgrl/optim.hpp"
#include "avgrl/rng.hpp"

namespace avgrl::checkpoint {
class Writer;
class Reader;
}  // namespace avgrl::checkpoint

namespace avgrl::agents {

using Vector = Eigen::VectorXd;

enum class AgentKind { kAvg, kAvgTarget, kIac, kSac1 };

std::string to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string& name);

// Entropy term used by IAC's actor update: closed-form distribution entropy
// or the per-sample -log pi.
enum class EntropyKind { kDistribution, kSample };

struct AgentConfig {
  double gamma = 0.99;
  double eta = 0.07;        // entropy coefficient; initial value for SAC-1
  double actor_lr = 0.0063;
  double critic_lr = 0.0087;
  double tau = 0.005;       // Polyak coefficient, target-Q variant
  double rho = 0.005;       // Polyak coefficient, SAC-1 targets
  double alpha_lr = 0.07;   // SAC-1 entropy-coefficient learning rate
  double beta1 = 0.0;
  double beta2 = 0.999;
  bool norm_obs = true;
  bool scaled_td = true;
  nn::FeatureNorm feature_norm = nn::FeatureNorm::kPnorm;
  std::vector<int> hidden_dims = {256, 256};
  nn::Activation activation = nn::Activation::kLeakyRelu;
  double hidden_gain = std::numbers::sqrt2;
  double output_gain = 1.0;
  bool raw_sgd = false;          // plain step-size updates instead of Adam
  bool literal_no_mask = false;  // bootstrap through true terminals as well
  EntropyKind iac_entropy = EntropyKind::kDistribution;
  double target_entropy_sign = -1.0;  // target entropy = sign * act_dim
  double log_std_min = -10.0;
  double log_std_max = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// One environment transition as consumed by learn(). `obs` must be the raw
// observation the preceding act() saw; pre_tanh and noise are filled in by
// the agent from its retained sample.
struct Transition {
  Vector obs;
  Vector action;
  Vector pre_tanh;
  Vector noise;
  double reward = 0.0;
  Vector next_obs;
  bool terminal = false;
  bool truncated = false;
};

struct UpdateDiagnostics {
  double delta = 0.0;         // TD error before scaling
  double delta_scaled = 0.0;  // after dividing by sigma_delta
  double sigma_delta = 1.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
  double q_value = 0.0;
  double entropy_term = 0.0;
};

// Step-driven incremental agent: observe -> act -> learn, one transition at
// a time, no replay buffer. Single-writer state.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual AgentKind kind() const = 0;
  virtual const AgentConfig& config() const = 0;

  // Starts an episode at the given raw observation (applies exactly one
  // normalizer update for it when norm_obs is on).
  virtual void begin_episode(const Vector& raw_obs) = 0;

  // Samples an action for the current state. Throws if the divergence flag
  // is set or no episode is active.
  virtual Vector act() = 0;

  // One incremental update from the latest transition. The transition's obs
  // and action must match what act() produced.
  virtual UpdateDiagnostics learn(const Transition& transition) = 0;

  // Deterministic policy (noise = 0) without touching any statistics.
  virtual Vector eval_action(const Vector& raw_obs) const = 0;

  virtual bool diverged() const = 0;
  virtual std::int64_t steps() const = 0;
  virtual std::int64_t episodes() const = 0;

  virtual const norm::RunningStat& obs_stat() const = 0;
  virtual const norm::TdScaleState& td_scale() const = 0;

  // All parameter bundles (actor first), for tests and diagnostics.
  virtual std::vector<const nn::ParamBundle*> param_bundles() const = 0;
  virtual std::vector<nn::ParamBundle*> mutable_param_bundles() = 0;

  // Current entropy coefficient (fixed for AVG/IAC, learned by SAC-1).
  virtual double entropy_coefficient() const { return config().eta; }

  virtual void save(checkpoint::Writer& writer) const = 0;
  virtual void load(checkpoint::Reader& reader) = 0;
};

std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentConfig& config,
                                  int obs_dim, int act_dim);

}  // namespace avgrl::agents
