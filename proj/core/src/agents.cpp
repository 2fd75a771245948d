#include "avgrl/agents.hpp"

#include <cmath>
#include <stdexcept>

#include "avgrl/checkpoint.hpp"

namespace avgrl::agents {

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kAvg:
      return "avg";
    case AgentKind::kAvgTarget:
      return "avg_target";
    case AgentKind::kIac:
      return "iac";
    case AgentKind::kSac1:
      return "sac1";
  }
  return "?";
}

AgentKind agent_kind_from_string(const std::string& name) {
  if (name == "avg") return AgentKind::kAvg;
  if (name == "avg_target") return AgentKind::kAvgTarget;
  if (name == "iac") return AgentKind::kIac;
  if (name == "sac1") return AgentKind::kSac1;
  throw std::invalid_argument("unknown agent kind: " + name);
}

void AgentConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("AgentConfig: gamma must be in [0, 1]");
  if (eta < 0.0) throw std::invalid_argument("AgentConfig: eta must be >= 0");
  if (actor_lr <= 0.0 || critic_lr <= 0.0)
    throw std::invalid_argument("AgentConfig: learning rates must be > 0");
  if (tau < 0.0 || tau > 1.0)
    throw std::invalid_argument("AgentConfig: tau must be in [0, 1]");
  if (rho < 0.0 || rho > 1.0)
    throw std::invalid_argument("AgentConfig: rho must be in [0, 1]");
  if (alpha_lr <= 0.0)
    throw std::invalid_argument("AgentConfig: alpha_lr must be > 0");
  if (hidden_dims.empty())
    throw std::invalid_argument("AgentConfig: hidden_dims must be non-empty");
  if (log_std_min >= log_std_max)
    throw std::invalid_argument("AgentConfig: log_std bounds inverted");
}

namespace {

using dist::SquashedNormalParams;
using dist::SquashedSample;
using nn::ParamBundle;
using nn::Tape;
using nn::Vector;
using optim::AdamState;
using optim::Direction;

// Squashed-normal policy head over a shared MLP trunk: first half of the
// output is the mean, second half the (clamped) log std.
struct PolicyEval {
  SquashedNormalParams params;
  Vector raw_log_std;  // before clamping, for the clamp gradient mask
  Tape tape;
};

class AgentBase : public Agent {
 public:
  AgentBase(AgentKind kind, const AgentConfig& config, int obs_dim,
            int act_dim)
      : kind_(kind),
        config_(config),
        obs_dim_(obs_dim),
        act_dim_(act_dim),
        rng_(config.seed),
        obs_stat_(norm::RunningStat::make(obs_dim)) {
    config_.validate();
    if (obs_dim < 1 || act_dim < 1)
      throw std::invalid_argument("agent: obs_dim and act_dim must be >= 1");
    actor_spec_.input_dim = obs_dim;
    actor_spec_.hidden_dims = config_.hidden_dims;
    actor_spec_.output_dim = 2 * act_dim;
    actor_spec_.activation = config_.activation;
    actor_spec_.feature_norm = config_.feature_norm;
    actor_spec_.hidden_gain = config_.hidden_gain;
    actor_spec_.output_gain = config_.output_gain;
    actor_ = nn::init_params(actor_spec_, rng_);
    actor_opt_ = AdamState::make(actor_.values.size(), config_.actor_lr,
                                 config_.beta1, config_.beta2, optim_mode());
  }

  AgentKind kind() const override { return kind_; }
  const AgentConfig& config() const override { return config_; }
  bool diverged() const override { return diverged_; }
  std::int64_t steps() const override { return steps_; }
  std::int64_t episodes() const override { return episodes_; }
  const norm::RunningStat& obs_stat() const override { return obs_stat_; }
  const norm::TdScaleState& td_scale() const override { return td_scale_; }

  void begin_episode(const Vector& raw_obs) override {
    if (diverged_)
      throw std::logic_error("agent diverged; refusing to start an episode");
    if (raw_obs.size() != obs_dim_)
      throw std::invalid_argument("begin_episode: observation dim mismatch");
    state_raw_ = raw_obs;
    state_ = normalize_and_update(raw_obs);
    td_scale_.begin_episode();
    in_episode_ = true;
    have_action_ = false;
  }

  Vector act() override {
    if (diverged_) throw std::logic_error("agent diverged; refusing to act");
    if (!in_episode_)
      throw std::logic_error("act() called outside an episode");
    policy_ = eval_policy(actor_, state_);
    sample_ = dist::sample_reparam(policy_.params, rng_);
    have_action_ = true;
    return sample_.action;
  }

  Vector eval_action(const Vector& raw_obs) const override {
    Vector obs = raw_obs;
    if (config_.norm_obs)
      obs = obs_stat_.normalize_only(raw_obs.array()).matrix();
    auto [head, tape] = nn::forward(actor_, actor_spec_, obs);
    (void)tape;
    SquashedNormalParams p = split_head(head).first;
    return dist::sample_deterministic(p).action;
  }

  UpdateDiagnostics learn(const Transition& transition) override {
    if (diverged_) throw std::logic_error("agent diverged; refusing to learn");
    if (!in_episode_ || !have_action_)
      throw std::logic_error("learn() without a preceding act()");
    if (transition.obs != state_raw_)
      throw std::invalid_argument(
          "learn: transition obs does not match the acted state");
    if (transition.action != sample_.action)
      throw std::invalid_argument(
          "learn: transition action does not match the sampled action");
    if (!std::isfinite(transition.reward))
      throw std::invalid_argument("learn: non-finite reward");

    const Vector next_state = normalize_and_update(transition.next_obs);

    // In-loop TD-error scaling update; gamma contribution is zeroed at true
    // terminals, matching the per-step discount the agent actually applies.
    double sigma_delta = 1.0;
    if (config_.scaled_td) {
      const double gamma_step = transition.terminal ? 0.0 : config_.gamma;
      sigma_delta = td_scale_.update(transition.reward, gamma_step);
      td_scale_.accumulate(transition.reward);
    }

    UpdateDiagnostics diag =
        update_from(transition, next_state, sigma_delta);
    diag.sigma_delta = sigma_delta;

    steps_ += 1;
    const bool episode_over = transition.terminal || transition.truncated;
    if (episode_over) {
      if (config_.scaled_td)
        td_scale_.update(transition.reward, 0.0, td_scale_.episode_return);
      episodes_ += 1;
      in_episode_ = false;
    } else {
      state_raw_ = transition.next_obs;
      state_ = next_state;
    }
    have_action_ = false;
    return diag;
  }

 protected:
  optim::Mode optim_mode() const {
    return config_.raw_sgd ? optim::Mode::kRawSgd : optim::Mode::kAdam;
  }

  // Per-variant TD + parameter updates. Returns diagnostics with delta,
  // grads and q-value filled in.
  virtual UpdateDiagnostics update_from(const Transition& transition,
                                        const Vector& next_state,
                                        double sigma_delta) = 0;

  Vector normalize_and_update(const Vector& raw) {
    if (!config_.norm_obs) return raw;
    return obs_stat_.update(raw.array()).matrix();
  }

  std::pair<SquashedNormalParams, Vector> split_head(const Vector& head) const {
    SquashedNormalParams p;
    p.mean = head.head(act_dim_);
    Vector raw_log_std = head.tail(act_dim_);
    p.log_std = raw_log_std.array()
                    .max(config_.log_std_min)
                    .min(config_.log_std_max)
                    .matrix();
    return {p, raw_log_std};
  }

  PolicyEval eval_policy(const ParamBundle& params, const Vector& obs) const {
    auto [head, tape] = nn::forward(params, actor_spec_, obs);
    PolicyEval ev;
    auto [p, raw] = split_head(head);
    ev.params = std::move(p);
    ev.raw_log_std = std::move(raw);
    ev.tape = std::move(tape);
    return ev;
  }

  // Assembles the actor head gradient (to maximize) from per-component
  // mean / log-std contributions, zeroing log-std entries pinned by the
  // clamp, then applies one optimizer step.
  bool actor_step(const PolicyEval& policy, const Vector& d_mean,
                  const Vector& d_log_std, double* grad_norm) {
    Vector upstream(2 * act_dim_);
    upstream.head(act_dim_) = d_mean;
    for (int i = 0; i < act_dim_; ++i) {
      const bool clamped = policy.raw_log_std(i) < config_.log_std_min ||
                           policy.raw_log_std(i) > config_.log_std_max;
      upstream(act_dim_ + i) = clamped ? 0.0 : d_log_std(i);
    }
    nn::grad_wrt_params_into(actor_, policy.tape, upstream, actor_grad_ws_);
    *grad_norm = actor_grad_ws_.norm();
    return optim::adam_step(actor_opt_, actor_, actor_grad_ws_,
                            Direction::kAscent);
  }

  void mark_diverged() { diverged_ = true; }

  void save_base(checkpoint::Writer& w) const {
    checkpoint::Writer body;
    body.str(to_string(kind_));
    body.u32(static_cast<std::uint32_t>(obs_dim_));
    body.u32(static_cast<std::uint32_t>(act_dim_));
    checkpoint::write_params(body, actor_);
    checkpoint::write_adam(body, actor_opt_);
    checkpoint::write_running_stat(body, obs_stat_);
    checkpoint::write_td_scale(body, td_scale_);
    checkpoint::write_rng(body, rng_);
    body.i64(steps_);
    body.i64(episodes_);
    body.boolean(diverged_);
    body.boolean(in_episode_);
    body.vec(state_raw_);
    body.vec(state_);
    w.section("agent_base", body);
  }

  void load_base(checkpoint::Reader& r) {
    checkpoint::Reader body = r.section("agent_base");
    const std::string kind_name = body.str();
    if (kind_name != to_string(kind_))
      throw checkpoint::SchemaError("checkpoint holds agent kind '" +
                                    kind_name + "', refusing to load into '" +
                                    to_string(kind_) + "'");
    const int obs_dim = static_cast<int>(body.u32());
    const int act_dim = static_cast<int>(body.u32());
    if (obs_dim != obs_dim_ || act_dim != act_dim_)
      throw checkpoint::SchemaError("checkpoint dims do not match agent");
    actor_ = checkpoint::read_params(body);
    actor_opt_ = checkpoint::read_adam(body);
    obs_stat_ = checkpoint::read_running_stat(body);
    td_scale_ = checkpoint::read_td_scale(body);
    rng_ = checkpoint::read_rng(body);
    steps_ = body.i64();
    episodes_ = body.i64();
    diverged_ = body.boolean();
    in_episode_ = body.boolean();
    state_raw_ = body.vec();
    state_ = body.vec();
    have_action_ = false;
  }

  AgentKind kind_;
  AgentConfig config_;
  int obs_dim_;
  int act_dim_;
  Rng rng_;

  nn::MlpSpec actor_spec_;
  ParamBundle actor_;
  AdamState actor_opt_;

  norm::RunningStat obs_stat_;
  norm::TdScaleState td_scale_;

  Vector state_raw_;
  Vector state_;
  PolicyEval policy_;
  SquashedSample sample_;
  Vector actor_grad_ws_;
  Vector critic_grad_ws_;

  std::int64_t steps_ = 0;
  std::int64_t episodes_ = 0;
  bool diverged_ = false;
  bool in_episode_ = false;
  bool have_action_ = false;
};

nn::MlpSpec q_critic_spec(const AgentConfig& config, int obs_dim,
                          int act_dim) {
  nn::MlpSpec spec;
  spec.input_dim = obs_dim + act_dim;
  spec.hidden_dims = config.hidden_dims;
  spec.output_dim = 1;
  spec.activation = config.activation;
  spec.feature_norm = config.feature_norm;
  spec.hidden_gain = config.hidden_gain;
  spec.output_gain = config.output_gain;
  return spec;
}

nn::MlpSpec v_critic_spec(const AgentConfig& config, int obs_dim) {
  nn::MlpSpec spec;
  spec.input_dim = obs_dim;
  spec.hidden_dims = config.hidden_dims;
  spec.output_dim = 1;
  spec.activation = config.activation;
  spec.feature_norm = config.feature_norm;
  spec.hidden_gain = config.hidden_gain;
  spec.output_gain = config.output_gain;
  return spec;
}

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

const Vector kScalarOne = Vector::Ones(1);

// Action Value Gradient, with or without a target Q-network.
class AvgAgent final : public AgentBase {
 public:
  AvgAgent(AgentKind kind, const AgentConfig& config, int obs_dim, int act_dim)
      : AgentBase(kind, config, obs_dim, act_dim),
        critic_spec_(q_critic_spec(config, obs_dim, act_dim)) {
    critic_ = nn::init_params(critic_spec_, rng_);
    critic_opt_ = AdamState::make(critic_.values.size(), config_.critic_lr,
                                  config_.beta1, config_.beta2, optim_mode());
    if (kind_ == AgentKind::kAvgTarget) target_ = critic_;
  }

  std::vector<const ParamBundle*> param_bundles() const override {
    std::vector<const ParamBundle*> out{&actor_, &critic_};
    if (kind_ == AgentKind::kAvgTarget) out.push_back(&target_);
    return out;
  }

  std::vector<ParamBundle*> mutable_param_bundles() override {
    std::vector<ParamBundle*> out{&actor_, &critic_};
    if (kind_ == AgentKind::kAvgTarget) out.push_back(&target_);
    return out;
  }

  void save(checkpoint::Writer& w) const override {
    save_base(w);
    checkpoint::Writer body;
    checkpoint::write_params(body, critic_);
    checkpoint::write_adam(body, critic_opt_);
    body.boolean(kind_ == AgentKind::kAvgTarget);
    if (kind_ == AgentKind::kAvgTarget) checkpoint::write_params(body, target_);
    w.section("avg", body);
  }

  void load(checkpoint::Reader& r) override {
    load_base(r);
    checkpoint::Reader body = r.section("avg");
    critic_ = checkpoint::read_params(body);
    critic_opt_ = checkpoint::read_adam(body);
    const bool has_target = body.boolean();
    if (has_target != (kind_ == AgentKind::kAvgTarget))
      throw checkpoint::SchemaError("checkpoint target-network presence "
                                    "does not match agent variant");
    if (has_target) target_ = checkpoint::read_params(body);
  }

 protected:
  UpdateDiagnostics update_from(const Transition& transition,
                                const Vector& next_state,
                                double sigma_delta) override {
    UpdateDiagnostics diag;

    // Bootstrap action A' ~ pi(.|S') -- sampled even at terminals so the
    // RNG stream does not depend on the mask mode.
    const PolicyEval next_policy = eval_policy(actor_, next_state);
    const SquashedSample next_sample =
        dist::sample_reparam(next_policy.params, rng_);
    const double next_logp = dist::log_prob(next_policy.params, next_sample);

    const ParamBundle& boot_params =
        kind_ == AgentKind::kAvgTarget ? target_ : critic_;
    const auto [next_q, next_tape] = nn::forward(
        boot_params, critic_spec_, concat(next_state, next_sample.action));
    (void)next_tape;

    const auto [q, q_tape] =
        nn::forward(critic_, critic_spec_, concat(state_, sample_.action));

    const bool mask = transition.terminal && !config_.literal_no_mask;
    const double gamma_boot = mask ? 0.0 : config_.gamma;
    diag.delta = transition.reward +
                 gamma_boot * (next_q(0) - config_.eta * next_logp) - q(0);
    diag.delta_scaled = norm::scale(diag.delta, sigma_delta);
    diag.q_value = q(0);
    diag.entropy_term = -dist::log_prob(policy_.params, sample_);

    if (!std::isfinite(diag.delta_scaled)) {
      mark_diverged();
      return diag;
    }

    // Critic semi-gradient: ascent on delta * grad Q(S, A_theta); no
    // gradient flows through the bootstrap term.
    nn::grad_wrt_params_into(critic_, q_tape, kScalarOne, critic_grad_ws_);
    critic_grad_ws_ *= diag.delta_scaled;
    diag.critic_grad_norm = critic_grad_ws_.norm();
    if (!optim::adam_step(critic_opt_, critic_, critic_grad_ws_,
                          Direction::kAscent)) {
      mark_diverged();
      return diag;
    }

    // Actor sees the updated critic. dQ/da with phi frozen, chained through
    // the reparameterized sample, minus the entropy-term gradient.
    const auto [q2, q2_tape] =
        nn::forward(critic_, critic_spec_, concat(state_, sample_.action));
    (void)q2;
    const Vector dq_dinput = nn::grad_wrt_input(critic_, q2_tape, kScalarOne);
    const Vector dq_da = dq_dinput.tail(act_dim_);

    const dist::ReparamGrads grads =
        dist::reparam_grads(policy_.params, sample_);
    const Vector d_mean =
        (dq_da.array() * grads.d_action_d_mean.array() -
         config_.eta * grads.d_logp_d_mean.array())
            .matrix();
    const Vector d_log_std =
        (dq_da.array() * grads.d_action_d_log_std.array() -
         config_.eta * grads.d_logp_d_log_std.array())
            .matrix();
    if (!actor_step(policy_, d_mean, d_log_std, &diag.actor_grad_norm)) {
      mark_diverged();
      return diag;
    }

    if (kind_ == AgentKind::kAvgTarget) polyak_update();
    return diag;
  }

 private:
  void polyak_update() {
    // tau == 1 must leave the target bit-identical to the critic.
    if (config_.tau == 1.0) {
      target_.values = critic_.values;
    } else {
      target_.values =
          (1.0 - config_.tau) * target_.values + config_.tau * critic_.values;
    }
  }

  nn::MlpSpec critic_spec_;
  ParamBundle critic_;
  AdamState critic_opt_;
  ParamBundle target_;
};

// One-step actor-critic with a state-value critic and likelihood-ratio
// actor update.
class IacAgent final : public AgentBase {
 public:
  IacAgent(const AgentConfig& config, int obs_dim, int act_dim)
      : AgentBase(AgentKind::kIac, config, obs_dim, act_dim),
        critic_spec_(v_critic_spec(config, obs_dim)) {
    critic_ = nn::init_params(critic_spec_, rng_);
    critic_opt_ = AdamState::make(critic_.values.size(), config_.critic_lr,
                                  config_.beta1, config_.beta2, optim_mode());
  }

  std::vector<const ParamBundle*> param_bundles() const override {
    return {&actor_, &critic_};
  }

  std::vector<ParamBundle*> mutable_param_bundles() override {
    return {&actor_, &critic_};
  }

  void save(checkpoint::Writer& w) const override {
    save_base(w);
    checkpoint::Writer body;
    checkpoint::write_params(body, critic_);
    checkpoint::write_adam(body, critic_opt_);
    w.section("iac", body);
  }

  void load(checkpoint::Reader& r) override {
    load_base(r);
    checkpoint::Reader body = r.section("iac");
    critic_ = checkpoint::read_params(body);
    critic_opt_ = checkpoint::read_adam(body);
  }

 protected:
  UpdateDiagnostics update_from(const Transition& transition,
                                const Vector& next_state,
                                double sigma_delta) override {
    UpdateDiagnostics diag;

    const auto [next_v, next_tape] =
        nn::forward(critic_, critic_spec_, next_state);
    (void)next_tape;
    const auto [v, v_tape] = nn::forward(critic_, critic_spec_, state_);

    const bool mask = transition.terminal && !config_.literal_no_mask;
    const double gamma_boot = mask ? 0.0 : config_.gamma;
    diag.delta = transition.reward + gamma_boot * next_v(0) - v(0);
    diag.delta_scaled = norm::scale(diag.delta, sigma_delta);
    diag.q_value = v(0);

    if (!std::isfinite(diag.delta_scaled)) {
      mark_diverged();
      return diag;
    }

    nn::grad_wrt_params_into(critic_, v_tape, kScalarOne, critic_grad_ws_);
    critic_grad_ws_ *= diag.delta_scaled;
    diag.critic_grad_norm = critic_grad_ws_.norm();
    if (!optim::adam_step(critic_opt_, critic_, critic_grad_ws_,
                          Direction::kAscent)) {
      mark_diverged();
      return diag;
    }

    // Likelihood-ratio actor update: delta is a constant, the entropy term
    // follows the configured flavor.
    const dist::ScoreGrads score = dist::score_grads(policy_.params, sample_);
    Vector d_mean = diag.delta_scaled * score.d_logp_d_mean;
    Vector d_log_std = diag.delta_scaled * score.d_logp_d_log_std;
    if (config_.iac_entropy == EntropyKind::kDistribution) {
      diag.entropy_term = dist::normal_entropy(policy_.params.log_std);
      // dH/dlog_std = 1 per dimension, dH/dmean = 0.
      d_log_std.array() += config_.eta;
    } else {
      diag.entropy_term = -dist::log_prob(policy_.params, sample_);
      d_mean -= config_.eta * score.d_logp_d_mean;
      d_log_std -= config_.eta * score.d_logp_d_log_std;
    }
    if (!actor_step(policy_, d_mean, d_log_std, &diag.actor_grad_norm)) {
      mark_diverged();
      return diag;
    }
    return diag;
  }

 private:
  nn::MlpSpec critic_spec_;
  ParamBundle critic_;
  AdamState critic_opt_;
};

// Incremental SAC: twin critics with targets, a fresh reparameterized action
// for the actor, and a learnable entropy coefficient.
class Sac1Agent final : public AgentBase {
 public:
  Sac1Agent(const AgentConfig& config, int obs_dim, int act_dim)
      : AgentBase(AgentKind::kSac1, config, obs_dim, act_dim),
        critic_spec_(q_critic_spec(config, obs_dim, act_dim)) {
    for (int i = 0; i < 2; ++i) {
      critic_[i] = nn::init_params(critic_spec_, rng_);
      critic_opt_[i] =
          AdamState::make(critic_[i].values.size(), config_.critic_lr,
                          config_.beta1, config_.beta2, optim_mode());
      target_[i] = critic_[i];
    }
    log_eta_ = std::log(std::max(config_.eta, 1e-8));
    target_entropy_ = config_.target_entropy_sign * act_dim;
  }

  std::vector<const ParamBundle*> param_bundles() const override {
    return {&actor_, &critic_[0], &critic_[1], &target_[0], &target_[1]};
  }

  std::vector<ParamBundle*> mutable_param_bundles() override {
    return {&actor_, &critic_[0], &critic_[1], &target_[0], &target_[1]};
  }

  double entropy_coefficient() const override { return std::exp(log_eta_); }

  void save(checkpoint::Writer& w) const override {
    save_base(w);
    checkpoint::Writer body;
    for (int i = 0; i < 2; ++i) {
      checkpoint::write_params(body, critic_[i]);
      checkpoint::write_adam(body, critic_opt_[i]);
      checkpoint::write_params(body, target_[i]);
    }
    body.f64(log_eta_);
    w.section("sac1", body);
  }

  void load(checkpoint::Reader& r) override {
    load_base(r);
    checkpoint::Reader body = r.section("sac1");
    for (int i = 0; i < 2; ++i) {
      critic_[i] = checkpoint::read_params(body);
      critic_opt_[i] = checkpoint::read_adam(body);
      target_[i] = checkpoint::read_params(body);
    }
    log_eta_ = body.f64();
  }

 protected:
  UpdateDiagnostics update_from(const Transition& transition,
                                const Vector& next_state,
                                double sigma_delta) override {
    UpdateDiagnostics diag;
    const double eta_now = entropy_coefficient();

    const PolicyEval next_policy = eval_policy(actor_, next_state);
    const SquashedSample next_sample =
        dist::sample_reparam(next_policy.params, rng_);
    const double next_logp = dist::log_prob(next_policy.params, next_sample);

    const bool mask = transition.terminal && !config_.literal_no_mask;
    const double gamma_boot = mask ? 0.0 : config_.gamma;
    const Vector state_action = concat(state_, sample_.action);
    const Vector next_state_action = concat(next_state, next_sample.action);

    double delta[2];
    double critic_grad_sq = 0.0;
    Tape q_tapes[2];
    double q_values[2];
    for (int i = 0; i < 2; ++i) {
      const auto [next_q, nt] =
          nn::forward(target_[i], critic_spec_, next_state_action);
      (void)nt;
      auto [q, tape] = nn::forward(critic_[i], critic_spec_, state_action);
      q_values[i] = q(0);
      q_tapes[i] = std::move(tape);
      delta[i] = transition.reward +
                 gamma_boot * (next_q(0) - eta_now * next_logp) - q(0);
      delta[i] = norm::scale(delta[i], sigma_delta);
      if (!std::isfinite(delta[i])) {
        diag.delta = delta[i];
        mark_diverged();
        return diag;
      }
    }
    diag.delta = delta[0] * sigma_delta;  // first critic, pre-scale
    diag.delta_scaled = delta[0];
    diag.q_value = std::min(q_values[0], q_values[1]);
    diag.entropy_term = -dist::log_prob(policy_.params, sample_);

    for (int i = 0; i < 2; ++i) {
      nn::grad_wrt_params_into(critic_[i], q_tapes[i], kScalarOne,
                               critic_grad_ws_);
      critic_grad_ws_ *= delta[i];
      critic_grad_sq += critic_grad_ws_.squaredNorm();
      if (!optim::adam_step(critic_opt_[i], critic_[i], critic_grad_ws_,
                            Direction::kAscent)) {
        mark_diverged();
        return diag;
      }
    }
    diag.critic_grad_norm = std::sqrt(critic_grad_sq);

    // Fresh reparameterized action for the actor; the executed action is
    // not reused.
    const SquashedSample fresh = dist::sample_reparam(policy_.params, rng_);
    double q_fresh[2];
    Tape fresh_tapes[2];
    const Vector state_fresh = concat(state_, fresh.action);
    for (int i = 0; i < 2; ++i) {
      auto [qf, tape] = nn::forward(critic_[i], critic_spec_, state_fresh);
      q_fresh[i] = qf(0);
      fresh_tapes[i] = std::move(tape);
    }
    const int min_idx = q_fresh[0] <= q_fresh[1] ? 0 : 1;
    const Vector dq_da =
        nn::grad_wrt_input(critic_[min_idx], fresh_tapes[min_idx], kScalarOne)
            .tail(act_dim_);

    const dist::ReparamGrads grads = dist::reparam_grads(policy_.params, fresh);
    const Vector d_mean = (dq_da.array() * grads.d_action_d_mean.array() -
                           eta_now * grads.d_logp_d_mean.array())
                              .matrix();
    const Vector d_log_std =
        (dq_da.array() * grads.d_action_d_log_std.array() -
         eta_now * grads.d_logp_d_log_std.array())
            .matrix();
    if (!actor_step(policy_, d_mean, d_log_std, &diag.actor_grad_norm)) {
      mark_diverged();
      return diag;
    }

    // Entropy coefficient step toward the target entropy, in log space.
    const double fresh_logp = dist::log_prob(policy_.params, fresh);
    log_eta_ -= config_.alpha_lr * (-fresh_logp - target_entropy_);

    for (int i = 0; i < 2; ++i) {
      if (config_.rho == 1.0) {
        target_[i].values = critic_[i].values;
      } else {
        target_[i].values = config_.rho * critic_[i].values +
                            (1.0 - config_.rho) * target_[i].values;
      }
    }
    return diag;
  }

 private:
  nn::MlpSpec critic_spec_;
  ParamBundle critic_[2];
  AdamState critic_opt_[2];
  ParamBundle target_[2];
  double log_eta_ = 0.0;
  double target_entropy_ = 0.0;
};

}  // namespace

std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentConfig& config,
                                  int obs_dim, int act_dim) {
  switch (kind) {
    case AgentKind::kAvg:
    case AgentKind::kAvgTarget:
      return std::make_unique<AvgAgent>(kind, config, obs_dim, act_dim);
    case AgentKind::kIac:
      return std::make_unique<IacAgent>(config, obs_dim, act_dim);
    case AgentKind::kSac1:
      return std::make_unique<Sac1Agent>(config, obs_dim, act_dim);
  }
  throw std::invalid_argument("make_agent: unknown kind");
}

}  // namespace avgrl::agents
