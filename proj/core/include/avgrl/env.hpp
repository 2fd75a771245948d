#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>

#include "avgrl/rng.hpp"

namespace avgrl::env {

using Vector = Eigen::VectorXd;

struct EnvStep {
  Vector observation;
  double reward = 0.0;
  bool terminal = false;   // task-defined end (goal reached)
  bool truncated = false;  // timeout end
};

class Env {
 public:
  virtual ~Env() = default;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual std::string name() const = 0;
  virtual Vector reset(Rng& rng) = 0;
  virtual EnvStep step(const Vector& action) = 0;

  // Snapshot/restore for checkpoint resume. Envs that cannot snapshot
  // (external simulators) return nullopt.
  virtual std::optional<std::string> save_state() const { return std::nullopt; }
  virtual void load_state(const std::string& state);
};

enum class DotReacherVariant { kEasy, kHard };

// 2D point mass accelerating toward a stationary target; the episode ends
// when it is inside the target disc below the velocity threshold.
struct DotReacherConfig {
  DotReacherVariant variant = DotReacherVariant::kEasy;
  double dt = 0.05;
  double max_accel = 1.0;
  double arena_half_width = 1.0;
  double target_radius = 0.15;      // 0.05 for hard
  double velocity_threshold = 0.25;  // 0.10 for hard
  int timeout_steps = 500;
  double reward_per_step = -1.0;
  double target_x = 0.0;
  double target_y = 0.0;
  double reward_scale = 1.0;

  static DotReacherConfig easy();
  static DotReacherConfig hard();
  void validate() const;
};

class DotReacher final : public Env {
 public:
  explicit DotReacher(DotReacherConfig config);

  int obs_dim() const override { return 4; }
  int act_dim() const override { return 2; }
  std::string name() const override;
  Vector reset(Rng& rng) override;
  EnvStep step(const Vector& action) override;
  std::optional<std::string> save_state() const override;
  void load_state(const std::string& state) override;

  const DotReacherConfig& config() const { return config_; }

 private:
  Vector observation() const;

  DotReacherConfig config_;
  double pos_[2] = {0, 0};
  double vel_[2] = {0, 0};
  int steps_ = 0;
  bool needs_reset_ = true;
};

// Desk-scale swing-up task: torque-limited pendulum, dense shaping reward,
// no terminal state, fixed-horizon truncation. Dynamics follow the classic
// frictionless point-mass pendulum discretized with semi-implicit Euler.
struct PendulumConfig {
  double dt = 0.05;
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double max_torque = 2.0;
  double max_speed = 8.0;
  int timeout_steps = 200;
  double reward_scale = 1.0;
};

class Pendulum final : public Env {
 public:
  explicit Pendulum(PendulumConfig config) : config_(config) {}

  int obs_dim() const override { return 3; }
  int act_dim() const override { return 1; }
  std::string name() const override { return "pendulum"; }
  Vector reset(Rng& rng) override;
  EnvStep step(const Vector& action) override;
  std::optional<std::string> save_state() const override;
  void load_state(const std::string& state) override;

  const PendulumConfig& config() const { return config_; }

 private:
  Vector observation() const;

  PendulumConfig config_;
  double theta_ = 0.0;  // angle from upright
  double theta_dot_ = 0.0;
  int steps_ = 0;
  bool needs_reset_ = true;
};

}  // namespace avgrl::env
