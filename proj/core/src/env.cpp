#include "avgrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace avgrl::env {

void Env::load_state(const std::string&) {
  throw std::runtime_error(name() + ": state restore not supported");
}

DotReacherConfig DotReacherConfig::easy() { return DotReacherConfig{}; }

DotReacherConfig DotReacherConfig::hard() {
  DotReacherConfig c;
  c.variant = DotReacherVariant::kHard;
  c.target_radius = 0.05;
  c.velocity_threshold = 0.10;
  return c;
}

void DotReacherConfig::validate() const {
  if (target_radius >= arena_half_width)
    throw std::invalid_argument(
        "DotReacherConfig: target_radius must be < arena_half_width");
  if (timeout_steps < 1)
    throw std::invalid_argument("DotReacherConfig: timeout_steps must be >= 1");
  if (dt <= 0 || max_accel <= 0)
    throw std::invalid_argument("DotReacherConfig: dt and max_accel must be > 0");
}

DotReacher::DotReacher(DotReacherConfig config) : config_(config) {
  config_.validate();
}

std::string DotReacher::name() const {
  return config_.variant == DotReacherVariant::kEasy ? "dot_reacher_easy"
                                                     : "dot_reacher_hard";
}

Vector DotReacher::observation() const {
  Vector obs(4);
  obs << pos_[0], pos_[1], vel_[0], vel_[1];
  return obs;
}

Vector DotReacher::reset(Rng& rng) {
  const double hw = config_.arena_half_width;
  // Uniform over the arena minus the target disc.
  while (true) {
    pos_[0] = rng.uniform(-hw, hw);
    pos_[1] = rng.uniform(-hw, hw);
    const double dx = pos_[0] - config_.target_x;
    const double dy = pos_[1] - config_.target_y;
    if (std::hypot(dx, dy) > config_.target_radius) break;
  }
  vel_[0] = vel_[1] = 0.0;
  steps_ = 0;
  needs_reset_ = false;
  return observation();
}

EnvStep DotReacher::step(const Vector& action) {
  if (needs_reset_)
    throw std::logic_error("DotReacher::step called on an ended episode");
  if (action.size() != 2)
    throw std::invalid_argument("DotReacher::step: action must have 2 dims");

  for (int i = 0; i < 2; ++i) {
    const double a = std::clamp(action(i), -1.0, 1.0);
    vel_[i] += config_.max_accel * a * config_.dt;
  }
  for (int i = 0; i < 2; ++i) {
    pos_[i] += vel_[i] * config_.dt;
    const double hw = config_.arena_half_width;
    if (pos_[i] > hw) {
      pos_[i] = hw;
      vel_[i] = 0.0;
    } else if (pos_[i] < -hw) {
      pos_[i] = -hw;
      vel_[i] = 0.0;
    }
  }
  steps_ += 1;

  const double dist = std::hypot(pos_[0] - config_.target_x,
                                 pos_[1] - config_.target_y);
  const double speed = std::hypot(vel_[0], vel_[1]);

  EnvStep out;
  out.terminal = dist <= config_.target_radius &&
                 speed <= config_.velocity_threshold;
  out.truncated = steps_ >= config_.timeout_steps;
  out.reward =
      (out.terminal ? 0.0 : config_.reward_per_step) * config_.reward_scale;
  out.observation = observation();
  if (out.terminal || out.truncated) needs_reset_ = true;
  return out;
}

std::optional<std::string> DotReacher::save_state() const {
  nlohmann::json j;
  j["pos"] = {pos_[0], pos_[1]};
  j["vel"] = {vel_[0], vel_[1]};
  j["steps"] = steps_;
  j["needs_reset"] = needs_reset_;
  return j.dump();
}

void DotReacher::load_state(const std::string& state) {
  const auto j = nlohmann::json::parse(state);
  pos_[0] = j.at("pos")[0];
  pos_[1] = j.at("pos")[1];
  vel_[0] = j.at("vel")[0];
  vel_[1] = j.at("vel")[1];
  steps_ = j.at("steps");
  needs_reset_ = j.at("needs_reset");
}

Vector Pendulum::observation() const {
  Vector obs(3);
  obs << std::cos(theta_), std::sin(theta_), theta_dot_;
  return obs;
}

Vector Pendulum::reset(Rng& rng) {
  theta_ = rng.uniform(-std::numbers::pi, std::numbers::pi);
  theta_dot_ = rng.uniform(-1.0, 1.0);
  steps_ = 0;
  needs_reset_ = false;
  return observation();
}

EnvStep Pendulum::step(const Vector& action) {
  if (needs_reset_)
    throw std::logic_error("Pendulum::step called on an ended episode");
  if (action.size() != 1)
    throw std::invalid_argument("Pendulum::step: action must have 1 dim");

  const double u =
      std::clamp(action(0), -1.0, 1.0) * config_.max_torque;
  const double g = config_.gravity;
  const double m = config_.mass;
  const double l = config_.length;

  // theta measured from upright, so gravity accelerates away from 0.
  const double accel =
      3.0 * g / (2.0 * l) * std::sin(theta_) + 3.0 / (m * l * l) * u;
  theta_dot_ += accel * config_.dt;
  theta_dot_ = std::clamp(theta_dot_, -config_.max_speed, config_.max_speed);
  theta_ += theta_dot_ * config_.dt;
  steps_ += 1;

  // Wrap to (-pi, pi] for the angle penalty.
  double wrapped = std::fmod(theta_ + std::numbers::pi, 2.0 * std::numbers::pi);
  if (wrapped < 0) wrapped += 2.0 * std::numbers::pi;
  wrapped -= std::numbers::pi;

  EnvStep out;
  out.reward = -(wrapped * wrapped + 0.1 * theta_dot_ * theta_dot_ +
                 0.001 * u * u) *
               config_.reward_scale;
  out.truncated = steps_ >= config_.timeout_steps;
  out.observation = observation();
  if (out.truncated) needs_reset_ = true;
  return out;
}

std::optional<std::string> Pendulum::save_state() const {
  nlohmann::json j;
  j["theta"] = theta_;
  j["theta_dot"] = theta_dot_;
  j["steps"] = steps_;
  j["needs_reset"] = needs_reset_;
  return j.dump();
}

void Pendulum::load_state(const std::string& state) {
  const auto j = nlohmann::json::parse(state);
  theta_ = j.at("theta");
  theta_dot_ = j.at("theta_dot");
  steps_ = j.at("steps");
  needs_reset_ = j.at("needs_reset");
}

}  // namespace avgrl::env
