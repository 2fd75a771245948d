#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "avgrl/nn.hpp"

namespace avgrl::optim {

using Vector = Eigen::VectorXd;

enum class Direction { kAscent, kDescent };

// kRawSgd reproduces the plain step-size updates of the pseudocode; kAdam is
// the configuration actually trained with.
enum class Mode { kAdam, kRawSgd };

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t t = 0;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double lr = 1e-3;
  double eps = 1e-8;
  Mode mode = Mode::kAdam;

  static AdamState make(Eigen::Index n, double lr, double beta1, double beta2,
                        Mode mode = Mode::kAdam);
};

// One optimizer step in place. Ascent negates the gradient before the
// descent rule. Returns false (and leaves params and state untouched)
// when the gradient has a non-finite entry; callers treat that as a
// divergence signal.
[[nodiscard]] bool adam_step(AdamState& state, nn::ParamBundle& params,
                             const Vector& gradient, Direction direction);

}  // namespace avgrl::optim
