#include "avgrl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace avgrl::optim {

AdamState AdamState::make(Eigen::Index n, double lr, double beta1, double beta2,
                          Mode mode) {
  AdamState s;
  s.m = Vector::Zero(n);
  s.v = Vector::Zero(n);
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.mode = mode;
  return s;
}

bool adam_step(AdamState& state, nn::ParamBundle& params,
               const Vector& gradient, Direction direction) {
  if (gradient.size() != params.values.size())
    throw std::invalid_argument("adam_step: gradient/params length mismatch");
  if (!gradient.allFinite()) return false;

  const double sign = direction == Direction::kAscent ? -1.0 : 1.0;
  state.t += 1;

  if (state.mode == Mode::kRawSgd) {
    params.values -= state.lr * sign * gradient;
    return true;
  }

  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  // Single fused pass; the loop keeps the hot path free of temporaries.
  double* m = state.m.data();
  double* v = state.v.data();
  double* p = params.values.data();
  const double* gp = gradient.data();
  const Eigen::Index n = params.values.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = sign * gp[i];
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
    p[i] -= state.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
  }
  return true;
}

}  // namespace avgrl::optim
