#pragma once

#include <Eigen/Core>

#include "avgrl/rng.hpp"

namespace avgrl::dist {

using Vector = Eigen::VectorXd;

// Mean/log-std pair of a diagonal normal squashed through tanh.
struct SquashedNormalParams {
  Vector mean;
  Vector log_std;

  Vector std() const { return log_std.array().exp(); }
  int dim() const { return static_cast<int>(mean.size()); }
};

// One reparameterized draw: a = tanh(mean + std * noise). The pre-tanh value
// is retained so densities never need atanh near the action bounds.
struct SquashedSample {
  Vector noise;     // xi ~ N(0, I)
  Vector pre_tanh;  // u = mean + std * xi
  Vector action;    // a = tanh(u), each component in (-1, 1)
};

SquashedSample sample_reparam(const SquashedNormalParams& params, Rng& rng);

// Deterministic action used by eval mode: tanh(mean), i.e. xi = 0.
SquashedSample sample_deterministic(const SquashedNormalParams& params);

// log pi(a) of the squashed normal evaluated at the retained pre-tanh u,
// using log(1 - tanh^2 u) = 2 (log 2 - u - softplus(-2u)).
double log_prob(const SquashedNormalParams& params,
                const SquashedSample& sample);

// Closed-form entropy of the base (unsquashed) normal.
double normal_entropy(const Vector& log_std);

struct MonteCarloEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Monte-Carlo estimate of the squashed distribution's entropy E[-log pi(A)].
MonteCarloEstimate squashed_entropy_mc(const SquashedNormalParams& params,
                                       int n_samples, Rng& rng);

// Gradients with the noise held fixed (reparameterization path).
// d_action_* give da/dmean and da/dlog_std componentwise (diagonal
// Jacobians); d_logp_* give the gradient of log pi(A_theta) where the
// sample itself moves with the parameters.
struct ReparamGrads {
  Vector d_action_d_mean;     // (1 - a^2)
  Vector d_action_d_log_std;  // (1 - a^2) * std * xi
  Vector d_logp_d_mean;       // 2 a
  Vector d_logp_d_log_std;    // -1 + 2 a * std * xi
};
ReparamGrads reparam_grads(const SquashedNormalParams& params,
                           const SquashedSample& sample);

// Gradient of log pi(a) with the action held fixed (likelihood-ratio path).
struct ScoreGrads {
  Vector d_logp_d_mean;     // (u - mean) / std^2
  Vector d_logp_d_log_std;  // -1 + ((u - mean)/std)^2
};
ScoreGrads score_grads(const SquashedNormalParams& params,
                       const SquashedSample& sample);

}  // namespace avgrl::dist
