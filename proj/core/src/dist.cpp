#include "avgrl/dist.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace avgrl::dist {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2*pi)
constexpr double kLog2 = std::numbers::ln2;

double softplus(double x) {
  // log(1 + e^x) without overflow.
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void check(const SquashedNormalParams& params) {
  if (params.mean.size() != params.log_std.size())
    throw std::invalid_argument("squashed normal: mean/log_std length mismatch");
}

}  // namespace

SquashedSample sample_reparam(const SquashedNormalParams& params, Rng& rng) {
  check(params);
  SquashedSample s;
  s.noise.resize(params.dim());
  for (Eigen::Index i = 0; i < s.noise.size(); ++i) s.noise(i) = rng.normal();
  s.pre_tanh = params.mean.array() + params.std().array() * s.noise.array();
  s.action = s.pre_tanh.array().tanh();
  return s;
}

SquashedSample sample_deterministic(const SquashedNormalParams& params) {
  check(params);
  SquashedSample s;
  s.noise = Vector::Zero(params.dim());
  s.pre_tanh = params.mean;
  s.action = s.pre_tanh.array().tanh();
  return s;
}

double log_prob(const SquashedNormalParams& params,
                const SquashedSample& sample) {
  check(params);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < params.mean.size(); ++i) {
    const double sigma = std::exp(params.log_std(i));
    const double z = (sample.pre_tanh(i) - params.mean(i)) / sigma;
    lp += -params.log_std(i) - 0.5 * kLog2Pi - 0.5 * z * z;
    // tanh change of variables
    const double u = sample.pre_tanh(i);
    lp -= 2.0 * (kLog2 - u - softplus(-2.0 * u));
  }
  return lp;
}

double normal_entropy(const Vector& log_std) {
  const double per_dim = 0.5 * (kLog2Pi + 1.0);
  return static_cast<double>(log_std.size()) * per_dim + log_std.sum();
}

MonteCarloEstimate squashed_entropy_mc(const SquashedNormalParams& params,
                                       int n_samples, Rng& rng) {
  check(params);
  if (n_samples < 1000)
    throw std::invalid_argument("squashed_entropy_mc: n_samples must be >= 1e3");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    const SquashedSample s = sample_reparam(params, rng);
    const double x = -log_prob(params, s);
    sum += x;
    sum_sq += x * x;
  }
  const double n = static_cast<double>(n_samples);
  MonteCarloEstimate est;
  est.mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - est.mean * est.mean);
  est.stderr_ = std::sqrt(var / n);
  return est;
}

ReparamGrads reparam_grads(const SquashedNormalParams& params,
                           const SquashedSample& sample) {
  check(params);
  ReparamGrads g;
  const Vector one_minus_a2 =
      (1.0 - sample.action.array().square()).matrix();
  const Vector sigma_xi =
      (params.std().array() * sample.noise.array()).matrix();
  g.d_action_d_mean = one_minus_a2;
  g.d_action_d_log_std =
      (one_minus_a2.array() * sigma_xi.array()).matrix();
  // log pi(tanh(mean + sigma xi)) at fixed xi: the base-normal quadratic is
  // constant in the parameters, only -log sigma and the tanh correction move.
  g.d_logp_d_mean = 2.0 * sample.action;
  g.d_logp_d_log_std =
      (-1.0 + 2.0 * sample.action.array() * sigma_xi.array()).matrix();
  return g;
}

ScoreGrads score_grads(const SquashedNormalParams& params,
                       const SquashedSample& sample) {
  check(params);
  ScoreGrads g;
  const Vector z = ((sample.pre_tanh - params.mean).array() /
                    params.std().array())
                       .matrix();
  g.d_logp_d_mean = (z.array() / params.std().array()).matrix();
  g.d_logp_d_log_std = (z.array().square() - 1.0).matrix();
  return g;
}

}  // namespace avgrl::dist
