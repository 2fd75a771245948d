#include "avgrl/lintest.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace avgrl::lintest {

SoftmaxKernel::SoftmaxKernel(Matrix base_logits, Matrix action_coupling)
    : base_(std::move(base_logits)), coupling_(std::move(action_coupling)) {
  if (base_.rows() != base_.cols() || coupling_.rows() != coupling_.cols() ||
      base_.rows() != coupling_.rows())
    throw std::invalid_argument("SoftmaxKernel: logit matrices must be square "
                                "and the same size");
}

Vector SoftmaxKernel::probs(int s, double a) const {
  const Vector logits =
      base_.row(s).transpose() + coupling_.row(s).transpose() * std::tanh(a);
  const Vector shifted = logits.array() - logits.maxCoeff();
  const Vector expd = shifted.array().exp();
  return expd / expd.sum();
}

Vector SoftmaxKernel::dprobs_da(int s, double a) const {
  const Vector p = probs(s, a);
  const Vector c = coupling_.row(s).transpose();
  const double sech2 = 1.0 - std::tanh(a) * std::tanh(a);
  // d softmax: p_i (c_i - sum_j p_j c_j) * dtanh/da
  const double mean_c = p.dot(c);
  return (p.array() * (c.array() - mean_c) * sech2).matrix();
}

FixedKernel::FixedKernel(Matrix transition) : p_(std::move(transition)) {
  if (p_.rows() != p_.cols())
    throw std::invalid_argument("FixedKernel: matrix must be square");
  for (Eigen::Index i = 0; i < p_.rows(); ++i) {
    if (std::abs(p_.row(i).sum() - 1.0) > 1e-12 || p_.row(i).minCoeff() < 0)
      throw std::invalid_argument("FixedKernel: rows must be distributions");
  }
}

double SmallMdp::reward(int s, double a) const {
  return reward_base(s) + reward_action(s) * std::tanh(a);
}

double SmallMdp::dreward_da(int s, double a) const {
  const double t = std::tanh(a);
  return reward_action(s) * (1.0 - t * t);
}

void SmallMdp::validate() const {
  const int n = num_states();
  if (n < 1 || n > 10)
    throw std::invalid_argument("SmallMdp: states must be in [1, 10]");
  if (reward_base.size() != n || reward_action.size() != n ||
      initial_dist.size() != n)
    throw std::invalid_argument("SmallMdp: field dimensions inconsistent");
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("SmallMdp: gamma must be in [0, 1)");
  if (std::abs(initial_dist.sum() - 1.0) > 1e-12 ||
      initial_dist.minCoeff() < 0)
    throw std::invalid_argument("SmallMdp: initial_dist must be a distribution");
  for (int s = 0; s < n; ++s) {
    const Vector p = kernel->probs(s, 0.37);
    if (std::abs(p.sum() - 1.0) > 1e-12 || p.minCoeff() < 0)
      throw std::invalid_argument("SmallMdp: kernel rows must sum to 1");
  }
}

SmallMdp make_default_mdp() {
  Matrix base(3, 3);
  base << 0.5, 0.2, -0.3,
          -0.2, 0.4, 0.1,
          0.3, -0.5, 0.2;
  Matrix coupling(3, 3);
  coupling << 0.8, -0.4, -0.4,
              -0.5, 0.9, -0.4,
              -0.3, -0.3, 0.6;
  SmallMdp mdp;
  mdp.kernel = std::make_shared<SoftmaxKernel>(base, coupling);
  mdp.reward_base = Vector(3);
  mdp.reward_base << 0.5, -0.2, 1.0;
  mdp.reward_action = Vector(3);
  mdp.reward_action << 1.0, 0.6, -0.8;
  mdp.gamma = 0.9;
  mdp.initial_dist = Vector::Constant(3, 1.0 / 3.0);
  mdp.validate();
  return mdp;
}

Vector features(int num_states, int s, double a) {
  Vector phi = Vector::Zero(num_states);
  phi(s) = a;
  return phi;
}

namespace {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
void gauss_legendre(int order, Vector& nodes, Vector& weights) {
  nodes.resize(order);
  weights.resize(order);
  const int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = order * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes(i) = -x;
    nodes(order - 1 - i) = x;
    weights(i) = 2.0 / ((1.0 - x * x) * pp * pp);
    weights(order - 1 - i) = weights(i);
  }
}

double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double truncation_mass() {
  return std::erf(kNoiseBound / std::numbers::sqrt2);
}

}  // namespace

const NoiseQuadrature& noise_quadrature() {
  static const NoiseQuadrature quad = [] {
    Vector nodes, weights;
    gauss_legendre(kNoiseQuadOrder, nodes, weights);
    NoiseQuadrature q;
    q.nodes = nodes * kNoiseBound;
    q.weights.resize(weights.size());
    const double z = truncation_mass();
    for (Eigen::Index i = 0; i < weights.size(); ++i)
      q.weights(i) =
          weights(i) * kNoiseBound * standard_normal_pdf(q.nodes(i)) / z;
    // Normalize away the residual quadrature error so expectations of
    // constants are exact.
    q.weights /= q.weights.sum();
    return q;
  }();
  return quad;
}

double sample_noise(Rng& rng) {
  while (true) {
    const double eps = rng.normal();
    if (std::abs(eps) <= kNoiseBound) return eps;
  }
}

Matrix averaged_kernel(const SmallMdp& mdp, const LinearPolicy& policy) {
  const int n = mdp.num_states();
  const auto& quad = noise_quadrature();
  Matrix k = Matrix::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    for (Eigen::Index i = 0; i < quad.nodes.size(); ++i) {
      const double a = policy.action(s, quad.nodes(i));
      k.row(s) += quad.weights(i) * mdp.kernel->probs(s, a).transpose();
    }
  }
  return k;
}

Vector stationary_distribution(const SmallMdp& mdp,
                               const LinearPolicy& policy) {
  const Matrix k = averaged_kernel(mdp, policy);
  constexpr double kTol = 1e-12;
  constexpr int kMaxIters = 1'000'000;
  Vector d = mdp.initial_dist;
  Vector prev = d;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    Vector next = k.transpose() * d;
    next /= next.sum();
    const double step = (next - d).lpNorm<1>();
    if (step <= kTol) return next;
    // Period-2 oscillation: successive iterates far apart while iterates
    // two apart coincide.
    if (iter >= 1 && (next - prev).lpNorm<1>() <= kTol && step > 1e-6)
      throw std::runtime_error(
          "stationary_distribution: oscillation detected (chain not ergodic)");
    prev = d;
    d = next;
  }
  throw std::runtime_error("stationary_distribution: power iteration did not "
                           "converge");
}

Vector discounted_visitation(const SmallMdp& mdp, const LinearPolicy& policy) {
  const Matrix k = averaged_kernel(mdp, policy);
  const int n = mdp.num_states();
  const Matrix system = Matrix::Identity(n, n) - mdp.gamma * k.transpose();
  return system.partialPivLu().solve(mdp.initial_dist);
}

Vector state_values(const SmallMdp& mdp, const LinearPolicy& policy) {
  const int n = mdp.num_states();
  const auto& quad = noise_quadrature();
  Vector rbar = Vector::Zero(n);
  for (int s = 0; s < n; ++s)
    for (Eigen::Index i = 0; i < quad.nodes.size(); ++i)
      rbar(s) += quad.weights(i) * mdp.reward(s, policy.action(s, quad.nodes(i)));
  const Matrix k = averaged_kernel(mdp, policy);
  const Matrix system = Matrix::Identity(n, n) - mdp.gamma * k;
  return system.partialPivLu().solve(rbar);
}

double objective(const SmallMdp& mdp, const LinearPolicy& policy) {
  return mdp.initial_dist.dot(state_values(mdp, policy));
}

double q_value(const SmallMdp& mdp, const LinearPolicy& policy, int s,
               double a) {
  const Vector v = state_values(mdp, policy);
  return mdp.reward(s, a) + mdp.gamma * mdp.kernel->probs(s, a).dot(v);
}

double dq_da(const SmallMdp& mdp, const LinearPolicy& policy, int s,
             double a) {
  const Vector v = state_values(mdp, policy);
  return mdp.dreward_da(s, a) + mdp.gamma * mdp.kernel->dprobs_da(s, a).dot(v);
}

Vector brute_force_policy_gradient(const SmallMdp& mdp,
                                   const LinearPolicy& policy) {
  const int n = mdp.num_states();
  const Vector nu = discounted_visitation(mdp, policy);
  const Vector v = state_values(mdp, policy);
  const auto& quad = noise_quadrature();
  Vector grad = Vector::Zero(n);
  for (int s = 0; s < n; ++s) {
    double mean_dq = 0.0;
    for (Eigen::Index i = 0; i < quad.nodes.size(); ++i) {
      const double a = policy.action(s, quad.nodes(i));
      const double dq = mdp.dreward_da(s, a) +
                        mdp.gamma * mdp.kernel->dprobs_da(s, a).dot(v);
      mean_dq += quad.weights(i) * dq;
    }
    grad(s) = nu(s) * mean_dq;
  }
  return grad;
}

TdSystem td_system(const SmallMdp& mdp, const LinearPolicy& policy) {
  const int n = mdp.num_states();
  const Vector d = stationary_distribution(mdp, policy);
  const auto& quad = noise_quadrature();
  TdSystem sys;
  sys.a = Matrix::Zero(n, n);
  sys.b = Vector::Zero(n);
  // phi(s, a) = e_s a, and E[a' | s'] = theta[s'] because the truncated
  // noise has mean zero.
  for (int s = 0; s < n; ++s) {
    for (Eigen::Index i = 0; i < quad.nodes.size(); ++i) {
      const double w = d(s) * quad.weights(i);
      const double a = policy.action(s, quad.nodes(i));
      const Vector p = mdp.kernel->probs(s, a);
      for (int sp = 0; sp < n; ++sp)
        sys.a(s, sp) += w * a * mdp.gamma * p(sp) * policy.theta(sp);
      sys.a(s, s) -= w * a * a;
      sys.b(s) += w * mdp.reward(s, a) * a;
    }
  }
  return sys;
}

Vector w_star_td(const SmallMdp& mdp, const LinearPolicy& policy) {
  const TdSystem sys = td_system(mdp, policy);
  Eigen::FullPivLU<Matrix> lu(sys.a);
  if (!lu.isInvertible())
    throw std::runtime_error("w_star_td: TD matrix A is singular "
                             "(feature/regime misconfiguration)");
  return lu.solve(-sys.b);
}

Vector w_star_compatible(const SmallMdp& mdp, const LinearPolicy& policy) {
  const int n = mdp.num_states();
  const Vector v = state_values(mdp, policy);
  const auto& quad = noise_quadrature();
  Vector w(n);
  for (int s = 0; s < n; ++s) {
    double mean_dq = 0.0;
    for (Eigen::Index i = 0; i < quad.nodes.size(); ++i) {
      const double a = policy.action(s, quad.nodes(i));
      mean_dq += quad.weights(i) *
                 (mdp.dreward_da(s, a) +
                  mdp.gamma * mdp.kernel->dprobs_da(s, a).dot(v));
    }
    w(s) = mean_dq;
  }
  return w;
}

double measure_kappa(const SmallMdp& mdp,
                     const std::vector<LinearPolicy>& policies) {
  double kappa = 0.0;
  for (const auto& policy : policies)
    kappa = std::max(
        kappa, (w_star_td(mdp, policy) - w_star_compatible(mdp, policy)).norm());
  return kappa;
}

void RpgTdConfig::validate() const {
  if (alpha_w <= 0.0 || alpha_theta < 0.0)
    throw std::invalid_argument("RpgTdConfig: alpha_w must be > 0, "
                                "alpha_theta >= 0");
  if (batch_m < 1)
    throw std::invalid_argument("RpgTdConfig: batch size M must be >= 1");
  if (iterations < 1 || diag_every < 1)
    throw std::invalid_argument("RpgTdConfig: iterations, diag_every >= 1");
}

namespace {

int sample_categorical(const Vector& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace

RpgTdResult run_rpg_td(const SmallMdp& mdp, LinearPolicy policy,
                       const RpgTdConfig& config) {
  config.validate();
  const int n = mdp.num_states();
  if (policy.theta.size() != n)
    throw std::invalid_argument("run_rpg_td: theta dimension mismatch");
  if (config.w0.size() != 0 && config.w0.size() != n)
    throw std::invalid_argument("run_rpg_td: w0 dimension mismatch");
  Rng rng(config.seed);
  Vector w = config.w0.size() == n ? config.w0 : Vector::Zero(n);

  RpgTdResult result;
  result.min_grad_norm_sq = std::numeric_limits<double>::infinity();

  for (int t = 0; t < config.iterations; ++t) {
    // Diagnostics at the current iterate.
    const Vector grad = brute_force_policy_gradient(mdp, policy);
    const double grad_sq = grad.squaredNorm();
    result.min_grad_norm_sq = std::min(result.min_grad_norm_sq, grad_sq);
    if (t % config.diag_every == 0) {
      RpgTdDiagRow row;
      row.t = t;
      row.grad_norm_sq = grad_sq;
      row.tracking_err = (w - w_star_td(mdp, policy)).norm();
      result.trace.push_back(row);
    }

    if (config.expected_updates) {
      const TdSystem sys = td_system(mdp, policy);
      w += config.alpha_w * (sys.a * w + sys.b);
      if (config.alpha_theta > 0.0) {
        Vector nu_hat = discounted_visitation(mdp, policy) * (1.0 - mdp.gamma);
        policy.theta += config.alpha_theta * (nu_hat.array() * w.array()).matrix();
      }
      continue;
    }

    const Vector d = stationary_distribution(mdp, policy);
    Vector w_delta = Vector::Zero(n);
    for (int j = 0; j < config.batch_m; ++j) {
      const int s = sample_categorical(d, rng);
      const double a = policy.action(s, sample_noise(rng));
      const int sp = sample_categorical(mdp.kernel->probs(s, a), rng);
      const double ap = policy.action(sp, sample_noise(rng));
      const double r = mdp.reward(s, a);
      const double delta = r + mdp.gamma * ap * w(sp) - a * w(s);
      w_delta(s) += delta * a;
    }
    w += config.alpha_w / config.batch_m * w_delta;

    if (config.alpha_theta > 0.0) {
      const Vector nu_hat =
          discounted_visitation(mdp, policy) * (1.0 - mdp.gamma);
      Vector theta_delta = Vector::Zero(n);
      for (int j = 0; j < config.batch_m; ++j) {
        const int s = sample_categorical(nu_hat, rng);
        sample_noise(rng);  // eps' is drawn per the sampling scheme but the
                            // tabular policy's gradient does not depend on it
        theta_delta(s) += w(s);
      }
      policy.theta += config.alpha_theta / config.batch_m * theta_delta;
    }
  }

  result.w = w;
  result.theta = policy.theta;
  return result;
}

void write_csv(const std::string& path,
               const std::vector<std::pair<RpgTdConfig, RpgTdResult>>& runs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "t,grad_norm_sq,tracking_err,M,seed\n";
  out.precision(17);
  for (const auto& [config, result] : runs)
    for (const auto& row : result.trace)
      out << row.t << ',' << row.grad_norm_sq << ',' << row.tracking_err << ','
          << config.batch_m << ',' << config.seed << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace avgrl::lintest
