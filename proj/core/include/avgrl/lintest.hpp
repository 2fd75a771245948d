#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "avgrl/rng.hpp"

namespace avgrl::lintest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Noise is a standard normal truncated to [-kNoiseBound, kNoiseBound], so
// sampled actions stay on a bounded grid and feature norms stay bounded.
inline constexpr double kNoiseBound = 3.0;
// Order of the Gauss-Legendre rule used for all integrals over the noise.
inline constexpr int kNoiseQuadOrder = 64;
// Reference action grid for derivative cross-checks.
inline constexpr int kActionGridPoints = 201;
inline constexpr double kActionGridLo = -3.0;
inline constexpr double kActionGridHi = 3.0;

// P(s'|s,a) over finitely many states, smooth in the 1-D continuous action.
class TransitionKernel {
 public:
  virtual ~TransitionKernel() = default;
  virtual int num_states() const = 0;
  virtual Vector probs(int s, double a) const = 0;
  virtual Vector dprobs_da(int s, double a) const = 0;
};

// P(.|s,a) = softmax(base[s] + coupling[s] * tanh(a)).
class SoftmaxKernel final : public TransitionKernel {
 public:
  SoftmaxKernel(Matrix base_logits, Matrix action_coupling);
  int num_states() const override { return static_cast<int>(base_.rows()); }
  Vector probs(int s, double a) const override;
  Vector dprobs_da(int s, double a) const override;

 private:
  Matrix base_;
  Matrix coupling_;
};

// Action-independent explicit transition matrix (degenerate chains for
// tests: absorbing states, periodic swaps).
class FixedKernel final : public TransitionKernel {
 public:
  explicit FixedKernel(Matrix transition);
  int num_states() const override { return static_cast<int>(p_.rows()); }
  Vector probs(int s, double) const override { return p_.row(s).transpose(); }
  Vector dprobs_da(int, double) const override {
    return Vector::Zero(p_.cols());
  }

 private:
  Matrix p_;
};

// Fully known small MDP with reward r(s,a) = r0[s] + r1[s] * tanh(a).
struct SmallMdp {
  std::shared_ptr<const TransitionKernel> kernel;
  Vector reward_base;    // r0
  Vector reward_action;  // r1
  double gamma = 0.9;
  Vector initial_dist;   // d0

  int num_states() const { return kernel->num_states(); }
  double reward(int s, double a) const;
  double dreward_da(int s, double a) const;
  // Rows of any discretized operator must sum to 1; weights non-negative.
  void validate() const;
};

// The 3-state instance every test and the CLI default to.
SmallMdp make_default_mdp();

// Reparameterized tabular-mean policy f(s, eps) = theta[s] + sigma0 * eps.
struct LinearPolicy {
  Vector theta;
  double sigma0 = 0.5;

  double action(int s, double eps) const { return theta(s) + sigma0 * eps; }
};

// Compatible critic features phi(s, a) = e_s * a; Q^w(s,a) = w_s * a.
Vector features(int num_states, int s, double a);

// Gauss-Legendre nodes/weights for E over the truncated noise; weights sum
// to one.
struct NoiseQuadrature {
  Vector nodes;
  Vector weights;
};
const NoiseQuadrature& noise_quadrature();

// Draws from the truncated standard normal.
double sample_noise(Rng& rng);

// Policy-averaged state-to-state operator K(s, s') = E_eps P(s'|s, f(s,eps)).
Matrix averaged_kernel(const SmallMdp& mdp, const LinearPolicy& policy);

// Fixed point of the averaged kernel by power iteration (tolerance 1e-12,
// started from the MDP's initial distribution). Throws on detected
// oscillation (periodic chain) or non-convergence.
Vector stationary_distribution(const SmallMdp& mdp,
                               const LinearPolicy& policy);

// Discounted visitation nu = (I - gamma K^T)^{-1} d0 (unnormalized; sums to
// 1/(1-gamma)).
Vector discounted_visitation(const SmallMdp& mdp, const LinearPolicy& policy);

// State values under the policy: (I - gamma K) V = E_eps[r(s, f(s,eps))].
Vector state_values(const SmallMdp& mdp, const LinearPolicy& policy);

// Exact J(theta) = d0 . V.
double objective(const SmallMdp& mdp, const LinearPolicy& policy);

// Q(s, a) and its action derivative from the solved Bellman system.
double q_value(const SmallMdp& mdp, const LinearPolicy& policy, int s,
               double a);
double dq_da(const SmallMdp& mdp, const LinearPolicy& policy, int s, double a);

// Exact reparameterization policy gradient: grad_J[s] =
// nu(s) * E_eps[dQ/da(s, f(s,eps))]. The oracle for the compatible-update
// checks; cross-validated against finite differences of objective().
Vector brute_force_policy_gradient(const SmallMdp& mdp,
                                   const LinearPolicy& policy);

// TD quantities under the stationary distribution:
//   A = E[phi(x) (gamma phi(x') - phi(x))^T],  b = E[r phi(x)].
struct TdSystem {
  Matrix a;
  Vector b;
};
TdSystem td_system(const SmallMdp& mdp, const LinearPolicy& policy);

// TD fixed point: solves A w + b = 0. Throws when A is singular.
Vector w_star_td(const SmallMdp& mdp, const LinearPolicy& policy);

// Compatible-critic weights: w[s] = E_eps[dQ/da(s, f(s,eps))].
Vector w_star_compatible(const SmallMdp& mdp, const LinearPolicy& policy);

// kappa = max over the probed policies of ||w*_theta - w*_xi_theta||.
double measure_kappa(const SmallMdp& mdp,
                     const std::vector<LinearPolicy>& policies);

struct RpgTdConfig {
  double alpha_w = 0.1;
  double alpha_theta = 0.01;
  int batch_m = 8;
  int iterations = 1000;
  std::uint64_t seed = 0;
  // Initial critic weights w0; zeros when empty.
  Vector w0;
  // Replace minibatch draws by their exact expectations (the deterministic
  // contraction path used to validate the TD machinery).
  bool expected_updates = false;
  // Record diagnostics every this many iterations (1 = every iteration).
  int diag_every = 1;

  void validate() const;
};

struct RpgTdDiagRow {
  int t = 0;
  double grad_norm_sq = 0.0;  // ||grad J(theta_t)||^2, exact oracle
  double tracking_err = 0.0;  // ||w_t - w*_theta_t||
};

struct RpgTdResult {
  Vector w;
  Vector theta;
  std::vector<RpgTdDiagRow> trace;
  double min_grad_norm_sq = 0.0;
};

// Coupled actor-critic iterations of the batch-M testbed algorithm.
RpgTdResult run_rpg_td(const SmallMdp& mdp, LinearPolicy policy,
                       const RpgTdConfig& config);

// CSV emit: columns t, grad_norm_sq, tracking_err, M, seed.
void write_csv(const std::string& path,
               const std::vector<std::pair<RpgTdConfig, RpgTdResult>>& runs);

}  // namespace avgrl::lintest
