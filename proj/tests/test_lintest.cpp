#include "avgrl/lintest.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "support/finite_diff.hpp"

using namespace avgrl;
using lintest::LinearPolicy;
using lintest::SmallMdp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LinearPolicy zero_policy(int n, double sigma0 = 0.5) {
  LinearPolicy p;
  p.theta = VectorXd::Zero(n);
  p.sigma0 = sigma0;
  return p;
}

SmallMdp fixed_mdp(MatrixXd transition, VectorXd d0) {
  SmallMdp mdp;
  const int n = static_cast<int>(transition.rows());
  mdp.kernel = std::make_shared<lintest::FixedKernel>(std::move(transition));
  mdp.reward_base = VectorXd::Zero(n);
  mdp.reward_action = VectorXd::Zero(n);
  mdp.gamma = 0.9;
  mdp.initial_dist = std::move(d0);
  return mdp;
}

}  // namespace

TEST_CASE("stationary distribution of the fair swap chain is uniform") {
  MatrixXd p(2, 2);
  p << 0.5, 0.5, 0.5, 0.5;
  VectorXd d0(2);
  d0 << 0.9, 0.1;
  const auto mdp = fixed_mdp(p, d0);
  const VectorXd d = lintest::stationary_distribution(mdp, zero_policy(2));
  CHECK(d(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("absorbing state collects all the mass") {
  MatrixXd p(2, 2);
  p << 1.0, 0.0, 0.3, 0.7;
  VectorXd d0(2);
  d0 << 0.2, 0.8;
  const auto mdp = fixed_mdp(p, d0);
  const VectorXd d = lintest::stationary_distribution(mdp, zero_policy(2));
  CHECK(d(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(d(1) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("random kernels match the dense eigensolver oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    MatrixXd p(3, 3);
    for (int i = 0; i < 3; ++i) {
      double row_sum = 0.0;
      for (int j = 0; j < 3; ++j) {
        p(i, j) = rng.uniform(0.05, 1.0);
        row_sum += p(i, j);
      }
      p.row(i) /= row_sum;
    }
    VectorXd d0 = VectorXd::Constant(3, 1.0 / 3.0);
    const auto mdp = fixed_mdp(p, d0);
    const VectorXd d = lintest::stationary_distribution(mdp, zero_policy(3));

    // Left eigenvector of eigenvalue 1.
    Eigen::EigenSolver<MatrixXd> solver(p.transpose());
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(solver.eigenvalues()(i).real() - 1.0) <
          std::abs(solver.eigenvalues()(best).real() - 1.0))
        best = i;
    VectorXd expected = solver.eigenvectors().col(best).real();
    expected /= expected.sum();
    CHECK((d - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("periodic chains are detected as non-ergodic") {
  MatrixXd p(2, 2);
  p << 0.0, 1.0, 1.0, 0.0;
  VectorXd d0(2);
  d0 << 1.0, 0.0;
  const auto mdp = fixed_mdp(p, d0);
  CHECK_THROWS_WITH_AS(lintest::stationary_distribution(mdp, zero_policy(2)),
                       doctest::Contains("oscillation"), std::runtime_error);
}

TEST_CASE("default mdp satisfies its structural invariants") {
  const auto mdp = lintest::make_default_mdp();
  CHECK(mdp.num_states() == 3);
  const auto& quad = lintest::noise_quadrature();
  CHECK(quad.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  // Kernel rows are distributions at probe actions.
  for (int s = 0; s < 3; ++s)
    for (const double a : {-2.0, 0.0, 1.5}) {
      const VectorXd p = mdp.kernel->probs(s, a);
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(p.minCoeff() > 0.0);
    }
  // Averaged kernel rows sum to one.
  const MatrixXd k = lintest::averaged_kernel(mdp, zero_policy(3));
  for (int s = 0; s < 3; ++s)
    CHECK(k.row(s).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kernel action derivatives match finite differences") {
  const auto mdp = lintest::make_default_mdp();
  for (int s = 0; s < 3; ++s) {
    for (const double a : {-1.2, 0.0, 0.7}) {
      const VectorXd analytic = mdp.kernel->dprobs_da(s, a);
      const double h = 1e-6;
      const VectorXd fd =
          (mdp.kernel->probs(s, a + h) - mdp.kernel->probs(s, a - h)) /
          (2 * h);
      CHECK((analytic - fd).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("discounted visitation sums to 1/(1-gamma)") {
  const auto mdp = lintest::make_default_mdp();
  const VectorXd nu = lintest::discounted_visitation(mdp, zero_policy(3));
  CHECK(nu.sum() == doctest::Approx(1.0 / (1.0 - mdp.gamma)).epsilon(1e-10));
  CHECK(nu.minCoeff() > 0.0);
}

TEST_CASE("action-independent MDPs have zero policy gradient") {
  MatrixXd p(3, 3);
  p << 0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 0.1, 0.6, 0.3;
  VectorXd d0 = VectorXd::Constant(3, 1.0 / 3.0);
  auto mdp = fixed_mdp(p, d0);
  mdp.reward_base << 1.0, -0.5, 2.0;  // state-only rewards
  LinearPolicy policy = zero_policy(3);
  policy.theta << 0.3, -0.2, 0.1;
  const VectorXd grad = lintest::brute_force_policy_gradient(mdp, policy);
  CHECK(grad.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("policy gradient matches finite differences of the objective") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  policy.theta << 0.2, -0.4, 0.1;
  const VectorXd analytic = lintest::brute_force_policy_gradient(mdp, policy);
  const auto j_of = [&](const VectorXd& theta) {
    LinearPolicy p = policy;
    p.theta = theta;
    return lintest::objective(mdp, p);
  };
  const VectorXd fd = testsupport::central_diff(j_of, policy.theta, 1e-5);
  CHECK((analytic - fd).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("scaling all rewards scales the gradient linearly") {
  auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  policy.theta << 0.1, 0.2, -0.3;
  const VectorXd g1 = lintest::brute_force_policy_gradient(mdp, policy);
  mdp.reward_base *= 3.0;
  mdp.reward_action *= 3.0;
  const VectorXd g3 = lintest::brute_force_policy_gradient(mdp, policy);
  CHECK((g3 - 3.0 * g1).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("q derivative matches finite differences on the action grid") {
  const auto mdp = lintest::make_default_mdp();
  const LinearPolicy policy = zero_policy(3);
  const double lo = lintest::kActionGridLo;
  const double step = (lintest::kActionGridHi - lo) /
                      (lintest::kActionGridPoints - 1);
  for (int s = 0; s < 3; ++s) {
    for (int i = 1; i + 1 < lintest::kActionGridPoints; i += 40) {
      const double a = lo + i * step;
      const double fd = (lintest::q_value(mdp, policy, s, a + step) -
                         lintest::q_value(mdp, policy, s, a - step)) /
                        (2 * step);
      // Grid-level finite differences carry O(step^2) truncation error.
      CHECK(lintest::dq_da(mdp, policy, s, a) ==
            doctest::Approx(fd).epsilon(1e-3));
    }
  }
}

TEST_CASE("TD fixed point zeroes the expected update") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  policy.theta << 0.15, -0.1, 0.05;
  const VectorXd w_star = lintest::w_star_td(mdp, policy);
  const auto sys = lintest::td_system(mdp, policy);
  CHECK((sys.a * w_star + sys.b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("empirical critic update at the fixed point shrinks like 1/sqrt(M)") {
  const auto mdp = lintest::make_default_mdp();
  const LinearPolicy policy = zero_policy(3);
  const VectorXd w_star = lintest::w_star_td(mdp, policy);

  // One iteration from w* with alpha_w = 1 exposes the raw mean update
  // (alpha/M) sum delta phi, whose expectation is A w* + b = 0.
  const auto mean_update_norm = [&](int m) {
    double norm_sum = 0.0;
    const int reps = 80;
    for (int rep = 0; rep < reps; ++rep) {
      lintest::RpgTdConfig config;
      config.alpha_w = 1.0;
      config.alpha_theta = 0.0;
      config.batch_m = m;
      config.iterations = 1;
      config.seed = 1000 + rep + static_cast<std::uint64_t>(m) * 77;
      config.w0 = w_star;
      LinearPolicy p = policy;
      const auto result = lintest::run_rpg_td(mdp, p, config);
      norm_sum += (result.w - w_star).norm();
    }
    return norm_sum / reps;
  };

  const double noise_small = mean_update_norm(4);
  const double noise_large = mean_update_norm(64);
  CHECK(noise_small > 0.0);
  // 16x larger batches: noise should shrink by about 4; demand at least 2.
  CHECK(noise_large < noise_small / 2.0);
}

TEST_CASE("compatible critic weights satisfy the proposition's identity") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  policy.theta << 0.3, 0.0, -0.2;
  const VectorXd w_xi = lintest::w_star_compatible(mdp, policy);
  const VectorXd nu = lintest::discounted_visitation(mdp, policy);
  const VectorXd grad = lintest::brute_force_policy_gradient(mdp, policy);
  // grad_J[s] = nu(s) * w_xi(s) for the tabular reparameterized policy.
  for (int s = 0; s < 3; ++s)
    CHECK(grad(s) == doctest::Approx(nu(s) * w_xi(s)).epsilon(1e-10));
}

TEST_CASE("expected actor update at w_xi reproduces grad J") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  policy.theta << 0.3, 0.0, -0.2;
  const VectorXd w_xi = lintest::w_star_compatible(mdp, policy);
  const VectorXd grad = lintest::brute_force_policy_gradient(mdp, policy);
  const VectorXd nu_hat =
      lintest::discounted_visitation(mdp, policy) * (1.0 - mdp.gamma);
  // Expected update direction: diag(nu_hat) w_xi = (1-gamma) grad J.
  const VectorXd expected_update =
      (nu_hat.array() * w_xi.array()).matrix();
  CHECK((expected_update - (1.0 - mdp.gamma) * grad).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("critic converges geometrically when the actor is frozen") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  policy.theta << 0.1, -0.1, 0.2;
  lintest::RpgTdConfig config;
  config.alpha_w = 0.5;
  config.alpha_theta = 0.0;
  config.batch_m = 8;
  config.iterations = 400;
  config.expected_updates = true;
  config.diag_every = 50;
  const auto result = lintest::run_rpg_td(mdp, policy, config);
  const VectorXd w_star = lintest::w_star_td(mdp, policy);
  CHECK((result.w - w_star).norm() < 1e-6);
  // Tracking error shrinks monotonically across the trace.
  for (std::size_t i = 1; i < result.trace.size(); ++i)
    CHECK(result.trace[i].tracking_err <= result.trace[i - 1].tracking_err);
}

TEST_CASE("sampled runs keep the tracking error below its start after burn-in") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  lintest::RpgTdConfig config;
  config.alpha_w = 0.2;
  config.alpha_theta = 0.005;
  config.batch_m = 16;
  config.iterations = 500;
  config.seed = 3;
  config.diag_every = 25;
  const auto result = lintest::run_rpg_td(mdp, policy, config);
  const double initial = result.trace.front().tracking_err;
  for (std::size_t i = result.trace.size() / 2; i < result.trace.size(); ++i)
    CHECK(result.trace[i].tracking_err < initial);
}

TEST_CASE("sampled feature norms respect the declared bound") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  policy.theta << 0.4, -0.4, 0.2;
  Rng rng(5);
  const double c_phi = policy.theta.cwiseAbs().maxCoeff() +
                       lintest::kNoiseBound * policy.sigma0;
  for (int i = 0; i < 2000; ++i) {
    const int s = static_cast<int>(rng.uniform_int(3));
    const double a = policy.action(s, lintest::sample_noise(rng));
    CHECK(lintest::features(3, s, a).norm() <= c_phi + 1e-12);
  }
}

TEST_CASE("degenerate feature regimes raise the singular-matrix error") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3, /*sigma0=*/0.0);  // all actions zero
  CHECK_THROWS_WITH_AS(lintest::w_star_td(mdp, policy),
                       doctest::Contains("singular"), std::runtime_error);
}

TEST_CASE("kappa is measured, finite, and positive on probe policies") {
  const auto mdp = lintest::make_default_mdp();
  std::vector<LinearPolicy> probes;
  for (const double t0 : {-0.4, 0.0, 0.4}) {
    LinearPolicy p = zero_policy(3);
    p.theta << t0, 0.1, -0.1;
    probes.push_back(p);
  }
  const double kappa = lintest::measure_kappa(mdp, probes);
  CHECK(std::isfinite(kappa));
  CHECK(kappa >= 0.0);
}

TEST_CASE("running minimum of the gradient norm is non-increasing in T") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  lintest::RpgTdConfig config;
  config.alpha_w = 0.2;
  config.alpha_theta = 0.02;
  config.batch_m = 8;
  config.iterations = 300;
  config.seed = 11;
  config.diag_every = 1;
  const auto result = lintest::run_rpg_td(mdp, policy, config);
  double running_min = std::numeric_limits<double>::infinity();
  for (const auto& row : result.trace) {
    const double next_min = std::min(running_min, row.grad_norm_sq);
    CHECK(next_min <= running_min);
    running_min = next_min;
  }
  CHECK(result.min_grad_norm_sq == doctest::Approx(running_min));
}

TEST_CASE("csv writer emits the documented columns") {
  const auto mdp = lintest::make_default_mdp();
  LinearPolicy policy = zero_policy(3);
  lintest::RpgTdConfig config;
  config.iterations = 5;
  config.batch_m = 2;
  config.seed = 9;
  config.diag_every = 2;
  const auto result = lintest::run_rpg_td(mdp, policy, config);
  const std::string path =
      (std::filesystem::temp_directory_path() / "avgrl_lintest.csv").string();
  lintest::write_csv(path, {{config, result}});
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,grad_norm_sq,tracking_err,M,seed");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) rows += 1;
  CHECK(rows == static_cast<int>(result.trace.size()));
  std::remove(path.c_str());
}
