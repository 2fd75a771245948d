#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>

namespace avgrl::norm {

using Array = Eigen::ArrayXd;

// Added to the standard deviation before dividing in z-score mode.
inline constexpr double kWelfordEps = 1e-8;
// Lower bound on sigma_delta once the n_G > 1 guard has passed; degenerate
// constant streams would otherwise divide by zero.
inline constexpr double kSigmaDeltaFloor = 1e-4;

// kZScore divides by sqrt(variance) + eps. kLiteralPseudocode divides by the
// population variance itself, reproducing the published recurrences exactly
// (with 0/0 defined as 0, which only occurs when every sample so far is
// identical).
enum class WelfordMode { kZScore, kLiteralPseudocode };

// Single-pass running mean/variance (Welford). One lane per vector
// component; scalars are dimension-1 streams. The first sample is kept as a
// per-lane shift so large common offsets (x = 1e9 + noise) cannot erode the
// update precision; the recurrences run on x - shift and the variance is
// shift-invariant.
struct RunningStat {
  std::int64_t n = 0;
  Array shift;
  Array mu;   // running mean of the shifted stream
  Array m2;

  static RunningStat make(Eigen::Index dim);

  // Updates the statistics with x and returns the normalized value.
  // Throws on non-finite input, leaving the state unchanged.
  Array update(const Array& x, WelfordMode mode = WelfordMode::kZScore);
  double update_scalar(double x, WelfordMode mode = WelfordMode::kZScore);

  // Normalizes against the current statistics without updating them
  // (deterministic evaluation path). Only defined for z-score mode.
  Array normalize_only(const Array& x) const;

  Array mean() const { return shift + mu; }
  // Population variance m2/n (zero while n == 0).
  Array variance() const;
  double scalar_mean() const { return mean()(0); }
  double scalar_variance() const { return variance()(0); }
};

// Running statistics behind TD-error scaling: rewards, per-step discounts
// and squared episode returns, combined as
// sigma_delta = sqrt(Var[R] + Mean[G^2] * Var[gamma]).
struct TdScaleState {
  RunningStat stat_r = RunningStat::make(1);
  RunningStat stat_gamma = RunningStat::make(1);
  RunningStat stat_g2 = RunningStat::make(1);
  double episode_return = 0.0;
  double sigma_delta = 1.0;

  // One scaling update: always records (r, gamma_step); records G^2 as well
  // when terminal_g is present (episode-end call). Returns the refreshed
  // sigma_delta.
  double update(double r, double gamma_step,
                std::optional<double> terminal_g = std::nullopt);

  void begin_episode() { episode_return = 0.0; }
  void accumulate(double r) { episode_return += r; }
};

inline double scale(double delta, double sigma_delta) {
  return delta / sigma_delta;
}

}  // namespace avgrl::norm
