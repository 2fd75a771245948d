#include "avgrl/norm.hpp"

#include <cmath>
#include <stdexcept>

namespace avgrl::norm {

RunningStat RunningStat::make(Eigen::Index dim) {
  RunningStat s;
  s.shift = Array::Zero(dim);
  s.mu = Array::Zero(dim);
  s.m2 = Array::Zero(dim);
  return s;
}

Array RunningStat::variance() const {
  if (n == 0) return Array::Zero(mu.size());
  return m2 / static_cast<double>(n);
}

Array RunningStat::update(const Array& x, WelfordMode mode) {
  if (x.size() != mu.size())
    throw std::invalid_argument("RunningStat::update: dimension mismatch");
  if (!x.isFinite().all())
    throw std::invalid_argument("RunningStat::update: non-finite input");

  if (n == 0) shift = x;
  const Array y = x - shift;
  n += 1;
  const Array delta = y - mu;
  mu += delta / static_cast<double>(n);
  const Array delta2 = y - mu;
  m2 += delta * delta2;

  const Array var = m2 / static_cast<double>(n);
  Array out(x.size());
  if (mode == WelfordMode::kZScore) {
    out = delta2 / (var.sqrt() + kWelfordEps);
  } else {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      out(i) = var(i) == 0.0 ? 0.0 : delta2(i) / var(i);
  }
  return out;
}

double RunningStat::update_scalar(double x, WelfordMode mode) {
  Array v(1);
  v(0) = x;
  return update(v, mode)(0);
}

Array RunningStat::normalize_only(const Array& x) const {
  if (x.size() != mu.size())
    throw std::invalid_argument("RunningStat::normalize_only: dimension mismatch");
  if (n == 0) return x;
  return (x - shift - mu) / (variance().sqrt() + kWelfordEps);
}

double TdScaleState::update(double r, double gamma_step,
                            std::optional<double> terminal_g) {
  stat_r.update_scalar(r);
  stat_gamma.update_scalar(gamma_step);
  if (terminal_g.has_value())
    stat_g2.update_scalar(*terminal_g * *terminal_g);

  if (stat_g2.n > 1) {
    const double var_r = stat_r.scalar_variance();
    const double var_gamma = stat_gamma.scalar_variance();
    const double mean_g2 = stat_g2.scalar_mean();
    sigma_delta =
        std::max(std::sqrt(var_r + mean_g2 * var_gamma), kSigmaDeltaFloor);
  } else {
    sigma_delta = 1.0;
  }
  return sigma_delta;
}

}  // namespace avgrl::norm
