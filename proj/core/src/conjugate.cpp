#include "npe/conjugate.hpp"

#include <cmath>
#include <stdexcept>

namespace npe::sim::conjugate {

double sample_prior(Rng& rng) { return rng.normal(); }

Eigen::VectorXd simulate(double theta, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("conjugate::simulate: need n >= 1");
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.normal(theta, 1.0);
  return y;
}

Posterior analytic_posterior(const Eigen::VectorXd& y) {
  if (y.size() < 1) throw std::invalid_argument("conjugate::analytic_posterior: empty data");
  double n = static_cast<double>(y.size());
  return {n * y.mean() / (n + 1.0), std::sqrt(1.0 / (n + 1.0))};
}

double normal_log_density(double theta, double mu, double sd) {
  double z = (theta - mu) / sd;
  return -0.91893853320467274178 - std::log(sd) - 0.5 * z * z;
}

}  // namespace npe::sim::conjugate
