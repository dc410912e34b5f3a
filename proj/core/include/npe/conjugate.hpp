#pragma once

#include <Eigen/Core>

#include "npe/rng.hpp"

namespace npe::sim::conjugate {

// Gaussian mean model with known unit variance: theta ~ Normal(0,1),
// Y_i | theta ~ Normal(theta, 1). Used as the analytic oracle for the
// KL-convergence and training-distribution-invariance checks.

double sample_prior(Rng& rng);

// n must be >= 1.
Eigen::VectorXd simulate(double theta, int n, Rng& rng);

struct Posterior {
  double mean;
  double sd;
};

// Normal(n*ybar/(n+1), 1/(n+1)).
Posterior analytic_posterior(const Eigen::VectorXd& y);

// log N(theta; mu, sd^2), used for importance weights.
double normal_log_density(double theta, double mu, double sd);

}  // namespace npe::sim::conjugate
