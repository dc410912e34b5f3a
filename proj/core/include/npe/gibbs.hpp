#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "npe/linreg.hpp"
#include "npe/rng.hpp"

namespace npe::gibbs {

// Gibbs sampler for the spike-and-slab regression
//   y = beta0 + X beta + eps,  eps ~ Normal(0, sigma^2 I)
//   beta0 ~ Normal(0, v^2),  beta_j = delta_j b_j,  b_j ~ Normal(0, tau^2),
//   delta_j ~ Bernoulli(pi),  sigma^2 ~ InvGamma(a, b),  pi ~ Beta(c, d).
// Inclusion indicators are updated with beta_j integrated out, so the
// chain mixes over models directly.

struct GibbsConfig {
  long iterations = 40000;  // retained draws after burn-in
  long burn_in = 10000;
  std::uint64_t seed = 0;
  int thin = 1;
};

struct GibbsChain {
  Eigen::MatrixXd beta;    // draws x p
  Eigen::MatrixXd incl;    // draws x p, in {0,1}
  Eigen::VectorXd beta0;   // draws
  Eigen::VectorXd sigma2;  // draws
  Eigen::VectorXd pi;      // draws

  long draws() const { return beta0.size(); }
};

GibbsChain run(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
               const sim::linreg::spike_slab::Hyper& hyper, const GibbsConfig& config);

// Posterior inclusion probability per covariate (column means of incl).
Eigen::VectorXd pip_estimate(const GibbsChain& chain);

struct ScalarSummary {
  double median = 0.0;
  double lo = 0.0;  // equal-tailed interval at `level`
  double hi = 0.0;
  double level = 0.9;
};

// Summary of sigma = sqrt(sigma^2) draws.
ScalarSummary sigma_posterior_summary(const GibbsChain& chain, double level = 0.9);

// One posterior-predictive draw per retained iteration for each test row.
Eigen::MatrixXd predictive_draws(const GibbsChain& chain, const Eigen::MatrixXd& X_test,
                                 std::uint64_t seed);

void save_chain_csv(const GibbsChain& chain, const std::string& path);

}  // namespace npe::gibbs
