#pragma once

#include <Eigen/Core>

#include "npe/rng.hpp"

namespace npe::sim::linreg {

struct Params {
  double beta0 = 0.0;
  Eigen::VectorXd beta;
  double sigma = 1.0;
};

// Covariates iid standard normal.
Eigen::MatrixXd iid_design(int n, int p, Rng& rng);

// Row-wise AR(1) correlation: Cor(X_j, X_k) = rho^|j-k|, unit marginal variance.
Eigen::MatrixXd ar_design(int n, int p, double rho, Rng& rng);

// Y_i = beta0 + X_i . beta + Normal(0, sigma^2) noise.
Eigen::VectorXd simulate(const Params& params, const Eigen::MatrixXd& X, Rng& rng);

// beta0, beta_j ~ Normal(0, coef_var); sigma^2 ~ InvGamma(ig_shape, ig_scale).
Params sample_prior_normal_ig(int p, double coef_var, double ig_shape, double ig_scale,
                              Rng& rng);

namespace spike_slab {

struct Hyper {
  double v = 1.0;    // sd of beta0
  double tau = 1.0;  // slab sd
  double a = 0.5;    // InvGamma shape for sigma^2
  double b = 0.05;   // InvGamma scale for sigma^2
  double c = 2.0;    // Beta(c,d) prior on the inclusion probability
  double d = 2.0;
};

struct Params {
  double beta0 = 0.0;
  Eigen::VectorXd beta;  // exactly zero for excluded covariates
  Eigen::VectorXd incl;  // inclusion indicators in {0,1}
  double sigma2 = 1.0;
  double pi_incl = 0.5;
};

Params sample_prior(int p, const Hyper& hyper, Rng& rng);

}  // namespace spike_slab

}  // namespace npe::sim::linreg
