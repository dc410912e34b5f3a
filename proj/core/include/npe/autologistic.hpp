#pragma once

#include <Eigen/Core>

#include <vector>

#include "npe/rng.hpp"

namespace npe::sim::autologistic {

using Adjacency = std::vector<std::vector<int>>;

// Rook-neighbor lattice, nodes in row-major order.
Adjacency rook_lattice(int rows, int cols);

// Indicator lists of nodes at graph distance exactly `order`.
Adjacency order_neighbors(const Adjacency& adj, int order);

// Throws std::invalid_argument when the adjacency is not symmetric.
void check_symmetric(const Adjacency& adj);

struct Params {
  Eigen::VectorXd beta;
  double log_phi = 0.0;
};

// beta_j, log(phi) ~ iid Normal(0,1).
Params sample_prior(int p, Rng& rng);

// One lattice realization after `sweeps` full Gibbs sweeps. The full
// conditional of node i is
//   logit P(Y_i = 1 | rest) = logit(kappa_i) + phi * sum_{j in N_i} (Y_j - kappa_j)
// with kappa_i = expit(X_i . beta). Initial state iid Bernoulli(kappa_i).
Eigen::VectorXi simulate(const Eigen::VectorXd& beta, double phi, const Eigen::MatrixXd& X,
                         const Adjacency& adj, int sweeps, Rng& rng);

// Design with a leading intercept column of ones and iid standard normal
// covariates in the remaining p-1 columns.
Eigen::MatrixXd design_with_intercept(int n, int p, Rng& rng);

}  // namespace npe::sim::autologistic
