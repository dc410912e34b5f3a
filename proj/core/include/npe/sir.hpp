#pragma once

#include <Eigen/Core>

#include <vector>

#include "npe/rng.hpp"

namespace npe::sim::sir {

// ---------------------------------------------------------------------------
// Nonspatial SIR: deterministic latent dynamics (RK4) with negative-binomial
// observation of the daily infected counts.
// ---------------------------------------------------------------------------

struct NonspatialParams {
  double lambda = 0.4;  // transmission rate
  double mu = 0.1;      // recovery rate
  double i0 = 20.0;     // initial infected
  double psi = 7.0;     // observation dispersion
};

struct NonspatialResult {
  Eigen::VectorXd latent_s, latent_i, latent_r;  // daily values, t = 0..days-1
  Eigen::VectorXd observed;                      // NegBinomial(mean I_t, dispersion psi)
};

// Standard form dS/dt = -lambda*S*I/M, dI/dt = lambda*S*I/M - mu*I,
// dR/dt = mu*I, integrated with fixed-step RK4.
NonspatialResult simulate_nonspatial(const NonspatialParams& params, Rng& rng,
                                     double population = 83e6, int days = 14,
                                     int steps_per_day = 100);

// lambda ~ LogNormal(log 0.4, 0.5); I0 ~ Gamma(shape 2, scale 20);
// psi ~ Exponential(mean 5); mu held at 0.1.
NonspatialParams sample_prior_nonspatial(Rng& rng);

// ---------------------------------------------------------------------------
// Spatial SIR jump process on a region grid, approximated by binomial
// tau-leaping, with binomial under-reporting of infected/recovered counts.
// ---------------------------------------------------------------------------

struct Grid {
  int rows = 10, cols = 10;
  std::vector<std::vector<int>> nbrs;  // rook adjacency, row-major ids
  Eigen::VectorXi pop;                 // M_i per region
  int seed_cell = 0;                   // index of the initially infected region
  int seed_count = 10;
};

// 10x10 grid, 10 people per region (total 1000), 10 initial infected in
// grid cell (7,3) counted 1-based by (row, column).
Grid default_grid();

struct SpatialParams {
  double beta = 0.5;   // local infection rate (constant-beta mode)
  double phi = 0.3;    // spatial infection rate
  double eta = 0.3;    // recovery rate
  double beta0 = 0.0;  // covariate mode: beta_i = exp(beta0 + X_i * beta1)
  double beta1 = 0.0;
};

struct SpatialConfig {
  Grid grid;
  double dt = 0.1;
  double t_end = 620.0;
  int n_obs = 21;          // initial time plus evenly spaced follow-ups
  double p_report = 0.6;   // binomial under-reporting probability
  double t_count = 619.0;  // time at which the latent total infected is recorded
  // Covariate mode is enabled when log_pop_density is nonempty (one entry
  // per region); beta is then exp(beta0 + X_i * beta1) regionwise.
  Eigen::VectorXd log_pop_density;
};

struct SpatialResult {
  Eigen::MatrixXd obs_y, obs_z;        // n_obs x R reported counts
  Eigen::MatrixXi latent_y, latent_z;  // latent counts at the observation times
  long infected_at_count_time = 0;     // total latent Y at t_count
  bool dt_was_halved = false;          // some step needed probability > 0.5
};

SpatialResult simulate_spatial(const SpatialParams& params, const SpatialConfig& config,
                               Rng& rng);

// beta, phi, eta ~ iid Uniform(0.1, 0.9).
SpatialParams sample_prior_spatial(Rng& rng);

// Responses stacked as (series in {obs_y, obs_z}) major, time next,
// region minor: length 2 * n_obs * R.
Eigen::VectorXd stack_responses(const SpatialResult& result);

}  // namespace npe::sim::sir
