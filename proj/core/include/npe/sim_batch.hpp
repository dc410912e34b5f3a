#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "npe/autologistic.hpp"
#include "npe/linreg.hpp"
#include "npe/rng.hpp"
#include "npe/sir.hpp"
#include "npe/summaries.hpp"

namespace npe::sim {

// ---------------------------------------------------------------------------
// Model configurations
// ---------------------------------------------------------------------------

struct ConjugateModel {
  int n = 5;
  // Training distribution Normal(train_mean, train_sd); the prior is
  // Normal(0,1), so weights differ from 1 whenever these are not (0,1).
  double train_mean = 0.0;
  double train_sd = 1.0;
};

struct LinRegModel {
  int n = 100;
  int p = 5;
  bool ar_design = false;
  double rho = 0.5;
  double coef_var = 10.0;  // Normal(0, coef_var) on beta0 and beta_j
  double ig_shape = 0.5;   // InvGamma on sigma^2
  double ig_scale = 0.05;
};

struct SparseRegModel {
  int n = 50;
  int p = 10;
  double rho = 0.5;
  linreg::spike_slab::Hyper hyper;
  int n_test = 10;  // posterior-predictive targets
};

struct AutologisticModel {
  int rows = 20;
  int cols = 20;
  int p = 5;  // includes the intercept column
  int sweeps = 500;
};

struct SirNonspatialModel {
  double population = 83e6;
  int days = 14;
  int steps_per_day = 100;
};

struct SirSpatialModel {
  sir::SpatialConfig config;  // covariate mode when log_pop_density is set
  double fixed_eta = 0.5;     // used only in covariate mode (eta is a nuisance there)
  SirSpatialModel();          // defaults to the 10x10 grid
};

using ModelConfig = std::variant<ConjugateModel, LinRegModel, SparseRegModel,
                                 AutologisticModel, SirNonspatialModel, SirSpatialModel>;

std::string model_name(const ModelConfig& model);
int theta_dim(const ModelConfig& model);
int gamma_dim(const ModelConfig& model);
int y_dim(const ModelConfig& model);
std::vector<std::string> theta_names(const ModelConfig& model);
std::vector<std::string> gamma_names(const ModelConfig& model);

// Per-target transform between the natural parameter scale and the scale
// the posterior head is trained on.
struct TargetTransform {
  enum class Kind { None, Log, PriorQuantile };
  Kind kind = Kind::None;
  summaries::PriorDist prior{summaries::PriorDist::Kind::Normal, 0.0, 1.0};

  double forward(double theta) const;
  double inverse(double value) const;
};

std::vector<TargetTransform> target_transforms(const ModelConfig& model);

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

struct SimRecord {
  Eigen::VectorXd theta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd y;
  double weight = 1.0;
};

// Draw theta from the training distribution, simulate a dataset, derive
// targets, and compute the importance weight pi(theta)/Pi(theta).
SimRecord simulate_record(const ModelConfig& model, Rng& rng);

// Same dataset-generation path at a fixed theta (scenario replicates);
// weight is 1.
SimRecord simulate_record_fixed(const ModelConfig& model, const Eigen::VectorXd& theta,
                                Rng& rng);

struct SimBatch {
  std::string model;
  std::uint64_t seed = 0;
  Eigen::MatrixXd theta;   // N x P
  Eigen::MatrixXd gamma;   // N x Q
  Eigen::MatrixXd y;       // N x D
  Eigen::VectorXd weight;  // N
  std::vector<std::string> theta_cols, gamma_cols;

  long size() const { return theta.rows(); }
};

// N records with per-record derived rng streams: record i is produced from
// stream (seed, i), so the batch is reproducible for any worker count.
SimBatch make_sim_batch(const ModelConfig& model, long n, std::uint64_t seed, int workers = 1);

// Scenario batch at fixed theta (streams (seed, i) again, weight = 1).
SimBatch make_scenario_batch(const ModelConfig& model, const Eigen::VectorXd& theta, long n,
                             std::uint64_t seed, int workers = 1);

// Binary columnar persistence with a text header; byte-stable for a given
// batch.
void save_batch(const SimBatch& batch, const std::string& path);
SimBatch load_batch(const std::string& path);
void export_batch_csv(const SimBatch& batch, const std::string& path);

}  // namespace npe::sim
