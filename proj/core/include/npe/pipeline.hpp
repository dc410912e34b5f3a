#pragma once

#include <Eigen/Core>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "npe/diagnostics.hpp"
#include "npe/families.hpp"
#include "npe/net.hpp"
#include "npe/sim_batch.hpp"
#include "npe/summaries.hpp"

namespace npe::pipeline {

// ---------------------------------------------------------------------------
// Experiment configuration (JSON file)
// ---------------------------------------------------------------------------

struct SummaryOptions {
  int pca_components = 0;            // 0: use the variance target instead
  double pca_variance_target = 0.9;  // spatial epidemic summaries
};

struct ScenarioConfig {
  Eigen::VectorXd theta;
  long replicates = 100;
  double level = 0.9;
};

struct InvarianceConfig {
  double train_mean = 0.0;
  double train_sd = 1.5;
  long n_val = 200;
  double rms_threshold = 0.05;
};

struct ExperimentConfig {
  sim::ModelConfig model;
  std::uint64_t seed = 1;
  long n_train = 10000;
  long n_val = 2000;
  std::vector<std::vector<int>> archs = {{50, 10}};
  nn::Activation activation = nn::Activation::ReLU;
  nn::TrainConfig train;
  SummaryOptions summary;
  double ks_threshold = 0.05;
  bool export_csv = false;  // also write batches as csv in cmd_simulate
  std::optional<ScenarioConfig> scenario;
  std::optional<InvarianceConfig> invariance;
  std::string observed_path;  // csv with one data row, used by infer
  std::string raw_text;       // canonical file content, hashed into bundles
};

ExperimentConfig load_config(const std::string& path);
std::uint64_t config_hash(const ExperimentConfig& config);  // FNV-1a of raw_text

// ---------------------------------------------------------------------------
// Summary statistics state
// ---------------------------------------------------------------------------

// Data-dependent pieces of the summary map, fitted on the training batch and
// persisted in bundles so diagnose/infer reproduce training-time summaries.
struct SummaryState {
  std::string model;
  int dim = 0;  // summary dimension fed to the networks
  summaries::RankToUnit rank;  // sparse regression
  summaries::PcaBasis pca;     // spatial epidemic
  Eigen::VectorXd pca_scale;   // per-score sd over the fit batch; scores are standardized
  bool use_rank = false;
  bool use_pca = false;
};

SummaryState fit_summary_state(const sim::ModelConfig& model, const sim::SimBatch& batch,
                               const SummaryOptions& options);

// Summary of one dataset row (layout as produced by the simulators).
Eigen::VectorXd apply_summary(const SummaryState& state, const sim::ModelConfig& model,
                              const Eigen::VectorXd& y);

// All rows of a batch, column-packed (dim x N) for training.
Eigen::MatrixXd summarize_batch(const SummaryState& state, const sim::ModelConfig& model,
                                const sim::SimBatch& batch, int workers);

void save_summary_state(const SummaryState& state, const std::string& path);
SummaryState load_summary_state(const std::string& path);

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

struct TargetSpec {
  std::string name;
  families::HeadSpec head;
  int gamma_index = 0;  // column in the batch gamma matrix
};

std::vector<TargetSpec> target_specs(const sim::ModelConfig& model);

// ---------------------------------------------------------------------------
// Trained bundles
// ---------------------------------------------------------------------------

struct Bundle {
  std::string model_name;
  sim::ModelConfig model;
  std::uint64_t config_hash = 0;
  std::vector<int> arch;  // hidden layers of the selected architecture
  SummaryState summary;
  std::vector<TargetSpec> targets;
  std::vector<nn::Network> nets;  // parallel to targets
};

void save_bundle(const Bundle& bundle, const std::string& dir);
Bundle load_bundle(const std::string& dir, const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  int workers = 1;
  std::optional<double> ks_gate;
};

int cmd_simulate(const CliOptions& options);
int cmd_train(const CliOptions& options);
int cmd_diagnose(const CliOptions& options);  // nonzero when the ks gate fails
int cmd_infer(const CliOptions& options);
int cmd_invariance_check(const CliOptions& options);

}  // namespace npe::pipeline
