#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "npe/families.hpp"

namespace npe::nn {

enum class Activation { ReLU, Tanh };

struct NetworkArch {
  int input_dim = 0;
  std::vector<int> hidden;  // e.g. {50, 10}
  int output_dim = 0;
  Activation activation = Activation::ReLU;
};

// Dense feed-forward map from summary statistics to raw head outputs.
// Hidden layers use the arch activation; the output layer is linear.
struct Network {
  NetworkArch arch;
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: out x in
  std::vector<Eigen::VectorXd> biases;

  Eigen::VectorXd forward(const Eigen::VectorXd& z) const;
  // Columns are samples; Z is input_dim x B.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& Z) const;
};

// Glorot-uniform weights, zero biases.
Network make_network(const NetworkArch& arch, std::uint64_t seed);

struct TrainConfig {
  int epochs = 50;
  int minibatch = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
  int early_stop_patience = 5;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct TrainRecord {
  Eigen::VectorXd z;
  double gamma = 0.0;
  double weight = 1.0;
};

// Column-packed training set: z is input_dim x N.
struct TrainData {
  Eigen::MatrixXd z;
  Eigen::VectorXd gamma;
  Eigen::VectorXd weight;

  Eigen::Index size() const { return gamma.size(); }
};

TrainData pack(const std::vector<TrainRecord>& records);

// Importance-weighted negative log likelihood, sum_i w_i * -log p(gamma_i | a(z_i; W)).
double weighted_nll(const Network& net, const families::HeadSpec& head, const TrainData& data);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Gradient of weighted_nll with respect to every weight and bias (sum form).
Gradients gradient(const Network& net, const families::HeadSpec& head, const TrainData& data);

struct TrainHistory {
  std::vector<double> train_nll;  // per-epoch mean weighted NLL over training split
  std::vector<double> val_nll;    // per-epoch mean weighted NLL over validation split
  int best_epoch = -1;
};

class TrainingDiverged : public std::runtime_error {
public:
  TrainingDiverged(int epoch, double lr);
  int epoch;
  double learning_rate;
};

// ADAM on the importance-weighted NLL with early stopping; returns the
// weights from the epoch with the best validation loss. When explicit_val
// is null, the last validation_fraction of a seeded shuffle is held out.
Network train(const TrainData& records, const NetworkArch& arch,
              const families::HeadSpec& head, const TrainConfig& cfg,
              TrainHistory* history = nullptr, const TrainData* explicit_val = nullptr);

// Versioned text persistence; weights are written with 17 significant
// digits so a round trip reproduces forward outputs bit-exactly.
void save_model(const Network& net, const families::HeadSpec& head, std::ostream& os);
void save_model(const Network& net, const families::HeadSpec& head, const std::string& path);
std::pair<Network, families::HeadSpec> load_model(std::istream& is);
std::pair<Network, families::HeadSpec> load_model(const std::string& path);

}  // namespace npe::nn
