#include "npe/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "npe/rng.hpp"

namespace npe::nn {

namespace {

void check_arch(const NetworkArch& arch) {
  if (arch.input_dim < 1 || arch.output_dim < 1)
    throw std::invalid_argument("NetworkArch: input_dim and output_dim must be >= 1");
  for (int h : arch.hidden)
    if (h < 1) throw std::invalid_argument("NetworkArch: all hidden widths must be >= 1");
}

std::vector<int> layer_dims(const NetworkArch& arch) {
  std::vector<int> dims;
  dims.push_back(arch.input_dim);
  dims.insert(dims.end(), arch.hidden.begin(), arch.hidden.end());
  dims.push_back(arch.output_dim);
  return dims;
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& h, Activation act) {
  if (act == Activation::ReLU) return h.cwiseMax(0.0);
  return h.array().tanh().matrix();
}

// Derivative of the activation given pre-activation values.
Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& h, Activation act) {
  if (act == Activation::ReLU)
    return (h.array() > 0.0).cast<double>().matrix();
  Eigen::MatrixXd t = h.array().tanh().matrix();
  return (1.0 - t.array().square()).matrix();
}

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
void shuffle_indices(std::vector<Eigen::Index>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    if (j >= i) j = i - 1;
    std::swap(idx[i - 1], idx[j]);
  }
}

TrainData gather(const TrainData& data, const std::vector<Eigen::Index>& idx,
                 std::size_t begin, std::size_t end) {
  TrainData out;
  auto m = static_cast<Eigen::Index>(end - begin);
  out.z.resize(data.z.rows(), m);
  out.gamma.resize(m);
  out.weight.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index src = idx[begin + static_cast<std::size_t>(i)];
    out.z.col(i) = data.z.col(src);
    out.gamma[i] = data.gamma[src];
    out.weight[i] = data.weight[src];
  }
  return out;
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> post;  // post-activations; post[0] is the input
};

Eigen::MatrixXd forward_cached(const Network& net, const Eigen::MatrixXd& Z,
                               ForwardCache* cache) {
  if (Z.rows() != net.arch.input_dim)
    throw std::invalid_argument("forward: input has " + std::to_string(Z.rows()) +
                                " rows, network expects " +
                                std::to_string(net.arch.input_dim));
  Eigen::MatrixXd a = Z;
  if (cache) cache->post.push_back(a);
  const std::size_t n_layers = net.weights.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd h = (net.weights[l] * a).colwise() + net.biases[l];
    if (l + 1 < n_layers) {
      a = activate(h, net.arch.activation);
      if (cache) {
        cache->pre.push_back(h);
        cache->post.push_back(a);
      }
    } else {
      a = std::move(h);  // linear output layer
    }
  }
  return a;
}

// d(weighted NLL)/d(raw outputs), one column per sample.
Eigen::MatrixXd output_grad(const families::HeadSpec& head, const Eigen::MatrixXd& raw,
                            const TrainData& data) {
  Eigen::MatrixXd d(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.cols(); ++i) {
    auto params = families::make_params(head, raw.col(i));
    d.col(i) = -data.weight[i] * families::grad_raw(head, params, data.gamma[i]);
  }
  return d;
}

Gradients backprop(const Network& net, const families::HeadSpec& head, const TrainData& data) {
  ForwardCache cache;
  Eigen::MatrixXd raw = forward_cached(net, data.z, &cache);
  Eigen::MatrixXd delta = output_grad(head, raw, data);

  const std::size_t n_layers = net.weights.size();
  Gradients g;
  g.weights.resize(n_layers);
  g.biases.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    g.weights[l] = delta * cache.post[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = net.weights[l].transpose() * delta;
      delta = delta.cwiseProduct(activate_grad(cache.pre[l - 1], net.arch.activation));
    }
  }
  return g;
}

}  // namespace

Eigen::VectorXd Network::forward(const Eigen::VectorXd& z) const {
  return forward_batch(z).col(0);
}

Eigen::MatrixXd Network::forward_batch(const Eigen::MatrixXd& Z) const {
  return forward_cached(*this, Z, nullptr);
}

Network make_network(const NetworkArch& arch, std::uint64_t seed) {
  check_arch(arch);
  Network net;
  net.arch = arch;
  auto dims = layer_dims(arch);
  Rng rng = Rng::derive(seed, 0xA11C);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    int fan_in = dims[l], fan_out = dims[l + 1];
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

TrainData pack(const std::vector<TrainRecord>& records) {
  if (records.empty()) throw std::invalid_argument("pack: empty record set");
  TrainData data;
  auto n = static_cast<Eigen::Index>(records.size());
  data.z.resize(records.front().z.size(), n);
  data.gamma.resize(n);
  data.weight.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.z.size() != data.z.rows())
      throw std::invalid_argument("pack: inconsistent summary dimensions");
    if (r.weight < 0.0) throw std::invalid_argument("pack: negative importance weight");
    data.z.col(i) = r.z;
    data.gamma[i] = r.gamma;
    data.weight[i] = r.weight;
  }
  return data;
}

double weighted_nll(const Network& net, const families::HeadSpec& head, const TrainData& data) {
  if (data.size() == 0) throw std::invalid_argument("weighted_nll: empty batch");
  Eigen::MatrixXd raw = net.forward_batch(data.z);
  double nll = 0.0;
  for (Eigen::Index i = 0; i < raw.cols(); ++i) {
    if (data.weight[i] == 0.0) continue;
    auto params = families::make_params(head, raw.col(i));
    nll -= data.weight[i] * families::log_density(head, params, data.gamma[i]);
  }
  return nll;
}

Gradients gradient(const Network& net, const families::HeadSpec& head, const TrainData& data) {
  if (data.size() == 0) throw std::invalid_argument("gradient: empty batch");
  return backprop(net, head, data);
}

TrainingDiverged::TrainingDiverged(int epoch_, double lr_)
    : std::runtime_error("training diverged (non-finite loss) at epoch " +
                         std::to_string(epoch_) + " with learning rate " +
                         std::to_string(lr_)),
      epoch(epoch_),
      learning_rate(lr_) {}

Network train(const TrainData& records, const NetworkArch& arch,
              const families::HeadSpec& head, const TrainConfig& cfg,
              TrainHistory* history, const TrainData* explicit_val) {
  if (records.size() == 0) throw std::invalid_argument("train: empty record set");
  if (records.z.rows() != arch.input_dim)
    throw std::invalid_argument("train: record dimension does not match arch.input_dim");
  if (arch.output_dim != head.output_dim())
    throw std::invalid_argument("train: arch.output_dim does not match head output_dim");
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be > 0");
  if (cfg.beta1 <= 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 <= 0.0 || cfg.beta2 >= 1.0)
    throw std::invalid_argument("train: ADAM betas must be in (0,1)");
  if (cfg.minibatch < 1 || cfg.minibatch > records.size())
    throw std::invalid_argument("train: minibatch must be in [1, N]");

  Rng rng = Rng::derive(cfg.seed, 0x7EA1);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(records.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainData train_set, val_set;
  if (explicit_val) {
    train_set = records;
    val_set = *explicit_val;
  } else {
    if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0))
      throw std::invalid_argument("train: validation_fraction must be in (0,1)");
    shuffle_indices(order, rng);
    auto n_val = static_cast<std::size_t>(
        std::max<double>(1.0, std::floor(cfg.validation_fraction *
                                         static_cast<double>(order.size()))));
    auto n_train = order.size() - n_val;
    train_set = gather(records, order, 0, n_train);
    val_set = gather(records, order, n_train, order.size());
  }
  if (val_set.size() == 0) throw std::invalid_argument("train: empty validation split");

  Network net = make_network(arch, cfg.seed);

  // ADAM state
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (const auto& w : net.weights) {
    mw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    vw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : net.biases) {
    mb.push_back(Eigen::VectorXd::Zero(b.size()));
    vb.push_back(Eigen::VectorXd::Zero(b.size()));
  }

  std::vector<Eigen::Index> batch_order(static_cast<std::size_t>(train_set.size()));
  std::iota(batch_order.begin(), batch_order.end(), Eigen::Index{0});

  Network best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int stall = 0;
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(batch_order, rng);
    double epoch_nll = 0.0;
    for (std::size_t start = 0; start < batch_order.size();
         start += static_cast<std::size_t>(cfg.minibatch)) {
      std::size_t stop =
          std::min(batch_order.size(), start + static_cast<std::size_t>(cfg.minibatch));
      TrainData batch = gather(train_set, batch_order, start, stop);
      Gradients g = backprop(net, head, batch);
      double inv_b = 1.0 / static_cast<double>(batch.size());
      ++step;
      double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        Eigen::MatrixXd gw = g.weights[l] * inv_b;
        Eigen::VectorXd gb = g.biases[l] * inv_b;
        mw[l] = cfg.beta1 * mw[l] + (1.0 - cfg.beta1) * gw;
        vw[l] = cfg.beta2 * vw[l] + (1.0 - cfg.beta2) * gw.cwiseProduct(gw);
        mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * gb;
        vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * gb.cwiseProduct(gb);
        net.weights[l].array() -= cfg.learning_rate * (mw[l] / corr1).array() /
                                  ((vw[l] / corr2).array().sqrt() + cfg.eps);
        net.biases[l].array() -= cfg.learning_rate * (mb[l] / corr1).array() /
                                 ((vb[l] / corr2).array().sqrt() + cfg.eps);
      }
    }
    epoch_nll = weighted_nll(net, head, train_set) / static_cast<double>(train_set.size());
    double val_nll = weighted_nll(net, head, val_set) / static_cast<double>(val_set.size());
    if (!std::isfinite(epoch_nll) || !std::isfinite(val_nll))
      throw TrainingDiverged(epoch, cfg.learning_rate);
    if (history) {
      history->train_nll.push_back(epoch_nll);
      history->val_nll.push_back(val_nll);
    }
    if (val_nll < best_val) {
      best_val = val_nll;
      best = net;
      best_epoch = epoch;
      stall = 0;
    } else if (++stall >= cfg.early_stop_patience) {
      break;
    }
  }
  if (history) history->best_epoch = best_epoch;
  return best;
}

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void save_model(const Network& net, const families::HeadSpec& head, std::ostream& os) {
  os << "npe-model v1\n";
  os << "head " << head.name() << "\n";
  os << "clamps " << fmt17(families::kScaleMin) << " " << fmt17(families::kScaleMax) << " "
     << fmt17(families::kProbEps) << "\n";
  os << "activation " << (net.arch.activation == Activation::ReLU ? "relu" : "tanh") << "\n";
  os << "dims " << net.arch.input_dim;
  for (int h : net.arch.hidden) os << " " << h;
  os << " " << net.arch.output_dim << "\n";
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const auto& w = net.weights[l];
    os << "layer " << l << " " << w.rows() << " " << w.cols() << "\n";
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) os << (c ? " " : "") << fmt17(w(r, c));
      os << "\n";
    }
    os << "bias " << l << " " << net.biases[l].size() << "\n";
    for (Eigen::Index r = 0; r < net.biases[l].size(); ++r)
      os << (r ? " " : "") << fmt17(net.biases[l][r]);
    os << "\n";
  }
}

void save_model(const Network& net, const families::HeadSpec& head, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open model file for writing: " + path);
  save_model(net, head, os);
}

std::pair<Network, families::HeadSpec> load_model(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  if (magic != "npe-model" || version != "v1")
    throw std::runtime_error("unrecognized model file header");
  std::string key;
  Network net;
  families::HeadSpec head{families::Family::HetNormal};
  is >> key;
  if (key != "head") throw std::runtime_error("model file: expected 'head'");
  std::string head_name;
  is >> head_name;
  head = families::HeadSpec::from_name(head_name);
  double smin, smax, peps;
  is >> key >> smin >> smax >> peps;
  if (key != "clamps") throw std::runtime_error("model file: expected 'clamps'");
  if (smin != families::kScaleMin || smax != families::kScaleMax ||
      peps != families::kProbEps)
    throw std::runtime_error("model file: link clamps do not match this build");
  std::string act;
  is >> key >> act;
  if (key != "activation") throw std::runtime_error("model file: expected 'activation'");
  net.arch.activation = act == "relu" ? Activation::ReLU : Activation::Tanh;
  is >> key;
  if (key != "dims") throw std::runtime_error("model file: expected 'dims'");
  std::string line;
  std::getline(is, line);
  std::istringstream dims_in(line);
  std::vector<int> dims;
  int d;
  while (dims_in >> d) dims.push_back(d);
  if (dims.size() < 2) throw std::runtime_error("model file: need at least two dims");
  net.arch.input_dim = dims.front();
  net.arch.output_dim = dims.back();
  net.arch.hidden.assign(dims.begin() + 1, dims.end() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::size_t idx;
    Eigen::Index rows, cols;
    is >> key >> idx >> rows >> cols;
    if (key != "layer" || idx != l) throw std::runtime_error("model file: bad layer record");
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) is >> w(r, c);
    net.weights.push_back(std::move(w));
    Eigen::Index blen;
    is >> key >> idx >> blen;
    if (key != "bias" || idx != l) throw std::runtime_error("model file: bad bias record");
    Eigen::VectorXd b(blen);
    for (Eigen::Index r = 0; r < blen; ++r) is >> b[r];
    net.biases.push_back(std::move(b));
  }
  if (!is) throw std::runtime_error("model file: truncated");
  return {std::move(net), head};
}

std::pair<Network, families::HeadSpec> load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  return load_model(is);
}

}  // namespace npe::nn
