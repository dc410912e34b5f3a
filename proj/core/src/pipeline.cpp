#include "npe/pipeline.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "npe/mathutil.hpp"

namespace npe::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

sim::ModelConfig parse_model(const json& j, std::uint64_t seed) {
  const std::string name = j.at("model").get<std::string>();
  const json opts = j.value("model_options", json::object());
  if (name == "conjugate_gaussian") {
    sim::ConjugateModel m;
    m.n = opts.value("n", m.n);
    m.train_mean = opts.value("train_mean", m.train_mean);
    m.train_sd = opts.value("train_sd", m.train_sd);
    return m;
  }
  if (name == "linear_regression") {
    sim::LinRegModel m;
    m.n = opts.value("n", m.n);
    m.p = opts.value("p", m.p);
    m.ar_design = opts.value("ar_design", m.ar_design);
    m.rho = opts.value("rho", m.rho);
    m.coef_var = opts.value("coef_var", m.coef_var);
    m.ig_shape = opts.value("ig_shape", m.ig_shape);
    m.ig_scale = opts.value("ig_scale", m.ig_scale);
    return m;
  }
  if (name == "sparse_regression") {
    sim::SparseRegModel m;
    m.n = opts.value("n", m.n);
    m.p = opts.value("p", m.p);
    m.rho = opts.value("rho", m.rho);
    m.n_test = opts.value("n_test", m.n_test);
    return m;
  }
  if (name == "autologistic") {
    sim::AutologisticModel m;
    m.rows = opts.value("rows", m.rows);
    m.cols = opts.value("cols", m.cols);
    m.p = opts.value("p", m.p);
    m.sweeps = opts.value("sweeps", m.sweeps);
    return m;
  }
  if (name == "sir_nonspatial") {
    sim::SirNonspatialModel m;
    m.population = opts.value("population", m.population);
    m.days = opts.value("days", m.days);
    m.steps_per_day = opts.value("steps_per_day", m.steps_per_day);
    return m;
  }
  if (name == "sir_spatial") {
    sim::SirSpatialModel m;
    m.config.dt = opts.value("dt", m.config.dt);
    m.config.t_end = opts.value("t_end", m.config.t_end);
    m.config.n_obs = opts.value("n_obs", m.config.n_obs);
    m.config.p_report = opts.value("p_report", m.config.p_report);
    m.config.t_count = opts.value("t_count", m.config.t_count);
    m.fixed_eta = opts.value("fixed_eta", m.fixed_eta);
    if (opts.contains("log_pop_density")) {
      const auto vals = opts.at("log_pop_density").get<std::vector<double>>();
      m.config.log_pop_density =
          Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    } else if (opts.value("covariate", false)) {
      // Fixed covariate surface generated from the experiment seed.
      const auto r = static_cast<Eigen::Index>(m.config.grid.nbrs.size());
      Rng rng = Rng::derive(seed, 0xC0FFEEULL);
      m.config.log_pop_density.resize(r);
      for (Eigen::Index i = 0; i < r; ++i) m.config.log_pop_density[i] = rng.normal();
    }
    return m;
  }
  throw std::runtime_error("config: unknown model '" + name + "'");
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();

  ExperimentConfig config;
  config.raw_text = buffer.str();
  const json j = json::parse(config.raw_text);

  config.seed = j.value("seed", std::uint64_t{1});
  config.model = parse_model(j, config.seed);
  config.n_train = j.value("n_train", config.n_train);
  config.n_val = j.value("n_val", config.n_val);
  config.ks_threshold = j.value("ks_threshold", config.ks_threshold);
  config.export_csv = j.value("export_csv", config.export_csv);
  if (j.contains("archs")) config.archs = j.at("archs").get<std::vector<std::vector<int>>>();
  const std::string act = j.value("activation", std::string("relu"));
  if (act == "relu")
    config.activation = nn::Activation::ReLU;
  else if (act == "tanh")
    config.activation = nn::Activation::Tanh;
  else
    throw std::runtime_error("config: unknown activation '" + act + "'");

  if (j.contains("train")) {
    const json t = j.at("train");
    config.train.epochs = t.value("epochs", config.train.epochs);
    config.train.minibatch = t.value("minibatch", config.train.minibatch);
    config.train.learning_rate = t.value("learning_rate", config.train.learning_rate);
    config.train.early_stop_patience = t.value("patience", config.train.early_stop_patience);
    config.train.validation_fraction =
        t.value("validation_fraction", config.train.validation_fraction);
  }
  if (j.contains("summaries")) {
    const json s = j.at("summaries");
    config.summary.pca_components = s.value("pca_components", config.summary.pca_components);
    config.summary.pca_variance_target =
        s.value("pca_variance_target", config.summary.pca_variance_target);
  }
  if (j.contains("scenario")) {
    const json s = j.at("scenario");
    ScenarioConfig scenario;
    const auto theta = s.at("theta").get<std::vector<double>>();
    scenario.theta =
        Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    scenario.replicates = s.value("replicates", scenario.replicates);
    scenario.level = s.value("level", scenario.level);
    config.scenario = scenario;
  }
  if (j.contains("invariance")) {
    const json s = j.at("invariance");
    InvarianceConfig inv;
    inv.train_mean = s.value("train_mean", inv.train_mean);
    inv.train_sd = s.value("train_sd", inv.train_sd);
    inv.n_val = s.value("n_val", inv.n_val);
    inv.rms_threshold = s.value("rms_threshold", inv.rms_threshold);
    config.invariance = inv;
  }
  config.observed_path = j.value("observed", std::string{});
  return config;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.raw_text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

namespace {

// Logistic regression coefficients by ridge-damped Newton iteration; used as
// a cheap pseudo-likelihood summary of lattice data.
Eigen::VectorXd logistic_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  const auto p = X.cols();
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
  constexpr double kRidge = 1e-4;
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::VectorXd eta = X * coef;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu[i] = expit(eta[i]);
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
    }
    Eigen::VectorXd grad = X.transpose() * (y - mu) - kRidge * coef;
    Eigen::MatrixXd hess = X.transpose() * w.asDiagonal() * X;
    hess.diagonal().array() += kRidge;
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    coef += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-8) break;
  }
  return coef;
}

struct AutologisticCache {
  int rows = -1, cols = -1;
  std::vector<sim::autologistic::Adjacency> orders;  // graph distance 1..3
};

const AutologisticCache& autologistic_cache(int rows, int cols) {
  static thread_local AutologisticCache cache;
  if (cache.rows != rows || cache.cols != cols) {
    auto adj = sim::autologistic::rook_lattice(rows, cols);
    cache.orders.clear();
    for (int k = 1; k <= 3; ++k) cache.orders.push_back(sim::autologistic::order_neighbors(adj, k));
    cache.rows = rows;
    cache.cols = cols;
  }
  return cache;
}

// Summary before any batch-fitted transform (rank map / pca).
Eigen::VectorXd raw_summary(const sim::ModelConfig& model, const Eigen::VectorXd& y) {
  return std::visit(
      overloaded{
          [&](const sim::ConjugateModel&) {
            return Eigen::VectorXd::Constant(1, y.mean()).eval();
          },
          [&](const sim::LinRegModel& m) {
            Eigen::MatrixXd X(m.n, m.p);
            for (int i = 0; i < m.n; ++i) X.row(i) = y.segment(m.n + i * m.p, m.p);
            return summaries::least_squares_summary(y.head(m.n), X);
          },
          [&](const sim::SparseRegModel& m) {
            Eigen::MatrixXd X(m.n, m.p);
            for (int i = 0; i < m.n; ++i) X.row(i) = y.segment(m.n + i * m.p, m.p);
            summaries::LeastSquaresOptions opts;
            opts.include_coef_sd = true;
            return summaries::least_squares_summary(y.head(m.n), X, opts);
          },
          [&](const sim::AutologisticModel& m) {
            const int n = m.rows * m.cols;
            Eigen::MatrixXd X(n, m.p);
            X.col(0).setOnes();
            for (int i = 0; i < n; ++i)
              X.row(i).tail(m.p - 1) = y.segment(n + static_cast<Eigen::Index>(i) * (m.p - 1),
                                                 m.p - 1);
            Eigen::VectorXd out(m.p + 3);
            out.head(m.p) = logistic_fit(y.head(n), X);
            const auto& cache = autologistic_cache(m.rows, m.cols);
            for (int k = 0; k < 3; ++k) {
              auto g = summaries::geary_c(y.head(n), cache.orders[static_cast<std::size_t>(k)]);
              out[m.p + k] = g.c;
            }
            return out;
          },
          [&](const sim::SirNonspatialModel&) {
            return y.array().log1p().matrix().eval();
          },
          [&](const sim::SirSpatialModel&) {
            // PCA scores are applied by the caller; identity here.
            return y;
          }},
      model);
}

int raw_summary_dim(const sim::ModelConfig& model) {
  return std::visit(overloaded{[](const sim::ConjugateModel&) { return 1; },
                               [](const sim::LinRegModel& m) { return m.p + 2; },
                               [](const sim::SparseRegModel& m) { return m.p + 3; },
                               [](const sim::AutologisticModel& m) { return m.p + 3; },
                               [](const sim::SirNonspatialModel& m) { return m.days; },
                               [](const sim::SirSpatialModel& m) {
                                 return 2 * m.config.n_obs *
                                        static_cast<int>(m.config.grid.nbrs.size());
                               }},
                    model);
}

}  // namespace

SummaryState fit_summary_state(const sim::ModelConfig& model, const sim::SimBatch& batch,
                               const SummaryOptions& options) {
  SummaryState state;
  state.model = sim::model_name(model);
  if (std::holds_alternative<sim::SparseRegModel>(model)) {
    const long n = batch.size();
    Eigen::MatrixXd raw(n, raw_summary_dim(model));
    for (long i = 0; i < n; ++i) raw.row(i) = raw_summary(model, batch.y.row(i));
    state.rank = summaries::RankToUnit::fit(raw);
    state.use_rank = true;
    state.dim = state.rank.dim();
  } else if (std::holds_alternative<sim::SirSpatialModel>(model)) {
    summaries::PcaAccumulator acc(batch.y.cols());
    for (long i = 0; i < batch.size(); ++i) acc.add(batch.y.row(i));
    state.pca = options.pca_components > 0
                    ? acc.finalize_components(options.pca_components)
                    : acc.finalize_variance_target(options.pca_variance_target);
    state.use_pca = true;
    state.dim = static_cast<int>(state.pca.loadings.cols());
    // Standardize scores so every network input has unit scale; raw leading
    // scores can be orders of magnitude larger than trailing ones.
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(state.dim);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(state.dim);
    for (long i = 0; i < batch.size(); ++i) {
      const Eigen::VectorXd s = state.pca.apply(batch.y.row(i));
      sum += s;
      sumsq += s.cwiseProduct(s);
    }
    const double n = static_cast<double>(batch.size());
    Eigen::VectorXd var = sumsq / n - (sum / n).cwiseProduct(sum / n);
    state.pca_scale = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-12);
  } else {
    state.dim = raw_summary_dim(model);
  }
  return state;
}

Eigen::VectorXd apply_summary(const SummaryState& state, const sim::ModelConfig& model,
                              const Eigen::VectorXd& y) {
  if (state.use_pca) return state.pca.apply(y).cwiseQuotient(state.pca_scale);
  Eigen::VectorXd raw = raw_summary(model, y);
  if (state.use_rank) return state.rank.apply(raw);
  return raw;
}

Eigen::MatrixXd summarize_batch(const SummaryState& state, const sim::ModelConfig& model,
                                const sim::SimBatch& batch, int workers) {
  Eigen::MatrixXd z(state.dim, batch.size());
  parallel_for(static_cast<std::size_t>(batch.size()), workers, [&](std::size_t i) {
    z.col(static_cast<Eigen::Index>(i)) =
        apply_summary(state, model, batch.y.row(static_cast<Eigen::Index>(i)));
  });
  return z;
}

void save_summary_state(const SummaryState& state, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open summary state for writing: " + path);
  os << "npe-summary-state v1\n";
  os << "model " << state.model << "\n";
  os << "dim " << state.dim << "\n";
  os << "kind " << (state.use_rank ? "rank" : state.use_pca ? "pca" : "none") << "\n";
  if (state.use_rank) state.rank.save(os);
  if (state.use_pca) {
    state.pca.save(os);
    os << "scale";
    os << std::setprecision(17);
    for (int j = 0; j < state.dim; ++j) os << ' ' << state.pca_scale[j];
    os << "\n";
  }
  if (!os) throw std::runtime_error("summary state write failed: " + path);
}

SummaryState load_summary_state(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open summary state: " + path);
  std::string line;
  std::getline(is, line);
  if (line != "npe-summary-state v1") throw std::runtime_error("summary state: bad header");
  SummaryState state;
  std::string key, kind;
  is >> key >> state.model;
  is >> key >> state.dim;
  is >> key >> kind;
  std::getline(is, line);  // finish the kind line
  if (kind == "rank") {
    state.rank = summaries::RankToUnit::load(is);
    state.use_rank = true;
  } else if (kind == "pca") {
    state.pca = summaries::PcaBasis::load(is);
    state.use_pca = true;
    is >> key;
    if (key != "scale") throw std::runtime_error("summary state: expected scale line");
    state.pca_scale.resize(state.dim);
    for (int j = 0; j < state.dim; ++j) is >> state.pca_scale[j];
  } else if (kind != "none") {
    throw std::runtime_error("summary state: unknown kind '" + kind + "'");
  }
  return state;
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

std::vector<TargetSpec> target_specs(const sim::ModelConfig& model) {
  const auto names = sim::gamma_names(model);
  std::vector<TargetSpec> specs;
  for (std::size_t i = 0; i < names.size(); ++i) {
    TargetSpec spec;
    spec.name = names[i];
    spec.gamma_index = static_cast<int>(i);
    spec.head = {families::Family::HetNormal};
    if (std::holds_alternative<sim::SparseRegModel>(model)) {
      const auto& m = std::get<sim::SparseRegModel>(model);
      if (static_cast<int>(i) < m.p)
        spec.head = {families::Family::BernoulliLogit};
      else if (static_cast<int>(i) == m.p)
        spec.head = {families::Family::LogNormal};
    } else if (std::holds_alternative<sim::SirSpatialModel>(model)) {
      if (i + 1 == names.size()) spec.head = {families::Family::NegBinomialMeanDisp};
    }
    specs.push_back(spec);
  }
  return specs;
}

// ---------------------------------------------------------------------------
// Bundles
// ---------------------------------------------------------------------------

void save_bundle(const Bundle& bundle, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "npe-bundle v1";
  manifest["model"] = bundle.model_name;
  manifest["config_hash"] = bundle.config_hash;
  manifest["arch"] = bundle.arch;
  manifest["summary_state"] = "summary_state.txt";
  json targets = json::array();
  for (std::size_t i = 0; i < bundle.targets.size(); ++i) {
    const auto& t = bundle.targets[i];
    const std::string file = "model_" + std::to_string(i) + "_" + t.name + ".txt";
    targets.push_back({{"name", t.name},
                       {"family", t.head.name()},
                       {"gamma_index", t.gamma_index},
                       {"file", file}});
    nn::save_model(bundle.nets[i], bundle.targets[i].head, (fs::path(dir) / file).string());
  }
  manifest["targets"] = targets;
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw std::runtime_error("cannot write bundle manifest in " + dir);
  os << manifest.dump(2) << "\n";
  save_summary_state(bundle.summary, (fs::path(dir) / "summary_state.txt").string());
}

Bundle load_bundle(const std::string& dir, const ExperimentConfig& config) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw std::runtime_error("no bundle manifest in " + dir);
  const json manifest = json::parse(is);
  if (manifest.value("format", std::string{}) != "npe-bundle v1")
    throw std::runtime_error("bundle: unsupported format");

  Bundle bundle;
  bundle.model = config.model;
  bundle.model_name = manifest.at("model").get<std::string>();
  if (bundle.model_name != sim::model_name(config.model))
    throw std::runtime_error("bundle was trained for model '" + bundle.model_name +
                             "' but the config specifies '" + sim::model_name(config.model) + "'");
  bundle.config_hash = manifest.value("config_hash", std::uint64_t{0});
  if (bundle.config_hash != config_hash(config))
    std::cerr << "warning: bundle was trained from a different config file\n";
  bundle.arch = manifest.value("arch", std::vector<int>{});
  bundle.summary = load_summary_state(
      (fs::path(dir) / manifest.value("summary_state", std::string("summary_state.txt")))
          .string());
  for (const auto& t : manifest.at("targets")) {
    TargetSpec spec;
    spec.name = t.at("name").get<std::string>();
    spec.head = families::HeadSpec::from_name(t.at("family").get<std::string>());
    spec.gamma_index = t.at("gamma_index").get<int>();
    auto [net, head] = nn::load_model((fs::path(dir) / t.at("file").get<std::string>()).string());
    if (head.family != spec.head.family)
      throw std::runtime_error("bundle: family mismatch for target " + spec.name);
    bundle.targets.push_back(spec);
    bundle.nets.push_back(std::move(net));
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace {

ExperimentConfig config_for(const CliOptions& options) {
  ExperimentConfig config = load_config(options.config_path);
  if (options.seed_override) config.seed = *options.seed_override;
  return config;
}

struct TrainedCell {
  std::vector<nn::Network> nets;
  std::vector<double> val_score;  // per-target average validation log score
  double total = 0.0;
  bool diverged = false;
  std::string diverged_target;
};

std::uint64_t train_seed(std::uint64_t base, std::size_t arch_index, std::size_t target_index) {
  return base * 1000003ULL + arch_index * 101ULL + target_index + 1ULL;
}

TrainedCell train_cell(const ExperimentConfig& config, const std::vector<int>& hidden,
                       const std::vector<TargetSpec>& targets, const Eigen::MatrixXd& z,
                       const sim::SimBatch& batch, const Eigen::MatrixXd& z_val,
                       const sim::SimBatch& val_batch, std::size_t arch_index) {
  TrainedCell cell;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto& spec = targets[t];
    nn::NetworkArch arch;
    arch.input_dim = static_cast<int>(z.rows());
    arch.hidden = hidden;
    arch.output_dim = spec.head.output_dim();
    arch.activation = config.activation;

    nn::TrainData data;
    data.z = z;
    data.gamma = batch.gamma.col(spec.gamma_index);
    data.weight = batch.weight;

    nn::TrainConfig train_config = config.train;
    train_config.seed = train_seed(config.seed, arch_index, t);
    try {
      cell.nets.push_back(nn::train(data, arch, spec.head, train_config));
    } catch (const nn::TrainingDiverged&) {
      cell.diverged = true;
      cell.diverged_target = spec.name;
      cell.val_score.push_back(-std::numeric_limits<double>::infinity());
      cell.nets.push_back(nn::make_network(arch, train_config.seed));
      continue;
    }
    const double score = diagnostics::log_score(cell.nets.back(), spec.head, z_val,
                                                val_batch.gamma.col(spec.gamma_index)) /
                         static_cast<double>(val_batch.size());
    cell.val_score.push_back(score);
  }
  cell.total = cell.diverged ? -std::numeric_limits<double>::infinity()
                             : std::accumulate(cell.val_score.begin(), cell.val_score.end(), 0.0);
  return cell;
}

Bundle train_bundle(const ExperimentConfig& config, const CliOptions& options,
                    std::ostream* report) {
  sim::SimBatch batch = sim::make_sim_batch(config.model, config.n_train, config.seed,
                                            options.workers);
  sim::SimBatch val_batch = sim::make_sim_batch(config.model, config.n_val, config.seed + 1,
                                                options.workers);
  SummaryState state = fit_summary_state(config.model, batch, config.summary);
  Eigen::MatrixXd z = summarize_batch(state, config.model, batch, options.workers);
  Eigen::MatrixXd z_val = summarize_batch(state, config.model, val_batch, options.workers);
  const auto targets = target_specs(config.model);

  std::vector<TrainedCell> cells;
  std::size_t best = 0;
  for (std::size_t a = 0; a < config.archs.size(); ++a) {
    cells.push_back(train_cell(config, config.archs[a], targets, z, batch, z_val, val_batch, a));
    if (cells[a].total > cells[best].total) best = a;
  }
  if (cells[best].diverged)
    throw std::runtime_error("training diverged for every architecture (target " +
                             cells[best].diverged_target + ")");

  if (report) {
    *report << "arch,target,val_log_score,best,diverged\n";
    for (std::size_t a = 0; a < cells.size(); ++a) {
      std::string arch_label;
      for (std::size_t l = 0; l < config.archs[a].size(); ++l)
        arch_label += (l ? "x" : "") + std::to_string(config.archs[a][l]);
      for (std::size_t t = 0; t < targets.size(); ++t)
        *report << arch_label << "," << targets[t].name << "," << cells[a].val_score[t] << ","
                << (a == best ? 1 : 0) << "," << (cells[a].diverged ? 1 : 0) << "\n";
    }
  }

  Bundle bundle;
  bundle.model = config.model;
  bundle.model_name = sim::model_name(config.model);
  bundle.config_hash = config_hash(config);
  bundle.arch = config.archs[best];
  bundle.summary = std::move(state);
  bundle.targets = targets;
  bundle.nets = std::move(cells[best].nets);
  return bundle;
}

Eigen::VectorXd read_observed_row(const std::string& path, int expected_dim) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open observed data: " + path);
  std::vector<double> values;
  std::string token;
  while (std::getline(is, token, ',')) {
    std::istringstream ts(token);
    double v;
    while (ts >> v) values.push_back(v);
  }
  if (static_cast<int>(values.size()) != expected_dim)
    throw std::runtime_error("observed data has " + std::to_string(values.size()) +
                             " values, expected " + std::to_string(expected_dim));
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

}  // namespace

int cmd_simulate(const CliOptions& options) {
  const ExperimentConfig config = config_for(options);
  fs::create_directories(options.out_dir);
  sim::SimBatch batch = sim::make_sim_batch(config.model, config.n_train, config.seed,
                                            options.workers);
  const fs::path out(options.out_dir);
  sim::save_batch(batch, (out / "batch.bin").string());
  if (config.export_csv) sim::export_batch_csv(batch, (out / "batch.csv").string());
  std::cout << "simulated " << batch.size() << " records of " << batch.model << " into "
            << (out / "batch.bin").string() << "\n";
  return 0;
}

int cmd_train(const CliOptions& options) {
  const ExperimentConfig config = config_for(options);
  fs::create_directories(options.out_dir);
  std::ofstream report(fs::path(options.out_dir) / "train_report.csv");
  Bundle bundle = train_bundle(config, options, &report);
  save_bundle(bundle, options.out_dir);
  std::string arch_label;
  for (std::size_t l = 0; l < bundle.arch.size(); ++l)
    arch_label += (l ? "x" : "") + std::to_string(bundle.arch[l]);
  std::cout << "trained " << bundle.targets.size() << " targets; selected arch " << arch_label
            << "; bundle saved to " << options.out_dir << "\n";
  return 0;
}

int cmd_diagnose(const CliOptions& options) {
  const ExperimentConfig config = config_for(options);
  const Bundle bundle = load_bundle(options.out_dir, config);
  const double threshold = options.ks_gate ? *options.ks_gate : config.ks_threshold;

  sim::SimBatch val = sim::make_sim_batch(config.model, config.n_val, config.seed + 2,
                                          options.workers);
  Eigen::MatrixXd z = summarize_batch(bundle.summary, config.model, val, options.workers);

  diagnostics::CalibrationReport report;
  report.ks_threshold = threshold;
  Rng rng(config.seed + 77);
  for (std::size_t t = 0; t < bundle.targets.size(); ++t) {
    const auto& spec = bundle.targets[t];
    const Eigen::VectorXd gamma = val.gamma.col(spec.gamma_index);
    diagnostics::TargetReport tr;
    tr.target = spec.name;
    tr.family = spec.head.name();
    tr.discrete = spec.head.discrete();
    tr.n = val.size();
    tr.log_score = diagnostics::log_score(bundle.nets[t], spec.head, z, gamma) /
                   static_cast<double>(val.size());
    std::vector<double> pit_values =
        tr.discrete ? diagnostics::randomized_pit(bundle.nets[t], spec.head, z, gamma, rng)
                    : diagnostics::pit(bundle.nets[t], spec.head, z, gamma);
    auto gate = diagnostics::ks_gate(pit_values, threshold);
    tr.ks_statistic = gate.statistic;
    tr.ks_pass = gate.pass;
    report.all_pass = report.all_pass && gate.pass;
    report.targets.push_back(tr);
    diagnostics::write_pit_csv(pit_values,
                               (fs::path(options.out_dir) / ("pit_" + spec.name + ".csv"))
                                   .string());
  }
  diagnostics::write_report_csv(report,
                                (fs::path(options.out_dir) / "calibration_report.csv").string());
  diagnostics::write_report_text(report, std::cout);
  return report.all_pass ? 0 : 1;
}

int cmd_infer(const CliOptions& options) {
  const ExperimentConfig config = config_for(options);
  const Bundle bundle = load_bundle(options.out_dir, config);
  const auto transforms = sim::target_transforms(config.model);

  if (config.scenario) {
    const auto& scenario = *config.scenario;
    sim::SimBatch batch = sim::make_scenario_batch(config.model, scenario.theta,
                                                   scenario.replicates, config.seed + 3,
                                                   options.workers);
    Eigen::MatrixXd z = summarize_batch(bundle.summary, config.model, batch, options.workers);
    const double tail = 0.5 * (1.0 - scenario.level);

    std::ofstream os(fs::path(options.out_dir) / "scenario_report.csv");
    os << "target,mad,coverage,level\n";
    os.precision(12);
    std::cout << "scenario over " << scenario.replicates << " replicates:\n";
    for (std::size_t t = 0; t < bundle.targets.size(); ++t) {
      const auto& spec = bundle.targets[t];
      const auto& tf = transforms[static_cast<std::size_t>(spec.gamma_index)];
      std::vector<double> med, lo, hi, truth;
      for (long i = 0; i < batch.size(); ++i) {
        auto params = families::make_params(spec.head, bundle.nets[t].forward(z.col(i)));
        med.push_back(tf.inverse(families::quantile(spec.head, params, 0.5)));
        lo.push_back(tf.inverse(families::quantile(spec.head, params, tail)));
        hi.push_back(tf.inverse(families::quantile(spec.head, params, 1.0 - tail)));
        truth.push_back(tf.inverse(batch.gamma(i, spec.gamma_index)));
      }
      auto mc = diagnostics::mad_and_coverage_from_intervals(med, lo, hi, truth, scenario.level);
      os << spec.name << "," << mc.mad << "," << mc.coverage << "," << scenario.level << "\n";
      std::cout << "  " << spec.name << " mad=" << mc.mad << " coverage=" << mc.coverage << "\n";
    }
    return 0;
  }

  if (config.observed_path.empty())
    throw std::runtime_error("infer: config needs either 'observed' or 'scenario'");
  const Eigen::VectorXd y = read_observed_row(config.observed_path, sim::y_dim(config.model));
  const Eigen::VectorXd z = apply_summary(bundle.summary, config.model, y);

  std::ofstream os(fs::path(options.out_dir) / "posterior.csv");
  os << "target,family,median,q05,q95\n";
  os.precision(12);
  std::cout << "posterior for " << config.observed_path << ":\n";
  for (std::size_t t = 0; t < bundle.targets.size(); ++t) {
    const auto& spec = bundle.targets[t];
    const auto& tf = transforms[static_cast<std::size_t>(spec.gamma_index)];
    auto params = families::make_params(spec.head, bundle.nets[t].forward(z));
    const double med = tf.inverse(families::quantile(spec.head, params, 0.5));
    const double q05 = tf.inverse(families::quantile(spec.head, params, 0.05));
    const double q95 = tf.inverse(families::quantile(spec.head, params, 0.95));
    os << spec.name << "," << spec.head.name() << "," << med << "," << q05 << "," << q95 << "\n";
    std::cout << "  " << spec.name << " median=" << med << " 90% interval=[" << q05 << ", "
              << q95 << "]\n";
  }
  return 0;
}

int cmd_invariance_check(const CliOptions& options) {
  ExperimentConfig config = config_for(options);
  if (!std::holds_alternative<sim::ConjugateModel>(config.model))
    throw std::runtime_error("invariance-check: only defined for conjugate_gaussian");
  const InvarianceConfig inv = config.invariance.value_or(InvarianceConfig{});
  fs::create_directories(options.out_dir);

  // Same experiment trained under the prior and under a deliberately
  // different training distribution; the reweighted fits should agree.
  ExperimentConfig alt = config;
  auto& base_model = std::get<sim::ConjugateModel>(config.model);
  auto& alt_model = std::get<sim::ConjugateModel>(alt.model);
  base_model.train_mean = 0.0;
  base_model.train_sd = 1.0;
  alt_model.train_mean = inv.train_mean;
  alt_model.train_sd = inv.train_sd;

  Bundle base = train_bundle(config, options, nullptr);
  Bundle shifted = train_bundle(alt, options, nullptr);

  sim::SimBatch val = sim::make_sim_batch(config.model, inv.n_val, config.seed + 4,
                                          options.workers);
  Eigen::MatrixXd z_base = summarize_batch(base.summary, config.model, val, options.workers);
  Eigen::MatrixXd z_alt = summarize_batch(shifted.summary, alt.model, val, options.workers);

  double sum_sq = 0.0;
  const families::HeadSpec head = base.targets[0].head;
  for (long i = 0; i < val.size(); ++i) {
    auto pb = families::make_params(head, base.nets[0].forward(z_base.col(i)));
    auto pa = families::make_params(head, shifted.nets[0].forward(z_alt.col(i)));
    const double d = families::quantile(head, pb, 0.5) - families::quantile(head, pa, 0.5);
    sum_sq += d * d;
  }
  const double rms = std::sqrt(sum_sq / static_cast<double>(val.size()));
  const bool pass = rms < inv.rms_threshold;

  std::ofstream os(fs::path(options.out_dir) / "invariance_report.csv");
  os << "rms_median_discrepancy,threshold,pass\n";
  os.precision(12);
  os << rms << "," << inv.rms_threshold << "," << (pass ? 1 : 0) << "\n";
  std::cout << "rms median discrepancy " << rms << " (threshold " << inv.rms_threshold << "): "
            << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

}  // namespace npe::pipeline
