#include "npe/sim_batch.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "npe/conjugate.hpp"
#include "npe/mathutil.hpp"

namespace npe::sim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

summaries::PriorDist i0_prior() { return summaries::PriorDist::gamma(2.0, 20.0); }
summaries::PriorDist psi_prior() { return summaries::PriorDist::exponential(1.0 / 5.0); }
summaries::PriorDist spatial_rate_prior() { return summaries::PriorDist::uniform(0.1, 0.9); }

bool covariate_mode(const SirSpatialModel& m) { return m.config.log_pop_density.size() > 0; }

}  // namespace

SirSpatialModel::SirSpatialModel() { config.grid = sir::default_grid(); }

std::string model_name(const ModelConfig& model) {
  return std::visit(
      overloaded{[](const ConjugateModel&) { return std::string("conjugate_gaussian"); },
                 [](const LinRegModel&) { return std::string("linear_regression"); },
                 [](const SparseRegModel&) { return std::string("sparse_regression"); },
                 [](const AutologisticModel&) { return std::string("autologistic"); },
                 [](const SirNonspatialModel&) { return std::string("sir_nonspatial"); },
                 [](const SirSpatialModel&) { return std::string("sir_spatial"); }},
      model);
}

int theta_dim(const ModelConfig& model) {
  return std::visit(overloaded{[](const ConjugateModel&) { return 1; },
                               [](const LinRegModel& m) { return m.p + 2; },
                               [](const SparseRegModel& m) { return m.p + 3; },
                               [](const AutologisticModel& m) { return m.p + 1; },
                               [](const SirNonspatialModel&) { return 4; },
                               [](const SirSpatialModel&) { return 3; }},
                    model);
}

int gamma_dim(const ModelConfig& model) {
  return std::visit(overloaded{[](const ConjugateModel&) { return 1; },
                               [](const LinRegModel& m) { return m.p + 1; },
                               [](const SparseRegModel& m) { return m.p + 1 + m.n_test; },
                               [](const AutologisticModel& m) { return m.p + 1; },
                               [](const SirNonspatialModel&) { return 3; },
                               [](const SirSpatialModel&) { return 4; }},
                    model);
}

int y_dim(const ModelConfig& model) {
  return std::visit(
      overloaded{[](const ConjugateModel& m) { return m.n; },
                 [](const LinRegModel& m) { return m.n * (m.p + 1); },
                 [](const SparseRegModel& m) { return m.n * (m.p + 1); },
                 [](const AutologisticModel& m) { return m.rows * m.cols * m.p; },
                 [](const SirNonspatialModel& m) { return m.days; },
                 [](const SirSpatialModel& m) {
                   return 2 * m.config.n_obs *
                          static_cast<int>(m.config.grid.nbrs.size());
                 }},
      model);
}

std::vector<std::string> theta_names(const ModelConfig& model) {
  std::vector<std::string> names;
  std::visit(overloaded{[&](const ConjugateModel&) { names = {"theta"}; },
                        [&](const LinRegModel& m) {
                          for (int j = 0; j <= m.p; ++j) names.push_back("beta_" + std::to_string(j));
                          names.push_back("sigma");
                        },
                        [&](const SparseRegModel& m) {
                          for (int j = 0; j <= m.p; ++j) names.push_back("beta_" + std::to_string(j));
                          names.push_back("sigma2");
                          names.push_back("pi_incl");
                        },
                        [&](const AutologisticModel& m) {
                          for (int j = 1; j <= m.p; ++j) names.push_back("beta_" + std::to_string(j));
                          names.push_back("log_phi");
                        },
                        [&](const SirNonspatialModel&) {
                          names = {"lambda", "mu", "i0", "psi"};
                        },
                        [&](const SirSpatialModel& m) {
                          names = covariate_mode(m)
                                      ? std::vector<std::string>{"beta0", "beta1", "phi"}
                                      : std::vector<std::string>{"beta", "phi", "eta"};
                        }},
             model);
  return names;
}

std::vector<std::string> gamma_names(const ModelConfig& model) {
  std::vector<std::string> names;
  std::visit(overloaded{[&](const ConjugateModel&) { names = {"theta"}; },
                        [&](const LinRegModel& m) {
                          for (int j = 0; j <= m.p; ++j) names.push_back("beta_" + std::to_string(j));
                        },
                        [&](const SparseRegModel& m) {
                          for (int j = 1; j <= m.p; ++j) names.push_back("incl_" + std::to_string(j));
                          names.push_back("sigma");
                          for (int i = 1; i <= m.n_test; ++i)
                            names.push_back("pred_" + std::to_string(i));
                        },
                        [&](const AutologisticModel& m) {
                          for (int j = 1; j <= m.p; ++j) names.push_back("beta_" + std::to_string(j));
                          names.push_back("log_phi");
                        },
                        [&](const SirNonspatialModel&) {
                          names = {"log_lambda", "i0_t", "psi_t"};
                        },
                        [&](const SirSpatialModel& m) {
                          names = covariate_mode(m)
                                      ? std::vector<std::string>{"beta0_t", "beta1_t", "log_phi",
                                                                 "infected_count"}
                                      : std::vector<std::string>{"beta_t", "phi_t", "eta_t",
                                                                 "infected_count"};
                        }},
             model);
  return names;
}

double TargetTransform::forward(double theta) const {
  switch (kind) {
    case Kind::None:
      return theta;
    case Kind::Log:
      return std::log(theta);
    case Kind::PriorQuantile:
      return summaries::prior_quantile_transform(theta, prior).value;
  }
  throw std::logic_error("unreachable transform kind");
}

double TargetTransform::inverse(double value) const {
  switch (kind) {
    case Kind::None:
      return value;
    case Kind::Log:
      return std::exp(value);
    case Kind::PriorQuantile:
      return summaries::prior_quantile_inverse(value, prior);
  }
  throw std::logic_error("unreachable transform kind");
}

std::vector<TargetTransform> target_transforms(const ModelConfig& model) {
  std::vector<TargetTransform> t(static_cast<std::size_t>(gamma_dim(model)));
  std::visit(
      overloaded{[&](const ConjugateModel&) {}, [&](const LinRegModel&) {},
                 [&](const SparseRegModel&) {}, [&](const AutologisticModel&) {},
                 [&](const SirNonspatialModel&) {
                   t[0] = {TargetTransform::Kind::Log, {}};
                   t[1] = {TargetTransform::Kind::PriorQuantile, i0_prior()};
                   t[2] = {TargetTransform::Kind::PriorQuantile, psi_prior()};
                 },
                 [&](const SirSpatialModel& m) {
                   if (covariate_mode(m)) {
                     t[0] = {TargetTransform::Kind::PriorQuantile,
                             summaries::PriorDist::uniform(-3.0, 1.0)};
                     t[1] = {TargetTransform::Kind::PriorQuantile,
                             summaries::PriorDist::uniform(-1.0, 1.0)};
                     t[2] = {TargetTransform::Kind::Log, {}};
                   } else {
                     for (int k = 0; k < 3; ++k)
                       t[static_cast<std::size_t>(k)] = {TargetTransform::Kind::PriorQuantile,
                                                         spatial_rate_prior()};
                   }
                 }},
      model);
  return t;
}

namespace {

SimRecord record_conjugate(const ConjugateModel& m, const Eigen::VectorXd* fixed, Rng& rng) {
  SimRecord rec;
  double theta;
  if (fixed) {
    theta = (*fixed)[0];
    rec.weight = 1.0;
  } else {
    theta = rng.normal(m.train_mean, m.train_sd);
    double log_prior = conjugate::normal_log_density(theta, 0.0, 1.0);
    double log_train = conjugate::normal_log_density(theta, m.train_mean, m.train_sd);
    rec.weight = std::exp(log_prior - log_train);
  }
  rec.theta = Eigen::VectorXd::Constant(1, theta);
  rec.gamma = rec.theta;
  rec.y = conjugate::simulate(theta, m.n, rng);
  return rec;
}

SimRecord record_linreg(const LinRegModel& m, const Eigen::VectorXd* fixed, Rng& rng) {
  SimRecord rec;
  linreg::Params params;
  if (fixed) {
    params.beta0 = (*fixed)[0];
    params.beta = fixed->segment(1, m.p);
    params.sigma = (*fixed)[m.p + 1];
  } else {
    params = linreg::sample_prior_normal_ig(m.p, m.coef_var, m.ig_shape, m.ig_scale, rng);
  }
  Eigen::MatrixXd x = m.ar_design ? linreg::ar_design(m.n, m.p, m.rho, rng)
                                  : linreg::iid_design(m.n, m.p, rng);
  Eigen::VectorXd y = linreg::simulate(params, x, rng);
  rec.theta.resize(m.p + 2);
  rec.theta[0] = params.beta0;
  rec.theta.segment(1, m.p) = params.beta;
  rec.theta[m.p + 1] = params.sigma;
  rec.gamma = rec.theta.head(m.p + 1);
  rec.y.resize(m.n * (m.p + 1));
  rec.y.head(m.n) = y;
  for (int i = 0; i < m.n; ++i) rec.y.segment(m.n + i * m.p, m.p) = x.row(i);
  return rec;
}

SimRecord record_sparse(const SparseRegModel& m, const Eigen::VectorXd* fixed, Rng& rng) {
  SimRecord rec;
  linreg::spike_slab::Params params;
  if (fixed) {
    params.beta0 = (*fixed)[0];
    params.beta = fixed->segment(1, m.p);
    params.sigma2 = (*fixed)[m.p + 1];
    params.pi_incl = (*fixed)[m.p + 2];
    params.incl.resize(m.p);
    for (int j = 0; j < m.p; ++j) params.incl[j] = params.beta[j] != 0.0 ? 1.0 : 0.0;
  } else {
    params = linreg::spike_slab::sample_prior(m.p, m.hyper, rng);
  }
  linreg::Params lp{params.beta0, params.beta, std::sqrt(params.sigma2)};
  Eigen::MatrixXd x = linreg::ar_design(m.n, m.p, m.rho, rng);
  Eigen::VectorXd y = linreg::simulate(lp, x, rng);
  Eigen::MatrixXd x_test = linreg::ar_design(m.n_test, m.p, m.rho, rng);
  Eigen::VectorXd y_test = linreg::simulate(lp, x_test, rng);

  rec.theta.resize(m.p + 3);
  rec.theta[0] = params.beta0;
  rec.theta.segment(1, m.p) = params.beta;
  rec.theta[m.p + 1] = params.sigma2;
  rec.theta[m.p + 2] = params.pi_incl;
  rec.gamma.resize(m.p + 1 + m.n_test);
  rec.gamma.head(m.p) = params.incl;
  rec.gamma[m.p] = std::sqrt(params.sigma2);
  rec.gamma.tail(m.n_test) = y_test;
  rec.y.resize(m.n * (m.p + 1));
  rec.y.head(m.n) = y;
  for (int i = 0; i < m.n; ++i) rec.y.segment(m.n + i * m.p, m.p) = x.row(i);
  return rec;
}

SimRecord record_autologistic(const AutologisticModel& m, const Eigen::VectorXd* fixed,
                              Rng& rng) {
  static thread_local autologistic::Adjacency adj_cache;
  static thread_local int adj_rows = -1, adj_cols = -1;
  if (adj_rows != m.rows || adj_cols != m.cols) {
    adj_cache = autologistic::rook_lattice(m.rows, m.cols);
    adj_rows = m.rows;
    adj_cols = m.cols;
  }
  const int n = m.rows * m.cols;
  SimRecord rec;
  autologistic::Params params;
  if (fixed) {
    params.beta = fixed->head(m.p);
    params.log_phi = (*fixed)[m.p];
  } else {
    params = autologistic::sample_prior(m.p, rng);
  }
  Eigen::MatrixXd x = autologistic::design_with_intercept(n, m.p, rng);
  Eigen::VectorXi y =
      autologistic::simulate(params.beta, std::exp(params.log_phi), x, adj_cache, m.sweeps, rng);

  rec.theta.resize(m.p + 1);
  rec.theta.head(m.p) = params.beta;
  rec.theta[m.p] = params.log_phi;
  rec.gamma = rec.theta;
  rec.y.resize(n * m.p);
  for (int i = 0; i < n; ++i) rec.y[i] = static_cast<double>(y[i]);
  // Non-intercept covariate columns, row-major.
  for (int i = 0; i < n; ++i)
    rec.y.segment(n + static_cast<Eigen::Index>(i) * (m.p - 1), m.p - 1) =
        x.row(i).tail(m.p - 1);
  return rec;
}

SimRecord record_sir_nonspatial(const SirNonspatialModel& m, const Eigen::VectorXd* fixed,
                                Rng& rng) {
  SimRecord rec;
  sir::NonspatialParams params;
  if (fixed) {
    params.lambda = (*fixed)[0];
    params.mu = (*fixed)[1];
    params.i0 = (*fixed)[2];
    params.psi = (*fixed)[3];
  } else {
    params = sir::sample_prior_nonspatial(rng);
  }
  auto result = sir::simulate_nonspatial(params, rng, m.population, m.days, m.steps_per_day);
  rec.theta.resize(4);
  rec.theta << params.lambda, params.mu, params.i0, params.psi;
  rec.gamma.resize(3);
  rec.gamma[0] = std::log(params.lambda);
  rec.gamma[1] = summaries::prior_quantile_transform(params.i0, i0_prior()).value;
  rec.gamma[2] = summaries::prior_quantile_transform(params.psi, psi_prior()).value;
  rec.y = result.observed;
  return rec;
}

SimRecord record_sir_spatial(const SirSpatialModel& m, const Eigen::VectorXd* fixed, Rng& rng) {
  SimRecord rec;
  sir::SpatialParams params;
  const bool cov = covariate_mode(m);
  if (fixed) {
    if (cov) {
      params.beta0 = (*fixed)[0];
      params.beta1 = (*fixed)[1];
      params.phi = (*fixed)[2];
      params.eta = m.fixed_eta;
    } else {
      params.beta = (*fixed)[0];
      params.phi = (*fixed)[1];
      params.eta = (*fixed)[2];
    }
  } else if (cov) {
    params.beta0 = rng.uniform(-3.0, 1.0);
    params.beta1 = rng.uniform(-1.0, 1.0);
    params.phi = std::exp(rng.normal(-2.0, 1.0));
    params.eta = m.fixed_eta;
  } else {
    params = sir::sample_prior_spatial(rng);
  }
  auto result = sir::simulate_spatial(params, m.config, rng);
  auto transforms = target_transforms(ModelConfig{m});
  rec.theta.resize(3);
  rec.gamma.resize(4);
  if (cov) {
    rec.theta << params.beta0, params.beta1, params.phi;
    rec.gamma[0] = transforms[0].forward(params.beta0);
    rec.gamma[1] = transforms[1].forward(params.beta1);
    rec.gamma[2] = transforms[2].forward(params.phi);
  } else {
    rec.theta << params.beta, params.phi, params.eta;
    rec.gamma[0] = transforms[0].forward(params.beta);
    rec.gamma[1] = transforms[1].forward(params.phi);
    rec.gamma[2] = transforms[2].forward(params.eta);
  }
  rec.gamma[3] = static_cast<double>(result.infected_at_count_time);
  rec.y = sir::stack_responses(result);
  return rec;
}

SimRecord dispatch(const ModelConfig& model, const Eigen::VectorXd* fixed, Rng& rng) {
  return std::visit(
      overloaded{[&](const ConjugateModel& m) { return record_conjugate(m, fixed, rng); },
                 [&](const LinRegModel& m) { return record_linreg(m, fixed, rng); },
                 [&](const SparseRegModel& m) { return record_sparse(m, fixed, rng); },
                 [&](const AutologisticModel& m) { return record_autologistic(m, fixed, rng); },
                 [&](const SirNonspatialModel& m) {
                   return record_sir_nonspatial(m, fixed, rng);
                 },
                 [&](const SirSpatialModel& m) { return record_sir_spatial(m, fixed, rng); }},
      model);
}

SimBatch build_batch(const ModelConfig& model, const Eigen::VectorXd* fixed, long n,
                     std::uint64_t seed, int workers) {
  if (n < 1) throw std::invalid_argument("make_sim_batch: need N >= 1");
  SimBatch batch;
  batch.model = model_name(model);
  batch.seed = seed;
  batch.theta_cols = theta_names(model);
  batch.gamma_cols = gamma_names(model);
  batch.theta.resize(n, theta_dim(model));
  batch.gamma.resize(n, gamma_dim(model));
  batch.y.resize(n, y_dim(model));
  batch.weight.resize(n);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
    SimRecord rec = dispatch(model, fixed, rng);
    batch.theta.row(static_cast<Eigen::Index>(i)) = rec.theta;
    batch.gamma.row(static_cast<Eigen::Index>(i)) = rec.gamma;
    batch.y.row(static_cast<Eigen::Index>(i)) = rec.y;
    batch.weight[static_cast<Eigen::Index>(i)] = rec.weight;
  });
  return batch;
}

}  // namespace

SimRecord simulate_record(const ModelConfig& model, Rng& rng) {
  return dispatch(model, nullptr, rng);
}

SimRecord simulate_record_fixed(const ModelConfig& model, const Eigen::VectorXd& theta,
                                Rng& rng) {
  if (theta.size() != theta_dim(model))
    throw std::invalid_argument("simulate_record_fixed: theta dimension mismatch");
  return dispatch(model, &theta, rng);
}

SimBatch make_sim_batch(const ModelConfig& model, long n, std::uint64_t seed, int workers) {
  return build_batch(model, nullptr, n, seed, workers);
}

SimBatch make_scenario_batch(const ModelConfig& model, const Eigen::VectorXd& theta, long n,
                             std::uint64_t seed, int workers) {
  if (theta.size() != theta_dim(model))
    throw std::invalid_argument("make_scenario_batch: theta dimension mismatch");
  return build_batch(model, &theta, n, seed, workers);
}

namespace {

void write_doubles(std::ostream& os, const double* data, std::size_t count) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

void read_doubles(std::istream& is, double* data, std::size_t count) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
}

}  // namespace

void save_batch(const SimBatch& batch, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open batch file for writing: " + path);
  os << "npe-simbatch v1\n";
  os << "model " << batch.model << "\n";
  os << "n " << batch.size() << "\n";
  os << "theta_dim " << batch.theta.cols() << "\n";
  os << "gamma_dim " << batch.gamma.cols() << "\n";
  os << "y_dim " << batch.y.cols() << "\n";
  os << "seed " << batch.seed << "\n";
  os << "theta_names";
  for (const auto& s : batch.theta_cols) os << " " << s;
  os << "\ngamma_names";
  for (const auto& s : batch.gamma_cols) os << " " << s;
  os << "\nlayout row-major theta,gamma,y,weight; sir_spatial y is series-major"
        " (reported infected then recovered), time-major, region-minor\n";
  os << "end-header\n";
  // Eigen matrices are column-major; serialize row-major for a stable layout.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tmp;
  tmp = batch.theta;
  write_doubles(os, tmp.data(), static_cast<std::size_t>(tmp.size()));
  tmp = batch.gamma;
  write_doubles(os, tmp.data(), static_cast<std::size_t>(tmp.size()));
  tmp = batch.y;
  write_doubles(os, tmp.data(), static_cast<std::size_t>(tmp.size()));
  write_doubles(os, batch.weight.data(), static_cast<std::size_t>(batch.weight.size()));
  if (!os) throw std::runtime_error("batch write failed: " + path);
}

SimBatch load_batch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open batch file: " + path);
  std::string line;
  std::getline(is, line);
  if (line != "npe-simbatch v1") throw std::runtime_error("batch file: bad header");
  SimBatch batch;
  long n = 0, pd = 0, qd = 0, dd = 0;
  for (;;) {
    std::getline(is, line);
    if (!is) throw std::runtime_error("batch file: truncated header");
    if (line == "end-header") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "model")
      ls >> batch.model;
    else if (key == "n")
      ls >> n;
    else if (key == "theta_dim")
      ls >> pd;
    else if (key == "gamma_dim")
      ls >> qd;
    else if (key == "y_dim")
      ls >> dd;
    else if (key == "seed")
      ls >> batch.seed;
    else if (key == "theta_names") {
      std::string s;
      while (ls >> s) batch.theta_cols.push_back(s);
    } else if (key == "gamma_names") {
      std::string s;
      while (ls >> s) batch.gamma_cols.push_back(s);
    }
    // unknown keys (e.g. layout) are informational
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tmp;
  tmp.resize(n, pd);
  read_doubles(is, tmp.data(), static_cast<std::size_t>(tmp.size()));
  batch.theta = tmp;
  tmp.resize(n, qd);
  read_doubles(is, tmp.data(), static_cast<std::size_t>(tmp.size()));
  batch.gamma = tmp;
  tmp.resize(n, dd);
  read_doubles(is, tmp.data(), static_cast<std::size_t>(tmp.size()));
  batch.y = tmp;
  batch.weight.resize(n);
  read_doubles(is, batch.weight.data(), static_cast<std::size_t>(n));
  if (!is) throw std::runtime_error("batch file: truncated data");
  return batch;
}

void export_batch_csv(const SimBatch& batch, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open csv file for writing: " + path);
  for (Eigen::Index j = 0; j < batch.theta.cols(); ++j)
    os << "theta_" << batch.theta_cols[static_cast<std::size_t>(j)] << ",";
  for (Eigen::Index j = 0; j < batch.gamma.cols(); ++j)
    os << "gamma_" << batch.gamma_cols[static_cast<std::size_t>(j)] << ",";
  for (Eigen::Index j = 0; j < batch.y.cols(); ++j) os << "y_" << j << ",";
  os << "weight\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    for (Eigen::Index j = 0; j < batch.theta.cols(); ++j) os << batch.theta(i, j) << ",";
    for (Eigen::Index j = 0; j < batch.gamma.cols(); ++j) os << batch.gamma(i, j) << ",";
    for (Eigen::Index j = 0; j < batch.y.cols(); ++j) os << batch.y(i, j) << ",";
    os << batch.weight[i] << "\n";
  }
}

}  // namespace npe::sim
