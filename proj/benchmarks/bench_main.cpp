#include <benchmark/benchmark.h>

#include "npe/families.hpp"
#include "npe/gibbs.hpp"
#include "npe/net.hpp"
#include "npe/rng.hpp"
#include "npe/sim_batch.hpp"

namespace {

void BM_FamilyLogDensity(benchmark::State& state) {
  npe::families::HeadSpec head{npe::families::Family::NegBinomialMeanDisp};
  Eigen::VectorXd raw(2);
  raw << 3.0, 0.5;
  auto params = npe::families::make_params(head, raw);
  for (auto _ : state)
    benchmark::DoNotOptimize(npe::families::log_density(head, params, 17.0));
}
BENCHMARK(BM_FamilyLogDensity);

void BM_NetForward(benchmark::State& state) {
  npe::nn::NetworkArch arch;
  arch.input_dim = 20;
  arch.hidden = {50, 10};
  arch.output_dim = 2;
  auto net = npe::nn::make_network(arch, 7);
  Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(20, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(z));
}
BENCHMARK(BM_NetForward);

void BM_SpatialEpidemicSim(benchmark::State& state) {
  npe::sim::SirSpatialModel model;
  npe::Rng rng(11);
  Eigen::VectorXd theta(3);
  theta << 0.5, 0.3, 0.3;
  std::uint64_t i = 0;
  for (auto _ : state) {
    npe::Rng r = npe::Rng::derive(11, i++);
    benchmark::DoNotOptimize(npe::sim::simulate_record_fixed(model, theta, r));
  }
}
BENCHMARK(BM_SpatialEpidemicSim);

void BM_GibbsSweeps(benchmark::State& state) {
  npe::Rng rng(3);
  npe::sim::SparseRegModel model;
  auto rec = npe::sim::simulate_record(npe::sim::ModelConfig{model}, rng);
  Eigen::VectorXd y = rec.y.head(model.n);
  Eigen::MatrixXd X(model.n, model.p);
  for (int i = 0; i < model.n; ++i) X.row(i) = rec.y.segment(model.n + i * model.p, model.p);
  npe::gibbs::GibbsConfig cfg;
  cfg.burn_in = 0;
  cfg.iterations = 100;
  for (auto _ : state) {
    cfg.seed++;
    benchmark::DoNotOptimize(npe::gibbs::run(y, X, {}, cfg));
  }
}
BENCHMARK(BM_GibbsSweeps);

}  // namespace

BENCHMARK_MAIN();
