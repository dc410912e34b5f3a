#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "npe/conjugate.hpp"
#include "npe/diagnostics.hpp"
#include "npe/mathutil.hpp"
#include "npe/net.hpp"
#include "npe/rng.hpp"

using namespace npe;
using families::Family;
using families::HeadSpec;
namespace fs = std::filesystem;

namespace {

// A network that ignores its input and outputs fixed raw values; handy for
// oracle heads whose parameters the test controls exactly.
nn::Network constant_net(int input_dim, const Eigen::VectorXd& raw) {
  nn::NetworkArch arch;
  arch.input_dim = input_dim;
  arch.hidden = {};
  arch.output_dim = static_cast<int>(raw.size());
  nn::Network net;
  net.arch = arch;
  net.weights.push_back(Eigen::MatrixXd::Zero(raw.size(), input_dim));
  net.biases.push_back(raw);
  return net;
}

// Conjugate-oracle network: z = (posterior mean, log posterior sd) passed
// straight through as HetNormal raw outputs.
nn::Network passthrough_net(int dim) {
  nn::NetworkArch arch;
  arch.input_dim = dim;
  arch.hidden = {};
  arch.output_dim = dim;
  nn::Network net;
  net.arch = arch;
  net.weights.push_back(Eigen::MatrixXd::Identity(dim, dim));
  net.biases.push_back(Eigen::VectorXd::Zero(dim));
  return net;
}

}  // namespace

TEST_CASE("log score anchors and determinism") {
  HeadSpec head{Family::HetNormal};
  auto net = constant_net(1, Eigen::VectorXd::Zero(2));  // standard normal head
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 10);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(10);
  const double score = diagnostics::log_score(net, head, z, gamma);
  CHECK(score == doctest::Approx(-9.189385332046727).epsilon(1e-10));
  CHECK(diagnostics::log_score(net, head, z, gamma) == score);

  // Order invariance.
  Rng rng(4);
  Eigen::VectorXd mixed(10);
  for (int i = 0; i < 10; ++i) mixed[i] = rng.normal();
  Eigen::VectorXd reversed = mixed.reverse();
  CHECK(diagnostics::log_score(net, head, z, mixed) ==
        doctest::Approx(diagnostics::log_score(net, head, z, reversed)).epsilon(1e-12));
}

TEST_CASE("pit basics") {
  HeadSpec head{Family::HetNormal};
  auto net = constant_net(1, Eigen::VectorXd::Zero(2));
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 1);
  Eigen::VectorXd at_median = Eigen::VectorXd::Zero(1);
  auto pit = diagnostics::pit(net, head, z, at_median);
  CHECK(pit[0] == doctest::Approx(0.5).epsilon(1e-10));
  Rng rng(1);
  CHECK_THROWS(diagnostics::pit(net, HeadSpec{Family::NegBinomialMeanDisp}, z, at_median));
  CHECK_THROWS(diagnostics::randomized_pit(net, head, z, at_median, rng));
}

TEST_CASE("ks statistic of a hand-computed fixture") {
  // n=4 sorted values 0.1,0.2,0.6,0.8: D+ = max(i/n - u_i) = 0.3 at i=2,
  // D- = max(u_i - (i-1)/n) = 0.1; D = 0.3.
  std::vector<double> u{0.6, 0.1, 0.8, 0.2};
  CHECK(ks_uniform(u) == doctest::Approx(0.3).epsilon(1e-12));
  auto gate = diagnostics::ks_gate(u, 0.35);
  CHECK(gate.pass);
  CHECK_FALSE(diagnostics::ks_gate(u, 0.2).pass);
}

TEST_CASE("analytic conjugate posterior is calibrated; halved sd is not") {
  Rng rng(42);
  const int n_obs = 5, n_val = 10000;
  HeadSpec head{Family::HetNormal};
  auto net = passthrough_net(2);
  Eigen::MatrixXd z_exact(2, n_val), z_bad(2, n_val);
  Eigen::VectorXd gamma(n_val);
  for (int v = 0; v < n_val; ++v) {
    const double theta = sim::conjugate::sample_prior(rng);
    Eigen::VectorXd y = sim::conjugate::simulate(theta, n_obs, rng);
    auto post = sim::conjugate::analytic_posterior(y);
    gamma[v] = theta;
    z_exact.col(v) << post.mean, std::log(post.sd);
    z_bad.col(v) << post.mean, std::log(post.sd / 2.0);
  }
  auto pit_exact = diagnostics::pit(net, head, z_exact, gamma);
  auto pit_bad = diagnostics::pit(net, head, z_bad, gamma);
  CHECK(ks_uniform(pit_exact) < 1.36 / std::sqrt(static_cast<double>(n_val)) * 1.5);
  CHECK(ks_uniform(pit_bad) > 0.05);

  // Coverage of the analytic posterior at level 0.9.
  auto mc = diagnostics::mad_and_coverage(net, head, z_exact, gamma, 0.9);
  CHECK(mc.coverage == doctest::Approx(0.9).epsilon(0.02));
}

TEST_CASE("randomized pit is uniform when truth is drawn from the head") {
  Rng rng(7);
  const int n = 20000;
  HeadSpec head{Family::NegBinomialMeanDisp};
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, n);
  Eigen::VectorXd gamma(n);
  Eigen::VectorXd raw(2);
  raw << std::log(6.0), std::log(2.0);
  auto net = constant_net(1, raw);
  auto params = families::make_params(head, raw);
  for (int i = 0; i < n; ++i) gamma[i] = families::sample(head, params, rng);
  auto pit = diagnostics::randomized_pit(net, head, z, gamma, rng);
  CHECK(ks_uniform(pit) < 1.36 / std::sqrt(static_cast<double>(n)) * 1.5);
}

TEST_CASE("binary metrics trivial anchors") {
  SUBCASE("perfect probabilities") {
    std::vector<double> p{1.0, 0.0, 1.0, 0.0};
    std::vector<double> y{1.0, 0.0, 1.0, 0.0};
    auto m = diagnostics::binary_metrics(p, y);
    CHECK(m.cross_entropy == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m.brier == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m.class_accuracy == 1.0);
    CHECK(m.class_accuracy_alt == 0.5);  // verbatim variant counts p<0.5 only
  }
  SUBCASE("coin-flip probabilities") {
    std::vector<double> p{0.5, 0.5, 0.5, 0.5};
    std::vector<double> y{1.0, 0.0, 1.0, 0.0};
    auto m = diagnostics::binary_metrics(p, y);
    CHECK(m.cross_entropy == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(m.brier == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("hand-computed mixed case") {
    std::vector<double> p{0.9, 0.2, 0.6};
    std::vector<double> y{1.0, 0.0, 0.0};
    auto m = diagnostics::binary_metrics(p, y);
    CHECK(m.cross_entropy ==
          doctest::Approx(-(std::log(0.9) + std::log(0.8) + std::log(0.4)) / 3.0)
              .epsilon(1e-12));
    CHECK(m.brier ==
          doctest::Approx((0.01 + 0.04 + 0.36) / 3.0).epsilon(1e-12));
    CHECK(m.class_accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.class_accuracy_alt == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("mad and coverage basics") {
  SUBCASE("median helper") {
    CHECK(diagnostics::median_of({3.0, 1.0, 2.0}) == 2.0);
    CHECK(diagnostics::median_of({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK_THROWS(diagnostics::median_of({}));
  }
  SUBCASE("point-mass head at truth") {
    std::vector<double> med{1.0, 2.0}, lo{1.0, 2.0}, hi{1.0, 2.0}, truth{1.0, 2.0};
    auto mc = diagnostics::mad_and_coverage_from_intervals(med, lo, hi, truth, 0.9);
    CHECK(mc.mad == 0.0);
    CHECK(mc.coverage == 1.0);
  }
  SUBCASE("hand-computed intervals") {
    std::vector<double> med{0.0, 3.0, 5.0};
    std::vector<double> lo{-1.0, 2.0, 4.0};
    std::vector<double> hi{1.0, 4.0, 6.0};
    std::vector<double> truth{0.5, 10.0, 4.2};
    auto mc = diagnostics::mad_and_coverage_from_intervals(med, lo, hi, truth, 0.9);
    CHECK(mc.mad == doctest::Approx(0.8));  // |0-0.5|, |3-10|, |5-4.2| -> median 0.8
    CHECK(mc.coverage == doctest::Approx(2.0 / 3.0));
  }
}

TEST_CASE("report files") {
  diagnostics::CalibrationReport report;
  report.ks_threshold = 0.05;
  diagnostics::TargetReport t;
  t.target = "beta_1";
  t.family = "het_normal";
  t.log_score = -1.2;
  t.ks_statistic = 0.013;
  t.ks_pass = true;
  t.n = 100;
  report.targets.push_back(t);

  std::ostringstream text;
  diagnostics::write_report_text(report, text);
  CHECK(text.str().find("beta_1") != std::string::npos);
  CHECK(text.str().find("PASS") != std::string::npos);

  const auto dir = fs::temp_directory_path();
  const std::string csv = (dir / "npe_report_test.csv").string();
  diagnostics::write_report_csv(report, csv);
  std::ifstream is(csv);
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "target,family,n,avg_log_score,ks_statistic,ks_threshold,ks_pass,discrete");

  const std::string pit_csv = (dir / "npe_pit_test.csv").string();
  diagnostics::write_pit_csv({0.3, 0.1, 0.9}, pit_csv);
  std::ifstream pis(pit_csv);
  std::string line;
  std::getline(pis, line);
  CHECK(line == "pit,uniform_quantile");
  std::getline(pis, line);
  CHECK(line.substr(0, 4) == "0.1,");
  fs::remove(csv);
  fs::remove(pit_csv);
}
