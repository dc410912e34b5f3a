#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "npe/families.hpp"
#include "npe/rng.hpp"

using namespace npe;
using families::Family;
using families::HeadParams;
using families::HeadSpec;

namespace {

HeadParams params_for(Family family, std::initializer_list<double> raw) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(raw.size()));
  Eigen::Index i = 0;
  for (double x : raw) v[i++] = x;
  return families::make_params(HeadSpec{family}, v);
}

// Independent negative-binomial pmf oracle: the recurrence
// p(0) = (k/(k+mu))^k,  p(g+1) = p(g) * (g+k)/(g+1) * mu/(k+mu),
// which shares no code with the lgamma-based implementation.
std::vector<double> nb_pmf_oracle(double mu, double k, int max_gamma) {
  std::vector<double> pmf(static_cast<std::size_t>(max_gamma) + 1);
  pmf[0] = std::pow(k / (k + mu), k);
  for (int g = 0; g < max_gamma; ++g)
    pmf[static_cast<std::size_t>(g) + 1] = pmf[static_cast<std::size_t>(g)] *
                                           (static_cast<double>(g) + k) /
                                           (static_cast<double>(g) + 1.0) * mu / (k + mu);
  return pmf;
}

}  // namespace

TEST_CASE("head specs: dims, names, discreteness") {
  CHECK(HeadSpec{Family::HetNormal}.output_dim() == 2);
  CHECK(HeadSpec{Family::LogNormal}.output_dim() == 2);
  CHECK(HeadSpec{Family::BernoulliLogit}.output_dim() == 1);
  CHECK(HeadSpec{Family::NegBinomialMeanDisp}.output_dim() == 2);
  CHECK(HeadSpec{Family::GammaShapeRate}.output_dim() == 2);
  for (const char* name : {"het_normal", "log_normal", "bernoulli_logit", "neg_binomial",
                           "gamma"}) {
    CHECK(HeadSpec::from_name(name).name() == name);
  }
  CHECK_THROWS(HeadSpec::from_name("poisson"));
  CHECK(HeadSpec{Family::BernoulliLogit}.discrete());
  CHECK(HeadSpec{Family::NegBinomialMeanDisp}.discrete());
  CHECK_FALSE(HeadSpec{Family::HetNormal}.discrete());
}

TEST_CASE("log_density anchor values") {
  auto std_normal = params_for(Family::HetNormal, {0.0, 0.0});
  CHECK(families::log_density(HeadSpec{Family::HetNormal}, std_normal, 0.0) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  auto half = params_for(Family::BernoulliLogit, {0.0});
  CHECK(families::log_density(HeadSpec{Family::BernoulliLogit}, half, 1.0) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("neg binomial pmf matches the recurrence oracle and normalizes") {
  const double mu = 3.0, k = 7.0;
  auto params = params_for(Family::NegBinomialMeanDisp, {std::log(mu), std::log(k)});
  HeadSpec head{Family::NegBinomialMeanDisp};
  auto oracle = nb_pmf_oracle(mu, k, 400);
  double total = 0.0;
  for (int g = 0; g <= 400; ++g) {
    const double pmf = std::exp(families::log_density(head, params, g));
    CHECK(pmf == doctest::Approx(oracle[static_cast<std::size_t>(g)]).epsilon(1e-10));
    total += pmf;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("cdf anchors and discrete partial sums") {
  CHECK(families::cdf(HeadSpec{Family::HetNormal},
                      params_for(Family::HetNormal, {2.0, std::log(3.0)}), 2.0) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(families::cdf(HeadSpec{Family::LogNormal}, params_for(Family::LogNormal, {0.0, 0.0}),
                      1.0) == doctest::Approx(0.5).epsilon(1e-10));

  const double mu = 3.0, k = 7.0;
  auto params = params_for(Family::NegBinomialMeanDisp, {std::log(mu), std::log(k)});
  HeadSpec head{Family::NegBinomialMeanDisp};
  auto oracle = nb_pmf_oracle(mu, k, 60);
  double partial = 0.0;
  for (int g = 0; g <= 10; ++g) {
    partial += oracle[static_cast<std::size_t>(g)];
    CHECK(families::cdf(head, params, g) == doctest::Approx(partial).epsilon(1e-10));
  }
}

TEST_CASE("cdf is monotone and in [0,1]") {
  Rng rng(12);
  for (auto family : {Family::HetNormal, Family::LogNormal, Family::GammaShapeRate}) {
    HeadSpec head{family};
    auto params = params_for(family, {rng.normal(), rng.normal() * 0.5});
    double prev = -1.0;
    for (double g = 0.05; g < 20.0; g += 0.37) {
      const double c = families::cdf(head, params, g);
      CHECK(c >= prev);
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
      prev = c;
    }
  }
}

TEST_CASE("quantile anchors") {
  auto std_normal = params_for(Family::HetNormal, {0.0, 0.0});
  HeadSpec het{Family::HetNormal};
  CHECK(families::quantile(het, std_normal, 0.5) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(families::quantile(het, std_normal, 0.95) ==
        doctest::Approx(1.6448536269514722).epsilon(1e-6));
  auto p03 = params_for(Family::BernoulliLogit, {std::log(0.3 / 0.7)});
  CHECK(families::quantile(HeadSpec{Family::BernoulliLogit}, p03, 0.5) == 0.0);
  CHECK_THROWS_AS(families::quantile(het, std_normal, 0.0), std::domain_error);
  CHECK_THROWS_AS(families::quantile(het, std_normal, 1.0), std::domain_error);
}

TEST_CASE("quantile inverts cdf for continuous families") {
  Rng rng(3);
  for (auto family : {Family::HetNormal, Family::LogNormal, Family::GammaShapeRate}) {
    HeadSpec head{family};
    for (int rep = 0; rep < 20; ++rep) {
      auto params = params_for(family, {rng.normal(), rng.normal() * 0.5});
      const double x = family == Family::HetNormal ? rng.normal(0.0, 3.0)
                                                   : rng.gamma(2.0, 1.0) + 0.01;
      const double q = families::cdf(head, params, x);
      if (q < 1e-8 || q > 1.0 - 1e-8) continue;
      CHECK(families::quantile(head, params, q) == doctest::Approx(x).epsilon(1e-6));
    }
  }
}

TEST_CASE("discrete quantile is the smallest gamma with cdf >= q") {
  const double mu = 11.0, k = 2.5;
  auto params = params_for(Family::NegBinomialMeanDisp, {std::log(mu), std::log(k)});
  HeadSpec head{Family::NegBinomialMeanDisp};
  for (double q : {0.05, 0.3, 0.5, 0.9, 0.99}) {
    const double g = families::quantile(head, params, q);
    CHECK(families::cdf(head, params, g) >= q);
    if (g > 0.0) CHECK(families::cdf(head, params, g - 1.0) < q);
  }
}

TEST_CASE("sample means match analytic means") {
  Rng rng(99);
  const long n = 1000000;

  SUBCASE("gamma shape=2 rate=3") {
    auto params = params_for(Family::GammaShapeRate, {std::log(2.0), std::log(3.0)});
    double sum = 0.0;
    for (long i = 0; i < n; ++i)
      sum += families::sample(HeadSpec{Family::GammaShapeRate}, params, rng);
    const double mean = 2.0 / 3.0, sd = std::sqrt(2.0) / 3.0;
    CHECK(std::abs(sum / static_cast<double>(n) - mean) < 4.0 * sd / std::sqrt(n));
  }
  SUBCASE("het normal degenerate sd clamp") {
    auto params = params_for(Family::HetNormal, {5.0, -1e9});  // sigma clamps to 1e-6
    for (int i = 0; i < 1000; ++i) {
      const double draw = families::sample(HeadSpec{Family::HetNormal}, params, rng);
      CHECK(std::abs(draw - 5.0) < 6.0 * families::kScaleMin);
    }
  }
  SUBCASE("bernoulli near-1 clamp") {
    auto params = params_for(Family::BernoulliLogit, {1e9});  // p clamps to 1 - 1e-7
    long ones = 0;
    for (long i = 0; i < 100000; ++i)
      ones += families::sample(HeadSpec{Family::BernoulliLogit}, params, rng) > 0.5;
    CHECK(static_cast<double>(ones) / 100000.0 >= 1.0 - 10.0 * families::kProbEps);
  }
}

TEST_CASE("densities normalize for random valid params") {
  Rng rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    {  // het normal over a wide grid
      auto params = params_for(Family::HetNormal, {rng.normal(), 0.3 * rng.normal()});
      const double mu = params.natural[0], sd = params.natural[1];
      double total = 0.0;
      const double h = sd / 50.0;
      for (double x = mu - 10.0 * sd; x <= mu + 10.0 * sd; x += h)
        total += std::exp(families::log_density(HeadSpec{Family::HetNormal}, params, x)) * h;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
    }
    {  // bernoulli
      auto params = params_for(Family::BernoulliLogit, {rng.normal()});
      const double total =
          std::exp(families::log_density(HeadSpec{Family::BernoulliLogit}, params, 0.0)) +
          std::exp(families::log_density(HeadSpec{Family::BernoulliLogit}, params, 1.0));
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    {  // neg binomial pmf summation
      auto params = params_for(Family::NegBinomialMeanDisp,
                               {rng.uniform(0.0, 2.5), rng.uniform(-0.5, 1.5)});
      double total = 0.0;
      for (int g = 0; g < 3000; ++g)
        total += std::exp(
            families::log_density(HeadSpec{Family::NegBinomialMeanDisp}, params, g));
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("links are total: any raw vector gives finite density somewhere") {
  Rng rng(21);
  for (auto family : {Family::HetNormal, Family::LogNormal, Family::BernoulliLogit,
                      Family::NegBinomialMeanDisp, Family::GammaShapeRate}) {
    HeadSpec head{family};
    for (int rep = 0; rep < 50; ++rep) {
      Eigen::VectorXd raw(head.output_dim());
      for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = rng.normal(0.0, 50.0);
      auto params = families::make_params(head, raw);
      const double gamma = head.discrete() ? (family == Family::BernoulliLogit ? 1.0 : 3.0)
                                           : (family == Family::HetNormal ? 0.3 : 0.7);
      CHECK(std::isfinite(families::log_density(head, params, gamma)));
    }
  }
}

TEST_CASE("support violations throw domain errors naming the family") {
  auto ln = params_for(Family::LogNormal, {0.0, 0.0});
  CHECK_THROWS_AS(families::log_density(HeadSpec{Family::LogNormal}, ln, -1.0),
                  std::domain_error);
  auto bern = params_for(Family::BernoulliLogit, {0.0});
  CHECK_THROWS_AS(families::log_density(HeadSpec{Family::BernoulliLogit}, bern, 0.5),
                  std::domain_error);
  auto nb = params_for(Family::NegBinomialMeanDisp, {1.0, 1.0});
  CHECK_THROWS_AS(families::log_density(HeadSpec{Family::NegBinomialMeanDisp}, nb, 2.5),
                  std::domain_error);
  CHECK_THROWS_AS(families::log_density(HeadSpec{Family::NegBinomialMeanDisp}, nb, -1.0),
                  std::domain_error);
  try {
    families::log_density(HeadSpec{Family::LogNormal}, ln, -1.0);
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("log_normal") != std::string::npos);
  }
}

TEST_CASE("grad_raw matches central finite differences of log_density") {
  Rng rng(5);
  for (auto family : {Family::HetNormal, Family::LogNormal, Family::BernoulliLogit,
                      Family::NegBinomialMeanDisp, Family::GammaShapeRate}) {
    HeadSpec head{family};
    for (int rep = 0; rep < 25; ++rep) {
      Eigen::VectorXd raw(head.output_dim());
      for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = rng.normal(0.0, 0.8);
      double gamma;
      switch (family) {
        case Family::BernoulliLogit: gamma = rng.bernoulli(0.5) ? 1.0 : 0.0; break;
        case Family::NegBinomialMeanDisp: gamma = static_cast<double>(rng.poisson(4.0)); break;
        case Family::HetNormal: gamma = rng.normal(); break;
        default: gamma = rng.gamma(2.0, 0.7) + 0.05; break;
      }
      auto params = families::make_params(head, raw);
      Eigen::VectorXd grad = families::grad_raw(head, params, gamma);
      const double h = 1e-5;
      for (Eigen::Index i = 0; i < raw.size(); ++i) {
        Eigen::VectorXd up = raw, dn = raw;
        up[i] += h;
        dn[i] -= h;
        const double fd = (families::log_density(head, families::make_params(head, up), gamma) -
                           families::log_density(head, families::make_params(head, dn), gamma)) /
                          (2.0 * h);
        CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-4));
      }
    }
  }
}
