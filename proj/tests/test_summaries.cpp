#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/QR>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "npe/autologistic.hpp"
#include "npe/mathutil.hpp"
#include "npe/rng.hpp"
#include "npe/summaries.hpp"

using namespace npe;

TEST_CASE("least squares summary matches an independent QR oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 40, p = 4;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
      y[i] = rng.normal(0.0, 2.0);
    }
    summaries::LeastSquaresOptions opts;
    opts.include_coef_sd = true;
    Eigen::VectorXd got = summaries::least_squares_summary(y, x, opts);
    REQUIRE(got.size() == p + 3);

    // Oracle: Householder QR on the intercept-augmented design.
    Eigen::MatrixXd xa(n, p + 1);
    xa.col(0).setOnes();
    xa.rightCols(p) = x;
    Eigen::VectorXd beta = xa.householderQr().solve(y);
    const double rss = (y - xa * beta).squaredNorm();
    const double log_sigma = 0.5 * std::log(rss / static_cast<double>(n - p - 1));
    for (int j = 0; j <= p; ++j) CHECK(got[j] == doctest::Approx(beta[j]).epsilon(1e-10));
    CHECK(got[p + 1] == doctest::Approx(log_sigma).epsilon(1e-10));
    const double mean = beta.mean();
    const double sd = std::sqrt((beta.array() - mean).square().sum() / p);
    CHECK(got[p + 2] == doctest::Approx(sd).epsilon(1e-10));
  }
}

TEST_CASE("least squares degenerate fits clamp the log residual sd") {
  Rng rng(2);
  const int n = 12, p = 3;
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
  Eigen::VectorXd beta = Eigen::VectorXd::LinSpaced(p, -1.0, 1.0);
  Eigen::VectorXd y = (x * beta).array() + 0.5;  // noiseless
  Eigen::VectorXd got = summaries::least_squares_summary(y, x);
  CHECK(got[0] == doctest::Approx(0.5).epsilon(1e-8));
  for (int j = 0; j < p; ++j) CHECK(got[j + 1] == doctest::Approx(beta[j]).epsilon(1e-8));
  CHECK(got[p + 1] == doctest::Approx(summaries::kLogResidClamp));

  // A saturated design (no residual degree of freedom) is rejected outright.
  Eigen::MatrixXd xs = x.topRows(p + 1);
  Eigen::VectorXd ys(p + 1);
  for (int i = 0; i <= p; ++i) ys[i] = rng.normal();
  CHECK_THROWS_AS(summaries::least_squares_summary(ys, xs), std::invalid_argument);
}

TEST_CASE("least squares rank deficiency names the column") {
  Rng rng(4);
  const int n = 20, p = 3;
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = 2.0 * x(i, 0);  // collinear
    x(i, 2) = rng.normal();
  }
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.normal();
  CHECK_THROWS_WITH_AS(summaries::least_squares_summary(y, x),
                       doctest::Contains("column"), std::invalid_argument);
}

TEST_CASE("rank transform examples, ties, clamps, persistence") {
  Eigen::MatrixXd training(3, 1);
  training << 5.0, 1.0, 9.0;
  auto rank = summaries::RankToUnit::fit(training);
  CHECK(rank.apply(0, 5.0) == doctest::Approx(0.0));
  CHECK(rank.apply(0, 1.0) == doctest::Approx(-2.0 / 3.0));
  CHECK(rank.apply(0, 9.0) == doctest::Approx(2.0 / 3.0));
  CHECK(rank.apply(0, -100.0) == -1.0);
  CHECK(rank.apply(0, 100.0) == 1.0);

  Eigen::MatrixXd tied(2, 1);
  tied << 1.0, 1.0;
  auto rank_tied = summaries::RankToUnit::fit(tied);
  CHECK(rank_tied.apply(0, 1.0) == doctest::Approx(0.0));  // average rank 1.5 -> 0

  CHECK_THROWS(summaries::RankToUnit{}.apply(0, 1.0));

  std::stringstream ss;
  rank.save(ss);
  auto loaded = summaries::RankToUnit::load(ss);
  for (double v : {-3.0, 1.0, 4.2, 5.0, 9.0, 20.0})
    CHECK(loaded.apply(0, v) == rank.apply(0, v));
}

TEST_CASE("rank transform output always lies in [-1,1]") {
  Rng rng(8);
  Eigen::MatrixXd training(200, 2);
  for (Eigen::Index i = 0; i < 200; ++i) {
    training(i, 0) = rng.normal();
    training(i, 1) = rng.gamma(1.0, 3.0);
  }
  auto rank = summaries::RankToUnit::fit(training);
  for (int rep = 0; rep < 500; ++rep) {
    Eigen::VectorXd v(2);
    v << rng.normal(0.0, 10.0), rng.normal(0.0, 10.0);
    Eigen::VectorXd t = rank.apply(v);
    CHECK(t.minCoeff() >= -1.0);
    CHECK(t.maxCoeff() <= 1.0);
  }
}

TEST_CASE("geary c by hand enumeration and null expectation") {
  SUBCASE("2x2 checkerboard") {
    auto adj = sim::autologistic::rook_lattice(2, 2);
    Eigen::VectorXd x(4);
    x << 0.0, 1.0, 1.0, 0.0;
    // 4 undirected rook edges, all with (x_i-x_j)^2 = 1; W = 8 (directed),
    // sum (x_i - 0.5)^2 = 1; C = (n-1)*sum_ij w_ij (xi-xj)^2 / (2*W*SS) = 3*8/(16*1).
    auto g = summaries::geary_c(x, adj);
    CHECK_FALSE(g.degenerate);
    CHECK(g.c == doctest::Approx(3.0 * 8.0 / (2.0 * 8.0 * 1.0)).epsilon(1e-12));
  }
  SUBCASE("iid residuals have expectation 1") {
    Rng rng(6);
    auto adj = sim::autologistic::rook_lattice(4, 4);
    double total = 0.0;
    const int reps = 10000;
    for (int rep = 0; rep < reps; ++rep) {
      Eigen::VectorXd x(16);
      for (int i = 0; i < 16; ++i) x[i] = rng.normal();
      total += summaries::geary_c(x, adj).c;
    }
    CHECK(total / reps == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("constant input: sentinel 1 with flag") {
    auto adj = sim::autologistic::rook_lattice(2, 2);
    auto g = summaries::geary_c(Eigen::VectorXd::Constant(4, 3.3), adj);
    CHECK(g.degenerate);
    CHECK(g.c == 1.0);
  }
}

TEST_CASE("pca: axis-aligned data, known covariance, reconstruction, persistence") {
  Rng rng(13);
  SUBCASE("single-axis data explains everything with one component") {
    Eigen::MatrixXd rows(50, 3);
    rows.setZero();
    for (int i = 0; i < 50; ++i) rows(i, 1) = rng.normal();
    auto basis = summaries::pca_fit_variance_target(rows, 0.99);
    CHECK(basis.loadings.cols() == 1);
    CHECK(std::abs(basis.loadings(1, 0)) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(basis.explained_fraction[0] == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("diag(2,1) covariance eigenstructure") {
    const int n = 100000;
    Eigen::MatrixXd rows(n, 2);
    for (int i = 0; i < n; ++i) {
      rows(i, 0) = rng.normal(0.0, std::sqrt(2.0));
      rows(i, 1) = rng.normal();
    }
    auto basis = summaries::pca_fit(rows, 2);
    CHECK(std::abs(basis.loadings(0, 0)) == doctest::Approx(1.0).epsilon(0.02));
    CHECK(basis.explained_fraction[0] == doctest::Approx(2.0 / 3.0).epsilon(0.02));
  }
  SUBCASE("orthonormal loadings, nonincreasing fractions, reconstruction bound") {
    const int n = 300, d = 8;
    Eigen::MatrixXd rows(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) rows(i, j) = rng.normal() * (1.0 + j % 3);
    auto basis = summaries::pca_fit_variance_target(rows, 0.9);
    Eigen::MatrixXd gram = basis.loadings.transpose() * basis.loadings;
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <
          1e-10);
    for (Eigen::Index k = 1; k < basis.explained_fraction.size(); ++k)
      CHECK(basis.explained_fraction[k] <= basis.explained_fraction[k - 1] + 1e-12);
    double total_sq = 0.0, err_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd y = rows.row(i);
      Eigen::VectorXd back = basis.reconstruct(basis.apply(y));
      err_sq += (y - back).squaredNorm();
      total_sq += (y - basis.mean).squaredNorm();
    }
    CHECK(err_sq / total_sq <= 0.1 + 0.02);  // 1 - variance target, with slack
  }
  SUBCASE("persistence round trip") {
    Eigen::MatrixXd rows(30, 4);
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 4; ++j) rows(i, j) = rng.normal();
    auto basis = summaries::pca_fit(rows, 2);
    std::stringstream ss;
    basis.save(ss);
    auto loaded = summaries::PcaBasis::load(ss);
    Eigen::VectorXd probe = rows.row(7);
    CHECK((loaded.apply(probe) - basis.apply(probe)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("m beyond rank errors") {
    Eigen::MatrixXd rows(3, 5);
    rows.setRandom();
    CHECK_THROWS(summaries::pca_fit(rows, 4));
  }
}

TEST_CASE("streamed pca accumulator equals the batch fit") {
  Rng rng(19);
  const int n = 100, d = 5;
  Eigen::MatrixXd rows(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) rows(i, j) = rng.normal();
  summaries::PcaAccumulator acc(d);
  for (int i = 0; i < n; ++i) acc.add(rows.row(i));
  auto streamed = acc.finalize_components(3);
  auto batch = summaries::pca_fit(rows, 3);
  for (int k = 0; k < 3; ++k) {
    // Columns may differ by sign.
    const double dot = streamed.loadings.col(k).dot(batch.loadings.col(k));
    CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("prior quantile transform anchors and round trips") {
  auto uniform = summaries::PriorDist::uniform(0.1, 0.9);
  CHECK(summaries::prior_quantile_transform(0.5, uniform).value ==
        doctest::Approx(0.0).epsilon(1e-10));

  auto exp5 = summaries::PriorDist::exponential(1.0 / 5.0);
  const double median = 5.0 * std::log(2.0);
  CHECK(summaries::prior_quantile_transform(median, exp5).value ==
        doctest::Approx(0.0).epsilon(1e-8));

  // Gamma(2, scale 20) at 0.05: independent Simpson quadrature of the pdf.
  auto gam = summaries::PriorDist::gamma(2.0, 20.0);
  auto pdf = [](double x) { return x / 400.0 * std::exp(-x / 20.0); };
  double cdf = 0.0;
  const int steps = 20000;
  const double h = 0.05 / steps;
  for (int i = 0; i < steps; ++i) {
    const double a = i * h;
    cdf += h / 6.0 * (pdf(a) + 4.0 * pdf(a + 0.5 * h) + pdf(a + h));
  }
  CHECK(summaries::prior_quantile_transform(0.05, gam).value ==
        doctest::Approx(norm_quantile(cdf)).epsilon(1e-6));

  Rng rng(3);
  for (const auto& prior :
       {uniform, exp5, gam, summaries::PriorDist::log_normal(0.3, 0.8),
        summaries::PriorDist::normal(-1.0, 2.0)}) {
    for (int rep = 0; rep < 50; ++rep) {
      const double theta = prior.quantile(rng.uniform(0.01, 0.99));
      auto t = summaries::prior_quantile_transform(theta, prior);
      CHECK_FALSE(t.clamped);
      CHECK(summaries::prior_quantile_inverse(t.value, prior) ==
            doctest::Approx(theta).epsilon(1e-8));
    }
  }

  // Boundary values clamp with a flag.
  CHECK(summaries::prior_quantile_transform(0.1, uniform).clamped);
  CHECK(summaries::prior_quantile_transform(0.9, uniform).clamped);
}

TEST_CASE("prior quantile transform of prior draws is standard normal") {
  Rng rng(17);
  auto prior = summaries::PriorDist::gamma(2.0, 20.0);
  std::vector<double> u;
  for (int i = 0; i < 100000; ++i) {
    const double theta = rng.gamma(2.0, 20.0);
    u.push_back(norm_cdf(summaries::prior_quantile_transform(theta, prior).value));
  }
  CHECK(ks_uniform(u) < 0.01);
}
