#include "npe/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "npe/mathutil.hpp"

namespace npe::gibbs {

GibbsChain run(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
               const sim::linreg::spike_slab::Hyper& hyper, const GibbsConfig& config) {
  const auto n = y.size();
  const auto p = X.cols();
  if (X.rows() != n) throw std::invalid_argument("gibbs: X rows and y length differ");
  if (n < 1 || p < 1) throw std::invalid_argument("gibbs: empty data");
  if (config.iterations < 1 || config.burn_in < 0 || config.thin < 1)
    throw std::invalid_argument("gibbs: bad iteration counts");

  Rng rng(config.seed);
  const double v2 = hyper.v * hyper.v;
  const double tau2 = hyper.tau * hyper.tau;
  Eigen::VectorXd sxx(p);
  for (Eigen::Index j = 0; j < p; ++j) sxx[j] = X.col(j).squaredNorm();

  // State, initialized from the prior means / empty model.
  double beta0 = y.mean();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd incl = Eigen::VectorXd::Zero(p);
  double sigma2 = std::max(1e-6, (y.array() - beta0).matrix().squaredNorm() /
                                     static_cast<double>(std::max<Eigen::Index>(n - 1, 1)));
  double pi = hyper.c / (hyper.c + hyper.d);

  // Residual r = y - beta0 - X beta, maintained incrementally.
  Eigen::VectorXd r = y.array() - beta0;

  const long total = config.burn_in + config.iterations * config.thin;
  const long kept = config.iterations;
  GibbsChain chain;
  chain.beta.resize(kept, p);
  chain.incl.resize(kept, p);
  chain.beta0.resize(kept);
  chain.sigma2.resize(kept);
  chain.pi.resize(kept);
  long stored = 0;

  for (long it = 0; it < total; ++it) {
    // Inclusion + coefficient, with beta_j marginalized in the odds.
    for (Eigen::Index j = 0; j < p; ++j) {
      if (incl[j] != 0.0) r += X.col(j) * beta[j];  // residual without covariate j
      const double sxr = X.col(j).dot(r);
      const double denom = sigma2 + tau2 * sxx[j];
      const double log_bf = 0.5 * tau2 * sxr * sxr / (sigma2 * denom) +
                            0.5 * std::log(sigma2 / denom);
      const double log_odds = std::log(pi) - std::log1p(-pi) + log_bf;
      const bool in = rng.uniform() < expit(log_odds);
      if (in) {
        const double mean = tau2 * sxr / denom;
        const double sd = std::sqrt(sigma2 * tau2 / denom);
        beta[j] = rng.normal(mean, sd);
        incl[j] = 1.0;
        r -= X.col(j) * beta[j];
      } else {
        beta[j] = 0.0;
        incl[j] = 0.0;
      }
    }

    // Intercept.
    r = r.array() + beta0;  // residual without the intercept
    {
      const double prec = static_cast<double>(n) / sigma2 + 1.0 / v2;
      const double mean = r.sum() / sigma2 / prec;
      beta0 = rng.normal(mean, std::sqrt(1.0 / prec));
    }
    r = r.array() - beta0;

    // Noise variance.
    sigma2 = rng.inv_gamma(hyper.a + 0.5 * static_cast<double>(n),
                           hyper.b + 0.5 * r.squaredNorm());

    // Inclusion probability.
    const double s = incl.sum();
    pi = rng.beta(hyper.c + s, hyper.d + static_cast<double>(p) - s);

    if (it >= config.burn_in && (it - config.burn_in) % config.thin == 0) {
      chain.beta.row(stored) = beta;
      chain.incl.row(stored) = incl;
      chain.beta0[stored] = beta0;
      chain.sigma2[stored] = sigma2;
      chain.pi[stored] = pi;
      ++stored;
    }
  }
  return chain;
}

Eigen::VectorXd pip_estimate(const GibbsChain& chain) {
  if (chain.draws() == 0) throw std::invalid_argument("pip_estimate: empty chain");
  return chain.incl.colwise().mean();
}

namespace {

double sorted_quantile(const std::vector<double>& sorted, double q) {
  // Linear interpolation between order statistics (type-7).
  const double h = q * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

ScalarSummary sigma_posterior_summary(const GibbsChain& chain, double level) {
  if (chain.draws() == 0) throw std::invalid_argument("sigma_posterior_summary: empty chain");
  std::vector<double> sigma(static_cast<std::size_t>(chain.draws()));
  for (long i = 0; i < chain.draws(); ++i)
    sigma[static_cast<std::size_t>(i)] = std::sqrt(chain.sigma2[i]);
  std::sort(sigma.begin(), sigma.end());
  ScalarSummary s;
  s.level = level;
  const double tail = 0.5 * (1.0 - level);
  s.median = sorted_quantile(sigma, 0.5);
  s.lo = sorted_quantile(sigma, tail);
  s.hi = sorted_quantile(sigma, 1.0 - tail);
  return s;
}

Eigen::MatrixXd predictive_draws(const GibbsChain& chain, const Eigen::MatrixXd& X_test,
                                 std::uint64_t seed) {
  if (chain.draws() == 0) throw std::invalid_argument("predictive_draws: empty chain");
  if (X_test.cols() != chain.beta.cols())
    throw std::invalid_argument("predictive_draws: X_test has wrong number of columns");
  Rng rng(seed);
  Eigen::MatrixXd out(chain.draws(), X_test.rows());
  for (long i = 0; i < chain.draws(); ++i) {
    const double sd = std::sqrt(chain.sigma2[i]);
    Eigen::VectorXd mean =
        (X_test * chain.beta.row(i).transpose()).array() + chain.beta0[i];
    for (Eigen::Index k = 0; k < X_test.rows(); ++k) out(i, k) = rng.normal(mean[k], sd);
  }
  return out;
}

void save_chain_csv(const GibbsChain& chain, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open chain file for writing: " + path);
  const auto p = chain.beta.cols();
  for (Eigen::Index j = 1; j <= p; ++j) os << "beta_" << j << ",";
  for (Eigen::Index j = 1; j <= p; ++j) os << "incl_" << j << ",";
  os << "beta0,sigma2,pi\n";
  os.precision(12);
  for (long i = 0; i < chain.draws(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j) os << chain.beta(i, j) << ",";
    for (Eigen::Index j = 0; j < p; ++j) os << chain.incl(i, j) << ",";
    os << chain.beta0[i] << "," << chain.sigma2[i] << "," << chain.pi[i] << "\n";
  }
}

}  // namespace npe::gibbs
