#include "npe/linreg.hpp"

#include <cmath>
#include <stdexcept>

namespace npe::sim::linreg {

Eigen::MatrixXd iid_design(int n, int p, Rng& rng) {
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
  return x;
}

Eigen::MatrixXd ar_design(int n, int p, double rho, Rng& rng) {
  if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("ar_design: |rho| must be < 1");
  Eigen::MatrixXd x(n, p);
  double innov = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    for (int j = 1; j < p; ++j) x(i, j) = rho * x(i, j - 1) + innov * rng.normal();
  }
  return x;
}

Eigen::VectorXd simulate(const Params& params, const Eigen::MatrixXd& X, Rng& rng) {
  if (X.cols() != params.beta.size())
    throw std::invalid_argument("linreg::simulate: design width does not match beta");
  Eigen::VectorXd y = Eigen::VectorXd::Constant(X.rows(), params.beta0) + X * params.beta;
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += rng.normal(0.0, params.sigma);
  return y;
}

Params sample_prior_normal_ig(int p, double coef_var, double ig_shape, double ig_scale,
                              Rng& rng) {
  Params params;
  double sd = std::sqrt(coef_var);
  params.beta0 = rng.normal(0.0, sd);
  params.beta.resize(p);
  for (int j = 0; j < p; ++j) params.beta[j] = rng.normal(0.0, sd);
  params.sigma = std::sqrt(rng.inv_gamma(ig_shape, ig_scale));
  return params;
}

namespace spike_slab {

Params sample_prior(int p, const Hyper& hyper, Rng& rng) {
  Params params;
  params.beta0 = rng.normal(0.0, hyper.v);
  params.pi_incl = rng.beta(hyper.c, hyper.d);
  params.sigma2 = rng.inv_gamma(hyper.a, hyper.b);
  params.beta.setZero(p);
  params.incl.setZero(p);
  for (int j = 0; j < p; ++j) {
    if (rng.bernoulli(params.pi_incl)) {
      params.incl[j] = 1.0;
      params.beta[j] = rng.normal(0.0, hyper.tau);
    }
  }
  return params;
}

}  // namespace spike_slab

}  // namespace npe::sim::linreg
