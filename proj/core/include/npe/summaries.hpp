#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace npe::summaries {

// ---------------------------------------------------------------------------
// Least-squares summaries
// ---------------------------------------------------------------------------

struct LeastSquaresOptions {
  bool include_coef_sd = false;  // append the sd of the coefficient estimates
};

// X is the design without an intercept column (one is prepended). Returns
// (beta0_hat, ..., betap_hat, log sigma_hat[, sd of the beta_hat entries]).
// log sigma_hat is clamped below at log(1e-8) for degenerate fits.
// Throws on rank-deficient designs, naming the offending column.
Eigen::VectorXd least_squares_summary(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                      const LeastSquaresOptions& opts = {});

inline constexpr double kLogResidClamp = -18.420680743952367;  // log(1e-8)

// ---------------------------------------------------------------------------
// Batchwise rank transform to [-1,1]
// ---------------------------------------------------------------------------

// Per-coordinate empirical-CDF map fitted on a training batch. Training
// values land on the grid (2r - N - 1)/N with average ranks for ties;
// out-of-range values clamp to +-1.
class RankToUnit {
public:
  RankToUnit() = default;

  // Each column of the input is one coordinate; rows are training samples.
  static RankToUnit fit(const Eigen::MatrixXd& training);

  double apply(int coord, double value) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& values) const;

  bool fitted() const { return !sorted_.empty(); }
  int dim() const { return static_cast<int>(sorted_.size()); }

  // Persistence inside model bundles.
  void save(std::ostream& os) const;
  static RankToUnit load(std::istream& is);

private:
  std::vector<std::vector<double>> sorted_;  // per-coordinate sorted training values
};

// ---------------------------------------------------------------------------
// Geary's C
// ---------------------------------------------------------------------------

struct GearyResult {
  double c = 1.0;
  bool degenerate = false;  // zero residual variance; c is the sentinel 1
};

// C = (n-1) sum_ij w_ij (x_i - x_j)^2 / (2 W sum_i (x_i - xbar)^2) where
// w_ij indicates membership in the supplied neighbor lists.
GearyResult geary_c(const Eigen::VectorXd& x, const std::vector<std::vector<int>>& neighbors);

// ---------------------------------------------------------------------------
// Principal component summaries
// ---------------------------------------------------------------------------

struct PcaBasis {
  Eigen::VectorXd mean;
  Eigen::MatrixXd loadings;            // d x m, orthonormal columns
  Eigen::VectorXd explained_fraction;  // nonincreasing, length m

  Eigen::VectorXd apply(const Eigen::VectorXd& y) const;  // loadings^T (y - mean)
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& scores) const;

  void save(std::ostream& os) const;
  static PcaBasis load(std::istream& is);
};

// Streamed two-pass mean/covariance accumulation; call add() once per
// dataset, then finalize with a fixed m or a variance target.
class PcaAccumulator {
public:
  explicit PcaAccumulator(Eigen::Index dim);
  void add(const Eigen::VectorXd& y);
  long count() const { return n_; }

  PcaBasis finalize_components(int m) const;
  PcaBasis finalize_variance_target(double target) const;  // smallest m reaching target

private:
  PcaBasis finalize(int m, double target) const;
  long n_ = 0;
  Eigen::VectorXd sum_;
  Eigen::MatrixXd outer_;
};

PcaBasis pca_fit(const Eigen::MatrixXd& rows_are_datasets, int m);
PcaBasis pca_fit_variance_target(const Eigen::MatrixXd& rows_are_datasets, double target);

// ---------------------------------------------------------------------------
// Prior-quantile transform theta' = Phi^{-1}{F(theta)}
// ---------------------------------------------------------------------------

struct PriorDist {
  enum class Kind { Uniform, Exponential, Gamma, LogNormal, Normal };
  Kind kind;
  double a = 0.0, b = 1.0;  // (lo,hi) / (rate,-) / (shape,scale) / (mu,sd) / (mu,sd)

  static PriorDist uniform(double lo, double hi);
  static PriorDist exponential(double rate);
  static PriorDist gamma(double shape, double scale);
  static PriorDist log_normal(double mu, double sd);
  static PriorDist normal(double mu, double sd);

  double cdf(double x) const;
  double quantile(double p) const;
  double log_density(double x) const;
};

struct QuantileTransformResult {
  double value = 0.0;
  bool clamped = false;  // theta at the support boundary; F clamped to [1e-12, 1-1e-12]
};

QuantileTransformResult prior_quantile_transform(double theta, const PriorDist& prior);
double prior_quantile_inverse(double theta_prime, const PriorDist& prior);

}  // namespace npe::summaries
