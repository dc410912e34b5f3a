#pragma once

#include <Eigen/Core>

#include <string>

#include "npe/rng.hpp"

namespace npe::families {

// Parametric posterior families whose hyperparameters are produced by a
// network as unconstrained reals ("raw" outputs) and mapped to valid
// natural parameters through fixed link functions.
enum class Family {
  HetNormal,            // raw = (mu, log sigma)
  LogNormal,            // raw = (mu, log sigma) of log(gamma)
  BernoulliLogit,       // raw = (logit p)
  NegBinomialMeanDisp,  // raw = (log mu, log k); Var = mu + mu^2/k
  GammaShapeRate,       // raw = (log shape, log rate)
};

// Link clamps. Links are total on R^output_dim: every raw vector maps to
// valid natural parameters.
inline constexpr double kScaleMin = 1e-6;
inline constexpr double kScaleMax = 1e6;
inline constexpr double kProbEps = 1e-7;

struct HeadSpec {
  Family family;

  int output_dim() const;
  std::string name() const;  // stable lowercase string, used in files
  static HeadSpec from_name(const std::string& name);
  bool discrete() const;
};

struct HeadParams {
  Eigen::VectorXd raw;      // unconstrained network outputs
  Eigen::VectorXd natural;  // constrained parameters after links
};

HeadParams make_params(const HeadSpec& head, const Eigen::VectorXd& raw);

// Exact log pdf/pmf at gamma. Throws std::domain_error when gamma is
// outside the family support.
double log_density(const HeadSpec& head, const HeadParams& params, double gamma);

// P(Gamma <= gamma); for discrete families the usual right-continuous CDF.
double cdf(const HeadSpec& head, const HeadParams& params, double gamma);

// Continuous families: inverse CDF by bracketed bisection (64 iterations).
// Discrete families: smallest gamma with cdf >= q. q must be in (0,1).
double quantile(const HeadSpec& head, const HeadParams& params, double q);

double sample(const HeadSpec& head, const HeadParams& params, Rng& rng);

// d log_density / d raw, used by backpropagation. Components whose link
// clamp is active get derivative zero.
Eigen::VectorXd grad_raw(const HeadSpec& head, const HeadParams& params, double gamma);

}  // namespace npe::families
