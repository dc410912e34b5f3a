#include "npe/families.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "npe/mathutil.hpp"

namespace npe::families {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;

[[noreturn]] void support_error(const HeadSpec& head, double gamma) {
  std::ostringstream os;
  os << "value " << gamma << " outside the support of family " << head.name();
  throw std::domain_error(os.str());
}

bool is_nonneg_integer(double x) {
  return x >= 0.0 && x == std::floor(x);
}

void check_support(const HeadSpec& head, double gamma) {
  switch (head.family) {
    case Family::HetNormal:
      return;
    case Family::LogNormal:
    case Family::GammaShapeRate:
      if (!(gamma > 0.0)) support_error(head, gamma);
      return;
    case Family::BernoulliLogit:
      if (gamma != 0.0 && gamma != 1.0) support_error(head, gamma);
      return;
    case Family::NegBinomialMeanDisp:
      if (!is_nonneg_integer(gamma)) support_error(head, gamma);
      return;
  }
  support_error(head, gamma);
}

double clamp_scale(double raw) { return clamp(std::exp(raw), kScaleMin, kScaleMax); }
bool scale_clamped(double raw) {
  double e = std::exp(raw);
  return e <= kScaleMin || e >= kScaleMax;
}

// Bracketed bisection on the CDF; 64 iterations.
double bisect_quantile(const HeadSpec& head, const HeadParams& params, double q, double lo,
                       double hi) {
  double w = std::max(hi - lo, 1e-12);
  while (cdf(head, params, lo) > q) {
    lo -= w;
    w *= 2.0;
  }
  w = std::max(hi - lo, 1e-12);
  while (cdf(head, params, hi) < q) {
    hi += w;
    w *= 2.0;
  }
  for (int it = 0; it < 64; ++it) {
    double mid = 0.5 * (lo + hi);
    if (cdf(head, params, mid) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Positive-support variant: expands the lower edge toward 0 multiplicatively.
double bisect_quantile_pos(const HeadSpec& head, const HeadParams& params, double q,
                           double center) {
  double lo = center;
  while (lo > 1e-300 && cdf(head, params, lo) > q) lo *= 0.25;
  double hi = center;
  while (cdf(head, params, hi) < q) hi *= 4.0;
  for (int it = 0; it < 64; ++it) {
    double mid = 0.5 * (lo + hi);
    if (cdf(head, params, mid) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

long discrete_quantile(const HeadSpec& head, const HeadParams& params, double q) {
  if (cdf(head, params, 0.0) >= q) return 0;
  long lo = 0, hi = 1;
  while (cdf(head, params, static_cast<double>(hi)) < q) {
    lo = hi;
    hi *= 2;
  }
  while (hi - lo > 1) {
    long mid = lo + (hi - lo) / 2;
    if (cdf(head, params, static_cast<double>(mid)) < q)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

}  // namespace

int HeadSpec::output_dim() const {
  return family == Family::BernoulliLogit ? 1 : 2;
}

bool HeadSpec::discrete() const {
  return family == Family::BernoulliLogit || family == Family::NegBinomialMeanDisp;
}

std::string HeadSpec::name() const {
  switch (family) {
    case Family::HetNormal: return "het_normal";
    case Family::LogNormal: return "log_normal";
    case Family::BernoulliLogit: return "bernoulli_logit";
    case Family::NegBinomialMeanDisp: return "neg_binomial";
    case Family::GammaShapeRate: return "gamma";
  }
  throw std::logic_error("unreachable family");
}

HeadSpec HeadSpec::from_name(const std::string& name) {
  if (name == "het_normal") return {Family::HetNormal};
  if (name == "log_normal") return {Family::LogNormal};
  if (name == "bernoulli_logit") return {Family::BernoulliLogit};
  if (name == "neg_binomial") return {Family::NegBinomialMeanDisp};
  if (name == "gamma") return {Family::GammaShapeRate};
  throw std::invalid_argument("unknown family name: " + name);
}

HeadParams make_params(const HeadSpec& head, const Eigen::VectorXd& raw) {
  if (raw.size() != head.output_dim())
    throw std::invalid_argument("make_params: raw output size does not match family " +
                                head.name());
  HeadParams p;
  p.raw = raw;
  switch (head.family) {
    case Family::HetNormal:
    case Family::LogNormal:
      p.natural.resize(2);
      p.natural[0] = raw[0];
      p.natural[1] = clamp_scale(raw[1]);
      break;
    case Family::BernoulliLogit:
      p.natural.resize(1);
      p.natural[0] = clamp(expit(raw[0]), kProbEps, 1.0 - kProbEps);
      break;
    case Family::NegBinomialMeanDisp:
    case Family::GammaShapeRate:
      p.natural.resize(2);
      p.natural[0] = clamp_scale(raw[0]);
      p.natural[1] = clamp_scale(raw[1]);
      break;
  }
  return p;
}

double log_density(const HeadSpec& head, const HeadParams& params, double gamma) {
  check_support(head, gamma);
  switch (head.family) {
    case Family::HetNormal: {
      double mu = params.natural[0], sd = params.natural[1];
      double z = (gamma - mu) / sd;
      return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
    }
    case Family::LogNormal: {
      double mu = params.natural[0], sd = params.natural[1];
      double z = (std::log(gamma) - mu) / sd;
      return -std::log(gamma) - kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
    }
    case Family::BernoulliLogit: {
      double p = params.natural[0];
      return gamma == 1.0 ? std::log(p) : std::log1p(-p);
    }
    case Family::NegBinomialMeanDisp: {
      double mu = params.natural[0], k = params.natural[1];
      return std::lgamma(gamma + k) - std::lgamma(k) - std::lgamma(gamma + 1.0) +
             k * std::log(k / (k + mu)) + gamma * (std::log(mu) - std::log(k + mu));
    }
    case Family::GammaShapeRate: {
      double shape = params.natural[0], rate = params.natural[1];
      return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(gamma) -
             rate * gamma;
    }
  }
  throw std::logic_error("unreachable family");
}

double cdf(const HeadSpec& head, const HeadParams& params, double gamma) {
  check_support(head, gamma);
  switch (head.family) {
    case Family::HetNormal:
      return norm_cdf((gamma - params.natural[0]) / params.natural[1]);
    case Family::LogNormal:
      return norm_cdf((std::log(gamma) - params.natural[0]) / params.natural[1]);
    case Family::BernoulliLogit:
      return gamma == 0.0 ? 1.0 - params.natural[0] : 1.0;
    case Family::NegBinomialMeanDisp: {
      double mu = params.natural[0], k = params.natural[1];
      // P(G <= g) = I_{k/(k+mu)}(k, g+1)
      return boost::math::ibeta(k, gamma + 1.0, k / (k + mu));
    }
    case Family::GammaShapeRate:
      return boost::math::gamma_p(params.natural[0], params.natural[1] * gamma);
  }
  throw std::logic_error("unreachable family");
}

double quantile(const HeadSpec& head, const HeadParams& params, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("quantile: q must be in (0,1)");
  switch (head.family) {
    case Family::HetNormal: {
      double mu = params.natural[0], sd = params.natural[1];
      return bisect_quantile(head, params, q, mu - sd, mu + sd);
    }
    case Family::LogNormal:
      return bisect_quantile_pos(head, params, q, std::exp(params.natural[0]));
    case Family::GammaShapeRate:
      return bisect_quantile_pos(head, params, q,
                                 params.natural[0] / params.natural[1]);
    case Family::BernoulliLogit:
      return (1.0 - params.natural[0] >= q) ? 0.0 : 1.0;
    case Family::NegBinomialMeanDisp:
      return static_cast<double>(discrete_quantile(head, params, q));
  }
  throw std::logic_error("unreachable family");
}

double sample(const HeadSpec& head, const HeadParams& params, Rng& rng) {
  switch (head.family) {
    case Family::HetNormal:
      return rng.normal(params.natural[0], params.natural[1]);
    case Family::LogNormal:
      return rng.lognormal(params.natural[0], params.natural[1]);
    case Family::BernoulliLogit:
      return rng.bernoulli(params.natural[0]) ? 1.0 : 0.0;
    case Family::NegBinomialMeanDisp:
      return static_cast<double>(
          rng.neg_binomial_mean_disp(params.natural[0], params.natural[1]));
    case Family::GammaShapeRate:
      return rng.gamma(params.natural[0], 1.0 / params.natural[1]);
  }
  throw std::logic_error("unreachable family");
}

Eigen::VectorXd grad_raw(const HeadSpec& head, const HeadParams& params, double gamma) {
  check_support(head, gamma);
  Eigen::VectorXd g(head.output_dim());
  switch (head.family) {
    case Family::HetNormal:
    case Family::LogNormal: {
      double y = head.family == Family::LogNormal ? std::log(gamma) : gamma;
      double mu = params.natural[0], sd = params.natural[1];
      double z = (y - mu) / sd;
      g[0] = z / sd;
      g[1] = scale_clamped(params.raw[1]) ? 0.0 : (z * z - 1.0);
      break;
    }
    case Family::BernoulliLogit: {
      double p_link = expit(params.raw[0]);
      bool clamped = p_link <= kProbEps || p_link >= 1.0 - kProbEps;
      g[0] = clamped ? 0.0 : (gamma - p_link);
      break;
    }
    case Family::NegBinomialMeanDisp: {
      double mu = params.natural[0], k = params.natural[1];
      double dmu = gamma / mu - (gamma + k) / (k + mu);
      double dk = boost::math::digamma(gamma + k) - boost::math::digamma(k) +
                  std::log(k / (k + mu)) + 1.0 - (gamma + k) / (k + mu);
      g[0] = scale_clamped(params.raw[0]) ? 0.0 : dmu * mu;
      g[1] = scale_clamped(params.raw[1]) ? 0.0 : dk * k;
      break;
    }
    case Family::GammaShapeRate: {
      double shape = params.natural[0], rate = params.natural[1];
      double dshape = std::log(rate) - boost::math::digamma(shape) + std::log(gamma);
      double drate = shape / rate - gamma;
      g[0] = scale_clamped(params.raw[0]) ? 0.0 : dshape * shape;
      g[1] = scale_clamped(params.raw[1]) ? 0.0 : drate * rate;
      break;
    }
  }
  return g;
}

}  // namespace npe::families
