#include "npe/summaries.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/distributions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <stdexcept>

#include "npe/mathutil.hpp"

namespace npe::summaries {

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

Eigen::VectorXd least_squares_summary(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                      const LeastSquaresOptions& opts) {
  const auto n = y.size();
  const auto p = X.cols();
  if (X.rows() != n) throw std::invalid_argument("least_squares_summary: y/X size mismatch");
  if (n < p + 2) throw std::invalid_argument("least_squares_summary: need n >= p + 2");

  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = X;

  Eigen::MatrixXd xtx = design.transpose() * design;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  // Rank check: a (near) zero pivot flags a linearly dependent column.
  Eigen::VectorXd pivots = ldlt.vectorD();
  double scale = xtx.diagonal().maxCoeff();
  for (Eigen::Index j = 0; j < pivots.size(); ++j) {
    if (pivots[j] <= 1e-12 * scale) {
      throw std::invalid_argument("least_squares_summary: design is rank deficient at column " +
                                  std::to_string(ldlt.transpositionsP().indices()[j]));
    }
  }
  Eigen::VectorXd coef = ldlt.solve(design.transpose() * y);
  double rss = (y - design * coef).squaredNorm();
  double dof = static_cast<double>(n - (p + 1));
  double resid_sd = dof > 0.0 ? std::sqrt(rss / dof) : 0.0;
  double log_resid = resid_sd > 0.0 ? std::max(std::log(resid_sd), kLogResidClamp)
                                    : kLogResidClamp;

  Eigen::VectorXd out(p + 2 + (opts.include_coef_sd ? 1 : 0));
  out.head(p + 1) = coef;
  out[p + 1] = log_resid;
  if (opts.include_coef_sd) {
    double mean = coef.mean();
    double var = (coef.array() - mean).square().sum() /
                 std::max<double>(1.0, static_cast<double>(coef.size() - 1));
    out[p + 2] = std::sqrt(var);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rank transform
// ---------------------------------------------------------------------------

RankToUnit RankToUnit::fit(const Eigen::MatrixXd& training) {
  if (training.rows() < 1) throw std::invalid_argument("RankToUnit::fit: empty batch");
  RankToUnit r;
  r.sorted_.resize(static_cast<std::size_t>(training.cols()));
  for (Eigen::Index c = 0; c < training.cols(); ++c) {
    auto& v = r.sorted_[static_cast<std::size_t>(c)];
    v.resize(static_cast<std::size_t>(training.rows()));
    for (Eigen::Index i = 0; i < training.rows(); ++i)
      v[static_cast<std::size_t>(i)] = training(i, c);
    std::sort(v.begin(), v.end());
  }
  return r;
}

double RankToUnit::apply(int coord, double value) const {
  if (!fitted()) throw std::logic_error("RankToUnit: applied before fitting");
  const auto& v = sorted_.at(static_cast<std::size_t>(coord));
  const double n = static_cast<double>(v.size());
  auto lo = std::lower_bound(v.begin(), v.end(), value);
  auto hi = std::upper_bound(v.begin(), v.end(), value);
  double below = static_cast<double>(lo - v.begin());
  double ties = static_cast<double>(hi - lo);
  double rank = below + 0.5 * (ties + 1.0);  // average rank over ties
  double t = (2.0 * rank - n - 1.0) / n;
  return clamp(t, -1.0, 1.0);
}

Eigen::VectorXd RankToUnit::apply(const Eigen::VectorXd& values) const {
  if (values.size() != dim())
    throw std::invalid_argument("RankToUnit::apply: dimension mismatch");
  Eigen::VectorXd out(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i)
    out[i] = apply(static_cast<int>(i), values[i]);
  return out;
}

namespace {
std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}
}  // namespace

void RankToUnit::save(std::ostream& os) const {
  os << "rank-table v1 " << sorted_.size() << "\n";
  for (const auto& v : sorted_) {
    os << v.size();
    for (double x : v) os << " " << fmt17(x);
    os << "\n";
  }
}

RankToUnit RankToUnit::load(std::istream& is) {
  std::string magic, version;
  std::size_t dims;
  is >> magic >> version >> dims;
  if (magic != "rank-table" || version != "v1")
    throw std::runtime_error("rank table: bad header");
  RankToUnit r;
  r.sorted_.resize(dims);
  for (auto& v : r.sorted_) {
    std::size_t len;
    is >> len;
    v.resize(len);
    for (auto& x : v) is >> x;
  }
  if (!is) throw std::runtime_error("rank table: truncated");
  return r;
}

// ---------------------------------------------------------------------------
// Geary's C
// ---------------------------------------------------------------------------

GearyResult geary_c(const Eigen::VectorXd& x, const std::vector<std::vector<int>>& neighbors) {
  const auto n = x.size();
  if (static_cast<std::size_t>(n) != neighbors.size())
    throw std::invalid_argument("geary_c: value/neighbor size mismatch");
  double mean = x.mean();
  double denom_var = (x.array() - mean).square().sum();
  if (denom_var <= 0.0) return {1.0, true};

  double num = 0.0;
  double w_total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j : neighbors[static_cast<std::size_t>(i)]) {
      double d = x[i] - x[j];
      num += d * d;
      w_total += 1.0;
    }
  }
  if (w_total == 0.0) return {1.0, true};
  double c = (static_cast<double>(n) - 1.0) * num / (2.0 * w_total * denom_var);
  return {c, false};
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

Eigen::VectorXd PcaBasis::apply(const Eigen::VectorXd& y) const {
  if (y.size() != mean.size()) throw std::invalid_argument("PcaBasis::apply: dim mismatch");
  return loadings.transpose() * (y - mean);
}

Eigen::VectorXd PcaBasis::reconstruct(const Eigen::VectorXd& scores) const {
  return mean + loadings * scores;
}

void PcaBasis::save(std::ostream& os) const {
  os << "pca-basis v1 " << mean.size() << " " << loadings.cols() << "\n";
  for (Eigen::Index i = 0; i < mean.size(); ++i) os << (i ? " " : "") << fmt17(mean[i]);
  os << "\n";
  for (Eigen::Index c = 0; c < loadings.cols(); ++c) {
    for (Eigen::Index r = 0; r < loadings.rows(); ++r)
      os << (r ? " " : "") << fmt17(loadings(r, c));
    os << "\n";
  }
  for (Eigen::Index i = 0; i < explained_fraction.size(); ++i)
    os << (i ? " " : "") << fmt17(explained_fraction[i]);
  os << "\n";
}

PcaBasis PcaBasis::load(std::istream& is) {
  std::string magic, version;
  Eigen::Index d, m;
  is >> magic >> version >> d >> m;
  if (magic != "pca-basis" || version != "v1") throw std::runtime_error("pca basis: bad header");
  PcaBasis basis;
  basis.mean.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) is >> basis.mean[i];
  basis.loadings.resize(d, m);
  for (Eigen::Index c = 0; c < m; ++c)
    for (Eigen::Index r = 0; r < d; ++r) is >> basis.loadings(r, c);
  basis.explained_fraction.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) is >> basis.explained_fraction[i];
  if (!is) throw std::runtime_error("pca basis: truncated");
  return basis;
}

PcaAccumulator::PcaAccumulator(Eigen::Index dim)
    : sum_(Eigen::VectorXd::Zero(dim)), outer_(Eigen::MatrixXd::Zero(dim, dim)) {}

void PcaAccumulator::add(const Eigen::VectorXd& y) {
  if (y.size() != sum_.size()) throw std::invalid_argument("PcaAccumulator::add: dim mismatch");
  sum_ += y;
  outer_.selfadjointView<Eigen::Lower>().rankUpdate(y);
  ++n_;
}

PcaBasis PcaAccumulator::finalize(int m, double target) const {
  if (n_ < 2) throw std::invalid_argument("pca: need at least 2 datasets");
  const auto d = sum_.size();
  Eigen::VectorXd mean = sum_ / static_cast<double>(n_);
  Eigen::MatrixXd cov = Eigen::MatrixXd(outer_.selfadjointView<Eigen::Lower>());
  cov -= static_cast<double>(n_) * mean * mean.transpose();
  cov /= static_cast<double>(n_ - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");
  // Eigenvalues come back ascending; flip to descending.
  Eigen::VectorXd values = eig.eigenvalues().reverse();
  values = values.cwiseMax(0.0);
  double total = values.sum();
  if (total <= 0.0) throw std::invalid_argument("pca: zero total variance");

  if (m <= 0) {
    double cum = 0.0;
    m = static_cast<int>(d);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      cum += values[i];
      if (cum / total >= target) {
        m = static_cast<int>(i + 1);
        break;
      }
    }
  }
  if (m > d || m > n_) throw std::invalid_argument("pca: m exceeds rank");

  PcaBasis basis;
  basis.mean = std::move(mean);
  basis.loadings.resize(d, m);
  basis.explained_fraction.resize(m);
  for (int k = 0; k < m; ++k) {
    basis.loadings.col(k) = eig.eigenvectors().col(d - 1 - k);
    basis.explained_fraction[k] = values[k] / total;
  }
  return basis;
}

PcaBasis PcaAccumulator::finalize_components(int m) const {
  if (m < 1) throw std::invalid_argument("pca: m must be >= 1");
  return finalize(m, 0.0);
}

PcaBasis PcaAccumulator::finalize_variance_target(double target) const {
  if (!(target > 0.0 && target <= 1.0))
    throw std::invalid_argument("pca: variance target must be in (0,1]");
  return finalize(0, target);
}

PcaBasis pca_fit(const Eigen::MatrixXd& rows_are_datasets, int m) {
  PcaAccumulator acc(rows_are_datasets.cols());
  for (Eigen::Index i = 0; i < rows_are_datasets.rows(); ++i)
    acc.add(rows_are_datasets.row(i).transpose());
  return acc.finalize_components(m);
}

PcaBasis pca_fit_variance_target(const Eigen::MatrixXd& rows_are_datasets, double target) {
  PcaAccumulator acc(rows_are_datasets.cols());
  for (Eigen::Index i = 0; i < rows_are_datasets.rows(); ++i)
    acc.add(rows_are_datasets.row(i).transpose());
  return acc.finalize_variance_target(target);
}

// ---------------------------------------------------------------------------
// Prior-quantile transform
// ---------------------------------------------------------------------------

PriorDist PriorDist::uniform(double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("PriorDist::uniform: need hi > lo");
  return {Kind::Uniform, lo, hi};
}
PriorDist PriorDist::exponential(double rate) {
  if (rate <= 0.0) throw std::invalid_argument("PriorDist::exponential: rate must be > 0");
  return {Kind::Exponential, rate, 0.0};
}
PriorDist PriorDist::gamma(double shape, double scale) {
  if (shape <= 0.0 || scale <= 0.0)
    throw std::invalid_argument("PriorDist::gamma: shape/scale must be > 0");
  return {Kind::Gamma, shape, scale};
}
PriorDist PriorDist::log_normal(double mu, double sd) {
  if (sd <= 0.0) throw std::invalid_argument("PriorDist::log_normal: sd must be > 0");
  return {Kind::LogNormal, mu, sd};
}
PriorDist PriorDist::normal(double mu, double sd) {
  if (sd <= 0.0) throw std::invalid_argument("PriorDist::normal: sd must be > 0");
  return {Kind::Normal, mu, sd};
}

double PriorDist::cdf(double x) const {
  switch (kind) {
    case Kind::Uniform:
      return clamp((x - a) / (b - a), 0.0, 1.0);
    case Kind::Exponential:
      return x <= 0.0 ? 0.0 : -std::expm1(-a * x);
    case Kind::Gamma: {
      if (x <= 0.0) return 0.0;
      boost::math::gamma_distribution<double> g(a, b);
      return boost::math::cdf(g, x);
    }
    case Kind::LogNormal:
      return x <= 0.0 ? 0.0 : norm_cdf((std::log(x) - a) / b);
    case Kind::Normal:
      return norm_cdf((x - a) / b);
  }
  throw std::logic_error("unreachable prior kind");
}

double PriorDist::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("PriorDist::quantile: p in (0,1)");
  switch (kind) {
    case Kind::Uniform:
      return a + p * (b - a);
    case Kind::Exponential:
      return -std::log1p(-p) / a;
    case Kind::Gamma: {
      boost::math::gamma_distribution<double> g(a, b);
      return boost::math::quantile(g, p);
    }
    case Kind::LogNormal:
      return std::exp(a + b * norm_quantile(p));
    case Kind::Normal:
      return a + b * norm_quantile(p);
  }
  throw std::logic_error("unreachable prior kind");
}

double PriorDist::log_density(double x) const {
  switch (kind) {
    case Kind::Uniform:
      return (x >= a && x <= b) ? -std::log(b - a)
                                : -std::numeric_limits<double>::infinity();
    case Kind::Exponential:
      return x < 0.0 ? -std::numeric_limits<double>::infinity() : std::log(a) - a * x;
    case Kind::Gamma:
      if (x <= 0.0) return -std::numeric_limits<double>::infinity();
      return -std::lgamma(a) - a * std::log(b) + (a - 1.0) * std::log(x) - x / b;
    case Kind::LogNormal: {
      if (x <= 0.0) return -std::numeric_limits<double>::infinity();
      double z = (std::log(x) - a) / b;
      return -std::log(x) - std::log(b) - 0.91893853320467274178 - 0.5 * z * z;
    }
    case Kind::Normal: {
      double z = (x - a) / b;
      return -std::log(b) - 0.91893853320467274178 - 0.5 * z * z;
    }
  }
  throw std::logic_error("unreachable prior kind");
}

QuantileTransformResult prior_quantile_transform(double theta, const PriorDist& prior) {
  double f = prior.cdf(theta);
  bool clamped = false;
  if (f < 1e-12) {
    f = 1e-12;
    clamped = true;
  } else if (f > 1.0 - 1e-12) {
    f = 1.0 - 1e-12;
    clamped = true;
  }
  return {norm_quantile(f), clamped};
}

double prior_quantile_inverse(double theta_prime, const PriorDist& prior) {
  return prior.quantile(clamp(norm_cdf(theta_prime), 1e-12, 1.0 - 1e-12));
}

}  // namespace npe::summaries
