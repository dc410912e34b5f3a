#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

namespace npe {

inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// Standard normal CDF and quantile.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double norm_quantile(double p);

// Two-sided Kolmogorov-Smirnov statistic of values (assumed in [0,1])
// against Uniform(0,1).
double ks_uniform(std::vector<double> values);

// Deterministic index-parallel loop: body(i) for i in [0,n). Results must
// be written to per-index slots by the caller; chunk assignment does not
// affect output.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

}  // namespace npe
