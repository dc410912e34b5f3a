#include "npe/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace npe {

namespace {

// splitmix64 finalizer, used to decorrelate derived stream seeds.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  return Rng(mix(mix(seed) ^ mix(stream + 0x517cc1b727220a95ULL)));
}

double Rng::uniform() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double Rng::normal() {
  double u1 = uniform_pos();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double Rng::exponential(double rate) {
  if (rate <= 0.0) throw std::domain_error("Rng::exponential: rate must be positive");
  return -std::log(uniform_pos()) / rate;
}

double Rng::gamma(double shape, double scale) {
  if (shape <= 0.0 || scale <= 0.0)
    throw std::domain_error("Rng::gamma: shape and scale must be positive");
  if (shape < 1.0) {
    // Boost shape below 1 via Gamma(a) = Gamma(a+1) * U^{1/a}.
    double u = uniform_pos();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze method.
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = uniform_pos();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return scale * d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

double Rng::inv_gamma(double shape, double scale) {
  return scale / gamma(shape, 1.0);
}

double Rng::beta(double a, double b) {
  double x = gamma(a, 1.0);
  double y = gamma(b, 1.0);
  return x / (x + y);
}

long Rng::binomial(long n, double p) {
  if (n < 0) throw std::domain_error("Rng::binomial: n must be nonnegative");
  if (p <= 0.0 || n == 0) return 0;
  if (p >= 1.0) return n;
  if (p > 0.5) return n - binomial(n, 1.0 - p);
  if (n <= 64) {
    long k = 0;
    for (long i = 0; i < n; ++i) k += bernoulli(p);
    return k;
  }
  // Geometric waiting-time skips; expected cost O(n p + 1).
  double log_q = std::log1p(-p);
  long k = 0;
  long y = 0;
  for (;;) {
    y += static_cast<long>(std::floor(std::log(uniform_pos()) / log_q)) + 1;
    if (y > n) return k;
    ++k;
  }
}

long Rng::poisson(double mean) {
  if (mean < 0.0) throw std::domain_error("Rng::poisson: mean must be nonnegative");
  if (mean == 0.0) return 0;
  if (mean < 30.0) {
    // Multiplication method.
    double limit = std::exp(-mean);
    double prod = uniform_pos();
    long k = 0;
    while (prod > limit) {
      prod *= uniform_pos();
      ++k;
    }
    return k;
  }
  // Hormann's PTRS transformed rejection, valid for mean >= 10.
  double b = 0.931 + 2.53 * std::sqrt(mean);
  double a = -0.059 + 0.02483 * b;
  double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform_pos();
    double us = 0.5 - std::fabs(u);
    double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        -mean + kf * std::log(mean) - std::lgamma(kf + 1.0)) {
      return static_cast<long>(kf);
    }
  }
}

long Rng::neg_binomial_mean_disp(double mu, double k) {
  if (mu < 0.0 || k <= 0.0)
    throw std::domain_error("Rng::neg_binomial_mean_disp: need mu >= 0, k > 0");
  if (mu == 0.0) return 0;
  return poisson(gamma(k, mu / k));
}

}  // namespace npe
