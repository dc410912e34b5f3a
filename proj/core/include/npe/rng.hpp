#pragma once

#include <cstdint>
#include <random>

namespace npe {

// Deterministic random number source. Only the mt19937_64 engine (whose
// output sequence is fixed by the standard) is used from <random>; all
// variate transforms are implemented here so that draws are bit-identical
// across platforms and library versions.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Independent stream derived from (seed, stream). Used to make batch
  // generation reproducible regardless of worker count.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  // Uniform on (0,1), never exactly 0.
  double uniform_pos();

  double normal();  // standard normal, Box-Muller
  double normal(double mu, double sd) { return mu + sd * normal(); }
  double exponential(double rate);
  double gamma(double shape, double scale);  // mean shape*scale
  double inv_gamma(double shape, double scale);  // X ~ IG(a,b): 1/X ~ Gamma(a, 1/b)
  double beta(double a, double b);
  double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

  bool bernoulli(double p) { return uniform() < p; }
  long binomial(long n, double p);
  long poisson(double mean);
  // Negative binomial with mean mu and dispersion k (Var = mu + mu^2/k).
  long neg_binomial_mean_disp(double mu, double k);

private:
  std::mt19937_64 eng_;
};

}  // namespace npe
