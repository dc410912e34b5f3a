#include "npe/sir.hpp"

#include <cmath>
#include <stdexcept>

#include "npe/autologistic.hpp"
#include "npe/mathutil.hpp"

namespace npe::sim::sir {

namespace {

struct Derivs {
  double ds, di, dr;
};

Derivs sir_rhs(double s, double i, double lambda, double mu, double m) {
  double flow = lambda * s * i / m;
  return {-flow, flow - mu * i, mu * i};
}

}  // namespace

NonspatialResult simulate_nonspatial(const NonspatialParams& params, Rng& rng,
                                     double population, int days, int steps_per_day) {
  if (params.lambda <= 0.0 || params.mu <= 0.0 || params.psi <= 0.0)
    throw std::domain_error("sir nonspatial: lambda, mu, psi must be positive");
  if (params.i0 < 1.0) throw std::domain_error("sir nonspatial: need I0 >= 1");
  if (days < 1 || steps_per_day < 1)
    throw std::invalid_argument("sir nonspatial: days and steps_per_day must be >= 1");

  NonspatialResult result;
  result.latent_s.resize(days);
  result.latent_i.resize(days);
  result.latent_r.resize(days);
  result.observed.resize(days);

  const double m = population;
  double s = m - params.i0, i = params.i0, r = 0.0;
  const double h = 1.0 / static_cast<double>(steps_per_day);

  for (int day = 0; day < days; ++day) {
    result.latent_s[day] = s;
    result.latent_i[day] = i;
    result.latent_r[day] = r;
    result.observed[day] = static_cast<double>(
        rng.neg_binomial_mean_disp(std::max(i, 0.0), params.psi));
    if (day + 1 == days) break;
    for (int step = 0; step < steps_per_day; ++step) {
      Derivs k1 = sir_rhs(s, i, params.lambda, params.mu, m);
      Derivs k2 = sir_rhs(s + 0.5 * h * k1.ds, i + 0.5 * h * k1.di, params.lambda, params.mu, m);
      Derivs k3 = sir_rhs(s + 0.5 * h * k2.ds, i + 0.5 * h * k2.di, params.lambda, params.mu, m);
      Derivs k4 = sir_rhs(s + h * k3.ds, i + h * k3.di, params.lambda, params.mu, m);
      s += h / 6.0 * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds);
      i += h / 6.0 * (k1.di + 2.0 * k2.di + 2.0 * k3.di + k4.di);
      r += h / 6.0 * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr);
    }
  }
  return result;
}

NonspatialParams sample_prior_nonspatial(Rng& rng) {
  NonspatialParams params;
  params.lambda = rng.lognormal(std::log(0.4), 0.5);
  params.mu = 0.1;
  params.i0 = rng.gamma(2.0, 20.0);
  params.psi = rng.exponential(1.0 / 5.0);
  return params;
}

Grid default_grid() {
  Grid grid;
  grid.rows = 10;
  grid.cols = 10;
  grid.nbrs = autologistic::rook_lattice(grid.rows, grid.cols);
  grid.pop = Eigen::VectorXi::Constant(grid.rows * grid.cols, 10);
  grid.seed_cell = (7 - 1) * grid.cols + (3 - 1);
  grid.seed_count = 10;
  return grid;
}

SpatialParams sample_prior_spatial(Rng& rng) {
  SpatialParams params;
  params.beta = rng.uniform(0.1, 0.9);
  params.phi = rng.uniform(0.1, 0.9);
  params.eta = rng.uniform(0.1, 0.9);
  return params;
}

namespace {

struct SpatialState {
  Eigen::VectorXi x, y, z;  // susceptible, infected, recovered per region
  long total_infected = 0;
};

// One tau-leap of length dt. When any per-step probability would exceed
// 0.5 the step is replaced by two recursive half steps.
void leap(SpatialState& state, const SpatialParams& params, const SpatialConfig& config,
          const Eigen::VectorXd& beta_by_region, double dt, Rng& rng, bool* halved) {
  const auto r = static_cast<int>(config.grid.nbrs.size());
  Eigen::VectorXd p_inf(r);
  double p_rec = params.eta * dt;
  double p_max = p_rec;
  for (int i = 0; i < r; ++i) {
    double pressure = beta_by_region[i] * state.y[i];
    for (int j : config.grid.nbrs[static_cast<std::size_t>(i)]) pressure += params.phi * state.y[j];
    p_inf[i] = dt * pressure / static_cast<double>(config.grid.pop[i]);
    p_max = std::max(p_max, p_inf[i]);
  }
  if (p_max > 0.5) {
    *halved = true;
    leap(state, params, config, beta_by_region, 0.5 * dt, rng, halved);
    leap(state, params, config, beta_by_region, 0.5 * dt, rng, halved);
    return;
  }
  long total = 0;
  for (int i = 0; i < r; ++i) {
    long new_inf = rng.binomial(state.x[i], std::min(1.0, p_inf[i]));
    long new_rec = rng.binomial(state.y[i], std::min(1.0, p_rec));
    state.x[i] -= static_cast<int>(new_inf);
    state.y[i] += static_cast<int>(new_inf - new_rec);
    state.z[i] += static_cast<int>(new_rec);
    total += state.y[i];
  }
  state.total_infected = total;
}

}  // namespace

SpatialResult simulate_spatial(const SpatialParams& params, const SpatialConfig& config,
                               Rng& rng) {
  const auto r = static_cast<int>(config.grid.nbrs.size());
  if (config.grid.pop.size() != r)
    throw std::invalid_argument("sir spatial: population vector does not match grid");
  if (config.n_obs < 2) throw std::invalid_argument("sir spatial: need at least 2 obs times");
  if (config.dt <= 0.0 || config.t_end <= 0.0)
    throw std::invalid_argument("sir spatial: dt and t_end must be positive");

  const bool covariate_mode = config.log_pop_density.size() > 0;
  if (covariate_mode && config.log_pop_density.size() != r)
    throw std::invalid_argument("sir spatial: covariate vector does not match grid");
  Eigen::VectorXd beta_by_region(r);
  for (int i = 0; i < r; ++i)
    beta_by_region[i] = covariate_mode
                            ? std::exp(params.beta0 + config.log_pop_density[i] * params.beta1)
                            : params.beta;

  SpatialState state;
  state.x = config.grid.pop;
  state.y = Eigen::VectorXi::Zero(r);
  state.z = Eigen::VectorXi::Zero(r);
  int seeded = std::min(config.grid.seed_count, config.grid.pop[config.grid.seed_cell]);
  state.x[config.grid.seed_cell] -= seeded;
  state.y[config.grid.seed_cell] = seeded;
  state.total_infected = seeded;

  SpatialResult result;
  result.obs_y.setZero(config.n_obs, r);
  result.obs_z.setZero(config.n_obs, r);
  result.latent_y.setZero(config.n_obs, r);
  result.latent_z.setZero(config.n_obs, r);

  const double obs_gap = config.t_end / static_cast<double>(config.n_obs - 1);
  int next_obs = 0;
  bool count_recorded = false;
  const long n_steps = static_cast<long>(std::llround(config.t_end / config.dt));

  auto record_obs = [&](int k) {
    for (int i = 0; i < r; ++i) {
      result.latent_y(k, i) = state.y[i];
      result.latent_z(k, i) = state.z[i];
      result.obs_y(k, i) = static_cast<double>(rng.binomial(state.y[i], config.p_report));
      result.obs_z(k, i) = static_cast<double>(rng.binomial(state.z[i], config.p_report));
    }
  };

  for (long step = 0; step <= n_steps; ++step) {
    double t = static_cast<double>(step) * config.dt;
    while (next_obs < config.n_obs &&
           t >= static_cast<double>(next_obs) * obs_gap - 1e-9) {
      record_obs(next_obs);
      ++next_obs;
    }
    if (!count_recorded && t >= config.t_count - 1e-9) {
      result.infected_at_count_time = state.total_infected;
      count_recorded = true;
    }
    if (step == n_steps) break;
    if (state.total_infected == 0) {
      // Dynamics are frozen; fast-forward the remaining observations.
      continue;
    }
    leap(state, params, config, beta_by_region, config.dt, rng, &result.dt_was_halved);
  }
  if (!count_recorded) result.infected_at_count_time = state.total_infected;
  return result;
}

Eigen::VectorXd stack_responses(const SpatialResult& result) {
  const auto n_obs = result.obs_y.rows();
  const auto r = result.obs_y.cols();
  Eigen::VectorXd out(2 * n_obs * r);
  Eigen::Index k = 0;
  for (Eigen::Index t = 0; t < n_obs; ++t)
    for (Eigen::Index i = 0; i < r; ++i) out[k++] = result.obs_y(t, i);
  for (Eigen::Index t = 0; t < n_obs; ++t)
    for (Eigen::Index i = 0; i < r; ++i) out[k++] = result.obs_z(t, i);
  return out;
}

}  // namespace npe::sim::sir
