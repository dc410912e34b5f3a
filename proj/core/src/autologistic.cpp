#include "npe/autologistic.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "npe/mathutil.hpp"

namespace npe::sim::autologistic {

Adjacency rook_lattice(int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("rook_lattice: empty lattice");
  Adjacency adj(static_cast<std::size_t>(rows) * cols);
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto& nb = adj[id(r, c)];
      if (r > 0) nb.push_back(id(r - 1, c));
      if (r + 1 < rows) nb.push_back(id(r + 1, c));
      if (c > 0) nb.push_back(id(r, c - 1));
      if (c + 1 < cols) nb.push_back(id(r, c + 1));
    }
  }
  return adj;
}

Adjacency order_neighbors(const Adjacency& adj, int order) {
  if (order < 1) throw std::invalid_argument("order_neighbors: order must be >= 1");
  const int n = static_cast<int>(adj.size());
  Adjacency out(adj.size());
  std::vector<int> dist(adj.size());
  for (int s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::queue<int> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      if (dist[u] == order) continue;
      for (int v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push(v);
          if (dist[v] == order) out[s].push_back(v);
        }
      }
    }
    std::sort(out[s].begin(), out[s].end());
  }
  return out;
}

void check_symmetric(const Adjacency& adj) {
  const int n = static_cast<int>(adj.size());
  for (int i = 0; i < n; ++i) {
    for (int j : adj[i]) {
      if (j < 0 || j >= n)
        throw std::invalid_argument("adjacency: neighbor index out of range");
      const auto& back = adj[static_cast<std::size_t>(j)];
      if (std::find(back.begin(), back.end(), i) == back.end())
        throw std::invalid_argument("adjacency is not symmetric");
    }
  }
}

Params sample_prior(int p, Rng& rng) {
  Params params;
  params.beta.resize(p);
  for (int j = 0; j < p; ++j) params.beta[j] = rng.normal();
  params.log_phi = rng.normal();
  return params;
}

Eigen::VectorXi simulate(const Eigen::VectorXd& beta, double phi, const Eigen::MatrixXd& X,
                         const Adjacency& adj, int sweeps, Rng& rng) {
  check_symmetric(adj);
  const auto n = static_cast<Eigen::Index>(adj.size());
  if (X.rows() != n || X.cols() != beta.size())
    throw std::invalid_argument("autologistic::simulate: design shape mismatch");

  Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd kappa(n);
  for (Eigen::Index i = 0; i < n; ++i) kappa[i] = expit(eta[i]);

  Eigen::VectorXi y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.bernoulli(kappa[i]) ? 1 : 0;

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double dep = 0.0;
      for (int j : adj[static_cast<std::size_t>(i)]) dep += y[j] - kappa[j];
      y[i] = rng.bernoulli(expit(eta[i] + phi * dep)) ? 1 : 0;
    }
  }
  return y;
}

Eigen::MatrixXd design_with_intercept(int n, int p, Rng& rng) {
  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  for (int i = 0; i < n; ++i)
    for (int j = 1; j < p; ++j) x(i, j) = rng.normal();
  return x;
}

}  // namespace npe::sim::autologistic
